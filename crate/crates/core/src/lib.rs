//! Digital twin of pulsed photoelectric (PDMR) and optical (ODMR) spin
//! readout of V2 silicon-vacancy ensembles in thin-film silicon carbide.
//!
//! The crate is layered bottom-up:
//!
//! - [`spin`]: ten-level density-matrix model and RK4 master-equation integration
//! - [`optics`]: laser to rate conversion, photocurrent and photon observables
//! - [`pulse`]: pulse-sequence compilation and segment-wise simulation
//! - [`detector`]: TIA, shot noise, APD counting and DAQ sampling
//! - [`analysis`]: lock-in contrast, least-squares fits, spectra, spin counting
//! - [`experiment`]: scenario configuration, orchestration and CSV output
//!
//! Numerical kernels are generic over [`Real`] (`f32`/`f64`); the aliases
//! below fix the double-precision types used by the instrument layers.

// range checks are written as `!(x > 0.0)` so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod detector;
pub mod experiment;
pub mod optics;
pub mod pulse;
pub mod scalar;
pub mod spin;

pub use scalar::Real;

pub type DensityMatrixF64 = spin::DensityMatrix<f64>;
pub type DensityMatrixF32 = spin::DensityMatrix<f32>;
pub type LevelMatrixF64 = spin::LevelMatrix<f64>;
pub type DissipatorSetF64 = spin::DissipatorSet<f64>;
pub type FitResultF64 = analysis::FitResult<f64>;
pub type SpectrumF64 = analysis::Spectrum<f64>;
