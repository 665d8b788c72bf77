//! Reduced ten-level model of the V2 silicon vacancy: level basis, rotating
//! frame Hamiltonian, dissipators and master-equation integration.

mod density;
mod dissipators;
mod evolve;
mod hamiltonian;
mod levels;
mod lindblad;
mod matrix;

pub use density::{DensityMatrix, HERMITICITY_TOL, POSITIVITY_TOL, TRACE_TOL};
pub use dissipators::{DissipatorSet, Jump};
pub use evolve::{
    evolve, steady_state, steady_state_with, Rk4Stepper, SteadyStateOptions, MAX_STEP_TRACE_DRIFT,
};
pub use hamiltonian::{
    build_rotating_hamiltonian, drive_coupling, ground_transition_frequencies,
    rotating_hamiltonian_signed, SpinHamiltonianParams, Transition, GAMMA_E_HZ_PER_T,
};
pub use levels::{Level, LevelBasis, N_LEVELS};
pub use lindblad::{lindblad_derivative, Generator};
pub use matrix::LevelMatrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpinError {
    #[error("unknown rotating-frame transition `{0}` (expected `plus` or `minus`)")]
    UnknownFrame(String),
    #[error("invalid spin parameters: {0}")]
    InvalidParams(String),
    #[error("invalid rate set: {0}")]
    InvalidRates(String),
    #[error("integration step {dt:e} s drifted the trace by {drift:e}")]
    StepTooLarge { dt: f64, drift: f64 },
    #[error("no steady state reached after {time:e} s")]
    NoConvergence { time: f64 },
    #[error("ionization without recombination leaves the charge cycle open")]
    OpenCycle,
    #[error("density matrix invariant violated: {0}")]
    Invariant(String),
}
