//! Data reduction: envelope lock-in contrast, damped least-squares fits,
//! FFT spectra and ensemble size estimates.

mod fit;
mod lm;
mod lockin;
mod spectrum;
mod spins;

pub use fit::{
    fit_damped_sine, fit_exp_decay, fit_multi_lorentzian, FitParam, FitResult, LorentzianInit,
    ModelKind, FIT_CSV_HEADER,
};
pub use lm::{levenberg_marquardt, linear_lstsq, solve_linear, LmOptions, LmOutcome};
pub use lockin::{
    contrast_percent, lockin_contrast, ContrastResult, LockinAccumulator, DEFAULT_SKIP_FRACTION,
};
pub use spectrum::{fft_spectrum, hann, windowed, Spectrum};
pub use spins::estimate_spin_count;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("trace has no {0} samples inside the integration window")]
    MissingPhase(&'static str),
    #[error("reference signal {0} is not positive")]
    NonPositiveReference(f64),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("fit did not converge after {n_iter} iterations")]
    NoConvergence { n_iter: usize },
    #[error("no oscillation distinguishable from DC")]
    NoOscillation,
    #[error("sampling is not uniform at index {index}")]
    NonUniformSampling { index: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
