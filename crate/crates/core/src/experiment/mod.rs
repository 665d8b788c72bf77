//! Scenario configuration, orchestration of sweeps over the pulse and
//! detector layers, reduction and file output.

mod config;
mod confocal;
mod output;
mod plot;
mod run;
mod setup;
mod validate;

pub use config::{
    AnalysisSection, AxisRange, AxisSpec, ConfocalSection, DetectorSection, EchoProjectionConfig,
    EchoReferenceConfig, ElectrodeRect, EnsembleConfig, LaserConfig, NoiseSection, PhysicsConfig,
    Preset, Provenance, ReadoutMode, Scenario, ScenarioConfig, SweepSection, TimingSection,
};
pub use confocal::{pixel_relative_variance, synthesize_confocal, ConfocalImage, ElectrodeMask};
pub use output::{manifest_config, SWEEP_CSV_HEADER};
pub use run::{
    contrast_vs_wavelength, run_scenario, ContrastEstimate, FitRecord, PointResult, RawTraces,
    Readout, RunOptions, RunReport, WavelengthContrast,
};
pub use setup::{cw_state, CwState, Instrument};
pub use validate::{validate_config, Violation};

use crate::analysis::AnalysisError;
use crate::detector::DetectorError;
use crate::optics::OpticsError;
use crate::pulse::PulseError;
use crate::spin::SpinError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExperimentError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("{0}")]
    Io(String),
    #[error("invalid config:\n{}", .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Pulse(#[from] PulseError),
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error(transparent)]
    Spin(#[from] SpinError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
}

impl From<std::io::Error> for ExperimentError {
    fn from(e: std::io::Error) -> Self {
        ExperimentError::Io(e.to_string())
    }
}
