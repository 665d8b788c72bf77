//! Pulse-sequence compilation and segment-wise simulation of the
//! instrument timeline.

mod compile;
mod run;
mod sequence;
mod timing;

pub use compile::{compile_hahn, compile_pdmr, compile_rabi};
pub use run::{
    acquire, run_sequence, run_sequence_into, simulate_profiles, DetectorBundle, HalfProfile,
    PhysicsBundle, RepProfile, SequenceProfiles, SequenceTraces,
};
pub use sequence::{Channel, PulseSequence, RepTemplate, Segment};
pub use timing::{EchoProjection, EchoReference, MicrowaveConfig, TimingConfig};

use crate::detector::DetectorError;
use crate::spin::SpinError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PulseError {
    #[error(
        "microwave block needs {needed_ns} ns including guard but only {available_ns} ns are free"
    )]
    GuardViolation { needed_ns: u64, available_ns: u64 },
    #[error("half envelope of {half_envelope_ns} ns is not a whole number of {rep_period_ns} ns repetitions")]
    NonIntegerReps {
        half_envelope_ns: f64,
        rep_period_ns: u64,
    },
    #[error("invalid timing: {0}")]
    InvalidTiming(String),
    #[error(transparent)]
    Spin(#[from] SpinError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
}
