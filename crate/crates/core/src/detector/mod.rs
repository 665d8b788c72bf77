//! Detector chain: transimpedance amplifier, shot noise, APD gating and
//! DAQ sampling.

mod apd;
mod tia;
mod trace;

pub use apd::{apd_counts, daq_sample, integrate_rate, poisson_count, ApdConfig, RateSegment};
pub use tia::{
    laser_factor, shot_noise, shot_noise_poisson, shot_noise_sigma, tia_filter, TiaConfig, TiaState,
};
pub use trace::{SampleSink, TraceKind, TraceRecord, TraceSample};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DetectorError {
    #[error("invalid detector config: {0}")]
    InvalidConfig(String),
    #[error("filter step {dt:e} s exceeds {max:e} s")]
    DtTooCoarse { dt: f64, max: f64 },
    #[error("trace timestamps not increasing at t = {0:e} s")]
    NonMonotonic(f64),
    #[error("trace parse error: {0}")]
    Parse(String),
}

/// Noise switches for a simulated acquisition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// Master switch; when false every other field is ignored.
    pub enabled: bool,
    /// Shot and input noise on the photocurrent.
    pub shot_noise_on: bool,
    /// Poisson statistics on APD counts.
    pub counting_noise_on: bool,
    /// Relative rms of the per-repetition laser power factor.
    pub laser_rel_fluctuation: f64,
    /// Count individual electrons instead of the Gaussian approximation.
    pub poisson_electrons: bool,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            shot_noise_on: true,
            counting_noise_on: true,
            laser_rel_fluctuation: 0.05,
            poisson_electrons: false,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn off() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DetectorError> {
        if !(0.0..1.0).contains(&self.laser_rel_fluctuation) {
            return Err(DetectorError::InvalidConfig(
                "laser_rel_fluctuation must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }

    pub fn shot(&self) -> bool {
        self.enabled && self.shot_noise_on
    }

    pub fn counting(&self) -> bool {
        self.enabled && self.counting_noise_on
    }

    pub fn laser_rel(&self) -> f64 {
        if self.enabled {
            self.laser_rel_fluctuation
        } else {
            0.0
        }
    }
}
