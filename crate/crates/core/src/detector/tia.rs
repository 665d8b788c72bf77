use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use super::DetectorError;
use crate::optics::ELEMENTARY_CHARGE;

/// Single-pole transimpedance amplifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiaConfig {
    /// V/A
    pub gain: f64,
    /// -3 dB bandwidth in Hz.
    pub bandwidth_hz: f64,
    /// Input-referred rms noise in A at `bandwidth_hz`.
    pub input_noise_a: f64,
    pub dark_current_a: f64,
}

impl Default for TiaConfig {
    fn default() -> Self {
        Self {
            gain: 1e9,
            bandwidth_hz: 1e3,
            input_noise_a: 20e-15,
            dark_current_a: 8e-12,
        }
    }
}

impl TiaConfig {
    pub fn validate(&self) -> Result<(), DetectorError> {
        if !(self.gain > 0.0) || !(self.bandwidth_hz > 0.0) {
            return Err(DetectorError::InvalidConfig(
                "TIA gain and bandwidth must be > 0".into(),
            ));
        }
        if !(self.input_noise_a >= 0.0) || !(self.dark_current_a >= 0.0) {
            return Err(DetectorError::InvalidConfig(
                "TIA noise and dark current must be >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn time_constant(&self) -> f64 {
        1.0 / (2.0 * std::f64::consts::PI * self.bandwidth_hz)
    }

    /// Largest update interval accepted by [`tia_filter`].
    pub fn max_dt(&self) -> f64 {
        1.0 / (20.0 * self.bandwidth_hz)
    }

    /// Per-update decay factor `exp(-dt/τ)`.
    pub fn decay(&self, dt: f64) -> f64 {
        (-dt / self.time_constant()).exp()
    }
}

/// Exponential-hold low-pass state in volts.
#[derive(Debug, Clone, Copy)]
pub struct TiaState {
    pub voltage: f64,
    decay: f64,
    gain: f64,
    dark: f64,
}

impl TiaState {
    /// Starts settled on a constant input current `current` (dark excluded).
    pub fn settled(cfg: &TiaConfig, dt: f64, current: f64) -> Self {
        Self {
            voltage: cfg.gain * (current + cfg.dark_current_a),
            decay: cfg.decay(dt),
            gain: cfg.gain,
            dark: cfg.dark_current_a,
        }
    }

    /// Holds `current` for one interval and returns the new output voltage.
    #[inline]
    pub fn update(&mut self, current: f64) -> f64 {
        let target = self.gain * (current + self.dark);
        self.voltage = target + (self.voltage - target) * self.decay;
        self.voltage
    }
}

/// Filters a current timeline sampled every `dt` seconds. Each input value
/// is held for one interval; the output at index `i` is the voltage at the
/// end of interval `i`. The filter starts settled on the dark current.
pub fn tia_filter(current: &[f64], cfg: &TiaConfig, dt: f64) -> Result<Vec<f64>, DetectorError> {
    cfg.validate()?;
    if !(dt > 0.0) || dt > cfg.max_dt() * (1.0 + 1e-12) {
        return Err(DetectorError::DtTooCoarse {
            dt,
            max: cfg.max_dt(),
        });
    }
    let mut state = TiaState::settled(cfg, dt, 0.0);
    Ok(current.iter().map(|&i| state.update(i)).collect())
}

/// Shot-noise rms `sqrt(2 e I B)` combined in quadrature with the input noise.
pub fn shot_noise_sigma(current: f64, bandwidth_hz: f64, input_noise_a: f64) -> f64 {
    (2.0 * ELEMENTARY_CHARGE * current.max(0.0) * bandwidth_hz + input_noise_a * input_noise_a)
        .sqrt()
}

/// Returns `current` plus a zero-mean Gaussian shot and input noise sample.
pub fn shot_noise<R: Rng + ?Sized>(
    current: f64,
    bandwidth_hz: f64,
    input_noise_a: f64,
    rng: &mut R,
) -> f64 {
    let sigma = shot_noise_sigma(current, bandwidth_hz, input_noise_a);
    if sigma == 0.0 {
        return current;
    }
    current + sigma * rng.sample::<f64, _>(rand_distr::StandardNormal)
}

/// Counts discrete electrons over the correlation time `1/(2B)` and
/// converts back to a current. Audit path for the Gaussian approximation.
pub fn shot_noise_poisson<R: Rng + ?Sized>(current: f64, bandwidth_hz: f64, rng: &mut R) -> f64 {
    let window = 0.5 / bandwidth_hz;
    let mean = current.max(0.0) * window / ELEMENTARY_CHARGE;
    if mean == 0.0 {
        return 0.0;
    }
    let n = Poisson::new(mean).expect("positive mean").sample(rng);
    n * ELEMENTARY_CHARGE / window
}

/// Multiplicative laser intensity factor with relative rms `rel`, floored at 0.
pub fn laser_factor<R: Rng + ?Sized>(rel: f64, rng: &mut R) -> f64 {
    if rel == 0.0 {
        return 1.0;
    }
    Normal::new(1.0, rel)
        .expect("finite sigma")
        .sample(rng)
        .max(0.0)
}
