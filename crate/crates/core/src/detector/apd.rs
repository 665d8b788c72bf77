use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::trace::{TraceKind, TraceRecord};
use super::DetectorError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApdConfig {
    pub window_s: f64,
    /// Delay between the laser leading edge and the gate opening.
    pub rise_delay_s: f64,
    pub dead_time_s: f64,
}

impl Default for ApdConfig {
    fn default() -> Self {
        Self {
            window_s: 300e-9,
            rise_delay_s: 50e-9,
            dead_time_s: 0.0,
        }
    }
}

impl ApdConfig {
    pub fn validate(&self) -> Result<(), DetectorError> {
        if !(self.window_s > 0.0) {
            return Err(DetectorError::InvalidConfig(
                "APD window must be > 0".into(),
            ));
        }
        if !(self.rise_delay_s >= 0.0) || !(self.dead_time_s >= 0.0) {
            return Err(DetectorError::InvalidConfig(
                "APD delay and dead time must be >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Non-paralyzable dead-time correction of an expected count.
    pub fn apply_dead_time(&self, mean: f64) -> f64 {
        if self.dead_time_s == 0.0 {
            return mean;
        }
        let rate = mean / self.window_s;
        mean / (1.0 + rate * self.dead_time_s)
    }
}

/// Piecewise-constant rate segment `(t_start, t_end, counts/s)`.
pub type RateSegment = (f64, f64, f64);

/// Expected counts in `[start, end)` under a piecewise-constant rate.
pub fn integrate_rate(timeline: &[RateSegment], start: f64, end: f64) -> f64 {
    timeline
        .iter()
        .map(|&(a, b, r)| {
            let lo = a.max(start);
            let hi = b.min(end);
            if hi > lo {
                r * (hi - lo)
            } else {
                0.0
            }
        })
        .sum()
}

/// Draws a Poisson count for an expected value, `0` for a non-positive mean.
pub fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    Poisson::new(mean)
        .expect("positive finite mean")
        .sample(rng) as u64
}

/// One Poisson draw per gate over `[gate + rise_delay, gate + rise_delay + window)`.
pub fn apd_counts<R: Rng + ?Sized>(
    timeline: &[RateSegment],
    cfg: &ApdConfig,
    gates: &[f64],
    rng: &mut R,
) -> Result<Vec<u64>, DetectorError> {
    cfg.validate()?;
    if timeline.iter().any(|s| !(s.2 >= 0.0)) {
        return Err(DetectorError::InvalidConfig("rates must be >= 0".into()));
    }
    Ok(gates
        .iter()
        .map(|&g| {
            let start = g + cfg.rise_delay_s;
            let mean = cfg.apply_dead_time(integrate_rate(timeline, start, start + cfg.window_s));
            poisson_count(mean, rng)
        })
        .collect())
}

/// Point-samples a zero-order-hold timeline (step `dt`) every `period`
/// seconds from `t = 0`, labelling each sample with `rf_on(t)`.
pub fn daq_sample(
    timeline: &[f64],
    dt: f64,
    period: f64,
    rf_on: impl Fn(f64) -> bool,
    kind: TraceKind,
    seq_id: usize,
    seed: u64,
) -> Result<TraceRecord, DetectorError> {
    if !(period > 0.0) || !(dt > 0.0) {
        return Err(DetectorError::InvalidConfig(
            "sampling period and dt must be > 0".into(),
        ));
    }
    let mut rec = TraceRecord::new(kind, seq_id, seed);
    let span = timeline.len() as f64 * dt;
    let mut k = 0u64;
    loop {
        let t = k as f64 * period;
        if t >= span * (1.0 - 1e-12) {
            break;
        }
        let idx = ((t / dt) * (1.0 + 1e-12)).floor() as usize;
        rec.samples.push(super::TraceSample {
            t_s: t,
            value: timeline[idx.min(timeline.len() - 1)],
            rf_on: rf_on(t),
        });
        k += 1;
    }
    Ok(rec)
}
