use super::sequence::{PulseSequence, RepTemplate, Segment};
use super::timing::{EchoReference, TimingConfig};
use super::PulseError;

fn laser(timing: &TimingConfig) -> Vec<Segment> {
    vec![Segment::new(0, timing.laser_width_ns, 1.0)]
}

/// Pulses `(length_ns, signed omega)` laid back to back (zero-length gaps
/// allowed) so that the last one ends `guard` before the next laser pulse.
fn place_block(timing: &TimingConfig, rep_ns: u64, parts: &[(u64, f64)]) -> Vec<Segment> {
    let total: u64 = parts.iter().map(|p| p.0).sum();
    let mut t = rep_ns - timing.guard_ns - total;
    let mut out = Vec::new();
    for &(len, value) in parts {
        if len > 0 && value != 0.0 {
            out.push(Segment::new(t, t + len, value));
        }
        t += len;
    }
    out
}

fn build(
    id: usize,
    sweep_value: f64,
    rf_freq_hz: f64,
    timing: &TimingConfig,
    rep_period_ns: u64,
    high_mw: Vec<Segment>,
    low_mw: Vec<Segment>,
) -> Result<PulseSequence, PulseError> {
    let half_envelope_ns = timing.half_envelope_ns()?;
    let seq = PulseSequence {
        id,
        sweep_value,
        rf_freq_hz,
        rep_period_ns,
        envelope_freq_hz: timing.envelope_freq_hz,
        half_envelope_ns,
        n_reps_per_half_envelope: half_envelope_ns / rep_period_ns,
        daq_period_ns: timing.daq_period_ns,
        apd_rise_delay_ns: timing.apd_rise_delay_ns,
        apd_window_ns: timing.apd_window_ns,
        guard_ns: timing.guard_ns,
        high: RepTemplate {
            laser: laser(timing),
            mw: high_mw,
        },
        low: RepTemplate {
            laser: laser(timing),
            mw: low_mw,
        },
    };
    seq.validate()?;
    Ok(seq)
}

fn single_pulse(timing: &TimingConfig, len_ns: u64) -> Vec<Segment> {
    place_block(
        timing,
        timing.rep_period_ns,
        &[(len_ns, timing.mw.rabi_omega)],
    )
}

/// One sequence per RF frequency with a fixed π pulse in every RF-on repetition.
pub fn compile_pdmr(
    rf_list: &[f64],
    timing: &TimingConfig,
) -> Result<Vec<PulseSequence>, PulseError> {
    timing.validate()?;
    timing.check_mw_fits(timing.mw.pi_ns)?;
    rf_list
        .iter()
        .enumerate()
        .map(|(id, &rf)| {
            check_rf(rf)?;
            build(
                id,
                rf,
                rf,
                timing,
                timing.rep_period_ns,
                single_pulse(timing, timing.mw.pi_ns),
                Vec::new(),
            )
        })
        .collect()
}

/// One sequence per MW duration (s, rounded to whole ns) at a fixed RF frequency.
pub fn compile_rabi(
    mw_durations: &[f64],
    rf_freq_hz: f64,
    timing: &TimingConfig,
) -> Result<Vec<PulseSequence>, PulseError> {
    timing.validate()?;
    check_rf(rf_freq_hz)?;
    mw_durations
        .iter()
        .enumerate()
        .map(|(id, &d)| {
            let len = to_ns(d)?;
            timing.check_mw_fits(len)?;
            build(
                id,
                d,
                rf_freq_hz,
                timing,
                timing.rep_period_ns,
                single_pulse(timing, len),
                Vec::new(),
            )
        })
        .collect()
}

/// Smallest repetition period that divides the half envelope and leaves
/// `mw_ns` of microwave window.
fn extended_period(timing: &TimingConfig, mw_ns: u64) -> Result<u64, PulseError> {
    let half = timing.half_envelope_ns()?;
    let needed = timing.laser_width_ns + timing.guard_ns + mw_ns;
    if needed <= timing.rep_period_ns {
        return Ok(timing.rep_period_ns);
    }
    (needed..=half)
        .find(|p| half % p == 0)
        .ok_or(PulseError::GuardViolation {
            needed_ns: needed,
            available_ns: half,
        })
}

/// Hahn echo `π/2 - τ - π - τ - π/2` ending `guard` before the readout
/// pulse, one sequence per `τ` (s) in the given order. If the longest echo
/// does not fit, the repetition period of the whole list is extended to the
/// next divisor of the half envelope.
pub fn compile_hahn(
    tau_list: &[f64],
    rf_freq_hz: f64,
    timing: &TimingConfig,
) -> Result<Vec<PulseSequence>, PulseError> {
    timing.validate()?;
    check_rf(rf_freq_hz)?;
    let mw = &timing.mw;
    let taus = tau_list
        .iter()
        .map(|&t| to_ns(t))
        .collect::<Result<Vec<_>, _>>()?;
    let block = |tau: u64| 2 * mw.pi_half_ns + mw.pi_ns + 2 * tau;
    let longest = taus.iter().map(|&t| block(t)).max().unwrap_or(0);
    let rep = extended_period(timing, longest)?;
    let omega = mw.rabi_omega;
    taus.iter()
        .enumerate()
        .map(|(id, &tau)| {
            let echo = |closing: f64| {
                place_block(
                    timing,
                    rep,
                    &[
                        (mw.pi_half_ns, omega),
                        (tau, 0.0),
                        (mw.pi_ns, omega),
                        (tau, 0.0),
                        (mw.pi_half_ns, closing * omega),
                    ],
                )
            };
            let high = echo(mw.echo_projection.sign());
            let low = match mw.echo_reference {
                EchoReference::Off => Vec::new(),
                EchoReference::Alternating => echo(mw.echo_projection.flipped().sign()),
            };
            build(id, tau_list[id], rf_freq_hz, timing, rep, high, low)
        })
        .collect()
}

fn to_ns(seconds: f64) -> Result<u64, PulseError> {
    if !(seconds >= 0.0) || !seconds.is_finite() {
        return Err(PulseError::InvalidTiming(format!(
            "duration {seconds} s must be >= 0"
        )));
    }
    Ok((seconds * 1e9).round() as u64)
}

fn check_rf(rf: f64) -> Result<(), PulseError> {
    if !(rf > 0.0) || !rf.is_finite() {
        return Err(PulseError::InvalidTiming(format!(
            "RF frequency {rf} Hz must be > 0"
        )));
    }
    Ok(())
}
