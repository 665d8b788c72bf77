use std::collections::BTreeMap;
use std::fmt;

use super::PulseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    Laser,
    MwAmp,
    MwFreq,
    DaqSample,
    ApdGate,
    Envelope,
}

impl Channel {
    pub const ALL: [Channel; 6] = [
        Channel::Laser,
        Channel::MwAmp,
        Channel::MwFreq,
        Channel::DaqSample,
        Channel::ApdGate,
        Channel::Envelope,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Laser => "LASER",
            Channel::MwAmp => "MW_AMP",
            Channel::MwFreq => "MW_FREQ",
            Channel::DaqSample => "DAQ_SAMPLE",
            Channel::ApdGate => "APD_GATE",
            Channel::Envelope => "ENVELOPE",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Constant `value` over `[t_start_ns, t_end_ns)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t_start_ns: u64,
    pub t_end_ns: u64,
    pub value: f64,
}

impl Segment {
    pub fn new(t_start_ns: u64, t_end_ns: u64, value: f64) -> Self {
        Self {
            t_start_ns,
            t_end_ns,
            value,
        }
    }

    pub fn len_ns(&self) -> u64 {
        self.t_end_ns - self.t_start_ns
    }

    fn shifted(&self, by: u64) -> Self {
        Self {
            t_start_ns: self.t_start_ns + by,
            t_end_ns: self.t_end_ns + by,
            value: self.value,
        }
    }
}

/// Contents of one repetition, times relative to its start.
///
/// `mw` values are signed Rabi angular frequencies; a negative value is a π
/// phase shift of the drive.
#[derive(Debug, Clone, PartialEq)]
pub struct RepTemplate {
    pub laser: Vec<Segment>,
    pub mw: Vec<Segment>,
}

impl RepTemplate {
    pub fn mw_on_ns(&self) -> u64 {
        self.mw.iter().map(Segment::len_ns).sum()
    }

    /// Drive amplitude at `t` ns into the repetition.
    pub fn mw_at(&self, t: u64) -> f64 {
        self.mw
            .iter()
            .find(|s| s.t_start_ns <= t && t < s.t_end_ns)
            .map_or(0.0, |s| s.value)
    }
}

/// A periodic timeline: `n_reps_per_half_envelope` copies of `high` while the
/// RF envelope is on, then as many copies of `low`, repeated per envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    pub id: usize,
    /// Swept quantity for this sequence (Hz, s or s depending on the scenario).
    pub sweep_value: f64,
    pub rf_freq_hz: f64,
    pub rep_period_ns: u64,
    pub envelope_freq_hz: f64,
    pub half_envelope_ns: u64,
    pub n_reps_per_half_envelope: u64,
    pub daq_period_ns: u64,
    pub apd_rise_delay_ns: u64,
    pub apd_window_ns: u64,
    pub guard_ns: u64,
    pub high: RepTemplate,
    pub low: RepTemplate,
}

impl PulseSequence {
    pub fn envelope_period_ns(&self) -> u64 {
        2 * self.half_envelope_ns
    }

    pub fn laser_width_ns(&self) -> u64 {
        self.high.laser.iter().map(Segment::len_ns).sum()
    }

    pub fn template(&self, rf_on: bool) -> &RepTemplate {
        if rf_on {
            &self.high
        } else {
            &self.low
        }
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<(), PulseError> {
        if self.n_reps_per_half_envelope == 0
            || self.n_reps_per_half_envelope * self.rep_period_ns != self.half_envelope_ns
        {
            return Err(PulseError::NonIntegerReps {
                half_envelope_ns: self.half_envelope_ns as f64,
                rep_period_ns: self.rep_period_ns,
            });
        }
        if self.high.laser != self.low.laser {
            return Err(PulseError::InvalidTiming(
                "laser timeline differs between envelope halves".into(),
            ));
        }
        let laser_end = self
            .high
            .laser
            .iter()
            .map(|s| s.t_end_ns)
            .max()
            .unwrap_or(0);
        for t in [&self.high, &self.low] {
            for list in [&t.laser, &t.mw] {
                check_sorted(list)?;
                if list.iter().any(|s| s.t_end_ns > self.rep_period_ns) {
                    return Err(PulseError::InvalidTiming(
                        "segment runs past the repetition".into(),
                    ));
                }
            }
            for s in &t.mw {
                if s.t_start_ns < laser_end {
                    return Err(PulseError::InvalidTiming(
                        "microwave pulse overlaps the laser".into(),
                    ));
                }
                if s.t_end_ns + self.guard_ns > self.rep_period_ns {
                    return Err(PulseError::GuardViolation {
                        needed_ns: s.t_end_ns + self.guard_ns,
                        available_ns: self.rep_period_ns,
                    });
                }
            }
        }
        Ok(())
    }

    /// Expands one channel over `n_envelopes` full envelopes.
    pub fn segments(&self, channel: Channel, n_envelopes: u64) -> Vec<Segment> {
        let total = n_envelopes * self.envelope_period_ns();
        let mut out = Vec::new();
        match channel {
            Channel::Envelope => {
                for e in 0..n_envelopes {
                    let s = e * self.envelope_period_ns();
                    out.push(Segment::new(s, s + self.half_envelope_ns, 1.0));
                    out.push(Segment::new(
                        s + self.half_envelope_ns,
                        s + 2 * self.half_envelope_ns,
                        0.0,
                    ));
                }
            }
            Channel::DaqSample => {
                let mut t = 0;
                while t < total {
                    out.push(Segment::new(t, t + 1, 1.0));
                    t += self.daq_period_ns;
                }
            }
            _ => {
                for (start, template) in self.rep_starts(n_envelopes) {
                    match channel {
                        Channel::Laser => {
                            out.extend(template.laser.iter().map(|s| s.shifted(start)))
                        }
                        Channel::MwAmp => out.extend(template.mw.iter().map(|s| s.shifted(start))),
                        Channel::MwFreq => out.extend(template.mw.iter().map(|s| Segment {
                            value: self.rf_freq_hz,
                            ..s.shifted(start)
                        })),
                        Channel::ApdGate => {
                            let a = start + self.apd_rise_delay_ns;
                            out.push(Segment::new(a, a + self.apd_window_ns, 1.0));
                        }
                        _ => unreachable!(),
                    }
                }
            }
        }
        out
    }

    /// Every channel over `n_envelopes` envelopes.
    pub fn channels(&self, n_envelopes: u64) -> BTreeMap<Channel, Vec<Segment>> {
        Channel::ALL
            .iter()
            .map(|&c| (c, self.segments(c, n_envelopes)))
            .collect()
    }

    fn rep_starts(&self, n_envelopes: u64) -> impl Iterator<Item = (u64, &RepTemplate)> + '_ {
        let n = self.n_reps_per_half_envelope;
        (0..n_envelopes * 2 * n).map(move |g| {
            let rf_on = (g / n).is_multiple_of(2);
            (g * self.rep_period_ns, self.template(rf_on))
        })
    }

    /// Text dump, one `channel t_start_ns t_end_ns value` line per segment.
    pub fn dump(&self, n_envelopes: u64) -> String {
        let mut s = String::new();
        for (c, segs) in self.channels(n_envelopes) {
            for seg in segs {
                s.push_str(&format!(
                    "{} {} {} {}\n",
                    c, seg.t_start_ns, seg.t_end_ns, seg.value
                ));
            }
        }
        s
    }
}

fn check_sorted(list: &[Segment]) -> Result<(), PulseError> {
    if list.iter().any(|s| s.t_end_ns <= s.t_start_ns) {
        return Err(PulseError::InvalidTiming(
            "segment with t_end <= t_start".into(),
        ));
    }
    if list.windows(2).any(|w| w[1].t_start_ns < w[0].t_end_ns) {
        return Err(PulseError::InvalidTiming(
            "overlapping or unsorted segments".into(),
        ));
    }
    Ok(())
}
