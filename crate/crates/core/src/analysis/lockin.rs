use super::AnalysisError;
use crate::detector::{SampleSink, TraceRecord};

/// Leading fraction of every half period dropped while the TIA settles.
pub const DEFAULT_SKIP_FRACTION: f64 = 0.2;

/// Envelope lock-in result; `contrast_percent = (s_rf / s_0 - 1) * 100`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastResult {
    pub s_rf: f64,
    pub s_0: f64,
    pub contrast_percent: f64,
    /// Standard error of the per-envelope contrasts; NaN for one envelope.
    pub std_error: f64,
    pub n_envelopes: usize,
}

impl ContrastResult {
    pub fn from_means(
        s_rf: f64,
        s_0: f64,
        std_error: f64,
        n_envelopes: usize,
    ) -> Result<Self, AnalysisError> {
        if !(s_0 > 0.0) {
            return Err(AnalysisError::NonPositiveReference(s_0));
        }
        Ok(Self {
            s_rf,
            s_0,
            contrast_percent: contrast_percent(s_rf, s_0),
            std_error,
            n_envelopes,
        })
    }

    pub fn snr(&self) -> f64 {
        self.contrast_percent / self.std_error
    }
}

pub fn contrast_percent(s_rf: f64, s_0: f64) -> f64 {
    (s_rf / s_0 - 1.0) * 100.0
}

#[derive(Debug, Clone, Copy, Default)]
struct RunMean {
    sum: f64,
    n: usize,
}

/// Streaming lock-in over a labelled sample stream. Consecutive samples
/// with the same label form one half period; the first `skip_fraction` of
/// each is discarded and the rest averaged. Half periods are paired into
/// envelopes in arrival order.
#[derive(Debug, Clone)]
pub struct LockinAccumulator {
    skip_fraction: f64,
    current: Vec<f64>,
    current_label: Option<bool>,
    seen: [bool; 2],
    pending: Option<(bool, RunMean)>,
    on: RunMean,
    off: RunMean,
    per_envelope: Vec<f64>,
}

impl LockinAccumulator {
    pub fn new(skip_fraction: f64) -> Self {
        assert!(
            (0.0..1.0).contains(&skip_fraction),
            "skip fraction must be in [0, 1)"
        );
        Self {
            skip_fraction,
            current: Vec::new(),
            current_label: None,
            seen: [false; 2],
            pending: None,
            on: RunMean::default(),
            off: RunMean::default(),
            per_envelope: Vec::new(),
        }
    }

    fn close_run(&mut self) {
        let Some(label) = self.current_label.take() else {
            return;
        };
        let skip = (self.current.len() as f64 * self.skip_fraction).ceil() as usize;
        let kept = &self.current[skip.min(self.current.len())..];
        let run = RunMean {
            sum: kept.iter().sum(),
            n: kept.len(),
        };
        self.current.clear();
        if run.n == 0 {
            return;
        }
        match self.pending.take() {
            Some((prev, first)) if prev != label => {
                let (on, off) = if label { (run, first) } else { (first, run) };
                self.on.sum += on.sum;
                self.on.n += on.n;
                self.off.sum += off.sum;
                self.off.n += off.n;
                let m_off = off.sum / off.n as f64;
                if m_off > 0.0 {
                    self.per_envelope
                        .push(contrast_percent(on.sum / on.n as f64, m_off));
                }
            }
            _ => self.pending = Some((label, run)),
        }
    }

    /// Closes the last half period and reduces all complete envelopes.
    pub fn finish(mut self) -> Result<ContrastResult, AnalysisError> {
        self.close_run();
        if !self.seen[1] {
            return Err(AnalysisError::MissingPhase("rf_on"));
        }
        if !self.seen[0] {
            return Err(AnalysisError::MissingPhase("rf_off"));
        }
        if self.on.n == 0 || self.off.n == 0 {
            return Err(AnalysisError::DegenerateData("no complete envelope".into()));
        }
        let s_rf = self.on.sum / self.on.n as f64;
        let s_0 = self.off.sum / self.off.n as f64;
        let n = self.per_envelope.len();
        let std_error = if n > 1 {
            let mean = self.per_envelope.iter().sum::<f64>() / n as f64;
            let var = self
                .per_envelope
                .iter()
                .map(|c| (c - mean).powi(2))
                .sum::<f64>()
                / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            f64::NAN
        };
        ContrastResult::from_means(s_rf, s_0, std_error, n)
    }
}

impl SampleSink for LockinAccumulator {
    fn push(&mut self, _t_s: f64, value: f64, rf_on: bool) {
        if self.current_label != Some(rf_on) {
            self.close_run();
            self.current_label = Some(rf_on);
            self.seen[rf_on as usize] = true;
        }
        self.current.push(value);
    }
}

/// Lock-in contrast of a stored trace, see [`LockinAccumulator`].
pub fn lockin_contrast(
    trace: &TraceRecord,
    skip_fraction: f64,
) -> Result<ContrastResult, AnalysisError> {
    let mut acc = LockinAccumulator::new(skip_fraction);
    for s in &trace.samples {
        acc.push(s.t_s, s.value, s.rf_on);
    }
    acc.finish()
}
