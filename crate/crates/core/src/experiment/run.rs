use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{Scenario, ScenarioConfig};
use super::confocal::{synthesize_confocal, ConfocalImage, ElectrodeMask};
use super::output;
use super::setup::Instrument;
use super::validate::validate_config;
use super::ExperimentError;
use crate::analysis::{
    fft_spectrum, fit_damped_sine, fit_exp_decay, fit_multi_lorentzian, AnalysisError,
    ContrastResult, FitResult, LockinAccumulator, LorentzianInit, Spectrum,
};
use crate::detector::{SampleSink, TraceKind, TraceRecord};
use crate::optics::LaserField;
use crate::pulse::{
    acquire, compile_hahn, compile_pdmr, compile_rabi, simulate_profiles, EchoReference,
    HalfProfile, PulseSequence, RepProfile, SequenceProfiles,
};
use crate::spin::ground_transition_frequencies;

/// Overrides and output switches for [`run_scenario`].
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory for CSV and manifest output; nothing is written when unset.
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Also write the first envelope of every detector trace.
    pub raw_traces: bool,
    pub plots: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Readout {
    Electrical,
    Optical,
}

impl Readout {
    pub fn name(self) -> &'static str {
        match self {
            Readout::Electrical => "electrical",
            Readout::Optical => "optical",
        }
    }
}

/// Lock-in result of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub seq_id: usize,
    /// Sweep coordinate in SI units (Hz, s or nm).
    pub x: f64,
    pub electrical: Option<ContrastResult>,
    pub optical: Option<ContrastResult>,
    pub error: Option<String>,
}

impl PointResult {
    pub fn contrast(&self, r: Readout) -> Option<&ContrastResult> {
        match r {
            Readout::Electrical => self.electrical.as_ref(),
            Readout::Optical => self.optical.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitRecord {
    pub readout: Readout,
    pub outcome: Result<FitResult<f64>, AnalysisError>,
}

impl FitRecord {
    pub fn ok(&self) -> bool {
        matches!(&self.outcome, Ok(f) if f.converged)
    }
}

/// Rabi contrast at one wavelength: twice the fitted oscillation amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastEstimate {
    pub contrast_percent: f64,
    pub error_percent: f64,
}

impl ContrastEstimate {
    pub fn snr(&self) -> f64 {
        self.contrast_percent / self.error_percent
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WavelengthContrast {
    pub wavelength_nm: f64,
    pub electrical: Option<Result<ContrastEstimate, String>>,
    pub optical: Option<Result<ContrastEstimate, String>>,
}

/// First-envelope detector traces of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTraces {
    pub current: TraceRecord,
    pub counts: TraceRecord,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub scenario: Scenario,
    pub seed: u64,
    pub points: Vec<PointResult>,
    pub fits: Vec<FitRecord>,
    /// FFT of the echo residuals after the exponential fit.
    pub spectra: Vec<(Readout, Spectrum<f64>)>,
    pub wavelengths: Vec<WavelengthContrast>,
    pub confocal: Vec<ConfocalImage>,
    pub raw: Vec<RawTraces>,
    pub files: Vec<PathBuf>,
    pub elapsed_s: f64,
}

impl RunReport {
    fn new(scenario: Scenario, seed: u64) -> Self {
        Self {
            scenario,
            seed,
            points: Vec::new(),
            fits: Vec::new(),
            spectra: Vec::new(),
            wavelengths: Vec::new(),
            confocal: Vec::new(),
            raw: Vec::new(),
            files: Vec::new(),
            elapsed_s: 0.0,
        }
    }

    /// Failed sweep points and unconverged fits.
    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .points
            .iter()
            .filter_map(|p| p.error.as_ref().map(|e| format!("point {}: {e}", p.seq_id)))
            .collect();
        for f in &self.fits {
            match &f.outcome {
                Err(e) => out.push(format!("{} fit: {e}", f.readout.name())),
                Ok(r) if !r.converged => {
                    out.push(format!("{} fit: not converged", f.readout.name()))
                }
                Ok(_) => {}
            }
        }
        for w in &self.wavelengths {
            for (r, c) in [
                (Readout::Electrical, &w.electrical),
                (Readout::Optical, &w.optical),
            ] {
                if let Some(Err(e)) = c {
                    out.push(format!("{} nm {}: {e}", w.wavelength_nm, r.name()));
                }
            }
        }
        out
    }

    pub fn fit(&self, readout: Readout) -> Option<&FitResult<f64>> {
        self.fits
            .iter()
            .find(|f| f.readout == readout)
            .and_then(|f| f.outcome.as_ref().ok())
    }

    /// `(x, contrast %)` of every point with a result for `readout`.
    pub fn series(&self, readout: Readout) -> (Vec<f64>, Vec<f64>) {
        self.points
            .iter()
            .filter_map(|p| p.contrast(readout).map(|c| (p.x, c.contrast_percent)))
            .unzip()
    }
}

/// Forwards samples to a lock-in and keeps those of the first envelope.
struct Tee<'a> {
    lockin: &'a mut LockinAccumulator,
    record: Option<&'a mut TraceRecord>,
    until_s: f64,
}

impl SampleSink for Tee<'_> {
    fn push(&mut self, t_s: f64, value: f64, rf_on: bool) {
        self.lockin.push(t_s, value, rf_on);
        if let Some(r) = self.record.as_deref_mut() {
            if t_s < self.until_s {
                r.push(t_s, value, rf_on);
            }
        }
    }
}

/// `base + m (p - base)` applied to every repetition of a half.
fn scale_half(half: &mut HalfProfile, base: &RepProfile, m: f64) {
    let scale = |p: &mut RepProfile| {
        for (v, b) in p.ionization_cum.iter_mut().zip(&base.ionization_cum) {
            *v = b + m * (*v - b);
        }
        p.gate_emission = base.gate_emission + m * (p.gate_emission - base.gate_emission);
    };
    half.transient.iter_mut().for_each(scale);
    scale(&mut half.steady);
}

/// Imposes a fractional modulation `m` on the echo signal: the RF-on half is
/// pulled towards the reference by `1 - m`.
fn modulate_echo(profiles: &mut SequenceProfiles, reference: EchoReference, m: f64) {
    match reference {
        EchoReference::Off => {
            let base = profiles.low.steady.clone();
            scale_half(&mut profiles.high, &base, m);
        }
        EchoReference::Alternating => {
            let mut base = profiles.high.steady.clone();
            for (v, l) in base
                .ionization_cum
                .iter_mut()
                .zip(&profiles.low.steady.ionization_cum)
            {
                *v = 0.5 * (*v + l);
            }
            base.gate_emission = 0.5 * (base.gate_emission + profiles.low.steady.gate_emission);
            scale_half(&mut profiles.high, &base, m);
            scale_half(&mut profiles.low, &base, m);
        }
    }
}

struct PointJob<'a> {
    seq: PulseSequence,
    x: f64,
    inst: &'a Instrument,
    /// Echo modulation factor, 1 when off.
    modulation: f64,
}

struct PointOutput {
    result: PointResult,
    raw: Option<RawTraces>,
}

fn run_point(job: &PointJob<'_>, cfg: &ScenarioConfig, seed: u64, raw: bool) -> PointOutput {
    let seq = &job.seq;
    let det = &job.inst.detector;
    let mut result = PointResult {
        seq_id: seq.id,
        x: job.x,
        electrical: None,
        optical: None,
        error: None,
    };
    let outcome = (|| -> Result<Option<RawTraces>, ExperimentError> {
        let phys = &job.inst.physics;
        let mut profiles = simulate_profiles(seq, phys)?;
        if job.modulation != 1.0 {
            modulate_echo(
                &mut profiles,
                job.inst.timing.mw.echo_reference,
                job.modulation,
            );
        }
        let skip = cfg.analysis.skip_fraction;
        let (mut el, mut op) = (LockinAccumulator::new(skip), LockinAccumulator::new(skip));
        let mut rec_i = TraceRecord::new(TraceKind::Current, seq.id, seed);
        let mut rec_c = TraceRecord::new(TraceKind::Counts, seq.id, seed);
        let until_s = 2.0 * seq.half_envelope_ns as f64 * 1e-9;
        {
            let mut sink_i = Tee {
                lockin: &mut el,
                record: raw.then_some(&mut rec_i),
                until_s,
            };
            let mut sink_c = Tee {
                lockin: &mut op,
                record: raw.then_some(&mut rec_c),
                until_s,
            };
            acquire(
                seq,
                &profiles,
                phys,
                det,
                cfg.n_envelopes,
                seed,
                &mut sink_i,
                &mut sink_c,
            )?;
        }
        if det.electrical {
            result.electrical = Some(el.finish()?);
        }
        if det.optical {
            result.optical = Some(op.finish()?);
        }
        Ok(raw.then_some(RawTraces {
            current: rec_i,
            counts: rec_c,
        }))
    })();
    match outcome {
        Ok(raw) => PointOutput { result, raw },
        Err(e) => {
            result.error = Some(e.to_string());
            PointOutput { result, raw: None }
        }
    }
}

fn run_points(
    jobs: &[PointJob<'_>],
    cfg: &ScenarioConfig,
    seed: u64,
    raw: bool,
) -> Vec<PointOutput> {
    if cfg.parallel {
        jobs.par_iter()
            .map(|j| run_point(j, cfg, seed, raw))
            .collect()
    } else {
        jobs.iter().map(|j| run_point(j, cfg, seed, raw)).collect()
    }
}

fn readouts(cfg: &ScenarioConfig) -> Vec<Readout> {
    let mut r = Vec::new();
    if cfg.readout.electrical() {
        r.push(Readout::Electrical);
    }
    if cfg.readout.optical() {
        r.push(Readout::Optical);
    }
    r
}

/// Lorentzians expected in the swept window: the ground transitions inside
/// it, merged when closer than three sweep steps.
fn expected_peaks(cfg: &ScenarioConfig, inst: &Instrument, xs: &[f64]) -> usize {
    if let Some(k) = cfg.analysis.fit_peaks {
        return k;
    }
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let step = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let (f1, f2) = ground_transition_frequencies(&inst.physics.spin);
    let inside = [f1, f2].iter().filter(|f| (lo..=hi).contains(*f)).count();
    if inside == 2 && (f2 - f1) < 3.0 * step {
        1
    } else {
        inside.max(1)
    }
}

fn fit_series(
    scenario: Scenario,
    k: usize,
    x: &[f64],
    y: &[f64],
) -> Result<FitResult<f64>, AnalysisError> {
    match scenario {
        Scenario::PdmrSweep => fit_multi_lorentzian(x, y, k, &LorentzianInit::Extrema),
        Scenario::RabiSweep => fit_damped_sine(x, y),
        Scenario::HahnEcho => fit_exp_decay(x, y),
        _ => Err(AnalysisError::InvalidInput(format!(
            "no fit model for {scenario}"
        ))),
    }
}

/// Residuals of the echo data after the exponential fit.
fn echo_residual_spectrum(
    x: &[f64],
    y: &[f64],
    fit: &FitResult<f64>,
) -> Result<Spectrum<f64>, AnalysisError> {
    let (tau, amp, off) = (
        fit.get("tau").unwrap(),
        fit.get("amp").unwrap(),
        fit.get("offset").unwrap(),
    );
    let resid: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(&t, &v)| v - (off + amp * (-t / tau).exp()))
        .collect();
    fft_spectrum(x, &resid)
}

fn echo_modulation(cfg: &ScenarioConfig, echo_time_s: f64) -> f64 {
    let p = &cfg.physics;
    if cfg.scenario != Scenario::HahnEcho || p.echo_modulation_depth == 0.0 {
        return 1.0;
    }
    let phase = 2.0 * std::f64::consts::PI * p.echo_modulation_khz * 1e3 * echo_time_s;
    1.0 - 0.5 * p.echo_modulation_depth * (1.0 - phase.cos())
}

pub(super) fn compile(
    cfg: &ScenarioConfig,
    inst: &Instrument,
) -> Result<Vec<(PulseSequence, f64)>, ExperimentError> {
    let s = &cfg.sweep;
    let axis =
        |a: &Option<super::config::AxisSpec>| a.as_ref().map(|a| a.values()).unwrap_or_default();
    let timing = &inst.timing;
    let drive = cfg.drive_rf_hz();
    Ok(match cfg.scenario {
        Scenario::PdmrSweep => {
            let rf: Vec<f64> = axis(&s.rf_mhz).iter().map(|v| v * 1e6).collect();
            compile_pdmr(&rf, timing)?
                .into_iter()
                .map(|q| (q.clone(), q.rf_freq_hz))
                .collect()
        }
        Scenario::RabiSweep => {
            let d: Vec<f64> = axis(&s.mw_duration_ns).iter().map(|v| v * 1e-9).collect();
            compile_rabi(&d, drive, timing)?
                .into_iter()
                .map(|q| (q.clone(), q.sweep_value))
                .collect()
        }
        Scenario::HahnEcho => {
            let t: Vec<f64> = axis(&s.tau_us).iter().map(|v| v * 1e-6).collect();
            compile_hahn(&t, drive, timing)?
                .into_iter()
                .map(|q| (q.clone(), 2.0 * q.sweep_value))
                .collect()
        }
        _ => Vec::new(),
    })
}

/// Pulsed Rabi contrast at each laser setting, from damped-sine fits over
/// `durations_s`. Fit failures become per-wavelength error markers.
pub fn contrast_vs_wavelength(
    cfg: &ScenarioConfig,
    lasers: &[LaserField],
    durations_s: &[f64],
) -> Result<Vec<WavelengthContrast>, ExperimentError> {
    let base = Instrument::from_config(cfg)?;
    let seed = cfg.seed;
    let insts = lasers
        .iter()
        .map(|l| base.at_laser(*l))
        .collect::<Result<Vec<_>, _>>()?;
    let template = compile_rabi(durations_s, cfg.drive_rf_hz(), &base.timing)?;
    let n = template.len();
    let jobs: Vec<PointJob<'_>> = insts
        .iter()
        .enumerate()
        .flat_map(|(li, inst)| {
            template.iter().map(move |q| {
                let mut seq = q.clone();
                seq.id = li * n + q.id;
                PointJob {
                    x: q.sweep_value,
                    seq,
                    inst,
                    modulation: 1.0,
                }
            })
        })
        .collect();
    let outputs = run_points(&jobs, cfg, seed, false);
    let estimate = |chunk: &[PointOutput], r: Readout| -> Result<ContrastEstimate, String> {
        if let Some(e) = chunk.iter().find_map(|p| p.result.error.clone()) {
            return Err(e);
        }
        let (x, y): (Vec<f64>, Vec<f64>) = chunk
            .iter()
            .filter_map(|p| {
                p.result
                    .contrast(r)
                    .map(|c| (p.result.x, c.contrast_percent))
            })
            .unzip();
        let fit = fit_damped_sine(&x, &y).map_err(|e| e.to_string())?;
        if !fit.converged {
            return Err("fit not converged".into());
        }
        Ok(ContrastEstimate {
            contrast_percent: 2.0 * fit.get("amp").unwrap(),
            error_percent: 2.0 * fit.error("amp").unwrap(),
        })
    };
    Ok(lasers
        .iter()
        .zip(outputs.chunks(n.max(1)))
        .map(|(l, chunk)| WavelengthContrast {
            wavelength_nm: l.wavelength_nm(),
            electrical: cfg
                .readout
                .electrical()
                .then(|| estimate(chunk, Readout::Electrical)),
            optical: cfg
                .readout
                .optical()
                .then(|| estimate(chunk, Readout::Optical)),
        })
        .collect())
}

/// Validates `cfg`, runs its scenario and, if an output directory is given,
/// writes the reduced CSVs and a manifest from which the run can be repeated.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunReport, ExperimentError> {
    let start = Instant::now();
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let violations = validate_config(&cfg);
    if !violations.is_empty() {
        return Err(ExperimentError::Invalid(violations));
    }
    let seed = cfg.seed;
    let mut report = RunReport::new(cfg.scenario, seed);

    match cfg.scenario {
        Scenario::PdmrSweep | Scenario::RabiSweep | Scenario::HahnEcho => {
            let inst = Instrument::from_config(&cfg)?;
            let jobs: Vec<PointJob<'_>> = compile(&cfg, &inst)?
                .into_iter()
                .map(|(seq, x)| PointJob {
                    modulation: echo_modulation(&cfg, x),
                    seq,
                    x,
                    inst: &inst,
                })
                .collect();
            for out in run_points(&jobs, &cfg, seed, opts.raw_traces) {
                report.points.push(out.result);
                report.raw.extend(out.raw);
            }
            for r in readouts(&cfg) {
                let (x, y) = report.series(r);
                let k = expected_peaks(&cfg, &inst, &x);
                let outcome = if x.len() < report.points.len() {
                    Err(AnalysisError::DegenerateData("sweep points missing".into()))
                } else {
                    fit_series(cfg.scenario, k, &x, &y)
                };
                if cfg.scenario == Scenario::HahnEcho {
                    if let Ok(fit) = &outcome {
                        if let Ok(s) = echo_residual_spectrum(&x, &y, fit) {
                            report.spectra.push((r, s));
                        }
                    }
                }
                report.fits.push(FitRecord {
                    readout: r,
                    outcome,
                });
            }
        }
        Scenario::WavelengthSweep => {
            let base = super::setup::laser_field(&cfg);
            let lasers: Vec<LaserField> = cfg
                .sweep
                .wavelength_nm
                .as_ref()
                .map(|a| a.values())
                .unwrap_or_default()
                .into_iter()
                .map(|nm| LaserField {
                    wavelength_m: nm * 1e-9,
                    ..base
                })
                .collect();
            let durations: Vec<f64> = cfg
                .sweep
                .rabi_duration_ns
                .as_ref()
                .map(|a| a.values())
                .unwrap_or_default()
                .iter()
                .map(|v| v * 1e-9)
                .collect();
            report.wavelengths = contrast_vs_wavelength(&cfg, &lasers, &durations)?;
        }
        Scenario::ConfocalScan => {
            let mask = ElectrodeMask::from_config(&cfg.confocal);
            for (i, &d) in cfg.confocal.spot_diameters_um.iter().enumerate() {
                report.confocal.push(synthesize_confocal(
                    &cfg,
                    &mask,
                    d,
                    seed.wrapping_add(i as u64),
                )?);
            }
        }
    }

    report.elapsed_s = start.elapsed().as_secs_f64();
    if let Some(dir) = &opts.out_dir {
        report.files = output::write_bundle(dir, &cfg, &report, opts)?;
    }
    Ok(report)
}
