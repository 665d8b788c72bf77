use std::fmt;

use super::config::{AxisSpec, Scenario, ScenarioConfig};
use super::setup::{spectral_model, timing_config};
use crate::optics::WAVELENGTH_RANGE_NM;
use crate::pulse::{compile_hahn, compile_pdmr, compile_rabi, PulseError};

/// One violated invariant, located by a dotted field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Default)]
struct Checker {
    out: Vec<Violation>,
}

impl Checker {
    fn push(&mut self, path: &str, message: impl Into<String>) {
        self.out.push(Violation {
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn positive(&mut self, path: &str, v: f64) {
        if !(v > 0.0) || !v.is_finite() {
            self.push(path, format!("{v} must be > 0"));
        }
    }

    fn non_negative(&mut self, path: &str, v: f64) {
        if !(v >= 0.0) || !v.is_finite() {
            self.push(path, format!("{v} must be >= 0"));
        }
    }

    fn unit_interval(&mut self, path: &str, v: f64) {
        if !(0.0..=1.0).contains(&v) {
            self.push(path, format!("{v} must lie in [0, 1]"));
        }
    }

    fn wavelength(&mut self, path: &str, nm: f64) {
        let (lo, hi) = WAVELENGTH_RANGE_NM;
        if !(lo..=hi).contains(&nm) {
            self.push(path, format!("{nm} nm outside the accepted {lo}-{hi} nm"));
        }
    }
}

fn axis_values(c: &mut Checker, path: &str, axis: &Option<AxisSpec>) -> Vec<f64> {
    let Some(axis) = axis else { return Vec::new() };
    if let AxisSpec::Range(r) = axis {
        if r.points == 0 {
            c.push(path, "range needs at least one point");
        }
    }
    let v = axis.values();
    if v.iter().any(|x| !x.is_finite()) {
        c.push(path, "values must be finite");
    }
    v
}

fn pulse_violation(c: &mut Checker, e: PulseError) {
    match e {
        PulseError::NonIntegerReps { half_envelope_ns, rep_period_ns } => c.push(
            "timing.rep_period_ns",
            format!("NonIntegerReps: half envelope {half_envelope_ns} ns is not a multiple of {rep_period_ns} ns"),
        ),
        PulseError::GuardViolation { needed_ns, available_ns } => c.push(
            "timing.guard_ns",
            format!("GuardViolation: microwave block needs {needed_ns} ns with guard, {available_ns} ns available"),
        ),
        other => c.push("timing", other.to_string()),
    }
}

/// Every violated invariant of `cfg`; empty iff the scenario can run.
pub fn validate_config(cfg: &ScenarioConfig) -> Vec<Violation> {
    let mut c = Checker::default();

    if cfg.n_envelopes == 0 && cfg.scenario != Scenario::ConfocalScan {
        c.push("n_envelopes", "must be >= 1");
    }

    let p = &cfg.physics;
    c.positive("physics.zfs_d_MHz", p.zfs_d_mhz);
    c.positive("physics.gamma_GHz_per_T", p.gamma_ghz_per_t);
    if !p.b0_mt.is_finite() {
        c.push("physics.b0_mT", "must be finite");
    }
    c.positive("physics.T2_us", p.t2_us);
    c.positive("physics.excited_lifetime_ns", p.excited_lifetime_ns);
    c.non_negative("physics.isc_half_per_us", p.isc_half_per_us);
    c.non_negative("physics.isc_three_half_per_us", p.isc_three_half_per_us);
    c.positive("physics.metastable_lifetime_ns", p.metastable_lifetime_ns);
    c.unit_interval(
        "physics.metastable_branching_half",
        p.metastable_branching_half,
    );
    c.non_negative("physics.pump_m2_per_J", p.pump_m2_per_j);
    c.non_negative("physics.ionize_m2_per_J", p.ionize_m2_per_j);
    c.non_negative("physics.recombination_per_us", p.recombination_per_us);
    c.non_negative("physics.recombination_m2_per_J", p.recombination_m2_per_j);
    if p.ionize_m2_per_j > 0.0
        && p.recombination_per_us <= 0.0
        && !p.recombination_scales_with_intensity
    {
        c.push(
            "physics.recombination_per_us",
            "ionization needs a recombination path",
        );
    }
    if let Some(s) = p.background_scale {
        c.non_negative("physics.background_scale", s);
    }
    c.non_negative("physics.echo_modulation_kHz", p.echo_modulation_khz);
    c.unit_interval("physics.echo_modulation_depth", p.echo_modulation_depth);

    let l = &cfg.laser;
    c.non_negative("laser.power_mW", l.power_mw);
    c.wavelength("laser.wavelength_nm", l.wavelength_nm);
    c.positive("laser.spot_diameter_um", l.spot_diameter_um);

    let e = &cfg.ensemble;
    c.non_negative(
        "ensemble.single_defect_rate_kcps",
        e.single_defect_rate_kcps,
    );
    if !(e.sideband_fraction > 0.0 && e.sideband_fraction <= 1.0) {
        c.push(
            "ensemble.sideband_fraction",
            format!("{} must lie in (0, 1]", e.sideband_fraction),
        );
    }
    if let Some(eff) = e.collection_efficiency {
        c.unit_interval("ensemble.collection_efficiency", eff);
    }

    let d = &cfg.detector;
    c.positive("detector.tia_gain_V_per_A", d.tia_gain_v_per_a);
    c.positive("detector.tia_bandwidth_Hz", d.tia_bandwidth_hz);
    c.non_negative("detector.input_noise_fA", d.input_noise_fa);
    c.non_negative("detector.dark_current_pA", d.dark_current_pa);
    c.non_negative("detector.apd_dead_time_ns", d.apd_dead_time_ns);
    if d.tia_bandwidth_hz > 0.0
        && cfg.timing.daq_period_ns as f64 * 1e-9 > 1.0 / (20.0 * d.tia_bandwidth_hz)
    {
        c.push(
            "timing.daq_period_ns",
            "DAQ period too coarse to resolve the TIA response",
        );
    }
    if !(0.0..1.0).contains(&cfg.noise.laser_rel_fluctuation) {
        c.push("noise.laser_rel_fluctuation", "must lie in [0, 1)");
    }

    let a = &cfg.analysis;
    if !(0.0..1.0).contains(&a.skip_fraction) {
        c.push("analysis.skip_fraction", "must lie in [0, 1)");
    }
    if let Some(k) = a.fit_peaks {
        if !(1..=3).contains(&k) {
            c.push("analysis.fit_peaks", "must be 1, 2 or 3");
        }
    }

    let t = &cfg.timing;
    c.positive("timing.rabi_MHz", t.rabi_mhz);
    let timing = timing_config(cfg);
    let timing_ok = match timing.validate() {
        Ok(()) => true,
        Err(e) => {
            pulse_violation(&mut c, e);
            false
        }
    };

    match spectral_model(cfg) {
        Ok(m) => {
            let (lo, hi) = WAVELENGTH_RANGE_NM;
            if let Err(e) = m.validate(lo, hi) {
                c.push("physics", e.to_string());
            }
        }
        Err(e) => c.push("physics", e.to_string()),
    }

    check_sweep(&mut c, cfg, timing_ok.then_some(&timing));

    if cfg.scenario == Scenario::ConfocalScan {
        let s = &cfg.confocal;
        c.positive("confocal.field_um", s.field_um);
        c.positive("confocal.step_nm", s.step_nm);
        c.positive("confocal.dwell_ms", s.dwell_ms);
        c.positive("confocal.reference_spot_um", s.reference_spot_um);
        if s.spot_diameters_um.is_empty() {
            c.push("confocal.spot_diameters_um", "needs at least one spot size");
        }
        for (i, &d) in s.spot_diameters_um.iter().enumerate() {
            c.positive(&format!("confocal.spot_diameters_um[{i}]"), d);
        }
        for (i, r) in s.electrodes.iter().enumerate() {
            let inside = |v: f64| (0.0..=s.field_um).contains(&v);
            if !(r.x0_um < r.x1_um && r.y0_um < r.y1_um) {
                c.push(
                    &format!("confocal.electrodes[{i}]"),
                    "needs x0 < x1 and y0 < y1",
                );
            }
            if ![r.x0_um, r.x1_um, r.y0_um, r.y1_um].into_iter().all(inside) {
                c.push(
                    &format!("confocal.electrodes[{i}]"),
                    "lies outside the scan field",
                );
            }
        }
    }
    c.out
}

fn check_sweep(c: &mut Checker, cfg: &ScenarioConfig, timing: Option<&crate::pulse::TimingConfig>) {
    let s = &cfg.sweep;
    let present = [
        ("rf_MHz", s.rf_mhz.is_some()),
        ("mw_duration_ns", s.mw_duration_ns.is_some()),
        ("tau_us", s.tau_us.is_some()),
        ("wavelength_nm", s.wavelength_nm.is_some()),
    ];
    let wanted = cfg.scenario.axis_field();
    for (name, is_set) in present {
        if Some(name) == wanted && !is_set {
            c.push(
                &format!("sweep.{name}"),
                format!("required by scenario {}", cfg.scenario),
            );
        }
        if Some(name) != wanted && is_set {
            c.push(
                &format!("sweep.{name}"),
                format!("not used by scenario {}", cfg.scenario),
            );
        }
    }
    if cfg.scenario != Scenario::WavelengthSweep && s.rabi_duration_ns.is_some() {
        c.push("sweep.rabi_duration_ns", "only used by wavelength_sweep");
    }
    if let Some(rf) = s.drive_rf_mhz {
        c.positive("sweep.drive_rf_MHz", rf);
    }

    let rf = axis_values(c, "sweep.rf_MHz", &s.rf_mhz);
    let durations = axis_values(c, "sweep.mw_duration_ns", &s.mw_duration_ns);
    let taus = axis_values(c, "sweep.tau_us", &s.tau_us);
    let nms = axis_values(c, "sweep.wavelength_nm", &s.wavelength_nm);
    let rabi = axis_values(c, "sweep.rabi_duration_ns", &s.rabi_duration_ns);
    for (path, vals) in [
        ("sweep.rf_MHz", &rf),
        ("sweep.mw_duration_ns", &durations),
        ("sweep.tau_us", &taus),
    ] {
        if let Some(i) = vals.iter().position(|&v| !(v >= 0.0)) {
            c.push(&format!("{path}[{i}]"), "must be >= 0");
        }
    }
    if let Some(i) = rf.iter().position(|&v| v <= 0.0) {
        c.push(&format!("sweep.rf_MHz[{i}]"), "must be > 0");
    }
    for (i, &nm) in nms.iter().enumerate() {
        c.wavelength(&format!("sweep.wavelength_nm[{i}]"), nm);
    }
    if let Some(w) = wanted {
        let n = match cfg.scenario {
            Scenario::PdmrSweep => rf.len(),
            Scenario::RabiSweep => durations.len(),
            Scenario::HahnEcho => taus.len(),
            _ => nms.len(),
        };
        let is_set = present.iter().any(|(name, set)| *name == w && *set);
        if is_set && n == 0 {
            c.push(&format!("sweep.{w}"), "sweep is empty");
        }
    }

    let Some(timing) = timing else { return };
    let drive = cfg.drive_rf_hz();
    let compiled = match cfg.scenario {
        Scenario::PdmrSweep if rf.iter().all(|&v| v > 0.0) => {
            compile_pdmr(&rf.iter().map(|v| v * 1e6).collect::<Vec<_>>(), timing).map(|_| ())
        }
        Scenario::RabiSweep if durations.iter().all(|&v| v >= 0.0) => compile_rabi(
            &durations.iter().map(|v| v * 1e-9).collect::<Vec<_>>(),
            drive,
            timing,
        )
        .map(|_| ()),
        Scenario::HahnEcho if taus.iter().all(|&v| v >= 0.0) => compile_hahn(
            &taus.iter().map(|v| v * 1e-6).collect::<Vec<_>>(),
            drive,
            timing,
        )
        .map(|_| ()),
        Scenario::WavelengthSweep => {
            if rabi.is_empty() {
                c.push(
                    "sweep.rabi_duration_ns",
                    "required by scenario wavelength_sweep",
                );
                Ok(())
            } else if rabi.iter().all(|&v| v >= 0.0) {
                compile_rabi(
                    &rabi.iter().map(|v| v * 1e-9).collect::<Vec<_>>(),
                    drive,
                    timing,
                )
                .map(|_| ())
            } else {
                c.push("sweep.rabi_duration_ns", "durations must be >= 0");
                Ok(())
            }
        }
        _ => Ok(()),
    };
    if let Err(e) = compiled {
        pulse_violation(c, e);
    }
}
