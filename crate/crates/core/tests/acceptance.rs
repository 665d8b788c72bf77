//! End-to-end acceptance checks. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion; exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use pdmr_core::analysis::*;
use pdmr_core::detector::{shot_noise, shot_noise_sigma, NoiseConfig};
use pdmr_core::experiment::*;
use pdmr_core::optics::{EnsembleSpec, OpticalRates};
use pdmr_core::pulse::{compile_pdmr, run_sequence, DetectorBundle, PhysicsBundle, TimingConfig};
use pdmr_core::spin::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn config(name: &str) -> ScenarioConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn run(cfg: &ScenarioConfig) -> RunReport {
    run_scenario(cfg, &RunOptions::default()).unwrap_or_else(|e| panic!("{}: {e}", cfg.scenario))
}

fn fitted(report: &RunReport, r: Readout) -> Result<&FitResult<f64>, String> {
    match report.fits.iter().find(|f| f.readout == r) {
        Some(FitRecord { outcome: Ok(f), .. }) if f.converged => Ok(f),
        Some(FitRecord { outcome: Ok(_), .. }) => Err(format!("{} fit did not converge", r.name())),
        Some(FitRecord {
            outcome: Err(e), ..
        }) => Err(format!("{} fit failed: {e}", r.name())),
        None => Err(format!("no {} fit", r.name())),
    }
}

fn require(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn zero_field_resonance() -> Check {
    let cfg = config("pdmr_sweep.toml");
    let start = Instant::now();
    let report = run(&cfg);
    let secs = start.elapsed().as_secs_f64();
    let mut parts = Vec::new();
    let mut ok = cfg.n_envelopes == 64 && !cfg.noise.enabled;
    for r in [Readout::Electrical, Readout::Optical] {
        let fit = fitted(&report, r)?;
        let c = fit.get("center_1").unwrap();
        ok &= (c - 70e6).abs() <= 1e6;
        parts.push(format!("{} center {:.3} MHz", r.name(), c * 1e-6));
    }
    ok &= secs < 60.0;
    require(
        ok,
        format!(
            "{}, {secs:.1} s at {} envelopes",
            parts.join(", "),
            cfg.n_envelopes
        ),
    )
}

/// Eigen-decomposition of `D (Sz² - 5/4) + γ B Sz` for S = 3/2; returns the
/// two |Δm| = 1 gaps ending on the ±3/2 states.
fn zeeman_oracle(d_hz: f64, gamma: f64, b: f64) -> [f64; 2] {
    let sz = DMatrix::from_diagonal(&DVector::from_vec(vec![1.5, 0.5, -0.5, -1.5]));
    let h = (&sz * &sz - DMatrix::<f64>::identity(4, 4) * 1.25) * d_hz + &sz * (gamma * b);
    let eig = h.symmetric_eigen();
    let mut e = [0.0; 4];
    for k in 0..4 {
        let v = eig.eigenvectors.column(k);
        let m = (0..4)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
            .unwrap();
        e[m] = eig.eigenvalues[k];
    }
    let mut f = [(e[0] - e[1]).abs(), (e[3] - e[2]).abs()];
    f.sort_by(f64::total_cmp);
    f
}

fn zeeman_split() -> Check {
    let cfg = config("pdmr_zeeman_5mT.toml");
    let p = &cfg.physics;
    let oracle = zeeman_oracle(p.zfs_d_mhz * 1e6, p.gamma_ghz_per_t * 1e9, p.b0_mt * 1e-3);
    let report = run(&cfg);
    let fit = fitted(&report, Readout::Electrical)?;
    let mut centers = [
        fit.get("center_1").ok_or("one peak fitted")?,
        fit.get("center_2").ok_or("one peak fitted")?,
    ];
    centers.sort_by(f64::total_cmp);
    let ok = (p.b0_mt - 5.0).abs() < 1e-12
        && centers
            .iter()
            .zip(&oracle)
            .all(|(c, o)| (c - o).abs() <= 0.5e6);
    require(
        ok,
        format!(
            "fitted {:.3}/{:.3} MHz, oracle {:.3}/{:.3} MHz",
            centers[0] * 1e-6,
            centers[1] * 1e-6,
            oracle[0] * 1e-6,
            oracle[1] * 1e-6
        ),
    )
}

fn contrast_calibration() -> Check {
    let sicoi = run(&config("pdmr_sweep.toml"));
    let a_sicoi = fitted(&sicoi, Readout::Electrical)?.get("amp_1").unwrap();

    let mut bulk = config("pdmr_sweep.toml");
    bulk.preset = Preset::Bulk;
    bulk.physics.background_scale = None;
    bulk.readout = ReadoutMode::Electrical;
    bulk.n_envelopes = 16;
    bulk.sweep.rf_mhz = Some(AxisSpec::Range(AxisRange {
        start: 64.0,
        stop: 76.0,
        points: 25,
    }));
    let bulk = run(&bulk);
    let a_bulk = fitted(&bulk, Readout::Electrical)?.get("amp_1").unwrap();

    let rabi = run(&config("rabi_sweep.toml"));
    let c_opt = 2.0 * fitted(&rabi, Readout::Optical)?.get("amp").unwrap();

    let ok = (0.015..=0.035).contains(&a_sicoi)
        && (0.004..=0.012).contains(&a_bulk)
        && (0.5..=2.0).contains(&c_opt);
    require(
        ok,
        format!("sicoi PDMR {a_sicoi:.4}%, bulk PDMR {a_bulk:.4}%, optical Rabi {c_opt:.3}%"),
    )
}

fn rabi_frequency(rabi_mhz: f64, drive_mhz: f64, expected_mhz: f64) -> Result<f64, String> {
    let mut cfg = ScenarioConfig::new(Scenario::RabiSweep);
    cfg.seed = 21;
    cfg.n_envelopes = 1;
    cfg.noise.enabled = false;
    cfg.timing.rabi_mhz = rabi_mhz;
    cfg.sweep.drive_rf_mhz = Some(drive_mhz);
    let span_ns = (3.0 / expected_mhz * 1e3).min(3900.0);
    let d: Vec<f64> = (0..40)
        .map(|i| (span_ns * i as f64 / 39.0).round())
        .collect();
    cfg.sweep.mw_duration_ns = Some(AxisSpec::Values(d));
    let report = run(&cfg);
    Ok(fitted(&report, Readout::Electrical)?.get("freq").unwrap())
}

fn rabi_physics() -> Check {
    let amps = [0.4, 0.8, 1.6, 2.4, 4.0];
    let freqs = amps
        .iter()
        .map(|&a| rabi_frequency(a, 70.0, a))
        .collect::<Result<Vec<f64>, _>>()?;
    let y: Vec<f64> = freqs.iter().map(|f| f * 1e-6).collect();
    let n = amps.len() as f64;
    let (mx, my) = (amps.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = amps.iter().zip(&y).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = amps.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = amps
        .iter()
        .zip(&y)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let ss_tot: f64 = y.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = 1.0 - ss_res / ss_tot;

    let general = rabi_frequency(1.0, 71.0, 2f64.sqrt())? * 1e-6;
    let rel = (general - 2f64.sqrt()).abs() / 2f64.sqrt();
    require(
        r2 > 0.99 && rel <= 0.01,
        format!(
            "slope {slope:.4}, R² {r2:.6}; detuned 1 MHz: {general:.4} MHz vs {:.4} MHz",
            2f64.sqrt()
        ),
    )
}

fn hahn_echo() -> Check {
    let cfg = config("hahn_echo.toml");
    let points = cfg
        .sweep
        .tau_us
        .as_ref()
        .map(|a| a.values().len())
        .unwrap_or(0);
    let setup_ok = cfg.noise.enabled
        && cfg.n_envelopes == 256
        && points == 20
        && (cfg.physics.t2_us - 7.0).abs() < 1e-12;
    let report = run(&cfg);
    let fit = fitted(&report, Readout::Optical)?;
    let t2 = fit.get("tau").unwrap() * 1e6;
    let err = fit.error("tau").unwrap() * 1e6;
    require(
        setup_ok && (6.65..=7.35).contains(&t2),
        format!("T2 = {t2:.3} ± {err:.3} µs over {points} points"),
    )
}

fn echo_fft() -> Check {
    let cfg = config("hahn_echo_modulated.toml");
    let report = run(&cfg);
    let (_, spec) = report.spectra.first().ok_or("no residual spectrum")?;
    let (f, a) = spec.peak().ok_or("empty spectrum")?;
    require(
        (150e3..=200e3).contains(&f),
        format!("dominant peak {:.1} kHz (amplitude {a:.3e})", f * 1e-3),
    )
}

fn wavelength_ordering() -> Check {
    let report = run(&config("wavelength_sweep.toml"));
    let mut c = Vec::new();
    for w in &report.wavelengths {
        match &w.electrical {
            Some(Ok(e)) => c.push((w.wavelength_nm, e.contrast_percent)),
            Some(Err(e)) => return Err(format!("{} nm: {e}", w.wavelength_nm)),
            None => return Err("no electrical readout".into()),
        }
    }
    let at = |nm: f64| {
        c.iter()
            .find(|p| (p.0 - nm).abs() < 1e-9)
            .map(|p| p.1)
            .ok_or(format!("{nm} nm not swept"))
    };
    let (c780, c900, c940, c990) = (at(780.0)?, at(900.0)?, at(940.0)?, at(990.0)?);
    let best = c
        .iter()
        .copied()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let ok = c900 > c780 && (best.0 - 917.0).abs() <= 20.0 && c990 > 0.0 && c990 < c940;
    require(
        ok,
        format!(
            "780 {c780:.4}%, 900 {c900:.4}%, max {:.4}% at {:.0} nm, 940 {c940:.4}%, 990 {c990:.4}%",
            best.1, best.0
        ),
    )
}

fn spin_count() -> Check {
    let (lo, hi): (f64, f64) = estimate_spin_count(80e3, (3e3, 4e3), 0.5);
    let (lo9, hi9) = (9.0 * lo, 9.0 * hi);
    let independent: (f64, f64) = (80e3 / (4e3 * 0.5), 80e3 / (3e3 * 0.5));
    let ok = (lo - independent.0).abs() < 1e-9
        && (hi - independent.1).abs() < 1e-9
        && lo <= 40.0 + 1e-9
        && hi >= 50.0
        && lo9 <= 360.0 + 1e-9
        && hi9 >= 450.0
        && (lo - 40.0).abs() < 1e-9
        && (lo9 - 360.0).abs() < 1e-6;
    require(
        ok,
        format!("focused {lo:.1}-{hi:.1} spins, 3x spot {lo9:.0}-{hi9:.0} spins"),
    )
}

fn confocal() -> Check {
    let cfg = config("confocal_scan.toml");
    let report = run(&cfg);
    let max_of = |d: f64| {
        report
            .confocal
            .iter()
            .find(|i| i.spot_diameter_um == d)
            .map(|i| i.max())
            .ok_or(format!("no {d} µm image"))
    };
    let (focused, defocused) = (max_of(1.0)?, max_of(3.0)?);
    let mask = ElectrodeMask::from_config(&cfg.confocal);
    let images = |d: f64| -> Vec<ConfocalImage> {
        (0..8)
            .map(|s| synthesize_confocal(&cfg, &mask, d, 1000 + s).unwrap())
            .collect()
    };
    let v_f = pixel_relative_variance(&images(1.0));
    let v_d = pixel_relative_variance(&images(3.0));
    let ok = (focused - 1.2e-9).abs() <= 0.15 * 1.2e-9
        && (defocused - 0.8e-9).abs() <= 0.15 * 0.8e-9
        && v_d < v_f;
    require(
        ok,
        format!(
            "max {:.3} nA focused, {:.3} nA defocused; relative variance {v_f:.2e} vs {v_d:.2e}",
            focused * 1e9,
            defocused * 1e9
        ),
    )
}

fn null_bundle() -> (PhysicsBundle, DetectorBundle) {
    let phys = PhysicsBundle {
        spin: SpinHamiltonianParams {
            rf_freq_hz: 70e6,
            ..Default::default()
        },
        rates: DissipatorSet::intrinsic_default(),
        optical: OpticalRates {
            pump: 2.0e8,
            ionize: 1.0e8,
            recombine: 1e8,
        },
        auto_frame: true,
        ensemble: EnsembleSpec {
            n_defects: 45,
            collection_efficiency: 0.01,
            ..EnsembleSpec::default()
        },
        background_current_a: 2.5e-10,
    };
    (
        phys,
        DetectorBundle {
            noise: NoiseConfig::default(),
            optical: false,
            ..DetectorBundle::default()
        },
    )
}

fn numerical_hygiene() -> Check {
    let mut notes = Vec::new();

    let params = SpinHamiltonianParams {
        b0_t: 5e-3,
        rabi_omega: 2.0 * PI * 3e6,
        ..Default::default()
    };
    let h: LevelMatrix<f64> = build_rotating_hamiltonian(&params);
    let rates = DissipatorSet::intrinsic_default().with_optical(2e8, 1e8, 1e8);
    let stepper = Rk4Stepper::new(&h, &rates).audit();
    let mut rho = DensityMatrix::mixed_ground();
    let mut min_eig = f64::INFINITY;
    for _ in 0..1000 {
        stepper.step(&mut rho, 1e-9).map_err(|e| e.to_string())?;
        min_eig = min_eig.min(rho.min_eigenvalue());
    }
    let drift = (rho.trace() - 1.0).abs();
    let mut ok = drift < 1e-9 && min_eig >= -1e-8;
    notes.push(format!(
        "trace drift {drift:.1e}, min eigenvalue {min_eig:.1e}"
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let draws: Vec<f64> = (0..100_000)
        .map(|_| shot_noise(1e-9, 1e3, 0.0, &mut rng))
        .collect();
    let m = draws.iter().sum::<f64>() / draws.len() as f64;
    let sd = (draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt();
    let sigma = shot_noise_sigma(1e-9, 1e3, 0.0);
    let shot_rel = (sd - sigma).abs() / sigma;
    ok &= shot_rel < 0.02;
    notes.push(format!("shot σ off by {:.2}%", shot_rel * 100.0));

    let (phys, det) = null_bundle();
    let mut timing = TimingConfig {
        envelope_freq_hz: 800.0,
        ..TimingConfig::default()
    };
    timing.mw.pi_ns = 0;
    let seq = &compile_pdmr(&[70e6], &timing).unwrap()[0];
    let nulls: Vec<f64> = (0..100)
        .map(|s| {
            let tr = run_sequence(seq, &phys, &det, 4, s).unwrap();
            lockin_contrast(&tr.current, DEFAULT_SKIP_FRACTION)
                .unwrap()
                .contrast_percent
        })
        .collect();
    let nm = nulls.iter().sum::<f64>() / 100.0;
    let nsd = (nulls.iter().map(|x| (x - nm).powi(2)).sum::<f64>() / 99.0).sqrt();
    let se = nsd / 10.0;
    ok &= nm.abs() < 3.0 * se;
    notes.push(format!("null contrast {nm:.2e}% ± {se:.1e}%"));

    let mut cfg = ScenarioConfig::new(Scenario::PdmrSweep);
    cfg.readout = ReadoutMode::Both;
    cfg.timing.envelope_hz = 800.0;
    cfg.n_envelopes = 4;
    cfg.seed = 8;
    cfg.sweep.rf_mhz = Some(AxisSpec::Range(AxisRange {
        start: 66.0,
        stop: 74.0,
        points: 9,
    }));
    let dirs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for d in &dirs {
        run_scenario(
            &cfg,
            &RunOptions {
                out_dir: Some(d.path().into()),
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
    }
    let read = |d: &tempfile::TempDir, f: &str| std::fs::read(d.path().join(f)).unwrap_or_default();
    let files = ["sweep.csv", "fits_electrical.csv", "fits_optical.csv"];
    let identical = files.iter().all(|f| {
        let a = read(&dirs[0], f);
        !a.is_empty() && a == read(&dirs[1], f)
    });
    ok &= identical;
    notes.push(format!("reruns byte-identical: {identical}"));

    require(ok, notes.join("; "))
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn fitter_oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut worst = [0.0f64; 3];
    let mut failures = Vec::new();

    let x = linspace(0.0, 1.0, 301);
    for case in 0..100 {
        let two = rng.gen_bool(0.5);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let p1 = (
            sign * rng.gen_range(0.3..3.0),
            rng.gen_range(0.15..0.4),
            rng.gen_range(0.02..0.15),
        );
        let p2 = (
            rng.gen_range(0.3..3.0),
            rng.gen_range(0.6..0.85),
            rng.gen_range(0.02..0.15),
        );
        let off: f64 = rng.gen_range(-1.0..1.0);
        let lor = |v: f64, (a, c, w): (f64, f64, f64)| {
            a * (w / 2.0).powi(2) / ((v - c).powi(2) + (w / 2.0).powi(2))
        };
        let y: Vec<f64> = x
            .iter()
            .map(|&v| off + lor(v, p1) + if two { lor(v, p2) } else { 0.0 })
            .collect();
        let k = if two { 2 } else { 1 };
        match fit_multi_lorentzian(&x, &y, k, &LorentzianInit::Extrema) {
            Ok(f) if f.converged => {
                let mut errs = vec![(f.get("offset").unwrap() - off).abs() / (1.0 + off.abs())];
                let truth = if two { vec![p1, p2] } else { vec![p1] };
                for (i, (a, c, w)) in truth.into_iter().enumerate() {
                    let i = i + 1;
                    errs.push(rel(f.get(&format!("amp_{i}")).unwrap(), a));
                    errs.push(rel(f.get(&format!("center_{i}")).unwrap(), c));
                    errs.push(rel(f.get(&format!("fwhm_{i}")).unwrap(), w));
                }
                worst[0] = errs.into_iter().fold(worst[0], f64::max);
            }
            _ => failures.push(format!("lorentzian case {case}")),
        }
    }

    let t = linspace(0.0, 1e-5, 201);
    for case in 0..100 {
        let f0 = rng.gen_range(2.0..10.0) / 1e-5;
        let tau = rng.gen_range(0.5..5.0) * 1e-5;
        let amp: f64 = rng.gen_range(0.2..5.0);
        let phi: f64 = rng.gen_range(-3.0..3.0);
        let c: f64 = rng.gen_range(-2.0..2.0);
        let y: Vec<f64> = t
            .iter()
            .map(|&v| c + amp * (-v / tau).exp() * (2.0 * PI * f0 * v + phi).sin())
            .collect();
        match fit_damped_sine(&t, &y) {
            Ok(f) if f.converged => {
                let dphi = (f.get("phase").unwrap() - phi + PI).rem_euclid(2.0 * PI) - PI;
                let errs = [
                    rel(f.get("freq").unwrap(), f0),
                    rel(f.get("tau").unwrap(), tau),
                    rel(f.get("amp").unwrap(), amp),
                    dphi.abs(),
                    (f.get("offset").unwrap() - c).abs() / (1.0 + c.abs()),
                ];
                worst[1] = errs.into_iter().fold(worst[1], f64::max);
            }
            _ => failures.push(format!("damped sine case {case}")),
        }
    }

    let te = linspace(0.0, 30e-6, 40);
    for case in 0..100 {
        let tau = rng.gen_range(0.05..1.0) * 30e-6;
        let mag: f64 = rng.gen_range(0.1..5.0);
        let amp = if rng.gen_bool(0.5) { mag } else { -mag };
        let c: f64 = rng.gen_range(-2.0..2.0);
        let y: Vec<f64> = te.iter().map(|&v| c + amp * (-v / tau).exp()).collect();
        match fit_exp_decay(&te, &y) {
            Ok(f) if f.converged => {
                let errs = [
                    rel(f.get("tau").unwrap(), tau),
                    rel(f.get("amp").unwrap(), amp),
                    (f.get("offset").unwrap() - c).abs() / (1.0 + c.abs()),
                ];
                worst[2] = errs.into_iter().fold(worst[2], f64::max);
            }
            _ => failures.push(format!("exponential case {case}")),
        }
    }

    let detail = format!(
        "worst relative error: lorentzian {:.1e}, damped sine {:.1e}, exponential {:.1e}",
        worst[0], worst[1], worst[2]
    );
    if !failures.is_empty() {
        return Err(format!("{detail}; no fit for {}", failures.join(", ")));
    }
    require(worst.iter().all(|w| *w < 1e-4), detail)
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Check);
    let criteria: [Criterion; 11] = [
        ("zero-field resonance", zero_field_resonance),
        ("Zeeman split", zeeman_split),
        ("contrast sign and calibration", contrast_calibration),
        ("Rabi physics", rabi_physics),
        ("Hahn echo", hahn_echo),
        ("echo FFT", echo_fft),
        ("wavelength ordering", wavelength_ordering),
        ("spin count", spin_count),
        ("confocal synthesis", confocal),
        ("numerical hygiene", numerical_hygiene),
        ("fitter oracles", fitter_oracles),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty()
            && !filter
                .iter()
                .any(|f| name.contains(f.as_str()) || *f == n.to_string())
        {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {n:>2} {name}: PASS ({d}) [{secs:.1} s]"),
            Err(d) => {
                failed += 1;
                println!("criterion {n:>2} {name}: FAIL ({d}) [{secs:.1} s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
