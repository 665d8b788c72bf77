use std::f64::consts::PI;

use nalgebra::Matrix4;
use pdmr_core::analysis::*;
use pdmr_core::detector::{TraceKind, TraceRecord};
use pdmr_core::spin::{ground_transition_frequencies, SpinHamiltonianParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn lorentz(x: f64, a: f64, x0: f64, w: f64) -> f64 {
    let hw2 = (w / 2.0).powi(2);
    a * hw2 / ((x - x0).powi(2) + hw2)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn single_lorentzian_recovered() {
    let x = linspace(50e6, 90e6, 201);
    let y: Vec<f64> = x.iter().map(|&v| lorentz(v, 1.0, 70e6, 5e6)).collect();
    let fit = fit_multi_lorentzian(&x, &y, 1, &LorentzianInit::Extrema).unwrap();
    assert!(fit.converged);
    assert!(rel(fit.get("amp_1").unwrap(), 1.0) < 1e-6);
    assert!(rel(fit.get("center_1").unwrap(), 70e6) < 1e-6);
    assert!(rel(fit.get("fwhm_1").unwrap(), 5e6) < 1e-6);
    assert!(fit.get("offset").unwrap().abs() < 1e-6);
}

/// Ground quartet energies from a dense spin-3/2 Hamiltonian, eigen-decomposed.
fn oracle_transitions(d_hz: f64, gamma: f64, b0: f64) -> (f64, f64) {
    let sz = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.5, 0.5, -0.5, -1.5));
    let h = sz * sz * d_hz - Matrix4::identity() * (1.25 * d_hz) + sz * (gamma * b0);
    let eig = h.symmetric_eigen();
    let mut e: Vec<(f64, f64)> = (0..4)
        .map(|i| {
            let v = eig.eigenvectors.column(i);
            let m = (v.transpose() * sz * v)[(0, 0)];
            (m, eig.eigenvalues[i])
        })
        .collect();
    e.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let energy = |m: f64| e.iter().find(|p| (p.0 - m).abs() < 1e-6).unwrap().1;
    let a = (energy(1.5) - energy(0.5)).abs();
    let b = (energy(-1.5) - energy(-0.5)).abs();
    (a.min(b), a.max(b))
}

#[test]
fn two_peak_spectrum_matches_zeeman_oracle() {
    let params = SpinHamiltonianParams {
        b0_t: 5e-3,
        ..Default::default()
    };
    let (f1, f2) = ground_transition_frequencies(&params);
    let (o1, o2) = oracle_transitions(params.zfs_d_hz, params.gamma_hz_per_t, 5e-3);
    assert!((f1 - o1).abs() < 1.0 && (f2 - o2).abs() < 1.0);
    let x = linspace(0.0, 400e6, 401);
    let y: Vec<f64> = x
        .iter()
        .map(|&v| 1.0 + lorentz(v, 3e-4, f1, 8e6) + lorentz(v, 2.5e-4, f2, 8e6))
        .collect();
    let fit = fit_multi_lorentzian(&x, &y, 2, &LorentzianInit::Extrema).unwrap();
    assert!(fit.converged);
    assert!((fit.get("center_1").unwrap() - o1).abs() < 0.5e6);
    assert!((fit.get("center_2").unwrap() - o2).abs() < 0.5e6);
}

#[test]
fn three_peaks_with_negative_dip() {
    let x = linspace(40e6, 100e6, 241);
    let y: Vec<f64> = x
        .iter()
        .map(|&v| {
            lorentz(v, 1.0, 60e6, 4e6) + lorentz(v, -0.4, 70e6, 3e6) + lorentz(v, 0.8, 80e6, 4e6)
        })
        .collect();
    let fit = fit_multi_lorentzian(&x, &y, 3, &LorentzianInit::Extrema).unwrap();
    assert!(fit.converged);
    let amps: Vec<f64> = (1..=3)
        .map(|i| fit.get(&format!("amp_{i}")).unwrap())
        .collect();
    assert_eq!(amps.iter().filter(|a| **a < 0.0).count(), 1);
    assert!((fit.get("center_2").unwrap() - 70e6).abs() < 1e3);
}

#[test]
fn lorentzian_rejects_too_few_distinct_points() {
    let x = vec![1.0, 1.0, 2.0, 2.0, 3.0];
    let y = vec![0.0, 0.0, 1.0, 1.0, 0.0];
    assert!(matches!(
        fit_multi_lorentzian(&x, &y, 1, &LorentzianInit::Extrema),
        Err(AnalysisError::DegenerateData(_))
    ));
    assert!(matches!(
        fit_multi_lorentzian(&x, &y, 4, &LorentzianInit::Extrema),
        Err(AnalysisError::InvalidInput(_))
    ));
}

#[test]
fn explicit_centers_are_honoured() {
    let x = linspace(0.0, 10.0, 101);
    let y: Vec<f64> = x
        .iter()
        .map(|&v| lorentz(v, 1.0, 3.0, 1.0) + lorentz(v, 1.0, 7.0, 1.0))
        .collect();
    let fit = fit_multi_lorentzian(&x, &y, 2, &LorentzianInit::Centers(vec![2.8, 7.3])).unwrap();
    assert!(rel(fit.get("center_1").unwrap(), 3.0) < 1e-6);
    assert!(rel(fit.get("center_2").unwrap(), 7.0) < 1e-6);
}

fn damped(t: f64, f: f64, tau: f64, a: f64, phi: f64, c: f64) -> f64 {
    c + a * (-t / tau).exp() * (2.0 * PI * f * t + phi).sin()
}

#[test]
fn damped_sine_recovered() {
    let t = linspace(0.0, 10e-6, 201);
    let y: Vec<f64> = t
        .iter()
        .map(|&v| damped(v, 1e6, 5e-6, 1.0, 0.3, 0.1))
        .collect();
    let fit = fit_damped_sine(&t, &y).unwrap();
    assert!(fit.converged);
    assert!(rel(fit.get("freq").unwrap(), 1e6) < 1e-3);
    assert!(rel(fit.get("tau").unwrap(), 5e-6) < 1e-3);
    assert!((fit.get("phase").unwrap() - 0.3).abs() < 1e-6);
}

#[test]
fn damped_sine_needs_oscillation() {
    let t = linspace(0.0, 1.0, 20);
    let flat = vec![2.0; 20];
    assert_eq!(
        fit_damped_sine(&t, &flat),
        Err(AnalysisError::NoOscillation)
    );
    let ramp: Vec<f64> = t.iter().map(|v| v * 3.0).collect();
    assert!(fit_damped_sine(&t, &ramp).is_err());
    assert!(matches!(
        fit_damped_sine(&t[..5], &ramp[..5]),
        Err(AnalysisError::DegenerateData(_))
    ));
}

#[test]
fn exp_decay_recovered() {
    let t = linspace(0.0, 30e-6, 40);
    let y: Vec<f64> = t.iter().map(|&v| 0.2 + 1.5 * (-v / 7e-6).exp()).collect();
    let fit = fit_exp_decay(&t, &y).unwrap();
    assert!(fit.converged);
    assert!(rel(fit.get("tau").unwrap(), 7e-6) < 1e-3);
}

#[test]
fn flat_decay_is_flagged() {
    let t = linspace(0.0, 1.0, 10);
    let fit = fit_exp_decay(&t, &[0.5; 10]).unwrap();
    assert!(!fit.converged);
    assert_eq!(fit.get("amp"), Some(0.0));
    assert!(fit.error("tau").unwrap().is_infinite());
}

#[test]
fn fit_csv_rows() {
    let t = linspace(0.0, 5.0, 20);
    let y: Vec<f64> = t.iter().map(|&v| (-v).exp()).collect();
    let fit = fit_exp_decay(&t, &y).unwrap();
    let rows = fit.csv_rows();
    assert_eq!(rows.lines().count(), 3);
    assert!(rows.starts_with("exp_decay,tau,"));
    assert_eq!(
        FIT_CSV_HEADER.split(',').count(),
        rows.lines().next().unwrap().split(',').count()
    );
}

#[test]
fn single_precision_fit() {
    let t: Vec<f32> = (0..30).map(|i| i as f32 * 0.2).collect();
    let y: Vec<f32> = t.iter().map(|&v| 1.0 + 2.0 * (-v / 1.5).exp()).collect();
    let fit = fit_exp_decay(&t, &y).unwrap();
    assert!((fit.get("tau").unwrap() - 1.5).abs() < 1e-3);
}

#[test]
fn fft_finds_tone() {
    let dt = 0.5e-6;
    let t: Vec<f64> = (0..200).map(|i| i as f64 * dt).collect();
    let y: Vec<f64> = t.iter().map(|&v| (2.0 * PI * 175e3 * v).sin()).collect();
    let s = fft_spectrum(&t, &y).unwrap();
    let (f, _) = s.peak().unwrap();
    assert!((170e3..=180e3).contains(&f), "peak {f}");
    assert!(s.freqs.windows(2).all(|w| w[1] > w[0]) && s.freqs[0] == 0.0);
}

#[test]
fn fft_of_constant_is_zero() {
    let t: Vec<f64> = (0..64).map(|i| i as f64 * 0.1).collect();
    let s = fft_spectrum(&t, &[0.3; 64]).unwrap();
    assert!(s.amplitudes.iter().all(|&a| a == 0.0));
}

#[test]
fn fft_parseval() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [63, 64, 257] {
        let t: Vec<f64> = (0..n).map(|i| i as f64 * 1e-6).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let s = fft_spectrum(&t, &y).unwrap();
        let direct: f64 = windowed(&y).iter().map(|v| v * v).sum();
        assert!(rel(s.energy(), direct) < 1e-9);
    }
}

#[test]
fn fft_rejects_nonuniform_time() {
    let t = vec![0.0, 1.0, 2.0, 3.5, 4.0];
    assert!(matches!(
        fft_spectrum(&t, &[0.0; 5]),
        Err(AnalysisError::NonUniformSampling { index: 3 })
    ));
}

#[test]
fn spin_count_ranges() {
    let (lo, hi) = estimate_spin_count(80e3f64, (3e3, 4e3), 0.5);
    assert!((lo - 40.0).abs() < 1e-9 && (hi - 160.0 / 3.0).abs() < 1e-9);
    let (lo, hi) = estimate_spin_count(9.0 * 80e3f64, (3e3, 4e3), 0.5);
    assert!((lo - 360.0).abs() < 1e-6 && (hi - 480.0).abs() < 1e-6);
}

fn synthetic_trace(
    n_env: usize,
    per_half: usize,
    on: f64,
    off: f64,
    sigma: f64,
    seed: u64,
) -> TraceRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma.max(1e-300)).unwrap();
    let mut tr = TraceRecord::new(TraceKind::Current, 0, seed);
    let mut t = 0.0;
    for _ in 0..n_env {
        for (label, level) in [(true, on), (false, off)] {
            for _ in 0..per_half {
                let v = level
                    + if sigma > 0.0 {
                        noise.sample(&mut rng)
                    } else {
                        0.0
                    };
                tr.samples.push(pdmr_core::detector::TraceSample {
                    t_s: t,
                    value: v,
                    rf_on: label,
                });
                t += 1e-3;
            }
        }
    }
    tr
}

#[test]
fn lockin_reproduces_contrast_definition() {
    for (on, expect) in [(1.0, 0.0), (1.00025, 0.025), (1.00008, 0.008)] {
        let tr = synthetic_trace(4, 50, on * 1e-9, 1e-9, 0.0, 0);
        let c = lockin_contrast(&tr, DEFAULT_SKIP_FRACTION).unwrap();
        assert!((c.contrast_percent - expect).abs() < 1e-9);
        assert_eq!(c.contrast_percent, (c.s_rf / c.s_0 - 1.0) * 100.0);
        assert_eq!(c.n_envelopes, 4);
    }
}

#[test]
fn lockin_skips_settling() {
    let mut tr = synthetic_trace(2, 10, 2.0, 1.0, 0.0, 0);
    // corrupt the first sample of every half period
    for i in (0..tr.samples.len()).step_by(10) {
        tr.samples[i].value = 100.0;
    }
    let c = lockin_contrast(&tr, 0.2).unwrap();
    assert!((c.contrast_percent - 100.0).abs() < 1e-12);
}

#[test]
fn lockin_missing_phase() {
    let mut tr = synthetic_trace(1, 10, 1.0, 1.0, 0.0, 0);
    tr.samples.retain(|s| s.rf_on);
    assert_eq!(
        lockin_contrast(&tr, 0.2),
        Err(AnalysisError::MissingPhase("rf_off"))
    );
    let tr = synthetic_trace(1, 10, 1.0, -1.0, 0.0, 0);
    assert!(matches!(
        lockin_contrast(&tr, 0.2),
        Err(AnalysisError::NonPositiveReference(_))
    ));
}

#[test]
fn lockin_null_over_seeds() {
    let results: Vec<f64> = (0..100)
        .map(|s| {
            lockin_contrast(&synthetic_trace(8, 40, 1.0, 1.0, 0.01, s), 0.2)
                .unwrap()
                .contrast_percent
        })
        .collect();
    let n = results.len() as f64;
    let mean = results.iter().sum::<f64>() / n;
    let sd = (results.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() < 3.0 * sd / n.sqrt(), "mean {mean} sd {sd}");
}

#[test]
fn lockin_std_error_tracks_scatter() {
    let c = lockin_contrast(&synthetic_trace(50, 100, 1.0, 1.0, 0.01, 3), 0.2).unwrap();
    // per half-period mean has sigma 0.01/sqrt(80); contrast difference of two
    let expect = 100.0 * 0.01 * (2.0f64 / 80.0).sqrt() / 50f64.sqrt();
    assert!(
        rel(c.std_error, expect) < 0.3,
        "{} vs {expect}",
        c.std_error
    );
}

/// Pulls of `(fit - true) / error` for one parameter over noisy trials.
fn pull_sd(pulls: &[f64]) -> f64 {
    let n = pulls.len() as f64;
    let m = pulls.iter().sum::<f64>() / n;
    (pulls.iter().map(|p| (p - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[test]
fn fit_errors_are_calibrated() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise = Normal::new(0.0, 0.02).unwrap();
    let x = linspace(50e6, 90e6, 81);
    let t = linspace(0.0, 10e-6, 101);
    let te = linspace(0.0, 30e-6, 30);
    let (mut p_lor, mut p_sine, mut p_exp) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..200 {
        let y: Vec<f64> = x
            .iter()
            .map(|&v| lorentz(v, 1.0, 70e6, 5e6) + noise.sample(&mut rng))
            .collect();
        let f = fit_multi_lorentzian(&x, &y, 1, &LorentzianInit::Extrema).unwrap();
        p_lor.push((f.get("center_1").unwrap() - 70e6) / f.error("center_1").unwrap());
        let y: Vec<f64> = t
            .iter()
            .map(|&v| damped(v, 1e6, 5e-6, 1.0, 0.2, 0.0) + noise.sample(&mut rng))
            .collect();
        let f = fit_damped_sine(&t, &y).unwrap();
        p_sine.push((f.get("freq").unwrap() - 1e6) / f.error("freq").unwrap());
        let y: Vec<f64> = te
            .iter()
            .map(|&v| 1.0 * (-v / 7e-6).exp() + noise.sample(&mut rng))
            .collect();
        let f = fit_exp_decay(&te, &y).unwrap();
        p_exp.push((f.get("tau").unwrap() - 7e-6) / f.error("tau").unwrap());
    }
    for pulls in [&p_lor, &p_sine, &p_exp] {
        let sd = pull_sd(pulls);
        assert!((0.7..=1.4).contains(&sd), "pull sd {sd}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    // Identifiable range: one or two peaks inside the central 70 % of the axis,
    // FWHM 2-15 % of the span, separated by at least two FWHM.
    #[test]
    fn lorentzian_oracle(a1 in 0.3f64..3.0, s1 in prop::bool::ANY, c1 in 0.15f64..0.4, w1 in 0.02f64..0.15,
                         a2 in 0.3f64..3.0, c2 in 0.6f64..0.85, w2 in 0.02f64..0.15, off in -1.0f64..1.0, two in prop::bool::ANY) {
        let a1 = if s1 { a1 } else { -a1 };
        let x = linspace(0.0, 1.0, 301);
        let k = if two { 2 } else { 1 };
        let y: Vec<f64> = x.iter().map(|&v| off + lorentz(v, a1, c1, w1) + if two { lorentz(v, a2, c2, w2) } else { 0.0 }).collect();
        let fit = fit_multi_lorentzian(&x, &y, k, &LorentzianInit::Extrema).unwrap();
        prop_assert!(fit.converged);
        prop_assert!(rel(fit.get("amp_1").unwrap(), a1) < 1e-4);
        prop_assert!(rel(fit.get("center_1").unwrap(), c1) < 1e-4);
        prop_assert!(rel(fit.get("fwhm_1").unwrap(), w1) < 1e-4);
        prop_assert!((fit.get("offset").unwrap() - off).abs() < 1e-4 * (1.0 + off.abs()));
        if two {
            prop_assert!(rel(fit.get("amp_2").unwrap(), a2) < 1e-4);
            prop_assert!(rel(fit.get("center_2").unwrap(), c2) < 1e-4);
            prop_assert!(rel(fit.get("fwhm_2").unwrap(), w2) < 1e-4);
        }
    }

    // Identifiable range: 2-10 periods in the window, at least 10 samples per
    // period, decay time 0.5-5 windows.
    #[test]
    fn damped_sine_oracle(cycles in 2.0f64..10.0, tau in 0.5f64..5.0, amp in 0.2f64..5.0, phi in -3.0f64..3.0, c in -2.0f64..2.0) {
        let t = linspace(0.0, 1e-5, 201);
        let f = cycles / 1e-5;
        let tau = tau * 1e-5;
        let y: Vec<f64> = t.iter().map(|&v| damped(v, f, tau, amp, phi, c)).collect();
        let fit = fit_damped_sine(&t, &y).unwrap();
        prop_assert!(fit.converged);
        prop_assert!(rel(fit.get("freq").unwrap(), f) < 1e-4);
        prop_assert!(rel(fit.get("tau").unwrap(), tau) < 1e-4);
        prop_assert!(rel(fit.get("amp").unwrap(), amp) < 1e-4);
        let dphi = (fit.get("phase").unwrap() - phi + PI).rem_euclid(2.0 * PI) - PI;
        prop_assert!(dphi.abs() < 1e-4);
        prop_assert!((fit.get("offset").unwrap() - c).abs() < 1e-4 * (1.0 + c.abs()));
    }

    // Identifiable range: decay time 5-100 % of the window.
    #[test]
    fn exp_decay_oracle(tau in 0.05f64..1.0, amp in -5.0f64..5.0, c in -2.0f64..2.0) {
        prop_assume!(amp.abs() > 0.1);
        let t = linspace(0.0, 30e-6, 40);
        let tau = tau * 30e-6;
        let y: Vec<f64> = t.iter().map(|&v| c + amp * (-v / tau).exp()).collect();
        let fit = fit_exp_decay(&t, &y).unwrap();
        prop_assert!(fit.converged);
        prop_assert!(rel(fit.get("tau").unwrap(), tau) < 1e-4);
        prop_assert!(rel(fit.get("amp").unwrap(), amp) < 1e-4);
        prop_assert!((fit.get("offset").unwrap() - c).abs() < 1e-4 * (1.0 + c.abs()));
    }
}
