use pdmr_core::analysis::lockin_contrast;
use pdmr_core::detector::*;
use pdmr_core::optics::{EnsembleSpec, OpticalRates};
use pdmr_core::pulse::{compile_pdmr, run_sequence, DetectorBundle, PhysicsBundle, TimingConfig};
use pdmr_core::spin::{DissipatorSet, SpinHamiltonianParams};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

#[test]
fn tia_dc_gain_includes_dark_current() {
    let cfg = TiaConfig::default();
    let dt = 1e-6;
    let n = (20.0 * cfg.time_constant() / dt) as usize;
    let v = tia_filter(&vec![1e-9; n], &cfg, dt).unwrap();
    assert!((v[n - 1] - 1.008).abs() < 1e-6, "{}", v[n - 1]);
}

#[test]
fn tia_step_reaches_one_minus_inverse_e_after_one_time_constant() {
    let cfg = TiaConfig {
        dark_current_a: 0.0,
        ..TiaConfig::default()
    };
    let tau = cfg.time_constant();
    assert!((tau - 159.2e-6).abs() < 0.1e-6);
    let dt = tau / 100.0;
    let v = tia_filter(&vec![1e-9; 200], &cfg, dt).unwrap();
    let frac = v[99] / 1.0;
    assert!((frac - 0.632).abs() / 0.632 < 0.01, "{frac}");
}

#[test]
fn tia_without_input_sits_at_dark_level() {
    let cfg = TiaConfig::default();
    let v = tia_filter(&[0.0; 1000], &cfg, 1e-6).unwrap();
    assert!(v.iter().all(|&x| x == cfg.dark_current_a * cfg.gain));
}

#[test]
fn tia_rejects_coarse_steps() {
    let cfg = TiaConfig::default();
    assert!(matches!(
        tia_filter(&[0.0], &cfg, 1e-4),
        Err(DetectorError::DtTooCoarse { .. })
    ));
}

#[test]
fn shot_noise_sigma_values() {
    assert_eq!(shot_noise_sigma(0.0, 1e3, 0.0), 0.0);
    let s = shot_noise_sigma(1e-9, 1e3, 0.0);
    let expected = (2.0 * 1.602176634e-19 * 1e-9 * 1e3f64).sqrt();
    assert!((s - expected).abs() < 1e-20);
    assert!((s - 0.566e-12).abs() < 0.001e-12);
}

#[test]
fn shot_noise_empirical_sigma_and_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let i = 1e-9;
    let draws: Vec<f64> = (0..100_000)
        .map(|_| shot_noise(i, 1e3, 20e-15, &mut rng))
        .collect();
    let (m, sd) = mean_sd(&draws);
    let sigma = shot_noise_sigma(i, 1e3, 20e-15);
    assert!((sd - sigma).abs() / sigma < 0.02, "{sd} vs {sigma}");
    assert!((m - i).abs() < 3.0 * sigma / (draws.len() as f64).sqrt());
}

#[test]
fn electron_counting_agrees_with_gaussian_shot_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let i = 1e-9;
    let draws: Vec<f64> = (0..100_000)
        .map(|_| shot_noise_poisson(i, 1e3, &mut rng))
        .collect();
    let (m, sd) = mean_sd(&draws);
    let sigma = shot_noise_sigma(i, 1e3, 0.0);
    assert!((sd - sigma).abs() / sigma < 0.02, "{sd} vs {sigma}");
    assert!((m - i).abs() < 3.0 * sigma / (draws.len() as f64).sqrt());
}

#[test]
fn laser_factor_is_unbiased() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let draws: Vec<f64> = (0..100_000).map(|_| laser_factor(0.05, &mut rng)).collect();
    let (m, sd) = mean_sd(&draws);
    assert!((m - 1.0).abs() < 3.0 * 0.05 / (draws.len() as f64).sqrt());
    assert!((sd - 0.05).abs() / 0.05 < 0.02);
    assert_eq!(laser_factor(0.0, &mut rng), 1.0);
}

#[test]
fn apd_mean_count_at_80_kcps() {
    let cfg = ApdConfig {
        rise_delay_s: 0.0,
        ..ApdConfig::default()
    };
    let timeline = [(0.0, 1.0, 8e4)];
    let expected = integrate_rate(&timeline, 0.0, cfg.window_s);
    assert!((expected - 0.024).abs() < 1e-12);
    let gates: Vec<f64> = (0..200_000).map(|k| k as f64 * 4e-6).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let counts = apd_counts(&timeline, &cfg, &gates, &mut rng).unwrap();
    let m = counts.iter().sum::<u64>() as f64 / counts.len() as f64;
    assert!(
        (m - 0.024).abs() < 3.0 * (0.024f64 / counts.len() as f64).sqrt(),
        "{m}"
    );
}

#[test]
fn apd_without_light_counts_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let counts = apd_counts(
        &[(0.0, 1.0, 0.0)],
        &ApdConfig::default(),
        &[0.0, 1e-6, 2e-6],
        &mut rng,
    )
    .unwrap();
    assert_eq!(counts, vec![0, 0, 0]);
}

#[test]
fn apd_mean_is_linear_in_window() {
    let timeline = [(0.0, 1.0, 8e4)];
    let a = integrate_rate(&timeline, 0.0, 300e-9);
    let b = integrate_rate(&timeline, 0.0, 600e-9);
    assert!((b - 2.0 * a).abs() < 1e-15);
}

#[test]
fn daq_samples_strictly_periodic_from_zero() {
    // a 300 ns hold step that does not divide the 500 ns period
    let timeline: Vec<f64> = (0..1000).map(|i| i as f64).collect();
    let rec = daq_sample(
        &timeline,
        300e-9,
        500e-9,
        |_| true,
        TraceKind::Current,
        0,
        0,
    )
    .unwrap();
    assert_eq!(rec.len(), 600);
    for (k, s) in rec.samples.iter().enumerate() {
        assert_eq!(s.t_s, k as f64 * 500e-9);
        assert_eq!(s.value, (k * 5 / 3) as f64);
    }
    rec.validate().unwrap();
}

#[test]
fn daq_of_constant_input_is_constant() {
    let rec = daq_sample(
        &[2.5; 100],
        1e-7,
        5e-7,
        |t| t < 4.75e-6,
        TraceKind::Current,
        0,
        0,
    )
    .unwrap();
    assert!(rec.samples.iter().all(|s| s.value == 2.5));
    assert_eq!(rec.samples.iter().filter(|s| s.rf_on).count(), 10);
}

fn bundle(noise: NoiseConfig) -> (PhysicsBundle, DetectorBundle) {
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
    let det = DetectorBundle {
        noise,
        ..DetectorBundle::default()
    };
    (phys, det)
}

#[test]
fn default_half_envelope_gives_125000_samples() {
    let (phys, det) = bundle(NoiseConfig::off());
    let seq = &compile_pdmr(&[70e6], &TimingConfig::default()).unwrap()[0];
    let tr = run_sequence(
        seq,
        &phys,
        &DetectorBundle {
            optical: false,
            ..det
        },
        1,
        0,
    )
    .unwrap();
    assert_eq!(
        tr.current.samples.iter().filter(|s| s.rf_on).count(),
        125_000
    );
    assert_eq!(
        tr.current.samples.iter().filter(|s| !s.rf_on).count(),
        125_000
    );
    tr.current.validate().unwrap();
}

#[test]
fn same_seed_reproduces_traces_exactly() {
    let (phys, det) = bundle(NoiseConfig::default());
    let timing = TimingConfig {
        envelope_freq_hz: 800.0,
        ..TimingConfig::default()
    };
    let seq = &compile_pdmr(&[70e6], &timing).unwrap()[0];
    let a = run_sequence(seq, &phys, &det, 2, 5).unwrap();
    let b = run_sequence(seq, &phys, &det, 2, 5).unwrap();
    let c = run_sequence(seq, &phys, &det, 2, 6).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.current, c.current);
    assert_ne!(a.counts, c.counts);
}

#[test]
fn noisy_trace_mean_matches_noise_free_value() {
    let timing = TimingConfig {
        envelope_freq_hz: 800.0,
        ..TimingConfig::default()
    };
    let seq = &compile_pdmr(&[70e6], &timing).unwrap()[0];
    let (phys, det) = bundle(NoiseConfig {
        laser_rel_fluctuation: 0.0,
        ..NoiseConfig::default()
    });
    let det = DetectorBundle {
        optical: false,
        ..det
    };
    let clean = run_sequence(
        seq,
        &phys,
        &DetectorBundle {
            noise: NoiseConfig::off(),
            ..det
        },
        40,
        1,
    )
    .unwrap();
    let noisy = run_sequence(seq, &phys, &det, 40, 1).unwrap();
    let diffs: Vec<f64> = noisy
        .current
        .samples
        .iter()
        .zip(&clean.current.samples)
        .map(|(a, b)| a.value - b.value)
        .collect();
    assert!(diffs.len() >= 100_000);
    let (m, _) = mean_sd(&diffs);
    // neighbouring samples are correlated through the amplifier, so take
    // the standard error over blocks much longer than its time constant
    let blocks: Vec<f64> = diffs
        .chunks(2000)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    let (_, sd) = mean_sd(&blocks);
    let se = sd / (blocks.len() as f64).sqrt();
    assert!(m.abs() < 3.0 * se, "{m} vs {se}");
}

#[test]
fn contrast_error_scales_as_inverse_root_envelopes() {
    let timing = TimingConfig {
        envelope_freq_hz: 800.0,
        ..TimingConfig::default()
    };
    let seq = &compile_pdmr(&[70e6], &timing).unwrap()[0];
    let (phys, det) = bundle(NoiseConfig::default());
    let det = DetectorBundle {
        optical: false,
        ..det
    };
    // pooled per-envelope variance from 1024 envelopes at each N
    let scaled = |n: u64| {
        let runs = 1024 / n;
        let v: f64 = (0..runs)
            .map(|k| {
                let tr = run_sequence(seq, &phys, &det, n, 100 + k).unwrap();
                let c = lockin_contrast(&tr.current, 0.2).unwrap();
                c.std_error * c.std_error * n as f64
            })
            .sum::<f64>()
            / runs as f64;
        v.sqrt()
    };
    let base = scaled(16);
    for n in [64, 256] {
        let s = scaled(n);
        assert!((s - base).abs() / base < 0.1, "N = {n}: {s} vs {base}");
    }
}

proptest! {
    #[test]
    fn tia_is_linear(
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        i1 in prop::collection::vec(0.0f64..2e-9, 50),
        i2 in prop::collection::vec(0.0f64..2e-9, 50),
    ) {
        let cfg = TiaConfig::default();
        let dt = 1e-5;
        let mix: Vec<f64> = i1.iter().zip(&i2).map(|(x, y)| a * x + b * y).collect();
        let out = tia_filter(&mix, &cfg, dt).unwrap();
        let o1 = tia_filter(&i1, &cfg, dt).unwrap();
        let o2 = tia_filter(&i2, &cfg, dt).unwrap();
        let dark = cfg.dark_current_a * cfg.gain;
        for k in 0..50 {
            let expected = a * (o1[k] - dark) + b * (o2[k] - dark) + dark;
            prop_assert!((out[k] - expected).abs() < 1e-9, "{} vs {}", out[k], expected);
        }
    }

    #[test]
    fn trace_csv_round_trips(values in prop::collection::vec(-1e-9f64..1e-9, 1..40)) {
        let rec = daq_sample(&values, 5e-7, 5e-7, |t| t < 5e-6, TraceKind::Current, 3, 9).unwrap();
        let back = TraceRecord::from_csv(&rec.to_csv(), 9).unwrap();
        prop_assert_eq!(back, rec);
    }
}
