use rustfft::num_complex::Complex;
use rustfft::{FftNum, FftPlanner};

use super::AnalysisError;
use crate::scalar::Real;

/// One-sided magnitude spectrum of a real series.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    /// Hz, ascending from 0 in steps of `1 / (n Δt)`.
    pub freqs: Vec<T>,
    pub amplitudes: Vec<T>,
    /// Length of the transformed series.
    pub n_samples: usize,
}

impl<T: Real> Spectrum<T> {
    /// Frequency and amplitude of the largest bin above DC within `[lo, hi]` Hz.
    pub fn peak_in(&self, lo: T, hi: T) -> Option<(T, T)> {
        self.freqs
            .iter()
            .zip(&self.amplitudes)
            .skip(1)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(f, a)| (*f, *a))
    }

    /// Largest bin above DC.
    pub fn peak(&self) -> Option<(T, T)> {
        self.peak_in(T::zero(), T::infinity())
    }

    /// `Σ|Y_k|² / n` over the full two-sided transform, which equals the
    /// energy of the windowed series.
    pub fn energy(&self) -> T {
        let n = self.n_samples;
        let mut e = T::zero();
        for (k, a) in self.amplitudes.iter().enumerate() {
            let mirrored = k != 0 && !(n.is_multiple_of(2) && k == n / 2);
            let w = if mirrored { T::lit(2.0) } else { T::one() };
            e = e + w * *a * *a;
        }
        e / T::lit(n as f64)
    }
}

/// Symmetric Hann window of length `n`.
pub fn hann<T: Real>(n: usize) -> Vec<T> {
    if n < 2 {
        return vec![T::one(); n];
    }
    let d = T::lit((n - 1) as f64);
    (0..n)
        .map(|i| T::lit(0.5) * (T::one() - (T::TAU() * T::lit(i as f64) / d).cos()))
        .collect()
}

/// Mean-removed, Hann-windowed series as transformed by [`fft_spectrum`].
pub fn windowed<T: Real>(y: &[T]) -> Vec<T> {
    let (lo, hi) = y
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if !(hi > lo) {
        return vec![T::zero(); y.len()];
    }
    let mean = y.iter().fold(T::zero(), |a, &v| a + v) / T::lit(y.len() as f64);
    y.iter()
        .zip(hann::<T>(y.len()))
        .map(|(&v, w)| (v - mean) * w)
        .collect()
}

/// Magnitude FFT of a uniformly sampled real series.
pub fn fft_spectrum<T: Real + FftNum>(t: &[T], y: &[T]) -> Result<Spectrum<T>, AnalysisError> {
    let n = t.len();
    if n != y.len() {
        return Err(AnalysisError::InvalidInput(format!(
            "t has {n} points, y has {}",
            y.len()
        )));
    }
    if n < 2 {
        return Err(AnalysisError::DegenerateData(
            "need at least 2 samples".into(),
        ));
    }
    let dt = (t[n - 1] - t[0]) / T::lit((n - 1) as f64);
    if !(dt > T::zero()) {
        return Err(AnalysisError::NonUniformSampling { index: 1 });
    }
    let tol = T::lit(1e-9);
    for i in 1..n {
        if ((t[i] - t[i - 1]) - dt).abs() > tol * dt {
            return Err(AnalysisError::NonUniformSampling { index: i });
        }
    }
    let mut buf: Vec<Complex<T>> = windowed(y)
        .into_iter()
        .map(|v| Complex::new(v, T::zero()))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let df = T::one() / (T::lit(n as f64) * dt);
    let half = n / 2 + 1;
    Ok(Spectrum {
        freqs: (0..half).map(|k| T::lit(k as f64) * df).collect(),
        amplitudes: buf[..half].iter().map(|c| c.norm()).collect(),
        n_samples: n,
    })
}
