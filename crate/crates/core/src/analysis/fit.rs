use std::fmt;

use super::lm::{levenberg_marquardt, linear_lstsq, LmOptions, LmOutcome};
use super::AnalysisError;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Sum of `k` Lorentzians on a constant offset.
    MultiLorentzian(usize),
    DampedSine,
    ExpDecay,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::MultiLorentzian(k) => write!(f, "multi_lorentzian_{k}"),
            ModelKind::DampedSine => f.write_str("damped_sine"),
            ModelKind::ExpDecay => f.write_str("exp_decay"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitParam<T: Real> {
    pub name: String,
    pub value: T,
    pub error: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T: Real> {
    pub model: ModelKind,
    pub params: Vec<FitParam<T>>,
    pub residual_rms: T,
    pub converged: bool,
    pub n_iter: usize,
}

/// Header of the fit CSV.
pub const FIT_CSV_HEADER: &str = "model,param,value,error,residual_rms,converged";

impl<T: Real> FitResult<T> {
    pub fn get(&self, name: &str) -> Option<T> {
        self.params.iter().find(|p| p.name == name).map(|p| p.value)
    }

    pub fn error(&self, name: &str) -> Option<T> {
        self.params.iter().find(|p| p.name == name).map(|p| p.error)
    }

    /// One CSV row per parameter, without header.
    pub fn csv_rows(&self) -> String {
        self.params
            .iter()
            .map(|p| {
                format!(
                    "{},{},{:e},{:e},{:e},{}\n",
                    self.model,
                    p.name,
                    p.value.as_f64(),
                    p.error.as_f64(),
                    self.residual_rms.as_f64(),
                    self.converged
                )
            })
            .collect()
    }

    /// Model value at `x` with the fitted parameters.
    pub fn evaluate(&self, x: T) -> T {
        let p = |n: &str| self.get(n).unwrap_or_else(T::nan);
        match self.model {
            ModelKind::MultiLorentzian(k) => (1..=k).fold(p("offset"), |acc, i| {
                let hw = p(&format!("fwhm_{i}")) * T::lit(0.5);
                let d = x - p(&format!("center_{i}"));
                acc + p(&format!("amp_{i}")) * hw * hw / (d * d + hw * hw)
            }),
            ModelKind::DampedSine => {
                let ph = T::lit(2.0 * std::f64::consts::PI) * p("freq") * x + p("phase");
                p("offset") + p("amp") * (-x / p("tau")).exp() * ph.sin()
            }
            ModelKind::ExpDecay => p("offset") + p("amp") * (-x / p("tau")).exp(),
        }
    }

    fn assemble(
        model: ModelKind,
        params: Vec<(&str, T, T)>,
        residual_rms: T,
        lm_converged: bool,
        n_iter: usize,
    ) -> Self {
        let finite =
            residual_rms.is_finite() && params.iter().all(|p| p.1.is_finite() && p.2.is_finite());
        Self {
            model,
            params: params
                .into_iter()
                .map(|(n, value, error)| FitParam {
                    name: n.to_string(),
                    value,
                    error,
                })
                .collect(),
            residual_rms,
            converged: lm_converged && finite,
            n_iter,
        }
    }
}

/// Affine map `v = offset + scale * v'` used to fit in O(1) coordinates.
#[derive(Debug, Clone, Copy)]
struct Scale<T> {
    offset: T,
    scale: T,
}

impl<T: Real> Scale<T> {
    fn apply(&self, v: &[T]) -> Vec<T> {
        v.iter().map(|&x| (x - self.offset) / self.scale).collect()
    }
}

fn min_max<T: Real>(v: &[T]) -> (T, T) {
    v.iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

fn median<T: Real>(v: &[T]) -> T {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) * T::lit(0.5)
    }
}

fn check_input<T: Real>(x: &[T], y: &[T], min_len: usize) -> Result<(), AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::InvalidInput(format!(
            "x has {} points, y has {}",
            x.len(),
            y.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(AnalysisError::InvalidInput("non-finite data".into()));
    }
    if x.len() < min_len {
        return Err(AnalysisError::DegenerateData(format!(
            "need at least {min_len} points, got {}",
            x.len()
        )));
    }
    Ok(())
}

fn rms<T: Real>(scale: T, lm: &LmOutcome<T>, m: usize) -> T {
    scale * (lm.cost / T::lit(m as f64)).sqrt()
}

/// Starting centers for [`fit_multi_lorentzian`].
#[derive(Debug, Clone, PartialEq, Default)]
pub enum LorentzianInit {
    /// Largest deviations from the median, taken one line at a time with each
    /// chosen line subtracted before the next, kept apart by their half-width.
    #[default]
    Extrema,
    /// Explicit centers in x units; widths and amplitudes are still estimated.
    Centers(Vec<f64>),
}

/// `y = c + Σ A_i (w_i/2)² / ((x - x0_i)² + (w_i/2)²)`; parameters
/// `offset`, `amp_i`, `center_i`, `fwhm_i` (1-based `i`).
pub fn fit_multi_lorentzian<T: Real>(
    x: &[T],
    y: &[T],
    k: usize,
    init: &LorentzianInit,
) -> Result<FitResult<T>, AnalysisError> {
    if !(1..=3).contains(&k) {
        return Err(AnalysisError::InvalidInput(format!(
            "peak count {k} must be 1, 2 or 3"
        )));
    }
    check_input(x, y, 3 * k + 1)?;
    let mut distinct: Vec<f64> = x.iter().map(|v| v.as_f64()).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < 3 * k + 1 {
        return Err(AnalysisError::DegenerateData(format!(
            "only {} distinct x values",
            distinct.len()
        )));
    }

    let (xlo, xhi) = min_max(x);
    let half = T::lit(0.5);
    let sx = Scale {
        offset: (xlo + xhi) * half,
        scale: (xhi - xlo) * half,
    };
    let med = median(y);
    let dev = y.iter().fold(T::zero(), |a, &v| a.max((v - med).abs()));
    let sy = Scale {
        offset: med,
        scale: if dev > T::zero() { dev } else { T::one() },
    };
    let xs = sx.apply(x);
    let ys = sy.apply(y);

    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let sorted_x: Vec<T> = order.iter().map(|&i| xs[i]).collect();
    let sorted_y: Vec<T> = order.iter().map(|&i| ys[i]).collect();
    let spacing = T::lit(2.0) / T::lit((distinct.len() - 1) as f64);

    // half-max width around sorted index i of a baseline-free profile
    let width_at = |ys: &[T], i: usize| -> T {
        let peak = ys[i];
        let keep = |j: usize| ys[j] * peak.signum() > peak.abs() * half;
        let mut l = i;
        while l > 0 && keep(l - 1) {
            l -= 1;
        }
        let mut r = i;
        while r + 1 < ys.len() && keep(r + 1) {
            r += 1;
        }
        let lo = if l > 0 {
            (sorted_x[l] + sorted_x[l - 1]) * half
        } else {
            sorted_x[l]
        };
        let hi = if r + 1 < sorted_x.len() {
            (sorted_x[r] + sorted_x[r + 1]) * half
        } else {
            sorted_x[r]
        };
        (hi - lo).max(spacing * T::lit(2.0))
    };
    let nearest = |c: T| -> usize {
        (0..sorted_x.len())
            .min_by(|&a, &b| {
                (sorted_x[a] - c)
                    .abs()
                    .partial_cmp(&(sorted_x[b] - c).abs())
                    .unwrap()
            })
            .unwrap()
    };

    // (index, width, amplitude) in scaled units
    let mut peaks: Vec<(usize, T, T)> = Vec::new();
    match init {
        LorentzianInit::Centers(c) => {
            if c.len() != k {
                return Err(AnalysisError::InvalidInput(format!(
                    "{} centers given for {k} peaks",
                    c.len()
                )));
            }
            for &cx in c {
                let i = nearest((T::lit(cx) - sx.offset) / sx.scale);
                peaks.push((i, width_at(&sorted_y, i), sorted_y[i]));
            }
        }
        LorentzianInit::Extrema => {
            // peel one line at a time so a strong line's tail does not
            // outrank a weak line elsewhere
            let mut resid = sorted_y.clone();
            while peaks.len() < k {
                let base = median(&resid);
                let dev: Vec<T> = resid.iter().map(|&v| v - base).collect();
                let mut by_dev: Vec<usize> = (0..dev.len()).collect();
                by_dev.sort_by(|&a, &b| dev[b].abs().partial_cmp(&dev[a].abs()).unwrap());
                let apart = by_dev.iter().copied().find_map(|i| {
                    let w = width_at(&dev, i);
                    peaks
                        .iter()
                        .all(|&(j, wj, _)| (sorted_x[i] - sorted_x[j]).abs() > (w + wj) * half)
                        .then_some((i, w))
                });
                // fall back to the strongest unused point if lines overlap
                let (i, w) = apart.unwrap_or_else(|| {
                    let i = by_dev
                        .iter()
                        .copied()
                        .find(|&i| peaks.iter().all(|&(j, _, _)| j != i))
                        .expect("more points than peaks");
                    (i, spacing * T::lit(2.0))
                });
                let a = dev[i];
                let hw2 = (w * half) * (w * half);
                for (r, &xv) in resid.iter_mut().zip(&sorted_x) {
                    let d = xv - sorted_x[i];
                    *r = *r - a * hw2 / (d * d + hw2);
                }
                peaks.push((i, w, a));
            }
        }
    }

    let mut p0 = vec![T::zero()];
    for &(i, w, a) in &peaks {
        p0.extend([a, sorted_x[i], w.sqrt()]);
    }
    let model = |p: &[T], xv: T| -> T {
        let mut v = p[0];
        for j in 0..k {
            let (a, x0, u) = (p[1 + 3 * j], p[2 + 3 * j], p[3 + 3 * j]);
            let hw = u * u * half;
            let hw2 = hw * hw;
            let d = xv - x0;
            v = v + a * hw2 / (d * d + hw2);
        }
        v
    };
    let m = xs.len();
    let lm = levenberg_marquardt(
        |p: &[T], r: &mut [T]| {
            for i in 0..m {
                r[i] = model(p, xs[i]) - ys[i];
            }
        },
        &p0,
        m,
        &LmOptions::default(),
    );
    if !lm.converged {
        return Err(AnalysisError::NoConvergence { n_iter: lm.n_iter });
    }
    let e = lm.std_errors();
    let p = &lm.params;
    let mut peaks_out: Vec<(T, T, T, T, T, T)> = (0..k)
        .map(|j| {
            let (a, x0, u) = (p[1 + 3 * j], p[2 + 3 * j], p[3 + 3 * j]);
            let (ea, ex, eu) = (e[1 + 3 * j], e[2 + 3 * j], e[3 + 3 * j]);
            (
                a * sy.scale,
                ea * sy.scale,
                sx.offset + x0 * sx.scale,
                ex * sx.scale,
                u * u * sx.scale,
                T::lit(2.0) * u.abs() * eu * sx.scale,
            )
        })
        .collect();
    peaks_out.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap());
    let names: Vec<[String; 3]> = (1..=k)
        .map(|i| {
            [
                format!("amp_{i}"),
                format!("center_{i}"),
                format!("fwhm_{i}"),
            ]
        })
        .collect();
    let mut params: Vec<(&str, T, T)> =
        vec![("offset", sy.offset + p[0] * sy.scale, e[0] * sy.scale)];
    for (pk, n) in peaks_out.iter().zip(&names) {
        params.push((&n[0], pk.0, pk.1));
        params.push((&n[1], pk.2, pk.3));
        params.push((&n[2], pk.4, pk.5));
    }
    Ok(FitResult::assemble(
        ModelKind::MultiLorentzian(k),
        params,
        rms(sy.scale, &lm, m),
        true,
        lm.n_iter,
    ))
}

/// Frequency with the largest DFT magnitude of the mean-removed series,
/// searched on a grid four times finer than `1/span`.
fn dominant_frequency(t: &[f64], y: &[f64]) -> Option<f64> {
    let n = t.len();
    let (lo, hi) = t
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let span = hi - lo;
    if !(span > 0.0) {
        return None;
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let nyquist = 0.5 * (n - 1) as f64 / span;
    let df = 0.25 / span;
    let mut best = (0.0, 0.0);
    let mut f = df;
    let mut power_dc = 0.0;
    while f <= nyquist {
        let (mut re, mut im) = (0.0, 0.0);
        for (&ti, &yi) in t.iter().zip(y) {
            let ph = 2.0 * std::f64::consts::PI * f * (ti - lo);
            re += (yi - mean) * ph.cos();
            im += (yi - mean) * ph.sin();
        }
        let pw = re * re + im * im;
        if f < 0.5 / span {
            power_dc = f64::max(power_dc, pw);
        }
        if pw > best.1 {
            best = (f, pw);
        }
        f += df;
    }
    if best.1 <= 0.0 || best.0 < 0.5 / span || best.1 <= power_dc {
        return None;
    }
    Some(best.0)
}

/// `y = c + A exp(-t/τ) sin(2π f t + φ)`; parameters `freq`, `tau`, `amp`
/// (non-negative), `phase` (rad, in (-π, π]) and `offset`.
pub fn fit_damped_sine<T: Real>(t: &[T], y: &[T]) -> Result<FitResult<T>, AnalysisError> {
    check_input(t, y, 8)?;
    let (tlo, thi) = min_max(t);
    let ts = thi.abs().max(tlo.abs());
    if !(thi > tlo) {
        return Err(AnalysisError::DegenerateData("zero time span".into()));
    }
    let (ylo, yhi) = min_max(y);
    if !(yhi > ylo) {
        return Err(AnalysisError::NoOscillation);
    }
    let half = T::lit(0.5);
    let sy = Scale {
        offset: (ylo + yhi) * half,
        scale: (yhi - ylo) * half,
    };
    let tn: Vec<T> = t.iter().map(|&v| v / ts).collect();
    let yn = sy.apply(y);
    let tf: Vec<f64> = tn.iter().map(|v| v.as_f64()).collect();
    let yf: Vec<f64> = yn.iter().map(|v| v.as_f64()).collect();
    let f0 = dominant_frequency(&tf, &yf).ok_or(AnalysisError::NoOscillation)?;

    // grid over frequency and decay rate, linear in (c, a, b)
    let span = (thi - tlo).as_f64() / ts.as_f64();
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut best: Option<(f64, [f64; 5])> = None;
    for i in 0..=20 {
        let f = f0 + (i as f64 - 10.0) * 0.1 / span;
        if f <= 0.0 {
            continue;
        }
        for j in 0..=20 {
            let k = if j == 0 {
                0.0
            } else {
                0.01 * 1000f64.powf((j - 1) as f64 / 19.0) / span
            };
            let cols = vec![
                vec![1.0; tf.len()],
                tf.iter()
                    .map(|&x| (-k * x).exp() * (two_pi * f * x).sin())
                    .collect(),
                tf.iter()
                    .map(|&x| (-k * x).exp() * (two_pi * f * x).cos())
                    .collect(),
            ];
            if let Some((beta, sse)) = linear_lstsq(&cols, &yf) {
                if best.as_ref().is_none_or(|b| sse < b.0) {
                    best = Some((sse, [beta[0], beta[1], beta[2], f, k]));
                }
            }
        }
    }
    let (_, g) = best.ok_or(AnalysisError::NoOscillation)?;
    let p0: Vec<T> = g.iter().map(|&v| T::lit(v)).collect();
    let m = tn.len();
    let tp = T::lit(two_pi);
    let lm = levenberg_marquardt(
        |p: &[T], r: &mut [T]| {
            for i in 0..m {
                let x = tn[i];
                let ph = tp * p[3] * x;
                r[i] = p[0] + (-p[4] * x).exp() * (p[1] * ph.sin() + p[2] * ph.cos()) - yn[i];
            }
        },
        &p0,
        m,
        &LmOptions::default(),
    );
    if !lm.converged {
        return Err(AnalysisError::NoConvergence { n_iter: lm.n_iter });
    }
    let p = &lm.params;
    let cov = lm
        .covariance
        .clone()
        .unwrap_or_else(|| vec![vec![T::infinity(); 5]; 5]);
    let (a, b) = (p[1], p[2]);
    let amp = (a * a + b * b).sqrt();
    let var = |g: [T; 2]| {
        let (i, j) = (1, 2);
        (g[0] * g[0] * cov[i][i] + T::lit(2.0) * g[0] * g[1] * cov[i][j] + g[1] * g[1] * cov[j][j])
            .max(T::zero())
    };
    let amp_err = var([a / amp, b / amp]).sqrt();
    let phase_err = var([-b / (amp * amp), a / (amp * amp)]).sqrt();
    let k = p[4] / ts;
    let k_err = cov[4][4].max(T::zero()).sqrt() / ts;
    let params = vec![
        ("freq", p[3] / ts, cov[3][3].max(T::zero()).sqrt() / ts),
        ("tau", T::one() / k, k_err / (k * k)),
        ("amp", amp * sy.scale, amp_err * sy.scale),
        ("phase", b.atan2(a), phase_err),
        (
            "offset",
            sy.offset + p[0] * sy.scale,
            cov[0][0].max(T::zero()).sqrt() * sy.scale,
        ),
    ];
    Ok(FitResult::assemble(
        ModelKind::DampedSine,
        params,
        rms(sy.scale, &lm, m),
        true,
        lm.n_iter,
    ))
}

/// `y = c + A exp(-t/T)`; parameters `tau` (T), `amp` and `offset`.
///
/// Flat data leaves `T` unidentifiable: the result then carries `amp = 0`,
/// an infinite `tau` error and `converged = false`.
pub fn fit_exp_decay<T: Real>(t: &[T], y: &[T]) -> Result<FitResult<T>, AnalysisError> {
    check_input(t, y, 4)?;
    if t.iter().any(|&v| v < T::zero()) {
        return Err(AnalysisError::InvalidInput("times must be >= 0".into()));
    }
    let (_, thi) = min_max(t);
    if !(thi > T::zero()) {
        return Err(AnalysisError::DegenerateData("zero time span".into()));
    }
    let (ylo, yhi) = min_max(y);
    if !(yhi > ylo) {
        let inf = T::infinity();
        let params = vec![
            ("tau", inf, inf),
            ("amp", T::zero(), inf),
            ("offset", ylo, T::zero()),
        ];
        return Ok(FitResult::assemble(
            ModelKind::ExpDecay,
            params,
            T::zero(),
            false,
            0,
        ));
    }
    let half = T::lit(0.5);
    let sy = Scale {
        offset: (ylo + yhi) * half,
        scale: (yhi - ylo) * half,
    };
    let tn: Vec<T> = t.iter().map(|&v| v / thi).collect();
    let yn = sy.apply(y);
    let tf: Vec<f64> = tn.iter().map(|v| v.as_f64()).collect();
    let yf: Vec<f64> = yn.iter().map(|v| v.as_f64()).collect();

    let mut best: Option<(f64, [f64; 3])> = None;
    for j in 0..60 {
        let k = 0.05 * 1000f64.powf(j as f64 / 59.0);
        let cols = vec![
            vec![1.0; tf.len()],
            tf.iter().map(|&x| (-k * x).exp()).collect(),
        ];
        if let Some((beta, sse)) = linear_lstsq(&cols, &yf) {
            if best.as_ref().is_none_or(|b| sse < b.0) {
                best = Some((sse, [beta[0], beta[1], k]));
            }
        }
    }
    let (_, g) = best.ok_or_else(|| AnalysisError::DegenerateData("no usable start".into()))?;
    let p0: Vec<T> = g.iter().map(|&v| T::lit(v)).collect();
    let m = tn.len();
    let lm = levenberg_marquardt(
        |p: &[T], r: &mut [T]| {
            for i in 0..m {
                r[i] = p[0] + p[1] * (-p[2] * tn[i]).exp() - yn[i];
            }
        },
        &p0,
        m,
        &LmOptions::default(),
    );
    if !lm.converged {
        return Err(AnalysisError::NoConvergence { n_iter: lm.n_iter });
    }
    let p = &lm.params;
    let e = lm.std_errors();
    let params = vec![
        ("tau", thi / p[2], thi * e[2] / (p[2] * p[2])),
        ("amp", p[1] * sy.scale, e[1] * sy.scale),
        ("offset", sy.offset + p[0] * sy.scale, e[0] * sy.scale),
    ];
    Ok(FitResult::assemble(
        ModelKind::ExpDecay,
        params,
        rms(sy.scale, &lm, m),
        true,
        lm.n_iter,
    ))
}
