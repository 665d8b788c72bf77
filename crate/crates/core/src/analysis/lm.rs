// dense elimination reads clearer with explicit indices
#![allow(clippy::needless_range_loop)]

use crate::scalar::Real;

/// Damped least-squares settings.
#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Central-difference step relative to `max(|p|, 1)`.
    pub rel_step: f64,
    /// Converged once every parameter moves by less than this, relatively.
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            rel_step: 1e-6,
            xtol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome<T: Real> {
    pub params: Vec<T>,
    /// `s² (JᵀJ)⁻¹` at the solution, `None` if singular.
    pub covariance: Option<Vec<Vec<T>>>,
    pub cost: T,
    pub n_iter: usize,
    pub converged: bool,
}

impl<T: Real> LmOutcome<T> {
    pub fn std_errors(&self) -> Vec<T> {
        match &self.covariance {
            Some(c) => (0..self.params.len())
                .map(|i| c[i][i].max(T::zero()).sqrt())
                .collect(),
            None => vec![T::infinity(); self.params.len()],
        }
    }
}

fn sum_sq<T: Real>(r: &[T]) -> T {
    r.iter().fold(T::zero(), |a, &v| a + v * v)
}

/// Central-difference Jacobian, row-major `m × n`.
fn jacobian<T: Real, F: Fn(&[T], &mut [T])>(f: &F, p: &[T], m: usize, rel_step: T) -> Vec<Vec<T>> {
    let n = p.len();
    let mut jac = vec![vec![T::zero(); n]; m];
    let mut hi = vec![T::zero(); m];
    let mut lo = vec![T::zero(); m];
    let mut q = p.to_vec();
    for j in 0..n {
        let h = rel_step * p[j].abs().max(T::one());
        q[j] = p[j] + h;
        f(&q, &mut hi);
        q[j] = p[j] - h;
        f(&q, &mut lo);
        q[j] = p[j];
        let inv = T::one() / (h + h);
        for i in 0..m {
            jac[i][j] = (hi[i] - lo[i]) * inv;
        }
    }
    jac
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let piv =
            (col..n).max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap())?;
        if !(a[piv][col].abs() > T::zero()) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] = a[row][k] - factor * a[col][k];
            }
            b[row] = b[row] - factor * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let s = (i + 1..n).fold(b[i], |acc, k| acc - a[i][k] * x[k]);
        x[i] = s / a[i][i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn invert<T: Real>(a: &[Vec<T>]) -> Option<Vec<Vec<T>>> {
    let n = a.len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![T::zero(); n];
        e[j] = T::one();
        cols.push(solve_linear(a.to_vec(), e)?);
    }
    Some(
        (0..n)
            .map(|i| (0..n).map(|j| cols[j][i]).collect())
            .collect(),
    )
}

fn normal_equations<T: Real>(jac: &[Vec<T>], r: &[T]) -> (Vec<Vec<T>>, Vec<T>) {
    let n = jac.first().map_or(0, Vec::len);
    let mut a = vec![vec![T::zero(); n]; n];
    let mut g = vec![T::zero(); n];
    for (row, &ri) in jac.iter().zip(r) {
        for j in 0..n {
            g[j] = g[j] + row[j] * ri;
            for k in j..n {
                a[j][k] = a[j][k] + row[j] * row[k];
            }
        }
    }
    for j in 0..n {
        for k in 0..j {
            a[j][k] = a[k][j];
        }
    }
    (a, g)
}

/// Minimizes `Σ r_i(p)²` where `residuals(p, r)` fills `r` (length `m`).
pub fn levenberg_marquardt<T: Real, F: Fn(&[T], &mut [T])>(
    residuals: F,
    p0: &[T],
    m: usize,
    opts: &LmOptions,
) -> LmOutcome<T> {
    let n = p0.len();
    // keep the settings meaningful in single precision
    let rel_step = T::lit(opts.rel_step).max(T::epsilon().sqrt());
    let xtol = T::lit(opts.xtol).max(T::lit(4.0) * T::epsilon());
    let mut p = p0.to_vec();
    let mut r = vec![T::zero(); m];
    residuals(&p, &mut r);
    let mut cost = sum_sq(&r);
    let mut lambda = T::lit(1e-3);
    let mut converged = false;
    let mut n_iter = 0;
    let mut trial = vec![T::zero(); n];
    let mut r_trial = vec![T::zero(); m];

    'outer: while n_iter < opts.max_iter && cost.is_finite() {
        n_iter += 1;
        let jac = jacobian(&residuals, &p, m, rel_step);
        let (a, g) = normal_equations(&jac, &r);
        if g.iter().all(|v| *v == T::zero()) {
            converged = true;
            break;
        }
        loop {
            let mut damped = a.clone();
            for j in 0..n {
                let d = a[j][j].max(T::lit(1e-30));
                damped[j][j] = a[j][j] + lambda * d;
            }
            let rhs: Vec<T> = g.iter().map(|&v| -v).collect();
            let Some(delta) = solve_linear(damped, rhs) else {
                lambda = lambda * T::lit(10.0);
                if lambda > T::lit(1e20) {
                    break 'outer;
                }
                continue;
            };
            let small = delta
                .iter()
                .zip(&p)
                .all(|(d, pj)| d.abs() <= xtol * (pj.abs() + xtol));
            for j in 0..n {
                trial[j] = p[j] + delta[j];
            }
            residuals(&trial, &mut r_trial);
            let c = sum_sq(&r_trial);
            if c.is_finite() && c <= cost {
                p.copy_from_slice(&trial);
                std::mem::swap(&mut r, &mut r_trial);
                cost = c;
                lambda = (lambda * T::lit(0.3)).max(T::lit(1e-12));
                if small {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            if small {
                // the local quadratic model cannot improve further
                converged = true;
                break 'outer;
            }
            lambda = lambda * T::lit(4.0);
            if lambda > T::lit(1e20) {
                break 'outer;
            }
        }
    }

    let jac = jacobian(&residuals, &p, m, rel_step);
    let (a, _) = normal_equations(&jac, &r);
    let dof = m.saturating_sub(n).max(1);
    let s2 = cost / T::lit(dof as f64);
    let covariance = invert(&a).map(|inv| {
        inv.into_iter()
            .map(|row| row.into_iter().map(|v| v * s2).collect())
            .collect()
    });
    LmOutcome {
        params: p,
        covariance,
        cost,
        n_iter,
        converged,
    }
}

/// Linear least squares `min |X β - y|` via the normal equations.
pub fn linear_lstsq<T: Real>(columns: &[Vec<T>], y: &[T]) -> Option<(Vec<T>, T)> {
    let n = columns.len();
    let mut a = vec![vec![T::zero(); n]; n];
    let mut b = vec![T::zero(); n];
    for j in 0..n {
        b[j] = columns[j]
            .iter()
            .zip(y)
            .fold(T::zero(), |s, (&x, &v)| s + x * v);
        for k in 0..n {
            a[j][k] = columns[j]
                .iter()
                .zip(&columns[k])
                .fold(T::zero(), |s, (&x, &z)| s + x * z);
        }
    }
    let beta = solve_linear(a, b)?;
    let sse = (0..y.len()).fold(T::zero(), |s, i| {
        let fit = (0..n).fold(T::zero(), |acc, j| acc + beta[j] * columns[j][i]);
        let d = y[i] - fit;
        s + d * d
    });
    Some((beta, sse))
}
