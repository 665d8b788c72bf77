use num_complex::Complex;

use super::density::DensityMatrix;
use super::dissipators::{DissipatorSet, Jump};
use super::levels::N_LEVELS;
use super::matrix::LevelMatrix;
use crate::scalar::Real;

/// Precomputed GKSL generator for a fixed Hamiltonian and rate set.
///
/// All jump operators in the model are single-element (`|to><from|`), so
/// the anticommutator term reduces to `-(Γ_i + Γ_j)/2 ρ_ij`, where `Γ_i` is
/// the total rate of jumps leaving level `i`, and the sandwich term only
/// feeds diagonal elements. Together with the diagonal of `H` this becomes
/// one complex coefficient per element, plus a short list of off-diagonal
/// Hamiltonian entries.
#[derive(Debug, Clone)]
pub struct Generator<T: Real> {
    coef: [[Complex<T>; N_LEVELS]; N_LEVELS],
    off_diagonal: Vec<(usize, usize, Complex<T>)>,
    feeds: Vec<(usize, usize, T)>,
}

impl<T: Real> Generator<T> {
    pub fn new(h: &LevelMatrix<T>, d: &DissipatorSet<T>) -> Self {
        Self::from_jumps(h, &d.jumps())
    }

    pub fn from_jumps(h: &LevelMatrix<T>, jumps: &[Jump<T>]) -> Self {
        let zero = Complex::new(T::zero(), T::zero());
        let mut out_rate = [T::zero(); N_LEVELS];
        let mut feeds = Vec::with_capacity(jumps.len());
        for j in jumps {
            out_rate[j.from.index()] = out_rate[j.from.index()] + j.rate;
            feeds.push((j.from.index(), j.to.index(), j.rate));
        }
        let half = T::lit(0.5);
        let minus_i = Complex::new(T::zero(), -T::one());
        let mut coef = [[zero; N_LEVELS]; N_LEVELS];
        for (i, row) in coef.iter_mut().enumerate() {
            for (j, c) in row.iter_mut().enumerate() {
                *c = minus_i * (h[(i, i)] - h[(j, j)])
                    - Complex::new(half * (out_rate[i] + out_rate[j]), T::zero());
            }
        }
        let mut off_diagonal = Vec::new();
        for i in 0..N_LEVELS {
            for k in 0..N_LEVELS {
                let v = h[(i, k)];
                if i != k && (v.re != T::zero() || v.im != T::zero()) {
                    off_diagonal.push((i, k, v));
                }
            }
        }
        Self {
            coef,
            off_diagonal,
            feeds,
        }
    }

    /// `dρ/dt = -i[H, ρ] + Σ_k (L_k ρ L_k† - ½{L_k† L_k, ρ})`
    #[inline]
    pub fn apply(&self, rho: &LevelMatrix<T>) -> LevelMatrix<T> {
        let mut out = LevelMatrix::zeros();
        for i in 0..N_LEVELS {
            for j in 0..N_LEVELS {
                out[(i, j)] = self.coef[i][j] * rho[(i, j)];
            }
        }
        let minus_i = Complex::new(T::zero(), -T::one());
        for &(i, k, v) in &self.off_diagonal {
            let a = minus_i * v;
            for j in 0..N_LEVELS {
                // -i (H ρ)_ij and +i (ρ H)_jk contributions of the element H_ik
                out[(i, j)] = out[(i, j)] + a * rho[(k, j)];
                out[(j, k)] = out[(j, k)] - a * rho[(j, i)];
            }
        }
        for &(from, to, rate) in &self.feeds {
            out[(to, to)] = out[(to, to)] + rho[(from, from)] * rate;
        }
        out
    }

    /// True when `H` is diagonal, so populations and coherences decouple.
    pub fn is_drive_free(&self) -> bool {
        self.off_diagonal.is_empty()
    }

    /// Population derivative, valid on its own when [`Self::is_drive_free`].
    #[inline]
    pub fn population_derivative(&self, p: &[T; N_LEVELS]) -> [T; N_LEVELS] {
        let mut out: [T; N_LEVELS] = std::array::from_fn(|i| self.coef[i][i].re * p[i]);
        for &(from, to, rate) in &self.feeds {
            out[to] = out[to] + rate * p[from];
        }
        out
    }

    /// Exact free evolution `ρ_ij -> exp(c_ij t) ρ_ij` of every coherence.
    pub fn decay_coherences(&self, rho: &mut LevelMatrix<T>, duration: T) {
        for i in 0..N_LEVELS {
            for j in 0..N_LEVELS {
                if i != j {
                    let v = rho[(i, j)];
                    if v.re != T::zero() || v.im != T::zero() {
                        rho[(i, j)] = v * (self.coef[i][j] * duration).exp();
                    }
                }
            }
        }
    }
}

/// GKSL time derivative of `rho` under `h` and the jump operators of `d`.
pub fn lindblad_derivative<T: Real>(
    rho: &DensityMatrix<T>,
    h: &LevelMatrix<T>,
    d: &DissipatorSet<T>,
) -> LevelMatrix<T> {
    Generator::new(h, d).apply(&rho.elements)
}
