use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Sub};

use num_complex::Complex;

use super::levels::{Level, N_LEVELS};
use crate::scalar::Real;

/// Dense complex operator over the level basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelMatrix<T: Real> {
    data: [[Complex<T>; N_LEVELS]; N_LEVELS],
}

impl<T: Real> Default for LevelMatrix<T> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<T: Real> LevelMatrix<T> {
    pub fn zeros() -> Self {
        Self {
            data: [[Complex::new(T::zero(), T::zero()); N_LEVELS]; N_LEVELS],
        }
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..N_LEVELS {
            m.data[i][i] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut m = Self::zeros();
        for i in 0..N_LEVELS {
            for j in 0..N_LEVELS {
                m.data[i][j] = f(i, j);
            }
        }
        m
    }

    /// Projector `|level><level|`.
    pub fn projector(level: Level) -> Self {
        let mut m = Self::zeros();
        m[(level.index(), level.index())] = Complex::new(T::one(), T::zero());
        m
    }

    /// Transition operator `|to><from|`.
    pub fn transition(from: Level, to: Level) -> Self {
        let mut m = Self::zeros();
        m[(to.index(), from.index())] = Complex::new(T::one(), T::zero());
        m
    }

    pub fn rows(&self) -> &[[Complex<T>; N_LEVELS]; N_LEVELS] {
        &self.data
    }

    pub fn trace(&self) -> Complex<T> {
        (0..N_LEVELS).fold(Complex::new(T::zero(), T::zero()), |acc, i| {
            acc + self.data[i][i]
        })
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(|i, j| self.data[j][i].conj())
    }

    pub fn scale(&self, s: T) -> Self {
        Self::from_fn(|i, j| self.data[i][j] * s)
    }

    pub fn scale_complex(&self, s: Complex<T>) -> Self {
        Self::from_fn(|i, j| self.data[i][j] * s)
    }

    /// `self += s * other`
    #[inline]
    pub fn axpy(&mut self, s: T, other: &Self) {
        for (row, orow) in self.data.iter_mut().zip(other.data.iter()) {
            for (a, b) in row.iter_mut().zip(orow.iter()) {
                *a = *a + *b * s;
            }
        }
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        let mut out = Self::zeros();
        for i in 0..N_LEVELS {
            for k in 0..N_LEVELS {
                let a = self.data[i][k];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for j in 0..N_LEVELS {
                    out.data[i][j] = out.data[i][j] + a * rhs.data[k][j];
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .flatten()
            .fold(T::zero(), |m, z| m.max(z.norm()))
    }

    /// Largest element-wise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> T {
        let mut err = T::zero();
        for i in 0..N_LEVELS {
            for j in i..N_LEVELS {
                err = err.max((self.data[i][j] - self.data[j][i].conj()).norm());
            }
        }
        err
    }

    /// `(A + A^dagger) / 2`
    pub fn hermitian_part(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(|i, j| (self.data[i][j] + self.data[j][i].conj()) * half)
    }

    pub fn is_diagonal(&self) -> bool {
        (0..N_LEVELS).all(|i| {
            (0..N_LEVELS).all(|j| {
                i == j || (self.data[i][j].re == T::zero() && self.data[i][j].im == T::zero())
            })
        })
    }

    /// Eigenvalues of the Hermitian part, ascending, computed in double precision.
    pub fn hermitian_eigenvalues(&self) -> [f64; N_LEVELS] {
        let h = nalgebra::SMatrix::<nalgebra::Complex<f64>, N_LEVELS, N_LEVELS>::from_fn(|i, j| {
            let z = (self.data[i][j] + self.data[j][i].conj()) * T::lit(0.5);
            nalgebra::Complex::new(z.re.as_f64(), z.im.as_f64())
        });
        let eig = nalgebra::SymmetricEigen::new(h);
        let mut out = [0.0; N_LEVELS];
        for (o, v) in out.iter_mut().zip(eig.eigenvalues.iter()) {
            *o = *v;
        }
        out.sort_by(|a, b| a.total_cmp(b));
        out
    }

    pub fn cast<U: Real>(&self) -> LevelMatrix<U> {
        LevelMatrix::from_fn(|i, j| {
            let z = self.data[i][j];
            Complex::new(U::lit(z.re.as_f64()), U::lit(z.im.as_f64()))
        })
    }
}

impl<T: Real> Index<(usize, usize)> for LevelMatrix<T> {
    type Output = Complex<T>;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i][j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for LevelMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i][j]
    }
}

impl<T: Real> Add for LevelMatrix<T> {
    type Output = Self;

    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<T: Real> AddAssign for LevelMatrix<T> {
    fn add_assign(&mut self, rhs: Self) {
        self.axpy(T::one(), &rhs);
    }
}

impl<T: Real> Sub for LevelMatrix<T> {
    type Output = Self;

    fn sub(mut self, rhs: Self) -> Self {
        self.axpy(-T::one(), &rhs);
        self
    }
}

impl<T: Real> Mul for LevelMatrix<T> {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        self.matmul(&rhs)
    }
}
