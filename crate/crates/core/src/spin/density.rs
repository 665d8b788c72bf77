use num_complex::Complex;

use super::levels::{Level, N_LEVELS};
use super::matrix::LevelMatrix;
use super::SpinError;
use crate::scalar::Real;

/// Element-wise Hermiticity tolerance.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Allowed deviation of the trace from one.
pub const TRACE_TOL: f64 = 1e-9;
/// Smallest admissible eigenvalue.
pub const POSITIVITY_TOL: f64 = -1e-8;

/// Simulation state: a density matrix over the level basis at a time in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix<T: Real> {
    pub elements: LevelMatrix<T>,
    pub time: T,
}

impl<T: Real> DensityMatrix<T> {
    pub fn from_matrix(elements: LevelMatrix<T>, time: T) -> Self {
        Self { elements, time }
    }

    pub fn pure(level: Level) -> Self {
        Self::from_matrix(LevelMatrix::projector(level), T::zero())
    }

    /// Equal incoherent mixture of the four ground sublevels.
    pub fn mixed_ground() -> Self {
        let mut m = LevelMatrix::zeros();
        for g in Level::GROUND {
            m[(g.index(), g.index())] = Complex::new(T::lit(0.25), T::zero());
        }
        Self::from_matrix(m, T::zero())
    }

    /// Equal superposition `(|a> + |b>)/sqrt(2)`.
    pub fn superposition(a: Level, b: Level) -> Self {
        let h = Complex::new(T::lit(0.5), T::zero());
        let mut m = LevelMatrix::zeros();
        for (i, j) in [(a, a), (a, b), (b, a), (b, b)] {
            m[(i.index(), j.index())] = h;
        }
        Self::from_matrix(m, T::zero())
    }

    pub fn population(&self, level: Level) -> T {
        self.elements[(level.index(), level.index())].re
    }

    pub fn populations(&self) -> [T; N_LEVELS] {
        std::array::from_fn(|i| self.elements[(i, i)].re)
    }

    pub fn coherence(&self, a: Level, b: Level) -> Complex<T> {
        self.elements[(a.index(), b.index())]
    }

    pub fn trace(&self) -> T {
        self.elements.trace().re
    }

    pub fn sum_populations(&self, levels: &[Level]) -> T {
        levels
            .iter()
            .fold(T::zero(), |acc, l| acc + self.population(*l))
    }

    /// `(ρ + ρ†)/2` followed by division by the real trace.
    pub fn normalize(&mut self) {
        self.elements = self.elements.hermitian_part();
        let tr = self.trace();
        if tr > T::zero() {
            self.elements = self.elements.scale(T::one() / tr);
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.elements.hermitian_eigenvalues()[0]
    }

    /// Checks Hermiticity, unit trace and positivity at the documented tolerances.
    pub fn check_invariants(&self) -> Result<(), SpinError> {
        let herm = self.elements.hermiticity_error().as_f64();
        if !(herm <= HERMITICITY_TOL) {
            return Err(SpinError::Invariant(format!("hermiticity error {herm:e}")));
        }
        let tr = self.elements.trace();
        if !((tr.re.as_f64() - 1.0).abs() <= TRACE_TOL) || tr.im.as_f64().abs() > TRACE_TOL {
            return Err(SpinError::Invariant(format!("trace {tr}")));
        }
        let min = self.min_eigenvalue();
        if !(min >= POSITIVITY_TOL) {
            return Err(SpinError::Invariant(format!("eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// Largest element-wise difference between two states.
    pub fn distance(&self, other: &Self) -> T {
        (self.elements - other.elements).max_abs()
    }

    pub fn cast<U: Real>(&self) -> DensityMatrix<U> {
        DensityMatrix {
            elements: self.elements.cast(),
            time: U::lit(self.time.as_f64()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_states_satisfy_invariants() {
        DensityMatrix::<f64>::pure(Level::Ionized)
            .check_invariants()
            .unwrap();
        DensityMatrix::<f64>::mixed_ground()
            .check_invariants()
            .unwrap();
        DensityMatrix::<f64>::superposition(Level::GroundPlus3Half, Level::GroundPlus1Half)
            .check_invariants()
            .unwrap();
    }

    #[test]
    fn negative_population_is_flagged() {
        let mut rho = DensityMatrix::<f64>::pure(Level::GroundPlus3Half);
        rho.elements[(0, 0)] = Complex::new(1.1, 0.0);
        rho.elements[(1, 1)] = Complex::new(-0.1, 0.0);
        assert!(matches!(
            rho.check_invariants(),
            Err(SpinError::Invariant(_))
        ));
    }
}
