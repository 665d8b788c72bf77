use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::levels::Level;
use super::matrix::LevelMatrix;
use super::SpinError;
use crate::scalar::Real;

/// Free-electron gyromagnetic ratio in Hz/T.
pub const GAMMA_E_HZ_PER_T: f64 = 28.025e9;

/// One of the two ground-state doublet transitions with `|Δm_S| = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transition {
    /// `g(+3/2) <-> g(+1/2)` at `|2D + γB0|`.
    Plus,
    /// `g(-3/2) <-> g(-1/2)` at `|2D - γB0|`.
    Minus,
}

impl Transition {
    /// `(m = ±3/2 level, m = ±1/2 level)`
    pub fn levels(self) -> (Level, Level) {
        match self {
            Transition::Plus => (Level::GroundPlus3Half, Level::GroundPlus1Half),
            Transition::Minus => (Level::GroundMinus3Half, Level::GroundMinus1Half),
        }
    }

    pub fn other(self) -> Transition {
        match self {
            Transition::Plus => Transition::Minus,
            Transition::Minus => Transition::Plus,
        }
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transition::Plus => "plus",
            Transition::Minus => "minus",
        })
    }
}

impl FromStr for Transition {
    type Err = SpinError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "plus" | "+" => Ok(Transition::Plus),
            "minus" | "-" => Ok(Transition::Minus),
            _ => Err(SpinError::UnknownFrame(s.to_string())),
        }
    }
}

/// Ground-state spin Hamiltonian and microwave drive, all in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinHamiltonianParams {
    /// `D_gs0` in Hz; the zero-field splitting is `2 D_gs0`.
    pub zfs_d_hz: f64,
    pub gamma_hz_per_t: f64,
    pub b0_t: f64,
    /// Rabi angular frequency in rad/s.
    pub rabi_omega: f64,
    pub rf_freq_hz: f64,
    pub frame: Transition,
}

impl Default for SpinHamiltonianParams {
    fn default() -> Self {
        Self {
            zfs_d_hz: 35.0e6,
            gamma_hz_per_t: GAMMA_E_HZ_PER_T,
            b0_t: 0.0,
            rabi_omega: 0.0,
            rf_freq_hz: 70.0e6,
            frame: Transition::Plus,
        }
    }
}

impl SpinHamiltonianParams {
    pub fn validate(&self) -> Result<(), SpinError> {
        let bad = |what: &str| Err(SpinError::InvalidParams(what.to_string()));
        if !(self.zfs_d_hz > 0.0) {
            return bad("zero-field splitting must be positive");
        }
        if !(self.gamma_hz_per_t > 0.0) {
            return bad("gyromagnetic ratio must be positive");
        }
        if !(self.rabi_omega >= 0.0) || !self.rabi_omega.is_finite() {
            return bad("Rabi frequency must be finite and non-negative");
        }
        if !self.b0_t.is_finite() || !self.rf_freq_hz.is_finite() {
            return bad("field and RF frequency must be finite");
        }
        Ok(())
    }

    /// Ground sublevel energy in Hz: `D (m^2 - 5/4) + γ B0 m`.
    pub fn ground_energy_hz(&self, m: f64) -> f64 {
        self.zfs_d_hz * (m * m - 1.25) + self.gamma_hz_per_t * self.b0_t * m
    }

    /// Signed gap `E(±3/2) - E(±1/2)` in Hz.
    fn signed_gap_hz(&self, t: Transition) -> f64 {
        let (a, b) = t.levels();
        self.ground_energy_hz(a.spin_projection().unwrap())
            - self.ground_energy_hz(b.spin_projection().unwrap())
    }

    pub fn transition_frequency(&self, t: Transition) -> f64 {
        self.signed_gap_hz(t).abs()
    }

    /// Doublet transition closest to `freq_hz`; ties go to `Plus`.
    pub fn nearest_transition(&self, freq_hz: f64) -> Transition {
        let dp = (self.transition_frequency(Transition::Plus) - freq_hz).abs();
        let dm = (self.transition_frequency(Transition::Minus) - freq_hz).abs();
        if dm < dp {
            Transition::Minus
        } else {
            Transition::Plus
        }
    }
}

/// The two `|Δm_S| = 1` ground transitions `|γB0 ± 2D|`, ascending.
pub fn ground_transition_frequencies(params: &SpinHamiltonianParams) -> (f64, f64) {
    let a = params.transition_frequency(Transition::Plus);
    let b = params.transition_frequency(Transition::Minus);
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Rotating-wave Hamiltonian (rad/s) in the frame of the RF drive.
///
/// Each ground doublet sits at `±Δ/2` about its midpoint with
/// `Δ = 2π (f_transition - f_rf)`, the upper level of the pair taking `+Δ/2`.
/// Only the framed doublet carries the `Ω/2` drive coupling. A negative
/// `rabi_omega` is never produced by the params type, but [`drive_coupling`]
/// accepts signed amplitudes so that pulse phases of π can be expressed.
pub fn build_rotating_hamiltonian<T: Real>(params: &SpinHamiltonianParams) -> LevelMatrix<T> {
    rotating_hamiltonian_signed(params, params.rabi_omega)
}

/// As [`build_rotating_hamiltonian`] with a signed drive amplitude
/// (a negative value is the same drive with a π phase shift).
pub fn rotating_hamiltonian_signed<T: Real>(
    params: &SpinHamiltonianParams,
    omega: f64,
) -> LevelMatrix<T> {
    let mut h = LevelMatrix::<T>::zeros();
    for t in [Transition::Plus, Transition::Minus] {
        let (a, b) = t.levels();
        let gap = params.signed_gap_hz(t);
        let detuning = 2.0 * PI * (gap.abs() - params.rf_freq_hz);
        let (upper, lower) = if gap >= 0.0 { (a, b) } else { (b, a) };
        h[(upper.index(), upper.index())] = Complex::new(T::lit(0.5 * detuning), T::zero());
        h[(lower.index(), lower.index())] = Complex::new(T::lit(-0.5 * detuning), T::zero());
    }
    let (a, b) = params.frame.levels();
    let c = drive_coupling::<T>(omega);
    h[(a.index(), b.index())] = c;
    h[(b.index(), a.index())] = c.conj();
    h
}

/// `Ω/2` coupling element.
pub fn drive_coupling<T: Real>(omega: f64) -> Complex<T> {
    Complex::new(T::lit(0.5 * omega), T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> SpinHamiltonianParams {
        SpinHamiltonianParams::default()
    }

    #[test]
    fn zero_field_is_degenerate_at_70_mhz() {
        let (lo, hi) = ground_transition_frequencies(&params());
        assert!((lo - 70.0e6).abs() < 1e-6);
        assert!((hi - 70.0e6).abs() < 1e-6);
    }

    #[test]
    fn no_splitting_gives_zero() {
        let p = SpinHamiltonianParams {
            zfs_d_hz: 0.0,
            ..params()
        };
        assert_eq!(ground_transition_frequencies(&p), (0.0, 0.0));
    }

    #[test]
    fn undriven_hamiltonian_is_diagonal() {
        let h: LevelMatrix<f64> = build_rotating_hamiltonian(&params());
        assert!(h.is_diagonal());
        assert_eq!(h.hermiticity_error(), 0.0);
    }

    #[test]
    fn resonant_frame_has_zero_detuning_pair() {
        let p = SpinHamiltonianParams {
            b0_t: 5e-3,
            ..params()
        };
        let (lo, _) = ground_transition_frequencies(&p);
        let frame = p.nearest_transition(lo);
        let p = SpinHamiltonianParams {
            rf_freq_hz: lo,
            frame,
            rabi_omega: 1e6,
            ..p
        };
        let h: LevelMatrix<f64> = build_rotating_hamiltonian(&p);
        let (a, b) = frame.levels();
        assert_eq!(h[(a.index(), a.index())], h[(b.index(), b.index())]);
    }

    #[test]
    fn coupling_is_half_rabi() {
        let p = SpinHamiltonianParams {
            rabi_omega: 2.0 * PI * 1e6,
            ..params()
        };
        let h: LevelMatrix<f64> = build_rotating_hamiltonian(&p);
        let (a, b) = p.frame.levels();
        assert!((h[(a.index(), b.index())].norm() - PI * 1e6).abs() < 1e-6);
        assert_eq!(h.hermiticity_error(), 0.0);
        // only the framed pair is coupled
        let (c, d) = p.frame.other().levels();
        assert_eq!(h[(c.index(), d.index())].norm(), 0.0);
    }

    #[test]
    fn unknown_frame_is_rejected() {
        assert!(matches!(
            "sideways".parse::<Transition>(),
            Err(SpinError::UnknownFrame(_))
        ));
        assert_eq!("Minus".parse::<Transition>().unwrap(), Transition::Minus);
    }
}
