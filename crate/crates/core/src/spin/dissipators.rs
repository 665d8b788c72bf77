use super::levels::Level;
use super::matrix::LevelMatrix;
use super::SpinError;
use crate::scalar::Real;

/// Incoherent rates of the level model, all in 1/s.
///
/// Every rate maps onto one or more jump operators `sqrt(rate) |to><from|`.
/// Doublet-wide rates (`metastable_to_*`, `recombination`) are split evenly
/// over the destination sublevels. `ground_dephasing` is applied as a
/// projector jump `sqrt(rate) |g_m><g_m|` on each ground sublevel, so a
/// ground coherence decays as `exp(-rate * t)` and `rate = 1 / T2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipatorSet<T: Real> {
    /// Spin-conserving radiative decay `e(m) -> g(m)`.
    pub radiative: T,
    /// Intersystem crossing `e(±1/2) -> M`.
    pub isc_half: T,
    /// Intersystem crossing `e(±3/2) -> M`.
    pub isc_three_half: T,
    /// Total `M -> g(±1/2)` rate.
    pub metastable_to_half: T,
    /// Total `M -> g(±3/2)` rate.
    pub metastable_to_three_half: T,
    pub ground_dephasing: T,
    /// Optical pumping `g(m) -> e(m)` per sublevel.
    pub pump: T,
    /// Ionization `e(m) -> ION` per sublevel.
    pub ionization: T,
    /// Total `ION -> g` recombination.
    pub recombination: T,
}

/// A single jump operator `sqrt(rate) |to><from|`; `from == to` is a dephasing projector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump<T: Real> {
    pub from: Level,
    pub to: Level,
    pub rate: T,
}

impl<T: Real> Jump<T> {
    pub fn operator(&self) -> LevelMatrix<T> {
        LevelMatrix::transition(self.from, self.to).scale(self.rate.sqrt())
    }
}

impl<T: Real> DissipatorSet<T> {
    pub fn zero() -> Self {
        let z = T::zero();
        Self {
            radiative: z,
            isc_half: z,
            isc_three_half: z,
            metastable_to_half: z,
            metastable_to_three_half: z,
            ground_dephasing: z,
            pump: z,
            ionization: z,
            recombination: z,
        }
    }

    /// Intrinsic defaults with the optical channels switched off.
    ///
    /// Excited lifetime 6 ns, ISC 1e8/s from `±1/2` and 1e7/s from `±3/2`,
    /// a 200 ns metastable lifetime returning 78 % of the population to the
    /// `±1/2` doublet, and `T2 = 7 µs`.
    pub fn intrinsic_default() -> Self {
        let metastable_total = 1.0 / 200e-9;
        Self {
            radiative: T::lit(1.0 / 6e-9),
            isc_half: T::lit(1e8),
            isc_three_half: T::lit(1e7),
            metastable_to_half: T::lit(0.78 * metastable_total),
            metastable_to_three_half: T::lit(0.22 * metastable_total),
            ground_dephasing: T::lit(1.0 / 7e-6),
            ..Self::zero()
        }
    }

    pub fn with_optical(mut self, pump: T, ionization: T, recombination: T) -> Self {
        self.pump = pump;
        self.ionization = ionization;
        self.recombination = recombination;
        self
    }

    pub fn validate(&self) -> Result<(), SpinError> {
        let named = [
            ("radiative", self.radiative),
            ("isc_half", self.isc_half),
            ("isc_three_half", self.isc_three_half),
            ("metastable_to_half", self.metastable_to_half),
            ("metastable_to_three_half", self.metastable_to_three_half),
            ("ground_dephasing", self.ground_dephasing),
            ("pump", self.pump),
            ("ionization", self.ionization),
            ("recombination", self.recombination),
        ];
        for (name, rate) in named {
            if !(rate >= T::zero()) || !rate.is_finite() {
                return Err(SpinError::InvalidRates(format!(
                    "{name} must be finite and >= 0"
                )));
            }
        }
        if !(self.isc_half > self.isc_three_half) {
            return Err(SpinError::InvalidRates(
                "ISC from e(±1/2) must exceed ISC from e(±3/2)".into(),
            ));
        }
        Ok(())
    }

    /// Every level can leave any state it is pumped into.
    pub fn cycles_closed(&self) -> bool {
        let ion_ok = self.ionization == T::zero() || self.recombination > T::zero();
        let isc = self.isc_half > T::zero() || self.isc_three_half > T::zero();
        let meta_ok = !isc || self.metastable_to_half + self.metastable_to_three_half > T::zero();
        ion_ok && meta_ok
    }

    pub fn has_optical(&self) -> bool {
        self.pump > T::zero() || self.ionization > T::zero()
    }

    /// Expands the named rates into individual jump operators; zero rates are skipped.
    pub fn jumps(&self) -> Vec<Jump<T>> {
        use Level::*;
        let half = T::lit(0.5);
        let quarter = T::lit(0.25);
        let mut out = Vec::with_capacity(32);
        let mut push = |from: Level, to: Level, rate: T| {
            if rate > T::zero() {
                out.push(Jump { from, to, rate });
            }
        };
        for g in Level::GROUND {
            let e = g.optical_partner().unwrap();
            push(e, g, self.radiative);
            push(g, e, self.pump);
            push(e, Ionized, self.ionization);
            push(g, g, self.ground_dephasing);
            push(Ionized, g, self.recombination * quarter);
        }
        push(ExcitedPlus1Half, Metastable, self.isc_half);
        push(ExcitedMinus1Half, Metastable, self.isc_half);
        push(ExcitedPlus3Half, Metastable, self.isc_three_half);
        push(ExcitedMinus3Half, Metastable, self.isc_three_half);
        push(Metastable, GroundPlus1Half, self.metastable_to_half * half);
        push(Metastable, GroundMinus1Half, self.metastable_to_half * half);
        push(
            Metastable,
            GroundPlus3Half,
            self.metastable_to_three_half * half,
        );
        push(
            Metastable,
            GroundMinus3Half,
            self.metastable_to_three_half * half,
        );
        out
    }

    /// Fastest total out-rate of any level.
    pub fn max_rate(&self) -> T {
        let mut out = [T::zero(); super::N_LEVELS];
        for j in self.jumps() {
            if j.from != j.to {
                out[j.from.index()] = out[j.from.index()] + j.rate;
            }
        }
        out.into_iter().fold(T::zero(), T::max)
    }

    pub fn cast<U: Real>(&self) -> DissipatorSet<U> {
        let c = |v: T| U::lit(v.as_f64());
        DissipatorSet {
            radiative: c(self.radiative),
            isc_half: c(self.isc_half),
            isc_three_half: c(self.isc_three_half),
            metastable_to_half: c(self.metastable_to_half),
            metastable_to_three_half: c(self.metastable_to_three_half),
            ground_dephasing: c(self.ground_dephasing),
            pump: c(self.pump),
            ionization: c(self.ionization),
            recombination: c(self.recombination),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        DissipatorSet::<f64>::intrinsic_default()
            .validate()
            .unwrap();
    }

    #[test]
    fn isc_ordering_enforced() {
        let mut d = DissipatorSet::<f64>::intrinsic_default();
        d.isc_three_half = d.isc_half;
        assert!(matches!(d.validate(), Err(SpinError::InvalidRates(_))));
        d.isc_three_half = -1.0;
        assert!(d.validate().is_err());
    }

    #[test]
    fn open_ionization_cycle_detected() {
        let d = DissipatorSet::<f64>::intrinsic_default().with_optical(1e7, 1e5, 0.0);
        assert!(!d.cycles_closed());
        assert!(d.with_optical(1e7, 1e5, 1e6).cycles_closed());
    }

    #[test]
    fn zero_rates_emit_no_jumps() {
        assert!(DissipatorSet::<f64>::zero().jumps().is_empty());
    }
}
