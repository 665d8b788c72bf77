use crate::scalar::Real;

/// Number of emitters implied by a measured count rate, as `(low, high)`
/// bounds from the single-emitter rate band `(single_lo, single_hi)`.
///
/// `n = measured / (single × sideband_fraction)`. Panics unless
/// `0 < single_lo <= single_hi` and `0 < sideband_fraction <= 1`.
pub fn estimate_spin_count<T: Real>(measured: T, single: (T, T), sideband_fraction: T) -> (T, T) {
    let (lo, hi) = single;
    assert!(
        lo > T::zero() && hi >= lo,
        "single emitter rate band must be positive and ordered"
    );
    assert!(
        sideband_fraction > T::zero() && sideband_fraction <= T::one(),
        "sideband fraction must be in (0, 1]"
    );
    (
        measured / (hi * sideband_fraction),
        measured / (lo * sideband_fraction),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_gives_zero() {
        assert_eq!(estimate_spin_count(0.0, (3e3, 4e3), 0.5), (0.0, 0.0));
    }
}
