//! Laser-to-rate conversion and the optical and electrical observables of
//! the charge cycle.

mod spectral;

pub use spectral::{SpectralModel, SpectralTable, DEFAULT_BACKGROUND_890_A_PER_W, ZPL_NM};

/// Elementary charge in C.
pub const ELEMENTARY_CHARGE: f64 = 1.602176634e-19;

/// Accepted laser wavelength range in nm.
pub const WAVELENGTH_RANGE_NM: (f64, f64) = (780.0, 1050.0);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OpticsError {
    #[error("wavelength {nm} nm outside table domain {lo}-{hi} nm")]
    WavelengthOutOfRange { nm: f64, lo: f64, hi: f64 },
    #[error("invalid laser: {0}")]
    InvalidLaser(String),
    #[error("invalid spectral table: {0}")]
    InvalidTable(String),
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserField {
    pub power_w: f64,
    pub wavelength_m: f64,
    pub spot_diameter_m: f64,
    /// Fraction of time the laser is on; informational for pulsed use.
    pub duty: f64,
}

impl LaserField {
    pub fn new(power_w: f64, wavelength_nm: f64, spot_diameter_m: f64) -> Self {
        Self {
            power_w,
            wavelength_m: wavelength_nm * 1e-9,
            spot_diameter_m,
            duty: 1.0,
        }
    }

    pub fn wavelength_nm(&self) -> f64 {
        self.wavelength_m * 1e9
    }

    /// Uniform-disc intensity in W/m².
    pub fn intensity(&self) -> f64 {
        let r = 0.5 * self.spot_diameter_m;
        self.power_w / (std::f64::consts::PI * r * r)
    }

    pub fn validate(&self) -> Result<(), OpticsError> {
        let nm = self.wavelength_nm();
        let (lo, hi) = WAVELENGTH_RANGE_NM;
        // tolerate round-off from the nm <-> m conversion
        if !(nm >= lo - 1e-9 && nm <= hi + 1e-9) {
            return Err(OpticsError::WavelengthOutOfRange { nm, lo, hi });
        }
        if !(self.power_w >= 0.0) || !self.power_w.is_finite() {
            return Err(OpticsError::InvalidLaser(format!(
                "power {} W must be >= 0",
                self.power_w
            )));
        }
        if !(self.spot_diameter_m > 0.0) || !self.spot_diameter_m.is_finite() {
            return Err(OpticsError::InvalidLaser(format!(
                "spot diameter {} m must be > 0",
                self.spot_diameter_m
            )));
        }
        if !(0.0..=1.0).contains(&self.duty) {
            return Err(OpticsError::InvalidLaser(format!(
                "duty {} must lie in [0, 1]",
                self.duty
            )));
        }
        Ok(())
    }
}

/// Per-defect optical coupling constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotoPhysics {
    /// Ground-to-excited pump rate per unit intensity at unit relative cross-section, 1/s per W/m².
    pub pump_per_intensity: f64,
    /// Excited-state ionization rate per unit intensity at unit relative efficiency, 1/s per W/m².
    pub ionize_per_intensity: f64,
    /// Intensity-independent recombination rate, 1/s.
    pub recombination: f64,
    /// Extra recombination per unit intensity, used only when `recombination_scales_with_intensity`.
    pub recombination_per_intensity: f64,
    pub recombination_scales_with_intensity: bool,
}

impl Default for PhotoPhysics {
    fn default() -> Self {
        Self {
            pump_per_intensity: 1.0e-3,
            ionize_per_intensity: 1.2e-2,
            recombination: 1.0e8,
            recombination_per_intensity: 0.0,
            recombination_scales_with_intensity: false,
        }
    }
}

/// Optical rates acting on one defect, all in 1/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalRates {
    pub pump: f64,
    pub ionize: f64,
    pub recombine: f64,
}

pub fn pump_rates(
    laser: &LaserField,
    spec: &SpectralModel,
    phys: &PhotoPhysics,
) -> Result<OpticalRates, OpticsError> {
    laser.validate()?;
    let nm = laser.wavelength_nm();
    let i = laser.intensity();
    let mut recombine = phys.recombination;
    if phys.recombination_scales_with_intensity {
        recombine += phys.recombination_per_intensity * i;
    }
    Ok(OpticalRates {
        pump: phys.pump_per_intensity * i * spec.excitation.eval(nm)?,
        ionize: phys.ionize_per_intensity * i * spec.ionization.eval(nm)?,
        recombine,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub n_defects: u32,
    pub collection_efficiency: f64,
    /// Photon rate of one defect into the collection path, counts/s.
    pub single_defect_rate: f64,
    /// Fraction of the emission passing the long-pass filter.
    pub sideband_fraction: f64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            n_defects: 45,
            collection_efficiency: 1.0,
            single_defect_rate: 3.5e3,
            sideband_fraction: 0.5,
        }
    }
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<(), OpticsError> {
        for (name, v) in [
            ("collection_efficiency", self.collection_efficiency),
            ("sideband_fraction", self.sideband_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(OpticsError::InvalidEnsemble(format!(
                    "{name} = {v} must lie in [0, 1]"
                )));
            }
        }
        if !(self.single_defect_rate >= 0.0) {
            return Err(OpticsError::InvalidEnsemble(
                "single_defect_rate must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Photocurrent split into its sources, all in A.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotocurrentSample {
    pub current: f64,
    pub defect_current: f64,
    pub background: f64,
    pub dark: f64,
}

impl PhotocurrentSample {
    pub fn from_components(defect_current: f64, background: f64, dark: f64) -> Self {
        Self {
            current: defect_current + background + dark,
            defect_current,
            background,
            dark,
        }
    }
}

/// Photocurrent for a per-defect ionization event rate `state_rate` (1/s).
pub fn photocurrent(
    state_rate: f64,
    ens: &EnsembleSpec,
    laser: &LaserField,
    spec: &SpectralModel,
    dark: f64,
) -> Result<PhotocurrentSample, OpticsError> {
    let defect = ELEMENTARY_CHARGE * ens.n_defects as f64 * state_rate.max(0.0);
    let background = laser.power_w * spec.background.eval(laser.wavelength_nm())?;
    Ok(PhotocurrentSample::from_components(
        defect, background, dark,
    ))
}

/// Detected photon rate in counts/s for a per-defect radiative rate.
pub fn photon_rate(radiative_rate: f64, ens: &EnsembleSpec) -> f64 {
    ens.n_defects as f64 * radiative_rate * ens.collection_efficiency * ens.sideband_fraction
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intensity_of_uniform_disc() {
        let l = LaserField::new(std::f64::consts::PI * 1e-12, 890.0, 2e-6);
        assert!((l.intensity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn laser_range_checks() {
        assert!(LaserField::new(1e-3, 779.0, 1e-6).validate().is_err());
        assert!(LaserField::new(-1e-3, 890.0, 1e-6).validate().is_err());
        assert!(LaserField::new(1e-3, 890.0, 0.0).validate().is_err());
        LaserField::new(1e-3, 1050.0, 1e-6).validate().unwrap();
    }

    #[test]
    fn components_sum_exactly() {
        let s = PhotocurrentSample::from_components(1.3e-13, 1.1e-9, 8e-12);
        assert_eq!(s.current, 1.3e-13 + 1.1e-9 + 8e-12);
    }
}
