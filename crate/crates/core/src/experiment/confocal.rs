use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use statrs::function::erf::erf;

use super::config::{ConfocalSection, ElectrodeRect, ScenarioConfig};
use super::setup::{cw_state, Instrument};
use super::ExperimentError;
use crate::optics::{pump_rates, LaserField, ELEMENTARY_CHARGE};

/// Opaque electrodes inside a square scan field, with the raster settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectrodeMask {
    pub field_um: f64,
    pub step_um: f64,
    pub dwell_s: f64,
    pub regions: Vec<ElectrodeRect>,
}

impl ElectrodeMask {
    pub fn from_config(s: &ConfocalSection) -> Self {
        Self {
            field_um: s.field_um,
            step_um: s.step_nm * 1e-3,
            dwell_s: s.dwell_ms * 1e-3,
            regions: s.electrodes.clone(),
        }
    }

    /// Pixel centres along one axis, from 0 in whole steps up to the field size.
    pub fn axis_um(&self) -> Vec<f64> {
        let n = (self.field_um / self.step_um + 1e-9).floor() as usize + 1;
        (0..n).map(|i| i as f64 * self.step_um).collect()
    }

    /// Fraction of a Gaussian spot centred at `(x, y)` that misses every
    /// electrode. `sigma_um` is the intensity standard deviation. Electrode
    /// edges lying on the field boundary continue beyond it.
    pub fn open_fraction(&self, x: f64, y: f64, sigma_um: f64) -> f64 {
        let phi = |z: f64| 0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2));
        let f = self.field_um;
        let lo = |v: f64| if v <= 0.0 { f64::NEG_INFINITY } else { v };
        let hi = |v: f64| if v >= f { f64::INFINITY } else { v };
        let blocked: f64 = self
            .regions
            .iter()
            .map(|r| {
                let fx = phi((hi(r.x1_um) - x) / sigma_um) - phi((lo(r.x0_um) - x) / sigma_um);
                let fy = phi((hi(r.y1_um) - y) / sigma_um) - phi((lo(r.y0_um) - y) / sigma_um);
                fx * fy
            })
            .sum();
        (1.0 - blocked).clamp(0.0, 1.0)
    }
}

/// Photocurrent map, row-major with `x` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfocalImage {
    pub spot_diameter_um: f64,
    pub xs_um: Vec<f64>,
    pub ys_um: Vec<f64>,
    pub current_a: Vec<f64>,
}

impl ConfocalImage {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.current_a[iy * self.xs_um.len() + ix]
    }

    pub fn max(&self) -> f64 {
        self.current_a
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x_um,y_um,current_A\n");
        for (iy, y) in self.ys_um.iter().enumerate() {
            for (ix, x) in self.xs_um.iter().enumerate() {
                let _ = writeln!(s, "{x:.4},{y:.4},{:e}", self.at(ix, iy));
            }
        }
        s
    }
}

/// Mean over bright pixels (mean above half the brightest) of the
/// across-image variance divided by the squared mean, for repeated images
/// of the same grid.
pub fn pixel_relative_variance(images: &[ConfocalImage]) -> f64 {
    let n = images.len();
    assert!(n >= 2, "need at least two images");
    let len = images[0].current_a.len();
    let stats: Vec<(f64, f64)> = (0..len)
        .map(|i| {
            let mean = images.iter().map(|im| im.current_a[i]).sum::<f64>() / n as f64;
            let var = images
                .iter()
                .map(|im| (im.current_a[i] - mean).powi(2))
                .sum::<f64>()
                / (n - 1) as f64;
            (mean, var)
        })
        .collect();
    let top = stats.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let bright: Vec<f64> = stats
        .iter()
        .filter(|s| s.0 > 0.5 * top)
        .map(|s| s.1 / (s.0 * s.0))
        .collect();
    bright.iter().sum::<f64>() / bright.len() as f64
}

/// Continuous-wave photocurrent scan with a Gaussian spot of 1/e² diameter
/// `spot_diameter_um` at the configured laser power and wavelength.
///
/// Each pixel sees the defects and background inside the unoccluded part of
/// the spot. The defect count is Poisson around `n_defects` scaled by spot
/// area, and with noise enabled the dwell-averaged shot, input and laser
/// fluctuations are added. Fully occluded pixels read the dark current.
pub fn synthesize_confocal(
    cfg: &ScenarioConfig,
    mask: &ElectrodeMask,
    spot_diameter_um: f64,
    seed: u64,
) -> Result<ConfocalImage, ExperimentError> {
    let inst = Instrument::from_config(cfg)?;
    let laser = LaserField {
        spot_diameter_m: spot_diameter_um * 1e-6,
        ..inst.laser
    };
    let rates = pump_rates(&laser, &inst.spectral, &inst.photo)?;
    let per_defect = cw_state(&inst.physics.spin, &inst.intrinsic, &rates)?.ionization_rate;
    let area_scale = (spot_diameter_um / cfg.confocal.reference_spot_um).powi(2);
    let n_mean = cfg.ensemble.n_defects as f64 * area_scale;
    let background = laser.power_w * inst.spectral.background.eval(laser.wavelength_nm())?;
    let det = &inst.detector;
    let dark = det.tia.dark_current_a;
    let noise = det.noise;
    let bw = det.tia.bandwidth_hz;
    let t = mask.dwell_s;
    let sigma = spot_diameter_um / 4.0;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = mask.axis_um();
    let mut current = Vec::with_capacity(axis.len() * axis.len());
    for &y in &axis {
        for &x in &axis {
            let open = mask.open_fraction(x, y, sigma);
            let expected = n_mean * open;
            let n = if noise.enabled && expected > 0.0 {
                Poisson::new(expected)
                    .map(|p| p.sample(&mut rng))
                    .unwrap_or(expected)
            } else {
                expected
            };
            let mut i = (ELEMENTARY_CHARGE * n * per_defect + background * open)
                * (1.0 + laser_noise(&noise, bw, t, &mut rng));
            i += dark;
            if noise.shot() {
                let var =
                    ELEMENTARY_CHARGE * i / t + det.tia.input_noise_a.powi(2) / (2.0 * bw * t);
                let z: f64 = StandardNormal.sample(&mut rng);
                i += var.sqrt() * z;
            }
            current.push(i);
        }
    }
    Ok(ConfocalImage {
        spot_diameter_um,
        xs_um: axis.clone(),
        ys_um: axis,
        current_a: current,
    })
}

/// Relative laser power error averaged over the dwell time, treating the
/// configured fluctuation as white within the TIA bandwidth.
fn laser_noise(
    noise: &crate::detector::NoiseConfig,
    bw: f64,
    dwell: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let rel = noise.laser_rel();
    if rel == 0.0 {
        return 0.0;
    }
    let z: f64 = StandardNormal.sample(rng);
    rel / (2.0 * bw * dwell).sqrt() * z
}
