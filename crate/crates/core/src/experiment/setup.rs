use super::config::{EchoProjectionConfig, EchoReferenceConfig, ScenarioConfig};
use super::ExperimentError;
use crate::detector::{ApdConfig, NoiseConfig, TiaConfig};
use crate::optics::{
    pump_rates, EnsembleSpec, LaserField, OpticalRates, PhotoPhysics, SpectralModel, SpectralTable,
};
use crate::pulse::{
    DetectorBundle, EchoProjection, EchoReference, MicrowaveConfig, PhysicsBundle, TimingConfig,
};
use crate::spin::{
    build_rotating_hamiltonian, steady_state, DissipatorSet, Level, SpinHamiltonianParams,
    Transition,
};

pub fn spin_params(cfg: &ScenarioConfig) -> SpinHamiltonianParams {
    let p = &cfg.physics;
    SpinHamiltonianParams {
        zfs_d_hz: p.zfs_d_mhz * 1e6,
        gamma_hz_per_t: p.gamma_ghz_per_t * 1e9,
        b0_t: p.b0_mt * 1e-3,
        rabi_omega: 0.0,
        rf_freq_hz: cfg.drive_rf_hz(),
        frame: Transition::Plus,
    }
}

/// Intrinsic rates with the optical channels off.
pub fn intrinsic_rates(cfg: &ScenarioConfig) -> DissipatorSet<f64> {
    let p = &cfg.physics;
    let metastable = 1.0 / (p.metastable_lifetime_ns * 1e-9);
    DissipatorSet {
        radiative: 1.0 / (p.excited_lifetime_ns * 1e-9),
        isc_half: p.isc_half_per_us * 1e6,
        isc_three_half: p.isc_three_half_per_us * 1e6,
        metastable_to_half: p.metastable_branching_half * metastable,
        metastable_to_three_half: (1.0 - p.metastable_branching_half) * metastable,
        ground_dephasing: 1.0 / (p.t2_us * 1e-6),
        ..DissipatorSet::zero()
    }
}

pub fn photo_physics(cfg: &ScenarioConfig) -> PhotoPhysics {
    let p = &cfg.physics;
    PhotoPhysics {
        pump_per_intensity: p.pump_m2_per_j,
        ionize_per_intensity: p.ionize_m2_per_j,
        recombination: p.recombination_per_us * 1e6,
        recombination_per_intensity: p.recombination_m2_per_j,
        recombination_scales_with_intensity: p.recombination_scales_with_intensity,
    }
}

pub fn spectral_model(cfg: &ScenarioConfig) -> Result<SpectralModel, ExperimentError> {
    let mut m = SpectralModel::default_tables();
    let p = &cfg.physics;
    for (path, slot) in [
        (&p.excitation_table, &mut m.excitation),
        (&p.ionization_table, &mut m.ionization),
        (&p.background_table, &mut m.background),
    ] {
        if let Some(path) = path {
            *slot = SpectralTable::load(path)?;
        }
    }
    Ok(m.with_background_scale(cfg.background_scale()))
}

pub fn laser_field(cfg: &ScenarioConfig) -> LaserField {
    let l = &cfg.laser;
    LaserField::new(
        l.power_mw * 1e-3,
        l.wavelength_nm,
        l.spot_diameter_um * 1e-6,
    )
}

pub fn timing_config(cfg: &ScenarioConfig) -> TimingConfig {
    let t = &cfg.timing;
    TimingConfig {
        laser_width_ns: t.laser_width_ns,
        guard_ns: t.guard_ns,
        rep_period_ns: t.rep_period_ns,
        envelope_freq_hz: t.envelope_hz,
        daq_period_ns: t.daq_period_ns,
        apd_rise_delay_ns: t.apd_rise_delay_ns,
        apd_window_ns: t.apd_window_ns,
        mw: MicrowaveConfig {
            rabi_omega: 2.0 * std::f64::consts::PI * t.rabi_mhz * 1e6,
            pi_ns: t.pi_ns,
            pi_half_ns: t.pi_half_ns,
            echo_projection: match t.echo_projection {
                EchoProjectionConfig::Bright => EchoProjection::Bright,
                EchoProjectionConfig::Dark => EchoProjection::Dark,
            },
            echo_reference: match t.echo_reference {
                EchoReferenceConfig::Off => EchoReference::Off,
                EchoReferenceConfig::Alternating => EchoReference::Alternating,
            },
        },
    }
}

pub fn detector_bundle(cfg: &ScenarioConfig) -> DetectorBundle {
    let d = &cfg.detector;
    let n = &cfg.noise;
    let t = &cfg.timing;
    DetectorBundle {
        tia: TiaConfig {
            gain: d.tia_gain_v_per_a,
            bandwidth_hz: d.tia_bandwidth_hz,
            input_noise_a: d.input_noise_fa * 1e-15,
            dark_current_a: d.dark_current_pa * 1e-12,
        },
        apd: ApdConfig {
            window_s: t.apd_window_ns as f64 * 1e-9,
            rise_delay_s: t.apd_rise_delay_ns as f64 * 1e-9,
            dead_time_s: d.apd_dead_time_ns * 1e-9,
        },
        noise: NoiseConfig {
            enabled: n.enabled,
            shot_noise_on: n.shot_noise,
            counting_noise_on: n.counting_noise,
            laser_rel_fluctuation: n.laser_rel_fluctuation,
            poisson_electrons: n.poisson_electrons,
            seed: cfg.seed,
        },
        electrical: cfg.readout.electrical(),
        optical: cfg.readout.optical(),
    }
}

/// Per-defect steady state under continuous illumination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CwState {
    /// Ionization events per second.
    pub ionization_rate: f64,
    /// Radiative decays per second.
    pub emission_rate: f64,
}

/// Continuous-wave steady state of one defect for the given optical rates.
pub fn cw_state(
    params: &SpinHamiltonianParams,
    intrinsic: &DissipatorSet<f64>,
    rates: &OpticalRates,
) -> Result<CwState, ExperimentError> {
    let d = intrinsic.with_optical(rates.pump, rates.ionize, rates.recombine);
    let h = build_rotating_hamiltonian::<f64>(&SpinHamiltonianParams {
        rabi_omega: 0.0,
        ..*params
    });
    let rho = if d.cycles_closed() && d.max_rate() > 0.0 {
        steady_state(&h, &d, 1.0)?
    } else {
        crate::spin::DensityMatrix::mixed_ground()
    };
    let excited = rho.sum_populations(&Level::EXCITED);
    Ok(CwState {
        ionization_rate: rates.ionize * excited,
        emission_rate: intrinsic.radiative * excited,
    })
}

/// Everything a pulsed acquisition needs, resolved from a config.
#[derive(Debug, Clone)]
pub struct Instrument {
    pub spectral: SpectralModel,
    pub laser: LaserField,
    pub photo: PhotoPhysics,
    pub intrinsic: DissipatorSet<f64>,
    pub physics: PhysicsBundle,
    pub detector: DetectorBundle,
    pub timing: TimingConfig,
}

impl Instrument {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self, ExperimentError> {
        let spectral = spectral_model(cfg)?;
        let laser = laser_field(cfg);
        let photo = photo_physics(cfg);
        let intrinsic = intrinsic_rates(cfg);
        let optical = pump_rates(&laser, &spectral, &photo)?;
        let spin = spin_params(cfg);
        let e = &cfg.ensemble;
        let mut ensemble = EnsembleSpec {
            n_defects: e.n_defects,
            collection_efficiency: e.collection_efficiency.unwrap_or(1.0),
            single_defect_rate: e.single_defect_rate_kcps * 1e3,
            sideband_fraction: e.sideband_fraction,
        };
        if e.collection_efficiency.is_none() {
            let cw = cw_state(&spin, &intrinsic, &optical)?;
            ensemble.collection_efficiency = if cw.emission_rate > 0.0 {
                (ensemble.single_defect_rate / cw.emission_rate).min(1.0)
            } else {
                0.0
            };
        }
        ensemble.validate()?;
        let background_current_a =
            laser.power_w * spectral.background.eval(laser.wavelength_nm())?;
        Ok(Self {
            spectral,
            laser,
            photo,
            intrinsic,
            physics: PhysicsBundle {
                spin,
                rates: intrinsic,
                optical,
                auto_frame: true,
                ensemble,
                background_current_a,
            },
            detector: detector_bundle(cfg),
            timing: timing_config(cfg),
        })
    }

    /// Same instrument with the laser retuned; collection efficiency is kept.
    pub fn at_laser(&self, laser: LaserField) -> Result<Self, ExperimentError> {
        let mut out = self.clone();
        out.physics.optical = pump_rates(&laser, &self.spectral, &self.photo)?;
        out.physics.background_current_a =
            laser.power_w * self.spectral.background.eval(laser.wavelength_nm())?;
        out.laser = laser;
        Ok(out)
    }

    pub fn at_wavelength(&self, nm: f64) -> Result<Self, ExperimentError> {
        self.at_laser(LaserField {
            wavelength_m: nm * 1e-9,
            ..self.laser
        })
    }

    pub fn cw_state(&self) -> Result<CwState, ExperimentError> {
        cw_state(&self.physics.spin, &self.intrinsic, &self.physics.optical)
    }
}
