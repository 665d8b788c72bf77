use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::spin::GAMMA_E_HZ_PER_T;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    PdmrSweep,
    RabiSweep,
    HahnEcho,
    WavelengthSweep,
    ConfocalScan,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::PdmrSweep,
        Scenario::RabiSweep,
        Scenario::HahnEcho,
        Scenario::WavelengthSweep,
        Scenario::ConfocalScan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::PdmrSweep => "pdmr_sweep",
            Scenario::RabiSweep => "rabi_sweep",
            Scenario::HahnEcho => "hahn_echo",
            Scenario::WavelengthSweep => "wavelength_sweep",
            Scenario::ConfocalScan => "confocal_scan",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Scenario::PdmrSweep => {
                "pulsed PDMR/ODMR spectrum over RF frequency, multi-Lorentzian fit"
            }
            Scenario::RabiSweep => "contrast versus microwave pulse length, damped-sine fit",
            Scenario::HahnEcho => "Hahn echo decay versus echo time, exponential fit and FFT",
            Scenario::WavelengthSweep => "Rabi contrast versus excitation wavelength",
            Scenario::ConfocalScan => "steady-state photocurrent map over an electrode mask",
        }
    }

    /// Name of the sweep table entry this scenario requires.
    pub fn axis_field(self) -> Option<&'static str> {
        match self {
            Scenario::PdmrSweep => Some("rf_MHz"),
            Scenario::RabiSweep => Some("mw_duration_ns"),
            Scenario::HahnEcho => Some("tau_us"),
            Scenario::WavelengthSweep => Some("wavelength_nm"),
            Scenario::ConfocalScan => None,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Physics calibration preset. The two presets differ only in the
/// laser-induced background coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    #[default]
    Sicoi,
    Bulk,
}

impl Preset {
    pub fn background_scale(self) -> f64 {
        match self {
            Preset::Sicoi => 1.0,
            Preset::Bulk => 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutMode {
    #[default]
    Electrical,
    Optical,
    Both,
}

impl ReadoutMode {
    pub fn electrical(self) -> bool {
        matches!(self, ReadoutMode::Electrical | ReadoutMode::Both)
    }

    pub fn optical(self) -> bool {
        matches!(self, ReadoutMode::Optical | ReadoutMode::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

/// A sweep axis: explicit values, one linear range, or several ranges
/// concatenated in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisSpec {
    Values(Vec<f64>),
    Range(AxisRange),
    Ranges(Vec<AxisRange>),
}

impl AxisSpec {
    pub fn values(&self) -> Vec<f64> {
        let expand = |r: &AxisRange| -> Vec<f64> {
            match r.points {
                0 => Vec::new(),
                1 => vec![r.start],
                n => (0..n)
                    .map(|i| r.start + (r.stop - r.start) * i as f64 / (n - 1) as f64)
                    .collect(),
            }
        };
        match self {
            AxisSpec::Values(v) => v.clone(),
            AxisSpec::Range(r) => expand(r),
            AxisSpec::Ranges(rs) => rs.iter().flat_map(expand).collect(),
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    #[serde(rename = "zfs_d_MHz")]
    pub zfs_d_mhz: f64,
    #[serde(rename = "gamma_GHz_per_T")]
    pub gamma_ghz_per_t: f64,
    #[serde(rename = "b0_mT")]
    pub b0_mt: f64,
    #[serde(rename = "T2_us")]
    pub t2_us: f64,
    pub excited_lifetime_ns: f64,
    pub isc_half_per_us: f64,
    pub isc_three_half_per_us: f64,
    pub metastable_lifetime_ns: f64,
    /// Fraction of metastable decay returning to the `±1/2` doublet.
    pub metastable_branching_half: f64,
    /// Pump rate per intensity, (1/s) / (W/m²).
    #[serde(rename = "pump_m2_per_J")]
    pub pump_m2_per_j: f64,
    #[serde(rename = "ionize_m2_per_J")]
    pub ionize_m2_per_j: f64,
    pub recombination_per_us: f64,
    /// Extra recombination proportional to intensity, off unless enabled.
    pub recombination_scales_with_intensity: bool,
    #[serde(rename = "recombination_m2_per_J")]
    pub recombination_m2_per_j: f64,
    /// Multiplies the background table; unset takes the preset value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub background_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excitation_table: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ionization_table: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub background_table: Option<PathBuf>,
    /// Frequency of the modulation imposed on the echo amplitude.
    #[serde(rename = "echo_modulation_kHz")]
    pub echo_modulation_khz: f64,
    /// Peak fractional reduction of the echo amplitude, 0 disables.
    pub echo_modulation_depth: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            zfs_d_mhz: 35.0,
            gamma_ghz_per_t: GAMMA_E_HZ_PER_T * 1e-9,
            b0_mt: 0.0,
            t2_us: 7.0,
            excited_lifetime_ns: 6.0,
            isc_half_per_us: 100.0,
            isc_three_half_per_us: 10.0,
            metastable_lifetime_ns: 200.0,
            metastable_branching_half: 0.78,
            pump_m2_per_j: 1e-3,
            ionize_m2_per_j: 1.2e-2,
            recombination_per_us: 100.0,
            recombination_scales_with_intensity: false,
            recombination_m2_per_j: 0.0,
            background_scale: None,
            excitation_table: None,
            ionization_table: None,
            background_table: None,
            echo_modulation_khz: 175.0,
            echo_modulation_depth: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LaserConfig {
    #[serde(rename = "power_mW")]
    pub power_mw: f64,
    pub wavelength_nm: f64,
    pub spot_diameter_um: f64,
}

impl Default for LaserConfig {
    fn default() -> Self {
        Self {
            power_mw: 23.0,
            wavelength_nm: 890.0,
            spot_diameter_um: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub n_defects: u32,
    pub single_defect_rate_kcps: f64,
    pub sideband_fraction: f64,
    /// Unset: chosen so that one defect under CW excitation at the configured
    /// laser yields `single_defect_rate_kcps`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collection_efficiency: Option<f64>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n_defects: 45,
            single_defect_rate_kcps: 3.5,
            sideband_fraction: 0.5,
            collection_efficiency: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EchoProjectionConfig {
    Bright,
    Dark,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EchoReferenceConfig {
    Off,
    Alternating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingSection {
    pub laser_width_ns: u64,
    pub guard_ns: u64,
    pub rep_period_ns: u64,
    #[serde(rename = "envelope_Hz")]
    pub envelope_hz: f64,
    pub daq_period_ns: u64,
    pub apd_rise_delay_ns: u64,
    pub apd_window_ns: u64,
    /// Rabi frequency `Ω / 2π`.
    #[serde(rename = "rabi_MHz")]
    pub rabi_mhz: f64,
    pub pi_ns: u64,
    pub pi_half_ns: u64,
    pub echo_projection: EchoProjectionConfig,
    pub echo_reference: EchoReferenceConfig,
}

impl Default for TimingSection {
    fn default() -> Self {
        Self {
            laser_width_ns: 1338,
            guard_ns: 1000,
            rep_period_ns: 6250,
            envelope_hz: 8.0,
            daq_period_ns: 500,
            apd_rise_delay_ns: 50,
            apd_window_ns: 300,
            rabi_mhz: 1.0,
            pi_ns: 500,
            pi_half_ns: 250,
            echo_projection: EchoProjectionConfig::Bright,
            echo_reference: EchoReferenceConfig::Off,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    #[serde(rename = "tia_gain_V_per_A")]
    pub tia_gain_v_per_a: f64,
    #[serde(rename = "tia_bandwidth_Hz")]
    pub tia_bandwidth_hz: f64,
    #[serde(rename = "input_noise_fA")]
    pub input_noise_fa: f64,
    #[serde(rename = "dark_current_pA")]
    pub dark_current_pa: f64,
    pub apd_dead_time_ns: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            tia_gain_v_per_a: 1e9,
            tia_bandwidth_hz: 1e3,
            input_noise_fa: 20.0,
            dark_current_pa: 8.0,
            apd_dead_time_ns: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub enabled: bool,
    pub shot_noise: bool,
    pub counting_noise: bool,
    /// Relative rms of the pulse-to-pulse laser power.
    pub laser_rel_fluctuation: f64,
    /// Audit mode: Poisson electron counting instead of Gaussian shot noise.
    pub poisson_electrons: bool,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            enabled: true,
            shot_noise: true,
            counting_noise: true,
            laser_rel_fluctuation: 0.05,
            poisson_electrons: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    #[serde(rename = "rf_MHz", skip_serializing_if = "Option::is_none")]
    pub rf_mhz: Option<AxisSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mw_duration_ns: Option<AxisSpec>,
    /// Half echo time `τ`; the echo time is `2τ`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_us: Option<AxisSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavelength_nm: Option<AxisSpec>,
    /// Fixed RF frequency for Rabi, echo and wavelength sweeps.
    #[serde(rename = "drive_rf_MHz", skip_serializing_if = "Option::is_none")]
    pub drive_rf_mhz: Option<f64>,
    /// Durations (ns) of the per-wavelength Rabi sweep.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rabi_duration_ns: Option<AxisSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    /// Leading fraction of each envelope half excluded from the lock-in.
    pub skip_fraction: f64,
    /// Lorentzian count for spectra; unset counts the resolved transitions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_peaks: Option<usize>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            skip_fraction: crate::analysis::DEFAULT_SKIP_FRACTION,
            fit_peaks: None,
        }
    }
}

/// Axis-aligned opaque electrode, µm in scan-field coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectrodeRect {
    pub x0_um: f64,
    pub x1_um: f64,
    pub y0_um: f64,
    pub y1_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfocalSection {
    pub field_um: f64,
    pub step_nm: f64,
    pub dwell_ms: f64,
    /// 1/e² diameter of the Gaussian spot for each synthesized image.
    pub spot_diameters_um: Vec<f64>,
    /// Spot size at which `ensemble.n_defects` applies; the count scales with area.
    pub reference_spot_um: f64,
    pub electrodes: Vec<ElectrodeRect>,
}

impl Default for ConfocalSection {
    fn default() -> Self {
        // two contacts leaving a vertical channel centred on x = 5.1 µm
        let gap = 1.44;
        let c = 5.1;
        Self {
            field_um: 10.0,
            step_nm: 300.0,
            dwell_ms: 200.0,
            spot_diameters_um: vec![1.0, 3.0],
            reference_spot_um: 1.0,
            electrodes: vec![
                ElectrodeRect {
                    x0_um: 0.0,
                    x1_um: c - gap / 2.0,
                    y0_um: 0.0,
                    y1_um: 10.0,
                },
                ElectrodeRect {
                    x0_um: c + gap / 2.0,
                    x1_um: 10.0,
                    y0_um: 0.0,
                    y1_um: 10.0,
                },
            ],
        }
    }
}

/// Where a configuration came from; written into run manifests.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Provenance {
    pub crate_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_config: Option<PathBuf>,
    pub seed: u64,
}

fn default_envelopes() -> u64 {
    64
}

/// One scenario run, as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default)]
    pub preset: Preset,
    #[serde(default)]
    pub readout: ReadoutMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_envelopes")]
    pub n_envelopes: u64,
    /// Run sweep points on the rayon pool.
    #[serde(default = "default_true")]
    pub parallel: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub laser: LaserConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub timing: TimingSection,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub confocal: ConfocalSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl ScenarioConfig {
    /// Defaults for `scenario` with an empty sweep.
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            description: String::new(),
            preset: Preset::default(),
            readout: ReadoutMode::default(),
            seed: 0,
            n_envelopes: default_envelopes(),
            parallel: true,
            output_dir: None,
            physics: PhysicsConfig::default(),
            laser: LaserConfig::default(),
            ensemble: EnsembleConfig::default(),
            timing: TimingSection::default(),
            detector: DetectorSection::default(),
            noise: NoiseSection::default(),
            sweep: SweepSection::default(),
            analysis: AnalysisSection::default(),
            confocal: ConfocalSection::default(),
            provenance: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Parse(e.to_string()))
    }

    /// Reads a config; relative table paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| match e {
            ExperimentError::Parse(m) => ExperimentError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let p = &mut self.physics;
        for t in [
            &mut p.excitation_table,
            &mut p.ionization_table,
            &mut p.background_table,
        ]
        .into_iter()
        .flatten()
        {
            if t.is_relative() {
                *t = base.join(&*t);
            }
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn background_scale(&self) -> f64 {
        self.physics
            .background_scale
            .unwrap_or_else(|| self.preset.background_scale())
    }

    pub fn drive_rf_hz(&self) -> f64 {
        self.sweep
            .drive_rf_mhz
            .unwrap_or(2.0 * self.physics.zfs_d_mhz)
            * 1e6
    }
}
