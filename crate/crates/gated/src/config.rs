//! Run configuration, read from TOML. Unit suffixes in key names are part of
//! the format: `_ns` for nanoseconds, `_MHz` for ordinary frequency
//! (`kappa / 2pi`), `_Hz` and `_s` as written.

use std::path::Path;

use gated_core::clicks::{AcceptanceGate, ApdModel, ExperimentTiming, Leakage};
use gated_core::fock::FOCK_CUTOFF;
use gated_core::homodyne::{TargetState, WindowGrid};
use gated_core::signal::{CavityFilter, FilterChain, PulseProfile};
use gated_core::tomography::FitOptions;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseConfig {
    pub duration_ns: f64,
    pub rise_ns: f64,
    pub extinction: f64,
}

impl Default for PulseConfig {
    fn default() -> Self {
        Self {
            duration_ns: 49.0,
            rise_ns: 5.0,
            extinction: 1.5e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    #[serde(rename = "kappa_over_2pi_MHz")]
    pub kappa_over_2pi_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CavityConfig {
    /// OPO full bandwidth `gamma / 2pi`; the filter uses `kappa = gamma / 2`.
    #[serde(rename = "opo_bandwidth_MHz")]
    pub opo_bandwidth_mhz: f64,
    /// Filter cavities between the OPO and the APD.
    pub filters: Vec<FilterConfig>,
}

impl Default for CavityConfig {
    fn default() -> Self {
        Self {
            opo_bandwidth_mhz: 4.4,
            filters: vec![FilterConfig {
                kappa_over_2pi_mhz: 12.0,
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    #[serde(rename = "rep_rate_Hz")]
    pub rep_rate_hz: f64,
    pub window_ns: f64,
    pub dt_ns: f64,
    pub duty_measure_s: f64,
    pub duty_lock_s: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            rep_rate_hz: 50e3,
            window_ns: 500.0,
            dt_ns: 1.0,
            duty_measure_s: 0.2,
            duty_lock_s: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LeakageConfig {
    #[default]
    Intensity,
    Field,
}

impl From<LeakageConfig> for Leakage {
    fn from(l: LeakageConfig) -> Self {
        match l {
            LeakageConfig::Intensity => Leakage::IntensityRatio,
            LeakageConfig::Field => Leakage::FieldRatio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApdConfig {
    /// s^-1
    pub dark_rate: f64,
    /// s^-1 under continuous pumping
    pub cw_rate: f64,
    pub leakage: LeakageConfig,
}

impl Default for ApdConfig {
    fn default() -> Self {
        Self {
            dark_rate: 0.4,
            cw_rate: 275.0,
            leakage: LeakageConfig::Intensity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateConfig {
    /// Defaults to the peak of the measured click distribution.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_ns: Option<f64>,
    pub length_ns: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            center_ns: None,
            length_ns: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClicksConfig {
    pub n_pulses: u64,
    pub bin_ns: f64,
    /// Length of the off-pulse region at the end of the window.
    pub background_ns: f64,
    /// Pulse lengths whose click rates are reported side by side.
    pub compare_durations_ns: Vec<f64>,
}

impl Default for ClicksConfig {
    fn default() -> Self {
        Self {
            n_pulses: 1_000_000_000,
            bin_ns: 2.0,
            background_ns: 50.0,
            compare_durations_ns: vec![7.0, 20.0, 49.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomodyneConfig {
    /// Ground-truth populations rho_00, rho_11, ...
    pub populations: Vec<f64>,
    pub n_windows: usize,
    pub n_vacuum_windows: usize,
    /// Optical/electronic path offset of the mode relative to the click record.
    pub mode_delay_ns: f64,
    /// Let background clicks herald vacuum windows.
    pub background_heralds: bool,
    pub electronic_noise_rms: f64,
    #[serde(rename = "electronic_noise_min_MHz")]
    pub electronic_noise_min_mhz: f64,
}

impl Default for HomodyneConfig {
    fn default() -> Self {
        Self {
            populations: vec![0.392, 0.595, 0.010, 0.002, 0.001],
            n_windows: 13_000,
            n_vacuum_windows: 13_000,
            mode_delay_ns: 0.0,
            background_heralds: false,
            electronic_noise_rms: 0.0,
            electronic_noise_min_mhz: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModeSource {
    /// Pulse profile filtered by the OPO.
    #[default]
    Model,
    /// Mode estimated from the low-passed variance trace.
    Variance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(rename = "lowpass_MHz")]
    pub lowpass_mhz: f64,
    pub fock_cutoff: usize,
    pub em_tol: f64,
    pub em_max_iter: usize,
    pub min_points: usize,
    pub mode_source: ModeSource,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let fit = FitOptions::default();
        Self {
            lowpass_mhz: 25.0,
            fock_cutoff: FOCK_CUTOFF,
            em_tol: fit.tol,
            em_max_iter: fit.max_iter,
            min_points: fit.min_points,
            mode_source: ModeSource::Model,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub pulse: PulseConfig,
    pub cavities: CavityConfig,
    pub timing: TimingConfig,
    pub apd: ApdConfig,
    pub gate: GateConfig,
    pub clicks: ClicksConfig,
    pub homodyne: HomodyneConfig,
    pub analysis: AnalysisConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            pulse: PulseConfig::default(),
            cavities: CavityConfig::default(),
            timing: TimingConfig::default(),
            apd: ApdConfig::default(),
            gate: GateConfig::default(),
            clicks: ClicksConfig::default(),
            homodyne: HomodyneConfig::default(),
            analysis: AnalysisConfig::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation(msg.into())
}

fn core_invalid(field: &str, e: gated_core::Error) -> ConfigError {
    invalid(format!("{field}: {e}"))
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 8 bytes of the SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> u64 {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.pulse_profile()?;
        self.filter_chain()?;
        self.timing()?;
        self.apd()?;
        if !(self.timing.dt_ns > 0.0) {
            return Err(invalid("timing.dt_ns must be > 0"));
        }
        if !(self.gate.length_ns > 0.0) {
            return Err(invalid("gate.length_ns must be > 0"));
        }
        if let Some(c) = self.gate.center_ns {
            if !(0.0..self.timing.window_ns).contains(&c) {
                return Err(invalid("gate.center_ns must lie inside the window"));
            }
        }
        if self.clicks.n_pulses == 0 {
            return Err(invalid("clicks.n_pulses must be > 0"));
        }
        if !(self.clicks.bin_ns > 0.0) {
            return Err(invalid("clicks.bin_ns must be > 0"));
        }
        let bins = self.timing.window_ns / self.clicks.bin_ns;
        if (bins - bins.round()).abs() > 1e-9 * bins {
            return Err(invalid("clicks.bin_ns must divide timing.window_ns"));
        }
        if !(self.clicks.background_ns > 0.0 && self.clicks.background_ns <= self.timing.window_ns)
        {
            return Err(invalid("clicks.background_ns must lie in (0, window_ns]"));
        }
        if self.clicks.compare_durations_ns.iter().any(|&d| !(d > 0.0)) {
            return Err(invalid("clicks.compare_durations_ns entries must be > 0"));
        }
        self.target_state()?;
        if self.homodyne.n_windows < 2 || self.homodyne.n_vacuum_windows < 2 {
            return Err(invalid("homodyne window counts must be >= 2"));
        }
        if !(self.homodyne.mode_delay_ns >= 0.0) {
            return Err(invalid("homodyne.mode_delay_ns must be >= 0"));
        }
        if !(self.homodyne.electronic_noise_rms >= 0.0) {
            return Err(invalid("homodyne.electronic_noise_rms must be >= 0"));
        }
        if !(self.homodyne.electronic_noise_min_mhz > 0.0) {
            return Err(invalid("homodyne.electronic_noise_min_MHz must be > 0"));
        }
        if !(self.analysis.lowpass_mhz > 0.0) {
            return Err(invalid("analysis.lowpass_MHz must be > 0"));
        }
        if self.analysis.fock_cutoff > FOCK_CUTOFF {
            return Err(invalid(format!(
                "analysis.fock_cutoff must be <= {FOCK_CUTOFF}"
            )));
        }
        if !(self.analysis.em_tol > 0.0) || self.analysis.em_max_iter == 0 {
            return Err(invalid("analysis.em_tol and em_max_iter must be > 0"));
        }
        Ok(())
    }

    pub fn pulse_profile(&self) -> Result<PulseProfile, ConfigError> {
        PulseProfile::new(
            self.pulse.duration_ns,
            self.pulse.rise_ns,
            self.pulse.extinction,
        )
        .map_err(|e| core_invalid("pulse", e))
    }

    pub fn opo(&self) -> Result<CavityFilter, ConfigError> {
        CavityFilter::from_bandwidth_mhz(self.cavities.opo_bandwidth_mhz)
            .map_err(|e| core_invalid("cavities.opo_bandwidth_MHz", e))
    }

    /// OPO followed by the filter cavities.
    pub fn filter_chain(&self) -> Result<FilterChain, ConfigError> {
        let mut filters = vec![self.opo()?];
        for f in &self.cavities.filters {
            filters.push(
                CavityFilter::from_half_width_mhz(f.kappa_over_2pi_mhz)
                    .map_err(|e| core_invalid("cavities.filters", e))?,
            );
        }
        let chain = FilterChain::new(filters).map_err(|e| core_invalid("cavities", e))?;
        for f in chain.filters() {
            if f.kappa() * self.timing.dt_ns >= 0.5 {
                return Err(invalid(format!(
                    "timing.dt_ns too coarse: kappa*dt = {} >= 0.5",
                    f.kappa() * self.timing.dt_ns
                )));
            }
        }
        Ok(chain)
    }

    pub fn timing(&self) -> Result<ExperimentTiming, ConfigError> {
        ExperimentTiming::new(
            self.timing.rep_rate_hz,
            self.timing.window_ns,
            self.timing.duty_measure_s,
            self.timing.duty_lock_s,
        )
        .map_err(|e| core_invalid("timing", e))
    }

    pub fn apd(&self) -> Result<ApdModel, ConfigError> {
        ApdModel::new(self.apd.dark_rate, self.apd.cw_rate).map_err(|e| core_invalid("apd", e))
    }

    pub fn target_state(&self) -> Result<TargetState, ConfigError> {
        TargetState::new(&self.homodyne.populations)
            .map_err(|e| core_invalid("homodyne.populations", e))
    }

    pub fn window_grid(&self) -> WindowGrid {
        WindowGrid {
            len: (self.timing.window_ns / self.timing.dt_ns).round() as usize,
            dt: self.timing.dt_ns,
        }
    }

    pub fn gate_with_center(&self, center_ns: f64) -> Result<AcceptanceGate, ConfigError> {
        AcceptanceGate::new(center_ns, self.gate.length_ns).map_err(|e| core_invalid("gate", e))
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            tol: self.analysis.em_tol,
            max_iter: self.analysis.em_max_iter,
            min_points: self.analysis.min_points,
            cutoff: self.analysis.fock_cutoff,
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    RunConfig::from_toml_str(&text, &path.display().to_string())
}

pub fn save_config(path: &Path, cfg: &RunConfig) -> Result<(), ConfigError> {
    std::fs::write(path, cfg.to_toml_string()).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}
