//! Scenario configuration: defaults, an optional TOML file with dotted keys,
//! and command-line overrides, in increasing order of precedence.

use std::path::{Path, PathBuf};

use recipcal_core::array::{Architecture, HybridArrayConfig, ImpairmentModel};
use recipcal_core::estimation::NoiseBudget;
use recipcal_core::pipeline::{PartitionSchemeKind, Scenario};
use serde::Deserialize;

use crate::error::{AppError, AppResult};

/// Which noise sources are simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    Both,
    Tx,
    Rx,
    None,
}

impl NoiseMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "both" => Some(NoiseMode::Both),
            "tx" => Some(NoiseMode::Tx),
            "rx" => Some(NoiseMode::Rx),
            "none" => Some(NoiseMode::None),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NoiseMode::Both => "both",
            NoiseMode::Tx => "tx",
            NoiseMode::Rx => "rx",
            NoiseMode::None => "none",
        }
    }

    pub fn apply(self, budget: NoiseBudget) -> NoiseBudget {
        match self {
            NoiseMode::Both => budget.with_flags(true, true),
            NoiseMode::Tx => budget.with_flags(true, false),
            NoiseMode::Rx => budget.with_flags(false, true),
            NoiseMode::None => budget.with_flags(false, false),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub k: usize,
    pub l: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig9Config {
    pub points: usize,
    pub min: f64,
    pub max: f64,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DlConfig {
    pub nmse_f: f64,
    pub nmse_ul: f64,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullyConnectedConfig {
    pub n_ant: usize,
    pub n_rf: usize,
    pub ue_n_ant: usize,
    pub ue_n_rf: usize,
    pub draws: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    /// Explicitly requested noise sources; each command has its own default.
    pub noise_mode: Option<NoiseMode>,
    pub partition: PartitionSchemeKind,
    pub sweep_k: Vec<usize>,
    pub sweep_l: Vec<usize>,
    pub trials: u64,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub fig6: Cell,
    pub calibrate: Cell,
    pub fig9: Fig9Config,
    pub dl: DlConfig,
    pub fully_connected: FullyConnectedConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: Scenario::default(),
            noise_mode: None,
            partition: PartitionSchemeKind::TwoSides,
            sweep_k: (24..=40).collect(),
            sweep_l: (4..=12).collect(),
            trials: 50,
            seed: 1,
            output: None,
            fig6: Cell { k: 32, l: 8 },
            calibrate: Cell { k: 32, l: 8 },
            fig9: Fig9Config {
                points: 4,
                min: 1e-4,
                max: 1e-1,
                trials: 10_000,
            },
            dl: DlConfig {
                nmse_f: 1e-2,
                nmse_ul: 1e-2,
                trials: 10_000,
            },
            fully_connected: FullyConnectedConfig {
                n_ant: 16,
                n_rf: 4,
                ue_n_ant: 1,
                ue_n_rf: 1,
                draws: 100,
            },
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    trials: Option<u64>,
    partition: Option<String>,
    output: Option<PathBuf>,
    #[serde(default)]
    array: ArraySection,
    #[serde(default)]
    channel: ChannelSection,
    #[serde(default)]
    hardware: HardwareSection,
    #[serde(default)]
    noise: NoiseSection,
    #[serde(default)]
    sweep: SweepSection,
    #[serde(default)]
    fig6: CellSection,
    #[serde(default)]
    calibrate: CellSection,
    #[serde(default)]
    fig9: Fig9Section,
    #[serde(default)]
    dl: DlSection,
    #[serde(default)]
    fc: FcSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArraySection {
    n_ant: Option<usize>,
    n_rf: Option<usize>,
    architecture: Option<String>,
    element_spacing: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSection {
    mag_at_half_lambda_db: Option<f64>,
    decay_db_per_half_lambda: Option<f64>,
    multipath_variance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct HardwareSection {
    amp_imbalance_std: Option<f64>,
    branch_phase_jitter: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseSection {
    mode: Option<String>,
    tx_evm_db: Option<f64>,
    tx_power_dbm: Option<f64>,
    rx_noise_floor_dbm: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    k: Option<Vec<usize>>,
    l: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellSection {
    k: Option<usize>,
    l: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Fig9Section {
    points: Option<usize>,
    min: Option<f64>,
    max: Option<f64>,
    trials: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DlSection {
    nmse_f: Option<f64>,
    nmse_ul: Option<f64>,
    trials: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FcSection {
    n_ant: Option<usize>,
    n_rf: Option<usize>,
    ue_n_ant: Option<usize>,
    ue_n_rf: Option<usize>,
    draws: Option<u64>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub output: Option<PathBuf>,
    pub partition: Option<String>,
    pub noise: Option<String>,
}

fn parse_partition(key: &str, s: &str) -> AppResult<PartitionSchemeKind> {
    PartitionSchemeKind::parse(s)
        .ok_or_else(|| AppError::Config(format!("{key}: expected `two-sides` or `interleaved`, got `{s}`")))
}

fn parse_noise(key: &str, s: &str) -> AppResult<NoiseMode> {
    NoiseMode::parse(s).ok_or_else(|| AppError::Config(format!("{key}: expected both, tx, rx or none, got `{s}`")))
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> AppResult<Self> {
        let file: FileConfig = toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
        let mut cfg = ScenarioConfig::default();
        cfg.apply_file(file)?;
        Ok(cfg)
    }

    /// Defaults, then `path` if given, then `overrides`.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> AppResult<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| AppError::Io(format!("reading config {}: {e}", p.display())))?;
                Self::from_toml_str(&text).map_err(|e| match e {
                    AppError::Config(msg) => AppError::Config(format!("{}: {msg}", p.display())),
                    other => other,
                })?
            }
            None => ScenarioConfig::default(),
        };
        cfg.apply_overrides(overrides)?;
        Ok(cfg)
    }

    fn apply_file(&mut self, f: FileConfig) -> AppResult<()> {
        set(&mut self.seed, f.seed);
        set(&mut self.trials, f.trials);
        if let Some(p) = f.partition {
            self.partition = parse_partition("partition", &p)?;
        }
        if f.output.is_some() {
            self.output = f.output;
        }

        let a = &mut self.scenario.array;
        set(&mut a.n_ant, f.array.n_ant);
        set(&mut a.n_rf, f.array.n_rf);
        set(&mut a.element_spacing, f.array.element_spacing);
        if let Some(arch) = f.array.architecture {
            a.architecture = match arch.as_str() {
                "subarray" => Architecture::Subarray,
                "fully-connected" => Architecture::FullyConnected,
                other => {
                    return Err(AppError::Config(format!(
                        "array.architecture: expected `subarray` or `fully-connected`, got `{other}`"
                    )))
                }
            };
        }

        let c = &mut self.scenario.channel;
        set(&mut c.mag_at_half_lambda_db, f.channel.mag_at_half_lambda_db);
        set(&mut c.decay_db_per_half_lambda, f.channel.decay_db_per_half_lambda);
        set(&mut c.multipath_variance, f.channel.multipath_variance);

        let h = &mut self.scenario.impairments;
        set(&mut h.amp_imbalance_std, f.hardware.amp_imbalance_std);
        set(&mut h.branch_phase_jitter, f.hardware.branch_phase_jitter);

        let n = &mut self.scenario.noise;
        set(&mut n.tx_evm_db, f.noise.tx_evm_db);
        set(&mut n.tx_power_dbm_per_antenna, f.noise.tx_power_dbm);
        set(&mut n.rx_noise_floor_dbm, f.noise.rx_noise_floor_dbm);
        if let Some(m) = f.noise.mode {
            self.noise_mode = Some(parse_noise("noise.mode", &m)?);
        }

        set(&mut self.sweep_k, f.sweep.k);
        set(&mut self.sweep_l, f.sweep.l);
        set(&mut self.fig6.k, f.fig6.k);
        set(&mut self.fig6.l, f.fig6.l);
        set(&mut self.calibrate.k, f.calibrate.k);
        set(&mut self.calibrate.l, f.calibrate.l);
        set(&mut self.fig9.points, f.fig9.points);
        set(&mut self.fig9.min, f.fig9.min);
        set(&mut self.fig9.max, f.fig9.max);
        set(&mut self.fig9.trials, f.fig9.trials);
        set(&mut self.dl.nmse_f, f.dl.nmse_f);
        set(&mut self.dl.nmse_ul, f.dl.nmse_ul);
        set(&mut self.dl.trials, f.dl.trials);
        let fc = &mut self.fully_connected;
        set(&mut fc.n_ant, f.fc.n_ant);
        set(&mut fc.n_rf, f.fc.n_rf);
        set(&mut fc.ue_n_ant, f.fc.ue_n_ant);
        set(&mut fc.ue_n_rf, f.fc.ue_n_rf);
        set(&mut fc.draws, f.fc.draws);
        Ok(())
    }

    pub fn apply_overrides(&mut self, o: &Overrides) -> AppResult<()> {
        set(&mut self.seed, o.seed);
        set(&mut self.trials, o.trials);
        if o.output.is_some() {
            self.output.clone_from(&o.output);
        }
        if let Some(p) = &o.partition {
            self.partition = parse_partition("--partition", p)?;
        }
        if let Some(m) = &o.noise {
            self.noise_mode = Some(parse_noise("--noise", m)?);
        }
        Ok(())
    }

    /// Noise budget for a command whose default is `default`.
    pub fn noise(&self, default: NoiseMode) -> NoiseBudget {
        self.noise_mode.unwrap_or(default).apply(self.scenario.noise)
    }

    /// Checks everything the internal-calibration commands rely on.
    pub fn validate_scenario(&self) -> AppResult<()> {
        let s = &self.scenario;
        s.array.validate().map_err(|e| AppError::in_section("array", e))?;
        if s.array.architecture != Architecture::Subarray {
            return Err(AppError::Config(
                "array.architecture: internal calibration needs `subarray`; use fully-connected-check for the other architecture".into(),
            ));
        }
        if !s.array.n_rf.is_multiple_of(2) {
            return Err(AppError::Config("array.n_rf: must be even so each group owns whole RF chains".into()));
        }
        s.channel.validate().map_err(|e| AppError::in_section("channel", e))?;
        s.noise.validate().map_err(|e| AppError::in_section("noise", e))?;
        validate_impairments(&s.impairments)?;
        Ok(())
    }

    pub fn validate_cell(&self, name: &str, cell: Cell) -> AppResult<()> {
        self.validate_scenario()?;
        if cell.k == 0 {
            return Err(AppError::Config(format!("{name}.k: must be positive")));
        }
        if cell.l == 0 {
            return Err(AppError::Config(format!("{name}.l: must be positive")));
        }
        Ok(())
    }

    pub fn validate_sweep(&self) -> AppResult<()> {
        self.validate_scenario()?;
        if self.trials < 50 {
            return Err(AppError::Config(format!(
                "trials: sweeps need at least 50 trials for stable medians, got {}",
                self.trials
            )));
        }
        for (key, list) in [("sweep.k", &self.sweep_k), ("sweep.l", &self.sweep_l)] {
            if list.is_empty() {
                return Err(AppError::Config(format!("{key}: must not be empty")));
            }
            if list.contains(&0) {
                return Err(AppError::Config(format!("{key}: values must be positive")));
            }
        }
        Ok(())
    }

    pub fn validate_fig9(&self) -> AppResult<()> {
        self.validate_bs_link()?;
        let f = &self.fig9;
        if f.points < 2 {
            return Err(AppError::Config("fig9.points: need at least 2 grid points per axis".into()));
        }
        if !(f.min > 0.0 && f.max > f.min && f.max.is_finite()) {
            return Err(AppError::Config("fig9.min, fig9.max: need 0 < min < max".into()));
        }
        if f.trials == 0 {
            return Err(AppError::Config("fig9.trials: must be positive".into()));
        }
        Ok(())
    }

    pub fn validate_dl(&self) -> AppResult<()> {
        self.validate_bs_link()?;
        for (key, v) in [("dl.nmse_f", self.dl.nmse_f), ("dl.nmse_ul", self.dl.nmse_ul)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(AppError::Config(format!("{key}: must be a finite non-negative number")));
            }
        }
        if self.dl.trials == 0 {
            return Err(AppError::Config("dl.trials: must be positive".into()));
        }
        Ok(())
    }

    fn validate_bs_link(&self) -> AppResult<()> {
        let a = &self.scenario.array;
        a.validate().map_err(|e| AppError::in_section("array", e))?;
        if a.architecture != Architecture::Subarray {
            return Err(AppError::Config("array.architecture: the CSIT model uses the subarray BS".into()));
        }
        validate_impairments(&self.scenario.impairments)
    }

    pub fn validate_fully_connected(&self) -> AppResult<()> {
        let fc = &self.fully_connected;
        HybridArrayConfig::fully_connected(fc.n_ant, fc.n_rf).map_err(|e| AppError::in_section("fc", e))?;
        HybridArrayConfig::fully_connected(fc.ue_n_ant, fc.ue_n_rf).map_err(|e| match e {
            recipcal_core::Error::InvalidParameter { name, reason } => {
                AppError::Config(format!("fc.ue_{name}: {reason}"))
            }
            other => AppError::Config(format!("fc: {other}")),
        })?;
        if fc.draws == 0 {
            return Err(AppError::Config("fc.draws: must be positive".into()));
        }
        self.scenario.noise.validate().map_err(|e| AppError::in_section("noise", e))?;
        validate_impairments(&self.scenario.impairments)
    }
}

fn validate_impairments(m: &ImpairmentModel) -> AppResult<()> {
    recipcal_core::array::amplitude_half_width(m.amp_imbalance_std).map_err(|e| AppError::in_section("hardware", e))?;
    if !(m.branch_phase_jitter.is_finite() && m.branch_phase_jitter >= 0.0) {
        return Err(AppError::Config("hardware.branch_phase_jitter: must be a finite non-negative number".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_keys_and_tables_are_equivalent() {
        let a = ScenarioConfig::from_toml_str("array.n_ant = 32\narray.n_rf = 4\nnoise.mode = \"rx\"\n").unwrap();
        let b = ScenarioConfig::from_toml_str("[array]\nn_ant = 32\nn_rf = 4\n[noise]\nmode = \"rx\"\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.scenario.array.n_ant, 32);
        assert_eq!(a.noise_mode, Some(NoiseMode::Rx));
    }

    #[test]
    fn flags_override_file() {
        let mut cfg = ScenarioConfig::from_toml_str("seed = 5\ntrials = 60\npartition = \"interleaved\"").unwrap();
        assert_eq!((cfg.seed, cfg.trials), (5, 60));
        cfg.apply_overrides(&Overrides {
            seed: Some(9),
            partition: Some("two-sides".into()),
            ..Default::default()
        })
        .unwrap();
        assert_eq!((cfg.seed, cfg.trials), (9, 60));
        assert_eq!(cfg.partition, PartitionSchemeKind::TwoSides);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_named() {
        let err = ScenarioConfig::from_toml_str("array.n_antennas = 3").unwrap_err();
        assert!(err.to_string().contains("n_antennas"), "{err}");
        let err = ScenarioConfig::from_toml_str("partition = \"diagonal\"").unwrap_err();
        assert!(err.to_string().contains("partition"), "{err}");
        let cfg = ScenarioConfig::from_toml_str("array.n_rf = 7").unwrap();
        let err = cfg.validate_scenario().unwrap_err();
        assert!(err.to_string().contains("array.n_rf"), "{err}");
        let cfg = ScenarioConfig::from_toml_str("hardware.amp_imbalance_std = 5.0").unwrap();
        assert!(cfg.validate_scenario().unwrap_err().to_string().contains("hardware.amp_imbalance_std"));
        let cfg = ScenarioConfig::from_toml_str("trials = 10").unwrap();
        assert!(cfg.validate_sweep().unwrap_err().to_string().contains("trials"));
    }

    #[test]
    fn integers_are_accepted_for_real_fields() {
        let cfg = ScenarioConfig::from_toml_str("noise.tx_evm_db = -30\nchannel.mag_at_half_lambda_db = -10").unwrap();
        assert_eq!(cfg.scenario.noise.tx_evm_db, -30.0);
        assert_eq!(cfg.scenario.channel.mag_at_half_lambda_db, -10.0);
    }
}
