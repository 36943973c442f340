//! Run configuration: one TOML file with data paths and parameter blocks.
//!
//! Relative data paths resolve against the directory holding the config
//! file. Every block except `[data]` may be omitted and falls back to the
//! library defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use v2g_core::engine::Mode;
use v2g_core::{BatteryParams, DegradationParams, FeasibilityRules, OptimizerConfig, ScenarioConfig};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataPaths,
    #[serde(default)]
    pub battery: BatterySection,
    #[serde(default)]
    pub degradation: DegradationParams,
    #[serde(default)]
    pub engine: EngineSection,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub study: StudySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub prices: PathBuf,
    /// Defaults to the price file's stem.
    pub city_id: Option<String>,
    pub commute: PathBuf,
    pub work_arrival: PathBuf,
    pub work_hours: PathBuf,
    pub ev_catalog: PathBuf,
    pub battery_cost_history: PathBuf,
}

/// Battery parameters shared by every vehicle; capacity comes from the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatterySection {
    pub dod: f64,
    pub one_way_efficiency: f64,
    pub charge_rate_kw: f64,
    pub discharge_rate_kw: f64,
    pub capital_cost_usd_per_kwh: f64,
    pub saturation_factor: f64,
}

impl Default for BatterySection {
    fn default() -> Self {
        let b = BatteryParams::default();
        Self {
            dod: b.dod,
            one_way_efficiency: b.one_way_efficiency,
            charge_rate_kw: b.charge_rate_kw,
            discharge_rate_kw: b.discharge_rate_kw,
            capital_cost_usd_per_kwh: b.capital_cost_usd_per_kwh,
            saturation_factor: b.saturation_factor,
        }
    }
}

impl BatterySection {
    pub fn params(&self) -> BatteryParams {
        BatteryParams {
            dod: self.dod,
            one_way_efficiency: self.one_way_efficiency,
            charge_rate_kw: self.charge_rate_kw,
            discharge_rate_kw: self.discharge_rate_kw,
            capital_cost_usd_per_kwh: self.capital_cost_usd_per_kwh,
            saturation_factor: self.saturation_factor,
            ..BatteryParams::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSection {
    pub year: i32,
    pub reserve_legs: u8,
}

impl Default for EngineSection {
    fn default() -> Self {
        Self { year: 2019, reserve_legs: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    pub population_size: usize,
    pub scenarios: Vec<Mode>,
    pub master_seed: u64,
    pub sweep_mode: Mode,
    pub etas: Vec<f64>,
    pub rates_kw: Vec<f64>,
    /// First and last projected year of the battery-cost study.
    pub cost_years: (i32, i32),
}

impl Default for StudySection {
    fn default() -> Self {
        Self {
            population_size: 1000,
            scenarios: vec![Mode::PriceTaker, Mode::Osp],
            master_seed: 2019,
            sweep_mode: Mode::Osp,
            etas: vec![0.837, 0.90, 0.99],
            rates_kw: vec![3.3, 11.5, 15.0],
            cost_years: (2020, 2050),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// A parsed config together with the directory its relative paths hang off.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let config = Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let loaded = LoadedConfig { config, base_dir };
        for p in loaded.data_files() {
            if !p.is_file() {
                return Err(CliError::Config(format!("data file {} does not exist", p.display())));
            }
        }
        Ok(loaded)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
        self.battery.params().validate().map_err(|e| cfg(&e))?;
        self.degradation.validate().map_err(|e| cfg(&e))?;
        self.optimizer.validate().map_err(|e| cfg(&e))?;
        self.template().validate().map_err(|e| cfg(&e))?;
        let s = &self.study;
        if s.population_size == 0 {
            return Err(CliError::Config("study.population_size must be at least 1".into()));
        }
        if s.scenarios.is_empty() {
            return Err(CliError::Config("study.scenarios is empty".into()));
        }
        if s.etas.is_empty() || s.etas.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(CliError::Config("study.etas must be nonempty and within (0, 1]".into()));
        }
        if s.rates_kw.is_empty() || s.rates_kw.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(CliError::Config("study.rates_kw must be nonempty and positive".into()));
        }
        if s.cost_years.0 > s.cost_years.1 {
            return Err(CliError::Config("study.cost_years must be [first, last]".into()));
        }
        Ok(())
    }

    /// Scenario template with every parameter but the mode and selling price.
    pub fn template(&self) -> ScenarioConfig {
        ScenarioConfig {
            mode: Mode::Osp,
            selling_price: 0.0,
            battery: self.battery.params(),
            degradation: self.degradation,
            year: self.engine.year,
            reserve_legs: self.engine.reserve_legs,
        }
    }

    /// Users must recharge a round trip at the slowest rate any command uses,
    /// so studies and sweeps share one population.
    pub fn feasibility(&self) -> FeasibilityRules {
        let slowest = self.study.rates_kw.iter().cloned().fold(self.battery.charge_rate_kw, f64::min);
        FeasibilityRules { dod: self.battery.dod, min_charge_rate_kw: Some(slowest) }
    }
}

impl LoadedConfig {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn data_files(&self) -> [PathBuf; 6] {
        let d = &self.config.data;
        [&d.prices, &d.commute, &d.work_arrival, &d.work_hours, &d.ev_catalog, &d.battery_cost_history].map(|p| self.resolve(p))
    }

    pub fn output_dir(&self, over: Option<&Path>) -> PathBuf {
        match over {
            Some(p) => p.to_path_buf(),
            None => self.resolve(&self.config.output.dir),
        }
    }
}
