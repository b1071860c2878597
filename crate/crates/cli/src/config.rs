//! Run configuration, read from TOML or JSON.

use std::path::{Path, PathBuf};

use adequacy_core::optim::{HighsMethod, DEFAULT_TOL};
use adequacy_core::timeseries::{DroughtWindow, SynthDemand, SynthInflow, SynthProfile, SynthSpec};
use adequacy_core::{apply_scenario, validate_network, Error, Network, Result, Scenario};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_LADDER: [f64; 4] = [1.0, 0.75, 0.5, 0.25];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Scenario name; outputs go to `<out>/<name>/`.
    pub name: String,
    /// Master seed for synthetic weather and clustering.
    #[serde(default)]
    pub seed: u64,
    pub network: Network,
    pub weather: WeatherConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub cluster: ClusterConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum WeatherConfig {
    /// Hourly CSV with a `timestamp` column; relative paths are resolved
    /// against the config file's directory.
    Csv { path: PathBuf },
    Synth(SynthConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub first_year: i32,
    pub years: usize,
    /// Defaults to the master seed.
    #[serde(default)]
    pub seed: Option<u64>,
    pub demand: Vec<SynthDemand>,
    #[serde(default)]
    pub profiles: Vec<SynthProfile>,
    #[serde(default)]
    pub inflows: Vec<SynthInflow>,
    #[serde(default)]
    pub droughts: Vec<YearDrought>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearDrought {
    /// Zero-based index of the weather year.
    pub year: usize,
    #[serde(flatten)]
    pub window: DroughtWindow,
}

impl SynthConfig {
    pub fn specs(&self, master_seed: u64) -> Vec<SynthSpec> {
        let seed = self.seed.unwrap_or(master_seed);
        (0..self.years)
            .map(|i| SynthSpec {
                start_year: self.first_year + i as i32,
                seed: seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64),
                hours: adequacy_core::HOURS_PER_YEAR,
                demand: self.demand.clone(),
                profiles: self.profiles.clone(),
                inflows: self.inflows.clone(),
                droughts: self
                    .droughts
                    .iter()
                    .filter(|d| d.year == i)
                    .map(|d| d.window.clone())
                    .collect(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Choose,
    Simplex,
    Ipm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    /// Relative residual and duality-gap tolerance.
    pub tolerance: f64,
    /// Seconds per LP.
    pub time_limit: Option<f64>,
    /// Forward the solver's own log to stdout.
    pub log: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::Choose,
            tolerance: DEFAULT_TOL,
            time_limit: None,
            log: false,
        }
    }
}

impl SolverConfig {
    pub fn highs(&self) -> adequacy_core::HighsSolver {
        adequacy_core::HighsSolver {
            method: match self.method {
                Method::Choose => HighsMethod::Choose,
                Method::Simplex => HighsMethod::Simplex,
                Method::Ipm => HighsMethod::Ipm,
            },
            time_limit: self.time_limit,
            verbose: self.log,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub k_min: usize,
    pub k_max: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            k_min: 2,
            k_max: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    TransmissionExpansion,
    EquityShare,
    Co2Reduction,
    SdeThreshold,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::TransmissionExpansion => "transmission_expansion",
            SweepParameter::EquityShare => "equity_share",
            SweepParameter::Co2Reduction => "co2_reduction",
            SweepParameter::SdeThreshold => "sde_threshold",
        }
    }

    /// Whether changing the parameter requires new design solves.
    pub fn needs_solve(self) -> bool {
        self != SweepParameter::SdeThreshold
    }

    pub fn apply(self, scenario: &mut Scenario, value: f64) {
        match self {
            SweepParameter::TransmissionExpansion => scenario.transmission_expansion = value,
            SweepParameter::EquityShare => scenario.equity_share = Some(value),
            SweepParameter::Co2Reduction => scenario.co2_reduction = value,
            SweepParameter::SdeThreshold => scenario.sde_threshold = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axes: Vec<SweepAxis>,
    /// Multipliers of the scenario threshold, tried from high to low.
    pub ladder: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            axes: Vec::new(),
            ladder: DEFAULT_LADDER.to_vec(),
        }
    }
}

impl Config {
    /// Parses by extension: `.json` as JSON, anything else as TOML.
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: Config = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        if let WeatherConfig::Csv { path: csv } = &mut config.weather {
            if csv.is_relative() {
                *csv = path.parent().unwrap_or(Path::new(".")).join(&*csv);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return Err(Error::Config(format!("name '{}' is not a valid directory name", self.name)));
        }
        let violations = validate_network(&self.network);
        if !violations.is_empty() {
            return Err(Error::InvalidNetwork(violations));
        }
        if !(self.solver.tolerance > 0.0) {
            return Err(Error::Config("solver.tolerance must be > 0".into()));
        }
        if self.cluster.k_min < 2 || self.cluster.k_max < self.cluster.k_min {
            return Err(Error::Config("cluster needs 2 <= k_min <= k_max".into()));
        }
        check_ladder(&self.sweep.ladder)?;
        for axis in &self.sweep.axes {
            if axis.values.is_empty() {
                return Err(Error::Config(format!("sweep axis {} has no values", axis.parameter.as_str())));
            }
            for &v in &axis.values {
                let mut s = self.network.scenario.clone();
                axis.parameter.apply(&mut s, v);
                apply_scenario(&self.network, &s)
                    .map_err(|e| Error::Config(format!("sweep {} = {v}: {e}", axis.parameter.as_str())))?;
            }
        }
        if let WeatherConfig::Synth(s) = &self.weather {
            if s.years == 0 {
                return Err(Error::Config("weather.years must be >= 1".into()));
            }
            if let Some(d) = s.droughts.iter().find(|d| d.year >= s.years) {
                return Err(Error::Config(format!(
                    "drought assigned to year index {} but only {} years are generated",
                    d.year, s.years
                )));
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&json))
    }
}

pub fn check_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.is_empty() || ladder.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
        return Err(Error::Config("threshold ladder needs positive finite multipliers".into()));
    }
    Ok(())
}

/// Parses `1,0.75,0.5`.
pub fn parse_ladder(text: &str) -> std::result::Result<Vec<f64>, String> {
    let values: std::result::Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let values = values.map_err(|e| format!("bad ladder '{text}': {e}"))?;
    check_ladder(&values).map_err(|e| e.to_string())?;
    Ok(values)
}

/// `1990/91` becomes `1990-91`.
pub fn year_dir(label: &str) -> String {
    label.replace(['/', '\\', ' '], "-")
}
