//! Network data model: buses, generators, storage, transmission and the
//! scenario knobs that parameterise a capacity-expansion run.
//!
//! All power quantities are MW, energies MWh, costs EUR. Capital costs are
//! annualised per weather year.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::WeatherYearSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    /// Grouping key for the equity constraint.
    pub country: String,
}

/// Flexibility taxonomy used for reporting and event features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlexCategory {
    ExistingDispatch,
    DailyBalancing,
    ResilienceBackup,
}

impl FlexCategory {
    pub const ALL: [FlexCategory; 3] = [
        FlexCategory::ExistingDispatch,
        FlexCategory::DailyBalancing,
        FlexCategory::ResilienceBackup,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FlexCategory::ExistingDispatch => "existing-dispatch",
            FlexCategory::DailyBalancing => "daily-balancing",
            FlexCategory::ResilienceBackup => "resilience-backup",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorCategory {
    ExistingDispatch,
    Renewable,
    ResilienceBackup,
}

impl GeneratorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorCategory::ExistingDispatch => "existing-dispatch",
            GeneratorCategory::Renewable => "renewable",
            GeneratorCategory::ResilienceBackup => "resilience-backup",
        }
    }

    pub fn flex(self) -> Option<FlexCategory> {
        match self {
            GeneratorCategory::ExistingDispatch => Some(FlexCategory::ExistingDispatch),
            GeneratorCategory::Renewable => None,
            GeneratorCategory::ResilienceBackup => Some(FlexCategory::ResilienceBackup),
        }
    }
}

/// Renewable resource class, derived from a generator's carrier name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resource {
    Wind,
    Solar,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: String,
    pub bus: String,
    /// Free-form technology name. Carriers containing "wind" or "solar"
    /// feed the wind/solar metrics.
    #[serde(default)]
    pub carrier: String,
    pub category: GeneratorCategory,
    /// EUR/MWh
    #[serde(default)]
    pub marginal_cost: f64,
    /// EUR/MW per weather year
    #[serde(default, skip_serializing_if = "is_zero")]
    pub capital_cost: f64,
    /// tCO2/MWh
    #[serde(default, skip_serializing_if = "is_zero")]
    pub emission_factor: f64,
    #[serde(default)]
    pub extendable: bool,
    /// Installed MW when not extendable.
    #[serde(default)]
    pub p_nom_fixed: f64,
    /// Upper bound on built MW when extendable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_nom_max: Option<f64>,
    /// Availability profile id; `None` means a constant factor of 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cf_profile: Option<String>,
}

impl Generator {
    pub fn resource(&self) -> Option<Resource> {
        let carrier = self.carrier.to_ascii_lowercase();
        if carrier.contains("wind") {
            Some(Resource::Wind)
        } else if carrier.contains("solar") {
            Some(Resource::Solar)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StorageKind {
    Battery,
    Hydrogen,
    PumpedHydro,
    Reservoir,
}

impl StorageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StorageKind::Battery => "battery",
            StorageKind::Hydrogen => "hydrogen",
            StorageKind::PumpedHydro => "pumped-hydro",
            StorageKind::Reservoir => "reservoir",
        }
    }

    pub fn flex(self) -> FlexCategory {
        match self {
            StorageKind::Battery => FlexCategory::DailyBalancing,
            StorageKind::Hydrogen => FlexCategory::ResilienceBackup,
            StorageKind::PumpedHydro | StorageKind::Reservoir => FlexCategory::ExistingDispatch,
        }
    }

    /// Hydro storage capacities are fixed inputs.
    pub fn may_extend(self) -> bool {
        matches!(self, StorageKind::Battery | StorageKind::Hydrogen)
    }
}

/// Storage with separately sized charger, discharger and energy capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageSystem {
    pub id: String,
    pub bus: String,
    pub kind: StorageKind,
    /// EUR/MW per weather year
    #[serde(default)]
    pub charger_cost: f64,
    /// EUR/MW per weather year
    #[serde(default)]
    pub discharger_cost: f64,
    /// EUR/MWh per weather year
    #[serde(default)]
    pub energy_cost: f64,
    pub eta_charge: f64,
    pub eta_discharge: f64,
    #[serde(default)]
    pub extendable: bool,
    #[serde(default)]
    pub fixed_charger: f64,
    #[serde(default)]
    pub fixed_discharger: f64,
    #[serde(default)]
    pub fixed_energy: f64,
    /// Natural inflow in MW (reservoirs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inflow_profile: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionLine {
    pub id: String,
    pub bus0: String,
    pub bus1: String,
    pub p_nom_existing: f64,
    /// km
    pub length: f64,
    #[serde(default = "default_true")]
    pub extendable: bool,
}

fn default_true() -> bool {
    true
}

/// Scenario knobs. Defaults are the net-zero reference configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    /// Fraction of baseline emissions eliminated; 1.0 is net zero.
    pub co2_reduction: f64,
    /// tCO2 per weather year.
    pub co2_baseline: f64,
    /// Admissible additions as a fraction of the existing transmission volume
    /// (sum of length times capacity).
    pub transmission_expansion: f64,
    /// Minimum share of annual national demand generated domestically.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equity_share: Option<f64>,
    /// EUR accumulated over `sde_window_hours` that flags an event.
    pub sde_threshold: f64,
    pub sde_window_hours: usize,
    /// EUR/MWh
    pub load_shedding_cost: f64,
    /// Hours averaged into one LP snapshot. 1 solves every hour; larger
    /// values trade temporal detail for solve time. Results are always
    /// reported hourly.
    pub snapshot_hours: usize,
}

pub const DEFAULT_SDE_THRESHOLD: f64 = 1e11;
pub const DEFAULT_SDE_WINDOW_HOURS: usize = 14 * 24;
pub const DEFAULT_LOAD_SHEDDING_COST: f64 = 1e5;
pub const DEFAULT_TRANSMISSION_EXPANSION: f64 = 0.25;

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            co2_reduction: 1.0,
            co2_baseline: 0.0,
            transmission_expansion: DEFAULT_TRANSMISSION_EXPANSION,
            equity_share: None,
            sde_threshold: DEFAULT_SDE_THRESHOLD,
            sde_window_hours: DEFAULT_SDE_WINDOW_HOURS,
            load_shedding_cost: DEFAULT_LOAD_SHEDDING_COST,
            snapshot_hours: 1,
        }
    }
}

impl Scenario {
    /// Emissions admissible per weather year.
    pub fn co2_cap(&self) -> f64 {
        (1.0 - self.co2_reduction) * self.co2_baseline
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut bad = |rule: String| out.push(Violation::new("scenario", rule));
        if !(0.0..=1.0).contains(&self.co2_reduction) {
            bad(format!("co2_reduction {} outside [0, 1]", self.co2_reduction));
        }
        if !(self.co2_baseline >= 0.0 && self.co2_baseline.is_finite()) {
            bad(format!("co2_baseline {} must be >= 0", self.co2_baseline));
        }
        if !(self.transmission_expansion >= 0.0 && self.transmission_expansion.is_finite()) {
            bad(format!(
                "transmission_expansion {} must be >= 0",
                self.transmission_expansion
            ));
        }
        if let Some(share) = self.equity_share {
            if !(0.0..=1.0).contains(&share) {
                bad(format!("equity_share {share} outside [0, 1]"));
            }
        }
        if !(self.sde_threshold > 0.0) {
            bad(format!("sde_threshold {} must be > 0", self.sde_threshold));
        }
        if self.sde_window_hours == 0 {
            bad("sde_window_hours must be >= 1".into());
        }
        if self.snapshot_hours == 0 {
            bad("snapshot_hours must be >= 1".into());
        }
        if !(self.load_shedding_cost >= 0.0) {
            bad(format!(
                "load_shedding_cost {} must be >= 0",
                self.load_shedding_cost
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub buses: Vec<Bus>,
    #[serde(default)]
    pub generators: Vec<Generator>,
    #[serde(default, rename = "storage")]
    pub storage_systems: Vec<StorageSystem>,
    #[serde(default)]
    pub lines: Vec<TransmissionLine>,
    #[serde(default)]
    pub scenario: Scenario,
}

/// A broken invariant, naming the offending entity and the rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub entity: String,
    pub rule: String,
}

impl Violation {
    pub fn new(entity: impl Into<String>, rule: impl Into<String>) -> Self {
        Violation {
            entity: entity.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.rule)
    }
}

fn nonneg(x: f64) -> bool {
    x >= 0.0 && x.is_finite()
}

/// Checks every type invariant and the referential integrity between buses,
/// assets and lines. Profile references are checked separately by
/// [`check_series`] since profiles live with the weather data.
pub fn validate_network(network: &Network) -> Vec<Violation> {
    let mut out = Vec::new();

    if network.buses.is_empty() {
        out.push(Violation::new("network", "at least one bus required"));
    }
    let mut bus_ids = HashSet::new();
    for bus in &network.buses {
        let entity = format!("bus '{}'", bus.id);
        if !bus_ids.insert(bus.id.as_str()) {
            out.push(Violation::new(&entity, "duplicate bus id"));
        }
        if bus.country.trim().is_empty() {
            out.push(Violation::new(&entity, "country must be nonempty"));
        }
    }

    let mut asset_ids = HashSet::new();
    let mut check_asset_id = |id: &str, entity: &str, out: &mut Vec<Violation>| {
        if !asset_ids.insert(id.to_string()) {
            out.push(Violation::new(entity, "duplicate asset id"));
        }
    };

    for g in &network.generators {
        let entity = format!("generator '{}'", g.id);
        check_asset_id(&g.id, &entity, &mut out);
        if !bus_ids.contains(g.bus.as_str()) {
            out.push(Violation::new(&entity, format!("unknown bus '{}'", g.bus)));
        }
        if !nonneg(g.marginal_cost) {
            out.push(Violation::new(&entity, "marginal_cost must be >= 0"));
        }
        if !nonneg(g.capital_cost) {
            out.push(Violation::new(&entity, "capital_cost must be >= 0"));
        }
        if !nonneg(g.emission_factor) {
            out.push(Violation::new(&entity, "emission_factor must be >= 0"));
        }
        if !nonneg(g.p_nom_fixed) {
            out.push(Violation::new(&entity, "p_nom_fixed must be >= 0"));
        }
        if let Some(max) = g.p_nom_max {
            if !(max >= 0.0) {
                out.push(Violation::new(&entity, "p_nom_max must be >= 0"));
            }
        }
        if g.extendable && g.category == GeneratorCategory::ExistingDispatch {
            out.push(Violation::new(
                &entity,
                "extendable requires category renewable or resilience-backup",
            ));
        }
    }

    for s in &network.storage_systems {
        let entity = format!("storage '{}'", s.id);
        check_asset_id(&s.id, &entity, &mut out);
        if !bus_ids.contains(s.bus.as_str()) {
            out.push(Violation::new(&entity, format!("unknown bus '{}'", s.bus)));
        }
        for (name, eta) in [("eta_charge", s.eta_charge), ("eta_discharge", s.eta_discharge)] {
            if !(eta > 0.0 && eta <= 1.0) {
                out.push(Violation::new(&entity, format!("{name} {eta} outside (0, 1]")));
            }
        }
        for (name, cost) in [
            ("charger_cost", s.charger_cost),
            ("discharger_cost", s.discharger_cost),
            ("energy_cost", s.energy_cost),
        ] {
            if !nonneg(cost) {
                out.push(Violation::new(&entity, format!("{name} must be >= 0")));
            }
        }
        for (name, cap) in [
            ("fixed_charger", s.fixed_charger),
            ("fixed_discharger", s.fixed_discharger),
            ("fixed_energy", s.fixed_energy),
        ] {
            if !nonneg(cap) {
                out.push(Violation::new(&entity, format!("{name} must be >= 0")));
            }
        }
        if s.extendable && !s.kind.may_extend() {
            out.push(Violation::new(
                &entity,
                format!("{} capacities are fixed and cannot be extendable", s.kind.as_str()),
            ));
        }
    }

    let mut adjacency: HashMap<&str, Vec<&str>> = HashMap::new();
    for l in &network.lines {
        let entity = format!("line '{}'", l.id);
        check_asset_id(&l.id, &entity, &mut out);
        for b in [&l.bus0, &l.bus1] {
            if !bus_ids.contains(b.as_str()) {
                out.push(Violation::new(&entity, format!("unknown bus '{b}'")));
            }
        }
        if l.bus0 == l.bus1 {
            out.push(Violation::new(&entity, "bus0 and bus1 must differ"));
        }
        if !nonneg(l.p_nom_existing) {
            out.push(Violation::new(&entity, "p_nom_existing must be >= 0"));
        }
        if !(l.length > 0.0 && l.length.is_finite()) {
            out.push(Violation::new(&entity, "length must be > 0"));
        }
        adjacency.entry(&l.bus0).or_default().push(&l.bus1);
        adjacency.entry(&l.bus1).or_default().push(&l.bus0);
    }

    if network.buses.len() > 1 {
        let mut seen = HashSet::new();
        let mut stack = vec![network.buses[0].id.as_str()];
        while let Some(b) = stack.pop() {
            if seen.insert(b) {
                stack.extend(adjacency.get(b).into_iter().flatten().copied());
            }
        }
        for bus in &network.buses {
            if !seen.contains(bus.id.as_str()) {
                out.push(Violation::new(
                    format!("bus '{}'", bus.id),
                    "not connected to the rest of the network",
                ));
            }
        }
    }

    out.extend(network.scenario.violations());
    out
}

/// Checks that every profile and demand series the network needs is present
/// in `series`.
pub fn check_series(network: &Network, series: &WeatherYearSeries) -> Vec<Violation> {
    let mut out = Vec::new();
    for g in &network.generators {
        if let Some(p) = &g.cf_profile {
            if !series.cf.contains_key(p) {
                out.push(Violation::new(
                    format!("generator '{}'", g.id),
                    format!("unknown profile '{p}' in weather year {}", series.label),
                ));
            }
        }
    }
    for s in &network.storage_systems {
        if let Some(p) = &s.inflow_profile {
            if !series.inflow.contains_key(p) {
                out.push(Violation::new(
                    format!("storage '{}'", s.id),
                    format!("unknown profile '{p}' in weather year {}", series.label),
                ));
            }
        }
    }
    for bus in &network.buses {
        if !series.demand.contains_key(&bus.id) {
            out.push(Violation::new(
                format!("bus '{}'", bus.id),
                format!("no demand series in weather year {}", series.label),
            ));
        }
    }
    out
}

/// Returns a copy of `network` with its scenario replaced by `overrides`.
pub fn apply_scenario(network: &Network, overrides: &Scenario) -> Result<Network> {
    let problems = overrides.violations();
    if !problems.is_empty() {
        return Err(Error::InvalidScenario(
            problems
                .iter()
                .map(|v| v.rule.clone())
                .collect::<Vec<_>>()
                .join("; "),
        ));
    }
    let mut out = network.clone();
    out.scenario = overrides.clone();
    Ok(out)
}

impl Network {
    pub fn bus_index(&self) -> HashMap<&str, usize> {
        self.buses
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id.as_str(), i))
            .collect()
    }

    pub fn countries(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for b in &self.buses {
            if !out.contains(&b.country.as_str()) {
                out.push(&b.country);
            }
        }
        out
    }

    /// Sum of length times existing capacity over all lines, in MW km.
    pub fn transmission_volume(&self) -> f64 {
        self.lines.iter().map(|l| l.length * l.p_nom_existing).sum()
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = validate_network(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidNetwork(v))
        }
    }
}
