use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::build::{Capacities, LpModel, Mode, StorageCapacity};
use super::lp::{LpSolver, LpStatus};
use crate::error::{Error, Result};
use crate::model::{FlexCategory, Network};

/// Relative tolerance used for residual and duality checks.
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StorageOperation {
    /// MW drawn from the grid.
    pub charge: Vec<f64>,
    /// MW fed into the grid.
    pub discharge: Vec<f64>,
    /// MWh at the end of each hour.
    pub soc: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub spill: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverStats {
    pub solver: String,
    pub iterations: u64,
    /// Largest bound or row violation, MW.
    pub primal_residual: f64,
    /// |primal objective - dual objective|, EUR.
    pub duality_gap: f64,
    pub num_cols: usize,
    pub num_rows: usize,
}

/// Primal and dual results of one LP solve.
///
/// When `status` is not optimal only `status`, `label`, `mode`, `hours` and
/// `stats` are meaningful; `objective` is 0 and the maps are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub label: String,
    pub mode: Mode,
    pub status: LpStatus,
    pub hours: usize,
    /// EUR
    pub objective: f64,
    pub capacities: Capacities,
    /// Generator output, MW.
    pub dispatch: IndexMap<String, Vec<f64>>,
    pub storage: IndexMap<String, StorageOperation>,
    /// Flow from bus0 to bus1, MW.
    pub flows: IndexMap<String, Vec<f64>>,
    /// Shadow price of the nodal balance, EUR/MWh, keyed by bus.
    pub duals_balance: IndexMap<String, Vec<f64>>,
    /// EUR/tCO2, non-negative.
    pub dual_co2: Option<f64>,
    /// EUR/MWh of domestic generation, keyed by country.
    pub duals_equity: IndexMap<String, f64>,
    /// EUR per MW km of additional transmission volume, non-negative.
    pub dual_transmission_volume: Option<f64>,
    /// Shed load, MW, keyed by bus. Identically zero in design mode.
    pub unserved: IndexMap<String, Vec<f64>>,
    /// Demand, MW, keyed by bus (copied from the weather year).
    pub demand: IndexMap<String, Vec<f64>>,
    pub stats: SolverStats,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn total_unserved(&self) -> f64 {
        self.unserved.values().flatten().sum()
    }

    pub fn total_demand(&self) -> f64 {
        self.demand.values().flatten().sum()
    }
}

/// Snapshot values starting at `start`, repeated `step` times each.
fn expand(x: &[f64], start: usize, n: usize, step: usize) -> Vec<f64> {
    x[start..start + n]
        .iter()
        .flat_map(|&v| std::iter::repeat_n(v, step))
        .collect()
}

/// Solves `model` and maps the result back onto assets.
///
/// An optimal solve whose primal residual exceeds `tol * max(1, peak load)`
/// or whose duality gap exceeds `tol * max(1, |objective|)` is downgraded to
/// [`LpStatus::NumericalFailure`].
///
/// Duals of degenerate LPs are not unique; the values returned are the ones
/// the backend's final basis produces.
pub fn solve(model: &LpModel, solver: &dyn LpSolver, tol: f64) -> Result<Solution> {
    if !solver.provides_duals() {
        return Err(Error::SolverConfig(format!(
            "solver '{}' does not provide dual values",
            solver.name()
        )));
    }
    let raw = solver.solve(&model.problem)?;
    let network = &model.network;
    let n = model.snapshots();
    let step = model.step;
    let lp = &model.problem;

    let mut stats = SolverStats {
        solver: solver.name().to_string(),
        iterations: raw.iterations,
        num_cols: lp.num_cols(),
        num_rows: lp.num_rows(),
        ..Default::default()
    };
    let demand: IndexMap<String, Vec<f64>> = network
        .buses
        .iter()
        .zip(&model.demand)
        .map(|(b, d)| (b.id.clone(), expand(d, 0, n, step)))
        .collect();
    let mut solution = Solution {
        label: model.label.clone(),
        mode: model.mode,
        status: raw.status,
        hours: model.hours,
        objective: 0.0,
        capacities: Capacities::default(),
        dispatch: IndexMap::new(),
        storage: IndexMap::new(),
        flows: IndexMap::new(),
        duals_balance: IndexMap::new(),
        dual_co2: None,
        duals_equity: IndexMap::new(),
        dual_transmission_volume: None,
        unserved: IndexMap::new(),
        demand,
        stats: stats.clone(),
    };
    if raw.status != LpStatus::Optimal {
        log::warn!("{} ({:?}): solver returned {}", model.label, model.mode, raw.status.as_str());
        return Ok(solution);
    }

    let x = &raw.col_value;
    stats.primal_residual = lp.primal_residual(x);
    let primal = lp.objective(x);
    stats.duality_gap = (primal - lp.dual_objective(&raw.row_dual, &raw.col_dual)).abs();
    let residual_ok = stats.primal_residual <= tol * model.peak_load().max(1.0);
    let gap_ok = stats.duality_gap <= tol * primal.abs().max(1.0);
    if !(residual_ok && gap_ok) {
        log::warn!(
            "{}: optimality checks failed (residual {:.3e}, gap {:.3e})",
            model.label,
            stats.primal_residual,
            stats.duality_gap
        );
        solution.status = LpStatus::NumericalFailure;
        solution.stats = stats;
        return Ok(solution);
    }
    solution.objective = primal;

    for (g, cols) in network.generators.iter().zip(&model.gens) {
        let cap = cols.cap.map_or(cols.fixed, |c| x[c]);
        solution.capacities.generators.insert(g.id.clone(), cap);
        solution
            .dispatch
            .insert(g.id.clone(), expand(x, cols.dispatch, n, step));
    }
    for (s, cols) in network.storage_systems.iter().zip(&model.stores) {
        let cap = match cols.caps {
            Some([pc, pd, pe]) => StorageCapacity {
                charger: x[pc],
                discharger: x[pd],
                energy: x[pe],
            },
            None => cols.fixed,
        };
        solution.capacities.storage.insert(s.id.clone(), cap);
        solution.storage.insert(
            s.id.clone(),
            StorageOperation {
                charge: expand(x, cols.charge, n, step),
                discharge: expand(x, cols.discharge, n, step),
                soc: expand(x, cols.soc, n, step),
                spill: cols.spill.map(|sp| expand(x, sp, n, step)).unwrap_or_default(),
            },
        );
    }
    for (l, cols) in network.lines.iter().zip(&model.lines) {
        let cap = cols.cap.map_or(cols.fixed, |c| x[c]);
        solution.capacities.lines.insert(l.id.clone(), cap);
        solution.flows.insert(l.id.clone(), expand(x, cols.flow, n, step));
    }
    for (b, bus) in network.buses.iter().enumerate() {
        let start = model.balance_row(b, 0);
        // Balance rows are in MW per snapshot; per-MWh prices divide out the weight.
        let mut lambda = expand(&raw.row_dual, start, n, step);
        lambda.iter_mut().for_each(|l| *l /= step as f64);
        solution.duals_balance.insert(bus.id.clone(), lambda);
        let shed = match model.shed {
            Some(first) => expand(x, first + b * n, n, step),
            None => vec![0.0; model.hours],
        };
        solution.unserved.insert(bus.id.clone(), shed);
    }
    solution.dual_co2 = model.co2_row.map(|r| -raw.row_dual[r]);
    solution.dual_transmission_volume = model.volume_row.map(|r| -raw.row_dual[r]);
    for (country, row) in &model.equity_rows {
        solution.duals_equity.insert(country.clone(), raw.row_dual[*row]);
    }
    solution.stats = stats;
    Ok(solution)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssetKind {
    Generator,
    Storage,
}

/// Market revenue and costs of one asset, EUR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub asset: String,
    pub kind: AssetKind,
    /// Generator category or storage kind.
    pub category: String,
    pub flex: Option<FlexCategory>,
    pub bus: String,
    /// Σ λ · net injection.
    pub revenue: f64,
    /// Σ marginal cost · dispatch.
    pub operating_cost: f64,
    /// Annualised capital cost of the installed capacity.
    pub capital_cost: f64,
    /// Σ CO2 price · emissions.
    pub co2_cost: f64,
    /// Σ equity-constraint dual · domestic generation.
    pub equity_rent: f64,
    /// Whether the capacity was a decision variable strictly inside its bounds.
    pub interior: bool,
}

impl LedgerEntry {
    pub fn profit(&self) -> f64 {
        self.revenue + self.equity_rent - self.operating_cost - self.capital_cost - self.co2_cost
    }

    pub fn total_cost(&self) -> f64 {
        self.operating_cost + self.capital_cost + self.co2_cost
    }
}

/// Per-asset revenue and cost. With `hours` given, revenue and operating
/// terms are restricted to the hours where the mask is true; capital cost is
/// always annual.
pub fn revenue_ledger(
    solution: &Solution,
    network: &Network,
    hours: Option<&[bool]>,
) -> Vec<LedgerEntry> {
    let in_mask = |t: usize| hours.is_none_or(|m| m.get(t).copied().unwrap_or(false));
    let country_of = |bus: &str| {
        network
            .buses
            .iter()
            .find(|b| b.id == bus)
            .map(|b| b.country.as_str())
            .unwrap_or("")
    };
    let rel = 1e-7;
    let mut out = Vec::new();

    for g in &network.generators {
        let (Some(p), Some(lambda)) = (solution.dispatch.get(&g.id), solution.duals_balance.get(&g.bus))
        else {
            continue;
        };
        let cap = solution.capacities.generators.get(&g.id).copied().unwrap_or(0.0);
        let mut revenue = 0.0;
        let mut energy = 0.0;
        for t in (0..p.len()).filter(|&t| in_mask(t)) {
            revenue += lambda[t] * p[t];
            energy += p[t];
        }
        let equity = solution
            .duals_equity
            .get(country_of(&g.bus))
            .copied()
            .unwrap_or(0.0);
        let upper = g.p_nom_max.unwrap_or(f64::INFINITY);
        let interior = solution.mode == Mode::Design
            && g.extendable
            && cap > rel * cap.abs().max(1.0)
            && cap < upper * (1.0 - rel);
        out.push(LedgerEntry {
            asset: g.id.clone(),
            kind: AssetKind::Generator,
            category: g.category.as_str().to_string(),
            flex: g.category.flex(),
            bus: g.bus.clone(),
            revenue,
            operating_cost: g.marginal_cost * energy,
            capital_cost: if g.extendable { g.capital_cost * cap } else { 0.0 },
            co2_cost: solution.dual_co2.unwrap_or(0.0) * g.emission_factor * energy,
            equity_rent: equity * energy,
            interior,
        });
    }

    for s in &network.storage_systems {
        let (Some(op), Some(lambda)) = (solution.storage.get(&s.id), solution.duals_balance.get(&s.bus))
        else {
            continue;
        };
        let cap = solution.capacities.storage.get(&s.id).copied().unwrap_or_default();
        let revenue: f64 = (0..op.discharge.len())
            .filter(|&t| in_mask(t))
            .map(|t| lambda[t] * (op.discharge[t] - op.charge[t]))
            .sum();
        let capital = if s.extendable {
            s.charger_cost * cap.charger + s.discharger_cost * cap.discharger + s.energy_cost * cap.energy
        } else {
            0.0
        };
        let built = cap.charger + cap.discharger + cap.energy;
        out.push(LedgerEntry {
            asset: s.id.clone(),
            kind: AssetKind::Storage,
            category: s.kind.as_str().to_string(),
            flex: Some(s.kind.flex()),
            bus: s.bus.clone(),
            revenue,
            operating_cost: 0.0,
            capital_cost: capital,
            co2_cost: 0.0,
            equity_rent: 0.0,
            interior: solution.mode == Mode::Design && s.extendable && built > rel,
        });
    }
    out
}
