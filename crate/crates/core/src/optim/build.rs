//! Assembly of the capacity-expansion LP (design mode) and the fixed-capacity
//! dispatch LP with load shedding (validation mode).

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::lp::LpProblem;
use crate::error::{Error, Result};
use crate::model::{check_series, validate_network, Network};
use crate::timeseries::WeatherYearSeries;

const INF: f64 = f64::INFINITY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Capacities and dispatch co-optimised.
    Design,
    /// Capacities fixed, load shedding allowed.
    Validation,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StorageCapacity {
    /// MW
    pub charger: f64,
    /// MW
    pub discharger: f64,
    /// MWh
    pub energy: f64,
}

/// Installed capacity of every asset, keyed by asset id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Capacities {
    pub generators: IndexMap<String, f64>,
    pub storage: IndexMap<String, StorageCapacity>,
    pub lines: IndexMap<String, f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct GenCols {
    /// First of `hours` dispatch columns.
    pub dispatch: usize,
    /// Capacity column when the capacity is a decision variable.
    pub cap: Option<usize>,
    /// Capacity when fixed.
    pub fixed: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct StoreCols {
    pub charge: usize,
    pub discharge: usize,
    pub soc: usize,
    pub spill: Option<usize>,
    /// charger, discharger, energy
    pub caps: Option<[usize; 3]>,
    pub fixed: StorageCapacity,
}

#[derive(Debug, Clone)]
pub(crate) struct LineCols {
    pub flow: usize,
    pub cap: Option<usize>,
    pub fixed: f64,
}

/// A built LP plus the index maps needed to read a solution back.
#[derive(Debug, Clone)]
pub struct LpModel {
    pub problem: LpProblem,
    pub mode: Mode,
    pub label: String,
    /// Hours of the weather year.
    pub hours: usize,
    /// Hours per snapshot; the LP has `hours / step` snapshots.
    pub step: usize,
    pub(crate) network: Network,
    /// Per bus and snapshot, MW.
    pub(crate) demand: Vec<Vec<f64>>,
    pub(crate) gens: Vec<GenCols>,
    pub(crate) stores: Vec<StoreCols>,
    pub(crate) lines: Vec<LineCols>,
    /// First shedding column; bus-major.
    pub(crate) shed: Option<usize>,
    /// First balance row; bus-major.
    pub(crate) balance: usize,
    pub(crate) co2_row: Option<usize>,
    pub(crate) equity_rows: Vec<(String, usize)>,
    pub(crate) volume_row: Option<usize>,
    volume_limit: Option<f64>,
}

impl LpModel {
    pub fn snapshots(&self) -> usize {
        self.hours / self.step
    }

    pub fn num_balance_rows(&self) -> usize {
        self.network.buses.len() * self.snapshots()
    }

    pub fn num_capacity_vars(&self) -> usize {
        self.gens.iter().filter(|g| g.cap.is_some()).count()
            + self.stores.iter().filter(|s| s.caps.is_some()).count() * 3
            + self.lines.iter().filter(|l| l.cap.is_some()).count()
    }

    pub fn num_equity_rows(&self) -> usize {
        self.equity_rows.len()
    }

    pub fn has_co2_row(&self) -> bool {
        self.co2_row.is_some()
    }

    /// Total admissible transmission volume (MW km) for extendable lines
    /// plus fixed lines, when expansion is modelled.
    pub fn transmission_volume_limit(&self) -> Option<f64> {
        self.volume_limit
    }

    /// Balance row of the snapshot containing `hour`.
    pub fn balance_row(&self, bus: usize, hour: usize) -> usize {
        self.balance + bus * self.snapshots() + hour / self.step
    }

    /// Shedding cost per MWh at (bus, hour).
    pub fn shedding_cost(&self, bus: usize, hour: usize) -> Option<f64> {
        self.shed.map(|s| {
            self.problem.col_cost[s + bus * self.snapshots() + hour / self.step] / self.step as f64
        })
    }

    pub fn peak_load(&self) -> f64 {
        (0..self.snapshots())
            .map(|t| self.demand.iter().map(|d| d[t]).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn network(&self) -> &Network {
        &self.network
    }
}

fn prepare(network: &Network, series: &WeatherYearSeries) -> Result<()> {
    let mut violations = validate_network(network);
    violations.extend(check_series(network, series));
    if !violations.is_empty() {
        return Err(Error::InvalidNetwork(violations));
    }
    series.validate()?;
    if series.hours() == 0 {
        return Err(Error::Build(format!("weather year {} has no hours", series.label)));
    }
    Ok(())
}

/// Capacity-expansion LP: capacities of extendable assets and hourly
/// dispatch are co-optimised against annualised capital plus operating cost.
pub fn build_design(network: &Network, series: &WeatherYearSeries) -> Result<LpModel> {
    prepare(network, series)?;
    build(network, series, Mode::Design, None)
}

/// Dispatch LP with the capacities of every extendable asset fixed to
/// `fixed`, load shedding at the scenario's shedding cost, and transmission
/// at existing capacity.
pub fn build_validation(
    network: &Network,
    fixed: &Capacities,
    series: &WeatherYearSeries,
) -> Result<LpModel> {
    prepare(network, series)?;
    let mut missing = Vec::new();
    for g in network.generators.iter().filter(|g| g.extendable) {
        if !fixed.generators.contains_key(&g.id) {
            missing.push(g.id.as_str());
        }
    }
    for s in network.storage_systems.iter().filter(|s| s.extendable) {
        if !fixed.storage.contains_key(&s.id) {
            missing.push(s.id.as_str());
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingInput(format!(
            "no fixed capacity for extendable assets: {}",
            missing.join(", ")
        )));
    }
    build(network, series, Mode::Validation, Some(fixed))
}

fn build(
    network: &Network,
    series: &WeatherYearSeries,
    mode: Mode,
    fixed: Option<&Capacities>,
) -> Result<LpModel> {
    let hours = series.hours();
    let scenario = &network.scenario;
    let step = scenario.snapshot_hours.max(1);
    if hours % step != 0 {
        return Err(Error::Build(format!(
            "{} hours of {} do not divide into {step}-hour snapshots",
            hours, series.label
        )));
    }
    // Snapshots are block means; every per-snapshot flow of energy carries weight w.
    let n = hours / step;
    let w = step as f64;
    let coarse = |v: &[f64]| -> Vec<f64> { v.chunks(step).map(|c| c.iter().sum::<f64>() / w).collect() };
    let bus_index = network.bus_index();
    let nb = network.buses.len();
    let demand: Vec<Vec<f64>> = network
        .buses
        .iter()
        .map(|b| coarse(&series.demand[&b.id]))
        .collect();
    let cf: IndexMap<&str, Vec<f64>> = series.cf.iter().map(|(k, v)| (k.as_str(), coarse(v))).collect();
    let inflows: IndexMap<&str, Vec<f64>> =
        series.inflow.iter().map(|(k, v)| (k.as_str(), coarse(v))).collect();

    let mut lp = LpProblem::default();

    // Balance rows first so their indices are trivially (bus, hour).
    let balance = lp.num_rows();
    for d in &demand {
        for &v in d {
            lp.add_row(v, v, &[]);
        }
    }
    let brow = |bus: usize, t: usize| balance + bus * n + t;

    let mut gens = Vec::with_capacity(network.generators.len());
    for g in &network.generators {
        let bus = bus_index[g.bus.as_str()];
        let cf: Option<&Vec<f64>> = g.cf_profile.as_ref().map(|p| &cf[p.as_str()]);
        let avail = |t: usize| cf.map_or(1.0, |c| c[t]);
        let upper = g.p_nom_max.unwrap_or(INF);
        let decide = mode == Mode::Design && g.extendable;
        let fixed_cap = match (mode, g.extendable) {
            (Mode::Validation, true) => fixed.unwrap().generators[&g.id],
            _ => g.p_nom_fixed,
        };
        let cols = if decide {
            let cap = lp.add_col(g.capital_cost, 0.0, upper);
            let dispatch = lp.add_cols(n, w * g.marginal_cost, 0.0, INF);
            for t in 0..n {
                lp.add_row(-INF, 0.0, &[(dispatch + t, 1.0), (cap, -avail(t))]);
            }
            GenCols {
                dispatch,
                cap: Some(cap),
                fixed: 0.0,
            }
        } else {
            let dispatch = lp.add_cols(n, w * g.marginal_cost, 0.0, 0.0);
            for t in 0..n {
                lp.col_upper[dispatch + t] = fixed_cap * avail(t);
            }
            GenCols {
                dispatch,
                cap: None,
                fixed: fixed_cap,
            }
        };
        for t in 0..n {
            lp.triplets.push((brow(bus, t), cols.dispatch + t, 1.0));
        }
        gens.push(cols);
    }

    let mut stores = Vec::with_capacity(network.storage_systems.len());
    for s in &network.storage_systems {
        let bus = bus_index[s.bus.as_str()];
        let decide = mode == Mode::Design && s.extendable;
        let fixed_cap = match (mode, s.extendable) {
            (Mode::Validation, true) => fixed.unwrap().storage[&s.id],
            _ => StorageCapacity {
                charger: s.fixed_charger,
                discharger: s.fixed_discharger,
                energy: s.fixed_energy,
            },
        };
        let caps = decide.then(|| {
            [
                lp.add_col(s.charger_cost, 0.0, INF),
                lp.add_col(s.discharger_cost, 0.0, INF),
                lp.add_col(s.energy_cost, 0.0, INF),
            ]
        });
        let (c_hi, d_hi, e_hi) = if decide {
            (INF, INF, INF)
        } else {
            (fixed_cap.charger, fixed_cap.discharger, fixed_cap.energy)
        };
        let charge = lp.add_cols(n, 0.0, 0.0, c_hi);
        let discharge = lp.add_cols(n, 0.0, 0.0, d_hi);
        let soc = lp.add_cols(n, 0.0, 0.0, e_hi);
        let inflow = s.inflow_profile.as_ref().map(|p| &inflows[p.as_str()]);
        let spill = inflow.map(|_| lp.add_cols(n, 0.0, 0.0, INF));

        if let Some([pc, pd, pe]) = caps {
            for t in 0..n {
                lp.add_row(-INF, 0.0, &[(charge + t, 1.0), (pc, -1.0)]);
                lp.add_row(-INF, 0.0, &[(discharge + t, 1.0), (pd, -1.0)]);
                lp.add_row(-INF, 0.0, &[(soc + t, 1.0), (pe, -1.0)]);
            }
        }
        // soc[t] - soc[t-1] - w eta_c charge[t] + w discharge[t] / eta_d + w spill[t] = w inflow[t],
        // with soc[-1] = soc[n-1].
        for t in 0..n {
            let prev = (t + n - 1) % n;
            let mut coeffs = Vec::with_capacity(5);
            if prev != t {
                coeffs.push((soc + t, 1.0));
                coeffs.push((soc + prev, -1.0));
            }
            coeffs.push((charge + t, -w * s.eta_charge));
            coeffs.push((discharge + t, w / s.eta_discharge));
            if let Some(sp) = spill {
                coeffs.push((sp + t, w));
            }
            let rhs = inflow.map_or(0.0, |i| w * i[t]);
            lp.add_row(rhs, rhs, &coeffs);
        }
        for t in 0..n {
            lp.triplets.push((brow(bus, t), discharge + t, 1.0));
            lp.triplets.push((brow(bus, t), charge + t, -1.0));
        }
        stores.push(StoreCols {
            charge,
            discharge,
            soc,
            spill,
            caps,
            fixed: if decide { StorageCapacity::default() } else { fixed_cap },
        });
    }

    let expand = mode == Mode::Design && scenario.transmission_expansion > 0.0;
    let mut lines = Vec::with_capacity(network.lines.len());
    let mut volume_terms = Vec::new();
    let mut volume_fixed = 0.0;
    for l in &network.lines {
        let b0 = bus_index[l.bus0.as_str()];
        let b1 = bus_index[l.bus1.as_str()];
        let cols = if expand && l.extendable {
            let cap = lp.add_col(0.0, l.p_nom_existing, INF);
            let flow = lp.add_cols(n, 0.0, -INF, INF);
            for t in 0..n {
                lp.add_row(-INF, 0.0, &[(flow + t, 1.0), (cap, -1.0)]);
                lp.add_row(0.0, INF, &[(flow + t, 1.0), (cap, 1.0)]);
            }
            volume_terms.push((cap, l.length));
            LineCols {
                flow,
                cap: Some(cap),
                fixed: 0.0,
            }
        } else {
            volume_fixed += l.length * l.p_nom_existing;
            let flow = lp.add_cols(n, 0.0, -l.p_nom_existing, l.p_nom_existing);
            LineCols {
                flow,
                cap: None,
                fixed: l.p_nom_existing,
            }
        };
        for t in 0..n {
            lp.triplets.push((brow(b0, t), cols.flow + t, -1.0));
            lp.triplets.push((brow(b1, t), cols.flow + t, 1.0));
        }
        lines.push(cols);
    }
    let (volume_row, volume_limit) = if volume_terms.is_empty() {
        (None, None)
    } else {
        // Σ length (cap - existing) <= expansion · Σ length existing, over all lines.
        let existing = network.transmission_volume();
        let limit = existing * (1.0 + scenario.transmission_expansion);
        let row = lp.add_row(-INF, limit - volume_fixed, &volume_terms);
        (Some(row), Some(limit))
    };

    let shed = (mode == Mode::Validation).then(|| {
        let first = lp.add_cols(nb * n, w * scenario.load_shedding_cost, 0.0, 0.0);
        for (b, d) in demand.iter().enumerate() {
            for (t, &v) in d.iter().enumerate() {
                let col = first + b * n + t;
                lp.col_upper[col] = v;
                lp.triplets.push((brow(b, t), col, 1.0));
            }
        }
        first
    });

    let emitters: Vec<(usize, f64)> = network
        .generators
        .iter()
        .zip(&gens)
        .filter(|(g, _)| g.emission_factor > 0.0)
        .flat_map(|(g, cols)| (0..n).map(move |t| (cols.dispatch + t, w * g.emission_factor)))
        .collect();
    let co2_row = (!emitters.is_empty()).then(|| lp.add_row(-INF, scenario.co2_cap(), &emitters));

    let mut equity_rows = Vec::new();
    if let (Mode::Design, Some(share)) = (mode, scenario.equity_share) {
        for country in network.countries() {
            let buses: Vec<usize> = network
                .buses
                .iter()
                .enumerate()
                .filter(|(_, b)| b.country == country)
                .map(|(i, _)| i)
                .collect();
            let annual: f64 = buses.iter().map(|&b| w * demand[b].iter().sum::<f64>()).sum();
            let coeffs: Vec<(usize, f64)> = network
                .generators
                .iter()
                .zip(&gens)
                .filter(|(g, _)| buses.contains(&bus_index[g.bus.as_str()]))
                .flat_map(|(_, cols)| (0..n).map(move |t| (cols.dispatch + t, w)))
                .collect();
            if coeffs.is_empty() && share * annual > 0.0 {
                return Err(Error::Build(format!(
                    "equity share {share} is infeasible for country '{country}': no generators"
                )));
            }
            let row = lp.add_row(share * annual, INF, &coeffs);
            equity_rows.push((country.to_string(), row));
        }
    }

    Ok(LpModel {
        problem: lp,
        mode,
        label: series.label.clone(),
        hours,
        step,
        network: network.clone(),
        demand,
        gens,
        stores,
        lines,
        shed,
        balance,
        co2_row,
        equity_rows,
        volume_row,
        volume_limit,
    })
}
