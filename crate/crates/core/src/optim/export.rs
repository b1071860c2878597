//! CSV and JSON exports of a [`Solution`]. Floats are written with Rust's
//! shortest round-trip formatting so identical solutions give identical bytes.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::solution::{LedgerEntry, Solution};
use crate::error::{Error, Result};

/// Writes `hour,<name>,...` with one row per hour.
pub fn write_hourly_csv<W: Write>(writer: W, columns: &[(String, &[f64])]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["hour".to_string()];
    header.extend(columns.iter().map(|(n, _)| n.clone()));
    w.write_record(&header)?;
    let hours = columns.first().map_or(0, |(_, v)| v.len());
    let mut row = Vec::with_capacity(columns.len() + 1);
    for t in 0..hours {
        row.clear();
        row.push(t.to_string());
        row.extend(columns.iter().map(|(_, v)| v[t].to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(std::io::BufWriter::new(f))
}

pub fn write_hourly_csv_file(path: &Path, columns: &[(String, &[f64])]) -> Result<()> {
    write_hourly_csv(create(path)?, columns)
}

/// `asset,kind,quantity,unit,value`
pub fn write_capacities_csv<W: Write>(writer: W, solution: &Solution) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["asset", "kind", "quantity", "unit", "value"])?;
    for (id, v) in &solution.capacities.generators {
        w.write_record([id, "generator", "p_nom", "MW", &v.to_string()])?;
    }
    for (id, c) in &solution.capacities.storage {
        w.write_record([id, "storage", "charger", "MW", &c.charger.to_string()])?;
        w.write_record([id, "storage", "discharger", "MW", &c.discharger.to_string()])?;
        w.write_record([id, "storage", "energy", "MWh", &c.energy.to_string()])?;
    }
    for (id, v) in &solution.capacities.lines {
        w.write_record([id, "line", "p_nom", "MW", &v.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Generator output plus storage discharge and charge columns, MW.
pub fn dispatch_columns(solution: &Solution) -> Vec<(String, &[f64])> {
    let mut cols: Vec<(String, &[f64])> = solution
        .dispatch
        .iter()
        .map(|(id, v)| (id.clone(), v.as_slice()))
        .collect();
    for (id, op) in &solution.storage {
        cols.push((format!("{id}:discharge"), &op.discharge));
        cols.push((format!("{id}:charge"), &op.charge));
        cols.push((format!("{id}:soc"), &op.soc));
    }
    cols
}

pub fn price_columns(solution: &Solution) -> Vec<(String, &[f64])> {
    solution
        .duals_balance
        .iter()
        .map(|(id, v)| (id.clone(), v.as_slice()))
        .collect()
}

pub fn write_ledger_csv<W: Write>(writer: W, ledger: &[LedgerEntry]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "asset",
        "kind",
        "category",
        "bus",
        "revenue_eur",
        "operating_cost_eur",
        "capital_cost_eur",
        "co2_cost_eur",
        "equity_rent_eur",
        "profit_eur",
    ])?;
    for e in ledger {
        w.write_record([
            e.asset.clone(),
            format!("{:?}", e.kind).to_lowercase(),
            e.category.clone(),
            e.bus.clone(),
            e.revenue.to_string(),
            e.operating_cost.to_string(),
            e.capital_cost.to_string(),
            e.co2_cost.to_string(),
            e.equity_rent.to_string(),
            e.profit().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    label: &'a str,
    mode: super::Mode,
    status: super::LpStatus,
    objective_eur: f64,
    capacities: &'a super::Capacities,
    dual_co2_eur_per_t: Option<f64>,
    duals_equity_eur_per_mwh: &'a indexmap::IndexMap<String, f64>,
    dual_transmission_volume_eur_per_mwkm: Option<f64>,
    total_demand_mwh: f64,
    total_unserved_mwh: f64,
    stats: &'a super::SolverStats,
}

pub fn summary_json(solution: &Solution) -> Result<String> {
    let s = Summary {
        label: &solution.label,
        mode: solution.mode,
        status: solution.status,
        objective_eur: solution.objective,
        capacities: &solution.capacities,
        dual_co2_eur_per_t: solution.dual_co2,
        duals_equity_eur_per_mwh: &solution.duals_equity,
        dual_transmission_volume_eur_per_mwkm: solution.dual_transmission_volume,
        total_demand_mwh: solution.total_demand(),
        total_unserved_mwh: solution.total_unserved(),
        stats: &solution.stats,
    };
    Ok(serde_json::to_string_pretty(&s)?)
}

/// Writes `capacities.csv`, `dispatch.csv`, `prices.csv`, `flows.csv`,
/// `unserved.csv` and `summary.json` into `dir`; returns the paths written.
pub fn export_solution(dir: &Path, solution: &Solution) -> Result<Vec<std::path::PathBuf>> {
    let mut written = Vec::new();
    let path = dir.join("capacities.csv");
    write_capacities_csv(create(&path)?, solution)?;
    written.push(path);

    let path = dir.join("dispatch.csv");
    write_hourly_csv_file(&path, &dispatch_columns(solution))?;
    written.push(path);

    let path = dir.join("prices.csv");
    write_hourly_csv_file(&path, &price_columns(solution))?;
    written.push(path);

    let flows: Vec<(String, &[f64])> = solution
        .flows
        .iter()
        .map(|(id, v)| (id.clone(), v.as_slice()))
        .collect();
    if !flows.is_empty() {
        let path = dir.join("flows.csv");
        write_hourly_csv_file(&path, &flows)?;
        written.push(path);
    }

    let unserved: Vec<(String, &[f64])> = solution
        .unserved
        .iter()
        .map(|(id, v)| (id.clone(), v.as_slice()))
        .collect();
    let path = dir.join("unserved.csv");
    write_hourly_csv_file(&path, &unserved)?;
    written.push(path);

    let path = dir.join("summary.json");
    let mut f = create(&path)?;
    f.write_all(summary_json(solution)?.as_bytes())
        .map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}
