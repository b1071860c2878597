//! Weather-year resilience metrics: the design × operational validation
//! matrix (EENS and peak deficits), its row/column aggregates, Wasserstein
//! similarity of weather years, event cost shares and the per-year report
//! with severity rankings.

use std::io::Write;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::SdeType;
use crate::error::{Error, Result};
use crate::events::{event_mask, hourly_cost, net_load, SdeEvent};
use crate::model::{Network, Resource};
use crate::optim::{build_validation, revenue_ledger, solve, Capacities, LpSolver, Solution};
use crate::timeseries::{daily_means, mean, resource_cf, winter_load, WeatherYearSeries};

/// Outcome of operating one design in one weather year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Cell {
    Ok {
        /// Unserved over demanded energy.
        eens: f64,
        /// Largest hourly system-wide shedding, GW.
        max_unserved_gw: f64,
    },
    /// The validation solve did not reach an optimum.
    Poisoned { reason: String },
    Pending,
}

impl Cell {
    pub fn values(&self) -> Option<(f64, f64)> {
        match self {
            Cell::Ok { eens, max_unserved_gw } => Some((*eens, *max_unserved_gw)),
            _ => None,
        }
    }

    pub fn from_solution(solution: &Solution) -> Cell {
        if !solution.is_optimal() {
            return Cell::Poisoned {
                reason: format!("validation LP is {}", solution.status.as_str()),
            };
        }
        let demand = solution.total_demand();
        let unserved = solution.total_unserved().max(0.0);
        let peak = (0..solution.hours)
            .map(|t| solution.unserved.values().map(|u| u[t]).sum::<f64>())
            .fold(0.0, f64::max);
        Cell::Ok {
            eens: if demand > 0.0 { unserved / demand } else { 0.0 },
            max_unserved_gw: peak / 1e3,
        }
    }
}

/// Rows are design years, columns operational years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationMatrix {
    pub years: Vec<String>,
    pub cells: Vec<Vec<Cell>>,
}

impl ValidationMatrix {
    pub fn pending(years: Vec<String>) -> Self {
        let n = years.len();
        ValidationMatrix {
            years,
            cells: vec![vec![Cell::Pending; n]; n],
        }
    }

    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.cells.iter().flatten().all(|c| matches!(c, Cell::Ok { .. }))
    }

    pub fn eens(&self, design: usize, operational: usize) -> Option<f64> {
        self.cells[design][operational].values().map(|v| v.0)
    }

    pub fn max_unserved(&self, design: usize, operational: usize) -> Option<f64> {
        self.cells[design][operational].values().map(|v| v.1)
    }
}

/// Solves one validation LP: `design` capacities operated in `year`.
pub fn validate_entry(
    network: &Network,
    design: &Capacities,
    year: &WeatherYearSeries,
    solver: &dyn LpSolver,
    tol: f64,
) -> Result<Cell> {
    let model = build_validation(network, design, year)?;
    Ok(Cell::from_solution(&solve(&model, solver, tol)?))
}

/// Fills every cell. Runs on the current rayon pool; a failed or
/// non-optimal solve poisons its cell without aborting the others.
pub fn validation_matrix(
    network: &Network,
    designs: &[Capacities],
    years: &[WeatherYearSeries],
    solver: &dyn LpSolver,
    tol: f64,
) -> Result<ValidationMatrix> {
    let mut matrix = ValidationMatrix::pending(years.iter().map(|y| y.label.clone()).collect());
    fill_pending(&mut matrix, network, designs, years, solver, tol)?;
    Ok(matrix)
}

/// Solves the cells still marked pending. Returns how many were solved.
pub fn fill_pending(
    matrix: &mut ValidationMatrix,
    network: &Network,
    designs: &[Capacities],
    years: &[WeatherYearSeries],
    solver: &dyn LpSolver,
    tol: f64,
) -> Result<usize> {
    let n = matrix.len();
    if designs.len() != n || years.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} designs and {} weather years for a {n}x{n} matrix",
            designs.len(),
            years.len()
        )));
    }
    let todo: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| matches!(matrix.cells[i][j], Cell::Pending))
        .collect();
    let solved: Vec<((usize, usize), Cell)> = todo
        .par_iter()
        .map(|&(i, j)| {
            let cell = validate_entry(network, &designs[i], &years[j], solver, tol).unwrap_or_else(|e| {
                Cell::Poisoned {
                    reason: e.to_string(),
                }
            });
            ((i, j), cell)
        })
        .collect();
    for ((i, j), cell) in solved {
        if let Cell::Poisoned { reason } = &cell {
            log::warn!("validation {} x {} poisoned: {reason}", matrix.years[i], matrix.years[j]);
        }
        matrix.cells[i][j] = cell;
    }
    Ok(todo.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct YearAggregates {
    /// Mean EENS of this year's design in the other years.
    pub prevents_deficits: f64,
    /// Mean EENS of the other designs in this year.
    pub causes_deficits: f64,
    /// Mean peak shedding (GW) of this year's design in the other years.
    pub prevents_peaks: f64,
    /// Mean peak shedding (GW) of the other designs in this year.
    pub causes_peaks: f64,
    pub prevents_peaks_max: f64,
    pub causes_peaks_max: f64,
}

/// Off-diagonal row and column means. Requires a complete matrix.
pub fn aggregate_rows_cols(matrix: &ValidationMatrix) -> Result<Vec<YearAggregates>> {
    let n = matrix.len();
    for i in 0..n {
        for j in 0..n {
            if matrix.cells[i][j].values().is_none() {
                return Err(Error::MissingInput(format!(
                    "validation cell design {} x operational {} is not available",
                    matrix.years[i], matrix.years[j]
                )));
            }
        }
    }
    let v = |i: usize, j: usize| matrix.cells[i][j].values().unwrap();
    let others = n.saturating_sub(1).max(1) as f64;
    Ok((0..n)
        .map(|y| {
            let row = (0..n).filter(|&j| j != y).map(|j| v(y, j));
            let col = (0..n).filter(|&i| i != y).map(|i| v(i, y));
            let mut a = YearAggregates::default();
            for (e, p) in row {
                a.prevents_deficits += e / others;
                a.prevents_peaks += p / others;
                a.prevents_peaks_max = a.prevents_peaks_max.max(p);
            }
            for (e, p) in col {
                a.causes_deficits += e / others;
                a.causes_peaks += p / others;
                a.causes_peaks_max = a.causes_peaks_max.max(p);
            }
            a
        })
        .collect())
}

/// First Wasserstein distance between two empirical distributions: the
/// integral of the absolute difference of their quantile functions.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("Wasserstein distance of an empty sample".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("Wasserstein distance of a non-finite sample".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    if a.len() == b.len() {
        let s: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
        return Ok(s / a.len() as f64);
    }
    // Walk the merged quantile breakpoints i/n and j/m in integer arithmetic.
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut pos = 0usize; // in units of 1/(n*m)
    let mut total = 0.0;
    while i < n && j < m {
        let next_a = (i + 1) * m;
        let next_b = (j + 1) * n;
        let next = next_a.min(next_b);
        total += (next - pos) as f64 * (a[i] - b[j]).abs();
        pos = next;
        if next == next_a {
            i += 1;
        }
        if next == next_b {
            j += 1;
        }
    }
    Ok(total / (n * m) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimilarityQuantity {
    /// Daily mean net load, GW.
    NetLoad,
    /// Daily mean wind capacity factor.
    WindCf,
}

impl SimilarityQuantity {
    pub fn as_str(self) -> &'static str {
        match self {
            SimilarityQuantity::NetLoad => "net-load",
            SimilarityQuantity::WindCf => "wind-cf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub quantity: SimilarityQuantity,
    pub years: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

/// Daily series used for year similarity.
pub fn daily_quantity(
    quantity: SimilarityQuantity,
    network: &Network,
    series: &WeatherYearSeries,
    solution: &Solution,
) -> Result<Vec<f64>> {
    match quantity {
        SimilarityQuantity::NetLoad => {
            let gw: Vec<f64> = net_load(network, solution).iter().map(|v| v / 1e3).collect();
            Ok(daily_means(&gw))
        }
        SimilarityQuantity::WindCf => resource_cf(series, network, Resource::Wind)?
            .map(|cf| daily_means(&cf))
            .ok_or_else(|| Error::MissingInput("network has no wind generators".into())),
    }
}

/// Pairwise Wasserstein distances between daily samples.
pub fn similarity_matrix(
    quantity: SimilarityQuantity,
    years: Vec<String>,
    samples: &[Vec<f64>],
) -> Result<SimilarityMatrix> {
    if samples.len() < 2 || years.len() != samples.len() {
        return Err(Error::InvalidArgument(format!(
            "similarity needs at least 2 labelled years, got {} samples and {} labels",
            samples.len(),
            years.len()
        )));
    }
    let n = samples.len();
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = wasserstein_1d(&samples[i], &samples[j])?;
            values[i][j] = d;
            values[j][i] = d;
        }
    }
    Ok(SimilarityMatrix {
        quantity,
        years,
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostShare {
    /// Share of the annual load-weighted price cost falling in event hours.
    pub total: f64,
    /// Share of annual market revenue earned in event hours, per asset
    /// category (flexibility category, or the generator category for
    /// renewables).
    pub by_category: IndexMap<String, f64>,
}

fn ratio(part: f64, whole: f64) -> f64 {
    if whole == 0.0 {
        0.0
    } else {
        part / whole
    }
}

/// Cost and revenue recovered during `events` relative to the whole year.
pub fn sde_cost_share(solution: &Solution, network: &Network, events: &[SdeEvent]) -> CostShare {
    let cost = hourly_cost(solution);
    let mask = event_mask(events, solution.hours);
    let inside: f64 = cost.iter().zip(&mask).filter(|(_, &m)| m).map(|(c, _)| c).sum();
    let total = ratio(inside, cost.iter().sum());

    let key = |e: &crate::optim::LedgerEntry| e.flex.map_or(e.category.clone(), |f| f.as_str().to_string());
    let mut annual: IndexMap<String, f64> = IndexMap::new();
    for e in revenue_ledger(solution, network, None) {
        *annual.entry(key(&e)).or_default() += e.revenue;
    }
    let mut during: IndexMap<String, f64> = IndexMap::new();
    for e in revenue_ledger(solution, network, Some(&mask)) {
        *during.entry(key(&e)).or_default() += e.revenue;
    }
    let by_category = annual
        .iter()
        .map(|(k, &whole)| (k.clone(), ratio(during.get(k).copied().unwrap_or(0.0), whole)))
        .collect();
    CostShare { total, by_category }
}

/// Largest accumulated load-weighted price cost over any `window` hours.
pub fn peak_window_cost(cost: &[f64], window: usize) -> f64 {
    let w = window.clamp(1, cost.len().max(1));
    if cost.is_empty() {
        return 0.0;
    }
    let mut acc: f64 = cost[..w].iter().sum();
    let mut best = acc;
    for t in w..cost.len() {
        acc += cost[t] - cost[t - w];
        best = best.max(acc);
    }
    best
}

/// The ten resilience metrics reported per weather year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ShadowPrices,
    NetLoad,
    PreventsPeaks,
    CausesPeaks,
    SystemCosts,
    SolarResources,
    WindResources,
    Temperature,
    PreventsDeficits,
    CausesDeficits,
}

impl Metric {
    pub const ALL: [Metric; 10] = [
        Metric::ShadowPrices,
        Metric::NetLoad,
        Metric::PreventsPeaks,
        Metric::CausesPeaks,
        Metric::SystemCosts,
        Metric::SolarResources,
        Metric::WindResources,
        Metric::Temperature,
        Metric::PreventsDeficits,
        Metric::CausesDeficits,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::ShadowPrices => "shadow_prices",
            Metric::NetLoad => "net_load",
            Metric::PreventsPeaks => "prevents_peaks",
            Metric::CausesPeaks => "causes_peaks",
            Metric::SystemCosts => "system_costs",
            Metric::SolarResources => "solar_resources",
            Metric::WindResources => "wind_resources",
            Metric::Temperature => "temperature",
            Metric::PreventsDeficits => "prevents_deficits",
            Metric::CausesDeficits => "causes_deficits",
        }
    }

    /// What the value measures.
    pub fn definition(self) -> &'static str {
        match self {
            Metric::ShadowPrices => "largest load-weighted price cost over one event window, EUR",
            Metric::NetLoad => "maximum hourly net load, GW",
            Metric::PreventsPeaks => "mean peak shedding of this design in other years, GW",
            Metric::CausesPeaks => "mean peak shedding of other designs in this year, GW",
            Metric::SystemCosts => "total system cost of the design optimum, EUR",
            Metric::SolarResources => "annual mean solar capacity factor",
            Metric::WindResources => "annual mean wind capacity factor",
            Metric::Temperature => "mean demand over November to February, GW",
            Metric::PreventsDeficits => "mean EENS share of this design in other years",
            Metric::CausesDeficits => "mean EENS share of other designs in this year",
        }
    }

    /// Whether a larger value means a more severe year. Rank 1 is the most
    /// severe.
    pub fn higher_is_severe(self) -> bool {
        !matches!(self, Metric::SolarResources | Metric::WindResources)
    }
}

/// Quantities derived from one year's design solve and weather.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearMetrics {
    pub weather_year: String,
    pub peak_window_cost: f64,
    pub max_net_load_gw: f64,
    pub system_cost: f64,
    pub solar_cf: Option<f64>,
    pub wind_cf: Option<f64>,
    pub winter_load_gw: f64,
}

impl YearMetrics {
    pub fn compute(
        network: &Network,
        series: &WeatherYearSeries,
        solution: &Solution,
        window_hours: usize,
    ) -> Result<Self> {
        if !solution.is_optimal() {
            return Err(Error::MissingInput(format!(
                "design solution for {} is {}",
                series.label,
                solution.status.as_str()
            )));
        }
        let nl = net_load(network, solution);
        Ok(YearMetrics {
            weather_year: series.label.clone(),
            peak_window_cost: peak_window_cost(&hourly_cost(solution), window_hours),
            max_net_load_gw: nl.iter().copied().fold(f64::NEG_INFINITY, f64::max) / 1e3,
            system_cost: solution.objective,
            solar_cf: resource_cf(series, network, Resource::Solar)?.map(|v| mean(&v)),
            wind_cf: resource_cf(series, network, Resource::Wind)?.map(|v| mean(&v)),
            winter_load_gw: winter_load(series) / 1e3,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub weather_year: String,
    /// Event type tags in chronological order, e.g. "SE"; empty when the
    /// year has no events.
    pub sde_types: String,
    pub event_ids: Vec<usize>,
    /// Indexed like [`Metric::ALL`]; `None` when not defined for the network.
    pub values: Vec<Option<f64>>,
    /// Dense severity ranks, 1 = most severe.
    pub ranks: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResilienceReport {
    pub metrics: Vec<Metric>,
    pub rows: Vec<ReportRow>,
}

impl ResilienceReport {
    pub fn value(&self, year: usize, metric: Metric) -> Option<f64> {
        let m = Metric::ALL.iter().position(|&x| x == metric)?;
        self.rows[year].values[m]
    }

    pub fn rank(&self, year: usize, metric: Metric) -> Option<usize> {
        let m = Metric::ALL.iter().position(|&x| x == metric)?;
        self.rows[year].ranks[m]
    }
}

pub struct ReportInputs<'a> {
    pub years: &'a [YearMetrics],
    pub aggregates: Option<&'a [YearAggregates]>,
    pub events: &'a [SdeEvent],
    /// Type of each event by id. Events without an entry get no tag.
    pub event_types: &'a IndexMap<usize, SdeType>,
}

/// Dense ranking: equal values share a rank and the next distinct value
/// takes the next integer. Missing values are unranked.
pub fn dense_ranks(values: &[Option<f64>], higher_is_severe: bool) -> Vec<Option<usize>> {
    let mut distinct: Vec<f64> = values.iter().flatten().copied().collect();
    distinct.sort_by(|a, b| if higher_is_severe { b.total_cmp(a) } else { a.total_cmp(b) });
    distinct.dedup();
    values
        .iter()
        .map(|v| v.map(|x| distinct.iter().position(|&d| d == x).unwrap() + 1))
        .collect()
}

pub fn build_report(inputs: &ReportInputs<'_>) -> Result<ResilienceReport> {
    let aggregates = inputs
        .aggregates
        .ok_or_else(|| Error::MissingInput("validation aggregates".into()))?;
    if aggregates.len() != inputs.years.len() {
        return Err(Error::MissingInput(format!(
            "validation aggregates for {} of {} weather years",
            aggregates.len(),
            inputs.years.len()
        )));
    }
    if inputs.years.is_empty() {
        return Err(Error::MissingInput("weather-year metrics".into()));
    }
    let mut rows: Vec<ReportRow> = inputs
        .years
        .iter()
        .zip(aggregates)
        .map(|(y, a)| {
            let mut events: Vec<&SdeEvent> = inputs
                .events
                .iter()
                .filter(|e| e.weather_year == y.weather_year)
                .collect();
            events.sort_by_key(|e| e.span.start);
            let values = Metric::ALL
                .iter()
                .map(|m| match m {
                    Metric::ShadowPrices => Some(y.peak_window_cost),
                    Metric::NetLoad => Some(y.max_net_load_gw),
                    Metric::PreventsPeaks => Some(a.prevents_peaks),
                    Metric::CausesPeaks => Some(a.causes_peaks),
                    Metric::SystemCosts => Some(y.system_cost),
                    Metric::SolarResources => y.solar_cf,
                    Metric::WindResources => y.wind_cf,
                    Metric::Temperature => Some(y.winter_load_gw),
                    Metric::PreventsDeficits => Some(a.prevents_deficits),
                    Metric::CausesDeficits => Some(a.causes_deficits),
                })
                .collect();
            ReportRow {
                weather_year: y.weather_year.clone(),
                sde_types: events
                    .iter()
                    .filter_map(|e| inputs.event_types.get(&e.id).map(|t| t.tag()))
                    .collect(),
                event_ids: events.iter().map(|e| e.id).collect(),
                values,
                ranks: Vec::new(),
            }
        })
        .collect();
    for (m, metric) in Metric::ALL.iter().enumerate() {
        let column: Vec<Option<f64>> = rows.iter().map(|r| r.values[m]).collect();
        for (row, rank) in rows.iter_mut().zip(dense_ranks(&column, metric.higher_is_severe())) {
            row.ranks.push(rank);
        }
    }
    Ok(ResilienceReport {
        metrics: Metric::ALL.to_vec(),
        rows,
    })
}

fn flush<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::io("<csv>", e))
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// Long format: `design,operational,status,eens,max_unserved_gw`.
pub fn write_matrix_csv<W: Write>(writer: W, matrix: &ValidationMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["design", "operational", "status", "eens", "max_unserved_gw"])?;
    for (i, row) in matrix.cells.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            let (status, e, p) = match cell {
                Cell::Ok { eens, max_unserved_gw } => ("ok", Some(*eens), Some(*max_unserved_gw)),
                Cell::Poisoned { .. } => ("poisoned", None, None),
                Cell::Pending => ("pending", None, None),
            };
            w.write_record([&matrix.years[i], &matrix.years[j], status, &opt(e), &opt(p)])?;
        }
    }
    flush(w)
}

pub fn write_aggregates_csv<W: Write>(writer: W, years: &[String], aggregates: &[YearAggregates]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "weather_year",
        "prevents_deficits",
        "causes_deficits",
        "prevents_peaks_gw",
        "causes_peaks_gw",
        "prevents_peaks_max_gw",
        "causes_peaks_max_gw",
    ])?;
    for (y, a) in years.iter().zip(aggregates) {
        w.write_record([
            y.clone(),
            a.prevents_deficits.to_string(),
            a.causes_deficits.to_string(),
            a.prevents_peaks.to_string(),
            a.causes_peaks.to_string(),
            a.prevents_peaks_max.to_string(),
            a.causes_peaks_max.to_string(),
        ])?;
    }
    flush(w)
}

/// Square matrix with a leading `weather_year` column.
pub fn write_similarity_csv<W: Write>(writer: W, sim: &SimilarityMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["weather_year".to_string()];
    header.extend(sim.years.iter().cloned());
    w.write_record(&header)?;
    for (y, row) in sim.years.iter().zip(&sim.values) {
        let mut rec = vec![y.clone()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    flush(w)
}

/// Wide format: one row per weather year, one column per metric.
pub fn write_report_csv<W: Write>(writer: W, report: &ResilienceReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["weather_year".to_string(), "sde_types".into(), "events".into()];
    header.extend(report.metrics.iter().map(|m| m.name().to_string()));
    w.write_record(&header)?;
    for r in &report.rows {
        let mut rec = vec![
            r.weather_year.clone(),
            r.sde_types.clone(),
            r.event_ids.iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
        ];
        rec.extend(r.values.iter().map(|v| opt(*v)));
        w.write_record(&rec)?;
    }
    flush(w)
}

/// Long format: `weather_year,metric,value,rank,severe_when`.
pub fn write_ranks_csv<W: Write>(writer: W, report: &ResilienceReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["weather_year", "metric", "value", "rank", "severe_when"])?;
    for r in &report.rows {
        for (m, metric) in report.metrics.iter().enumerate() {
            w.write_record([
                r.weather_year.clone(),
                metric.name().to_string(),
                opt(r.values[m]),
                r.ranks[m].map_or(String::new(), |x| x.to_string()),
                if metric.higher_is_severe() { "high" } else { "low" }.to_string(),
            ])?;
        }
    }
    flush(w)
}

/// `category,share` with the total first.
pub fn write_cost_share_csv<W: Write>(writer: W, share: &CostShare) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["category", "share"])?;
    w.write_record(["total".to_string(), share.total.to_string()])?;
    for (k, v) in &share.by_category {
        w.write_record([k.clone(), v.to_string()])?;
    }
    flush(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{EventFeatures, Span};
    use crate::model::fixtures::two_bus;
    use crate::optim::{build_design, HighsSolver, DEFAULT_TOL};
    use proptest::prelude::*;

    fn ok(eens: f64, peak: f64) -> Cell {
        Cell::Ok {
            eens,
            max_unserved_gw: peak,
        }
    }

    fn matrix(values: &[&[f64]]) -> ValidationMatrix {
        ValidationMatrix {
            years: (0..values.len()).map(|i| format!("y{i}")).collect(),
            cells: values
                .iter()
                .map(|r| r.iter().map(|&v| ok(v, 10.0 * v)).collect())
                .collect(),
        }
    }

    #[test]
    fn zero_matrix_aggregates_to_zero() {
        let agg = aggregate_rows_cols(&matrix(&[&[0.0, 0.0], &[0.0, 0.0]])).unwrap();
        assert!(agg.iter().all(|a| *a == YearAggregates::default()));
    }

    #[test]
    fn single_entry_touches_one_row_and_one_column() {
        let agg = aggregate_rows_cols(&matrix(&[&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.3], &[0.0, 0.0, 0.0]])).unwrap();
        let nonzero: Vec<(bool, bool)> = agg
            .iter()
            .map(|a| (a.prevents_deficits > 0.0, a.causes_deficits > 0.0))
            .collect();
        assert_eq!(nonzero, vec![(false, false), (true, false), (false, true)]);
        assert!((agg[1].prevents_peaks - 1.5).abs() < 1e-15);
        assert_eq!(agg[2].causes_peaks_max, 3.0);
    }

    #[test]
    fn incomplete_matrix_is_rejected() {
        let mut m = matrix(&[&[0.0, 0.1], &[0.2, 0.0]]);
        m.cells[0][1] = Cell::Poisoned { reason: "x".into() };
        let err = aggregate_rows_cols(&m).unwrap_err();
        assert!(err.to_string().contains("y0"));
    }

    #[test]
    fn wasserstein_closed_forms() {
        assert_eq!(wasserstein_1d(&[3.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(wasserstein_1d(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(wasserstein_1d(&[0.0, 1.0], &[0.0, 3.0]).unwrap(), 1.0);
        assert!(wasserstein_1d(&[], &[1.0]).is_err());
    }

    #[test]
    fn wasserstein_unequal_lengths() {
        // Replicating every point of a sample leaves its distribution unchanged.
        let a = [0.0, 2.0, 5.0];
        let b = [1.0, 1.0, 4.0, 4.0, 4.0, 7.0];
        let b_half = [1.0, 4.0, 7.0];
        let a_double = [0.0, 0.0, 2.0, 2.0, 5.0, 5.0];
        let direct = wasserstein_1d(&a, &b).unwrap();
        assert!((direct - wasserstein_1d(&a_double, &b).unwrap()).abs() < 1e-12);
        assert!(wasserstein_1d(&a, &b_half).unwrap() > 0.0);
        assert_eq!(wasserstein_1d(&[0.0], &[1.0, 3.0]).unwrap(), 2.0);
    }

    #[test]
    fn similarity_of_shifted_copy() {
        let base: Vec<f64> = (0..365).map(|d| (d as f64 * 0.1).sin()).collect();
        let shifted: Vec<f64> = base.iter().map(|v| v + 0.75).collect();
        let sim = similarity_matrix(
            SimilarityQuantity::NetLoad,
            vec!["a".into(), "b".into(), "c".into()],
            &[base.clone(), base.clone(), shifted],
        )
        .unwrap();
        assert_eq!(sim.values[0][1], 0.0);
        assert!((sim.values[0][2] - 0.75).abs() < 1e-12);
        assert_eq!(sim.values[2][0], sim.values[0][2]);
        assert!(similarity_matrix(SimilarityQuantity::NetLoad, vec!["a".into()], &[base]).is_err());
    }

    #[test]
    fn dense_ranks_share_ties() {
        let v = [Some(3.0), Some(1.0), Some(3.0), None, Some(2.0)];
        assert_eq!(dense_ranks(&v, true), vec![Some(1), Some(3), Some(1), None, Some(2)]);
        assert_eq!(dense_ranks(&v, false), vec![Some(3), Some(1), Some(3), None, Some(2)]);
    }

    #[test]
    fn peak_window_cost_is_max_rolling_sum() {
        assert_eq!(peak_window_cost(&[1.0, 5.0, 2.0, 0.0, 4.0], 2), 7.0);
        assert_eq!(peak_window_cost(&[1.0, 2.0], 10), 3.0);
    }

    fn event(id: usize, year: &str, span: Span) -> SdeEvent {
        SdeEvent {
            id,
            weather_year: year.into(),
            raw: span,
            span,
            peak_hour: span.start,
            cost: 0.0,
            features: EventFeatures::default(),
            composites: vec![],
        }
    }

    fn year(label: &str, cost: f64) -> YearMetrics {
        YearMetrics {
            weather_year: label.into(),
            peak_window_cost: cost,
            max_net_load_gw: 1.0,
            system_cost: cost,
            solar_cf: None,
            wind_cf: Some(0.3),
            winter_load_gw: 2.0,
        }
    }

    #[test]
    fn report_rows_and_tags() {
        let years = [year("a", 2.0), year("b", 5.0)];
        let agg = [YearAggregates::default(); 2];
        let events = [event(1, "b", Span::new(100, 120)), event(0, "b", Span::new(10, 20))];
        let types: IndexMap<usize, SdeType> = [(0, SdeType::EnergyDeficit), (1, SdeType::SeverePowerDeficit)].into();
        let report = build_report(&ReportInputs {
            years: &years,
            aggregates: Some(&agg),
            events: &events,
            event_types: &types,
        })
        .unwrap();
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.metrics.len(), 10);
        assert_eq!(report.rows[0].sde_types, "");
        assert_eq!(report.rows[1].sde_types, "ES");
        assert_eq!(report.rank(1, Metric::SystemCosts), Some(1));
        assert_eq!(report.rank(0, Metric::WindResources), Some(1));
        assert_eq!(report.value(0, Metric::SolarResources), None);

        let missing = build_report(&ReportInputs {
            years: &years,
            aggregates: None,
            events: &events,
            event_types: &types,
        });
        assert!(missing.unwrap_err().to_string().contains("validation aggregates"));

        let mut buf = Vec::new();
        write_report_csv(&mut buf, &report).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().next().unwrap().contains("causes_deficits"));
    }

    fn two_bus_years() -> (Network, Vec<WeatherYearSeries>) {
        let mut net = two_bus();
        net.scenario.transmission_expansion = 0.0;
        let hours = 48;
        let years = (0..2)
            .map(|y| {
                let scale = if y == 0 { 1.0 } else { 0.6 };
                let wind: Vec<f64> = (0..hours).map(|t| scale * (0.3 + 0.3 * ((t as f64) / 5.0).sin().abs())).collect();
                WeatherYearSeries {
                    label: format!("{}/{:02}", 2000 + y, 1 + y),
                    demand: [("A".to_string(), vec![300.0; hours]), ("B".to_string(), vec![500.0; hours])].into(),
                    cf: [("wind-A".to_string(), wind)].into(),
                    inflow: IndexMap::new(),
                }
            })
            .collect();
        (net, years)
    }

    #[test]
    fn diagonal_is_served_and_matrix_is_compositional() {
        let (net, years) = two_bus_years();
        let solver = HighsSolver::default();
        let designs: Vec<Capacities> = years
            .iter()
            .map(|y| solve(&build_design(&net, y).unwrap(), &solver, DEFAULT_TOL).unwrap().capacities)
            .collect();
        let m = validation_matrix(&net, &designs, &years, &solver, DEFAULT_TOL).unwrap();
        assert!(m.is_complete());
        for i in 0..2 {
            assert!(m.eens(i, i).unwrap() <= 1e-9);
            for j in 0..2 {
                let single = validate_entry(&net, &designs[i], &years[j], &solver, DEFAULT_TOL).unwrap();
                assert_eq!(single, m.cells[i][j]);
                let e = m.eens(i, j).unwrap();
                assert!((0.0..=1.0).contains(&e));
            }
        }
    }

    #[test]
    fn failing_entry_is_poisoned() {
        let (net, years) = two_bus_years();
        let solver = HighsSolver::default();
        let mut m = ValidationMatrix::pending(years.iter().map(|y| y.label.clone()).collect());
        // No design capacities at all: every build fails.
        let designs = vec![Capacities::default(), Capacities::default()];
        let solved = fill_pending(&mut m, &net, &designs, &years, &solver, DEFAULT_TOL).unwrap();
        assert_eq!(solved, 4);
        assert!(m.cells.iter().flatten().all(|c| matches!(c, Cell::Poisoned { .. })));
        assert!(aggregate_rows_cols(&m).is_err());
    }

    #[test]
    fn cost_share_bounds() {
        let (net, years) = two_bus_years();
        let sol = solve(&build_design(&net, &years[1]).unwrap(), &HighsSolver::default(), DEFAULT_TOL).unwrap();
        assert_eq!(sde_cost_share(&sol, &net, &[]).total, 0.0);
        let all = sde_cost_share(&sol, &net, &[event(0, "x", Span::new(0, 47))]);
        assert!((all.total - 1.0).abs() < 1e-12);
        for v in all.by_category.values() {
            assert!((v - 1.0).abs() < 1e-9 || *v == 0.0);
        }
        let some = sde_cost_share(&sol, &net, &[event(0, "x", Span::new(5, 9))]).total;
        let more = sde_cost_share(&sol, &net, &[event(0, "x", Span::new(5, 9)), event(1, "x", Span::new(20, 30))]).total;
        assert!((0.0..=1.0).contains(&some) && some <= more);
    }

    proptest! {
        #[test]
        fn wasserstein_is_a_metric(
            a in prop::collection::vec(-50.0f64..50.0, 20),
            b in prop::collection::vec(-50.0f64..50.0, 20),
            c in prop::collection::vec(-50.0f64..50.0, 20),
        ) {
            let ab = wasserstein_1d(&a, &b).unwrap();
            let ba = wasserstein_1d(&b, &a).unwrap();
            let bc = wasserstein_1d(&b, &c).unwrap();
            let ac = wasserstein_1d(&a, &c).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert_eq!(wasserstein_1d(&a, &a).unwrap(), 0.0);
            prop_assert!(ac <= ab + bc + 1e-9);
        }

        #[test]
        fn general_lengths_match_replication(
            a in prop::collection::vec(-50.0f64..50.0, 1..8),
            b in prop::collection::vec(-50.0f64..50.0, 1..8),
        ) {
            // Replicate each sample to a common length and compare with the
            // equal-length formula.
            let (n, m) = (a.len(), b.len());
            let ar: Vec<f64> = a.iter().flat_map(|&x| std::iter::repeat_n(x, m)).collect();
            let br: Vec<f64> = b.iter().flat_map(|&x| std::iter::repeat_n(x, n)).collect();
            let direct = wasserstein_1d(&a, &b).unwrap();
            let replicated = wasserstein_1d(&ar, &br).unwrap();
            prop_assert!((direct - replicated).abs() <= 1e-9 * (1.0 + direct));
        }

        #[test]
        fn aggregates_are_off_diagonal_means(values in prop::collection::vec(0.0f64..1.0, 9)) {
            let rows: Vec<&[f64]> = values.chunks(3).collect();
            let m = matrix(&rows);
            let agg = aggregate_rows_cols(&m).unwrap();
            for y in 0..3 {
                let row: f64 = (0..3).filter(|&j| j != y).map(|j| values[3 * y + j]).sum::<f64>() / 2.0;
                let col: f64 = (0..3).filter(|&i| i != y).map(|i| values[3 * i + y]).sum::<f64>() / 2.0;
                prop_assert!((agg[y].prevents_deficits - row).abs() < 1e-12);
                prop_assert!((agg[y].causes_deficits - col).abs() < 1e-12);
            }
        }
    }
}
