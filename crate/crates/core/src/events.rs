//! System-defining events (SDEs): periods in which the load-weighted shadow
//! price accumulated over a sliding window crosses a cost threshold.
//!
//! Detection runs per weather year. Every window `[t0, t0 + T - 1]` whose
//! accumulated cost reaches `C` is flagged, overlapping or adjacent flagged
//! windows are unioned into raw spans, and each raw span is trimmed to the
//! smallest sub-span holding every hour whose cost exceeds the year's
//! `trim_quantile` cost quantile. A raw span with no such hour collapses to
//! its peak-cost hour ± 12 h, clipped to the raw span.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FlexCategory, GeneratorCategory, Network, Resource, Scenario};
use crate::optim::Solution;
use crate::timeseries::{daily_means, mean, resource_cf, WeatherYearSeries, HOURS_PER_DAY, WINTER_HOURS};

const PEAK_HALF_WIDTH: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    /// EUR
    pub threshold: f64,
    pub window_hours: usize,
    pub trim_quantile: f64,
}

impl Default for SdeConfig {
    fn default() -> Self {
        SdeConfig {
            threshold: crate::model::DEFAULT_SDE_THRESHOLD,
            window_hours: crate::model::DEFAULT_SDE_WINDOW_HOURS,
            trim_quantile: 0.99,
        }
    }
}

impl SdeConfig {
    pub fn from_scenario(scenario: &Scenario) -> Self {
        SdeConfig {
            threshold: scenario.sde_threshold,
            window_hours: scenario.sde_window_hours,
            ..SdeConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(Error::InvalidArgument(format!("threshold {} must be > 0", self.threshold)));
        }
        if self.window_hours == 0 {
            return Err(Error::InvalidArgument("window must be >= 1 hour".into()));
        }
        if !(self.trim_quantile > 0.0 && self.trim_quantile < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "trim quantile {} outside (0, 1)",
                self.trim_quantile
            )));
        }
        Ok(())
    }
}

/// Inclusive hour range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn hours(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

/// A detected event before feature extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSpan {
    /// Union of the flagged windows.
    pub raw: Span,
    /// Quantile-trimmed event period.
    pub span: Span,
}

/// Cluster features of one event.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EventFeatures {
    /// GW
    pub highest_net_load: f64,
    /// GW
    pub avg_net_load: f64,
    /// hours
    pub duration: f64,
    /// TWh discharged by resilience back-up assets.
    pub total_fc_discharge: f64,
    /// GW
    pub max_fc_discharge: f64,
    /// Mean demand relative to the annual mean demand.
    pub avg_relative_load: f64,
    /// Mean wind capacity factor minus its November-February mean.
    pub wind_cf_anomaly: f64,
}

impl EventFeatures {
    pub const NAMES: [&'static str; 7] = [
        "highest_net_load_gw",
        "avg_net_load_gw",
        "duration_h",
        "total_fc_discharge_twh",
        "max_fc_discharge_gw",
        "avg_relative_load",
        "wind_cf_anomaly",
    ];

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.highest_net_load,
            self.avg_net_load,
            self.duration,
            self.total_fc_discharge,
            self.max_fc_discharge,
            self.avg_relative_load,
            self.wind_cf_anomaly,
        ]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        EventFeatures {
            highest_net_load: a[0],
            avg_net_load: a[1],
            duration: a[2],
            total_fc_discharge: a[3],
            max_fc_discharge: a[4],
            avg_relative_load: a[5],
            wind_cf_anomaly: a[6],
        }
    }
}

/// Event-mean impacts at one bus.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NodeComposite {
    pub bus: String,
    /// MW, mean of daily anomalies.
    pub solar_anomaly: f64,
    /// MW, mean of daily anomalies.
    pub wind_anomaly: f64,
    /// MW, mean of daily anomalies.
    pub net_load_anomaly: f64,
    /// EUR/MWh, mean of daily anomalies.
    pub price_anomaly: f64,
    /// EUR/MWh, mean over event hours.
    pub avg_price: f64,
    /// EUR per hour, mean of demand times price.
    pub avg_hourly_cost: f64,
    /// Dispatch over installed capacity, per flexibility category.
    pub utilisation: IndexMap<FlexCategory, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeEvent {
    pub id: usize,
    pub weather_year: String,
    pub raw: Span,
    pub span: Span,
    pub peak_hour: usize,
    /// EUR accumulated over `span`.
    pub cost: f64,
    pub features: EventFeatures,
    pub composites: Vec<NodeComposite>,
}

/// System-wide demand minus actual wind and solar generation, MW.
pub fn net_load(network: &Network, solution: &Solution) -> Vec<f64> {
    let mut out = vec![0.0; solution.hours];
    for per_bus in net_load_by_bus(network, solution).values() {
        for (o, v) in out.iter_mut().zip(per_bus) {
            *o += v;
        }
    }
    out
}

/// Per-bus demand minus renewable generation at that bus, MW.
pub fn net_load_by_bus(network: &Network, solution: &Solution) -> IndexMap<String, Vec<f64>> {
    let mut out: IndexMap<String, Vec<f64>> = solution.demand.clone();
    for g in &network.generators {
        if g.category != GeneratorCategory::Renewable {
            continue;
        }
        if let (Some(p), Some(row)) = (solution.dispatch.get(&g.id), out.get_mut(&g.bus)) {
            for (o, v) in row.iter_mut().zip(p) {
                *o -= v;
            }
        }
    }
    out
}

/// Hourly system cost `Σ_n d[n,t] λ[n,t]`, EUR.
pub fn hourly_cost(solution: &Solution) -> Vec<f64> {
    let mut out = vec![0.0; solution.hours];
    for (bus, d) in &solution.demand {
        let Some(lambda) = solution.duals_balance.get(bus) else {
            continue;
        };
        for ((o, d), l) in out.iter_mut().zip(d).zip(lambda) {
            *o += d * l;
        }
    }
    out
}

/// Linear-interpolation quantile of an unsorted sample.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Raw spans: unions of overlapping or adjacent windows whose accumulated
/// cost reaches the threshold.
pub fn flagged_spans(cost: &[f64], threshold: f64, window: usize) -> Vec<Span> {
    if window == 0 || cost.len() < window {
        return Vec::new();
    }
    let mut prefix = Vec::with_capacity(cost.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for c in cost {
        acc += c;
        prefix.push(acc);
    }
    let mut spans: Vec<Span> = Vec::new();
    for t0 in 0..=cost.len() - window {
        if prefix[t0 + window] - prefix[t0] < threshold {
            continue;
        }
        let end = t0 + window - 1;
        match spans.last_mut() {
            Some(last) if t0 <= last.end + 1 => last.end = last.end.max(end),
            _ => spans.push(Span::new(t0, end)),
        }
    }
    spans
}

/// Detects events in one weather year's hourly cost series.
pub fn detect_sdes(cost: &[f64], config: &SdeConfig) -> Result<Vec<EventSpan>> {
    config.validate()?;
    if cost.len() < config.window_hours {
        return Err(Error::InvalidArgument(format!(
            "series of {} hours is shorter than the {}-hour window",
            cost.len(),
            config.window_hours
        )));
    }
    let cutoff = quantile(cost, config.trim_quantile);
    let events = flagged_spans(cost, config.threshold, config.window_hours)
        .into_iter()
        .map(|raw| {
            let above: Vec<usize> = raw.hours().filter(|&t| cost[t] > cutoff).collect();
            let span = match (above.first(), above.last()) {
                (Some(&a), Some(&b)) => Span::new(a, b),
                _ => {
                    let peak = raw
                        .hours()
                        .fold(raw.start, |best, t| if cost[t] > cost[best] { t } else { best });
                    Span::new(
                        peak.saturating_sub(PEAK_HALF_WIDTH).max(raw.start),
                        (peak + PEAK_HALF_WIDTH).min(raw.end),
                    )
                }
            };
            EventSpan { raw, span }
        })
        .collect();
    Ok(events)
}

/// Hourly output of resilience back-up assets (back-up generators and
/// hydrogen discharge), MW.
pub fn backup_discharge(network: &Network, solution: &Solution) -> Vec<f64> {
    let mut out = vec![0.0; solution.hours];
    for g in &network.generators {
        if g.category == GeneratorCategory::ResilienceBackup {
            if let Some(p) = solution.dispatch.get(&g.id) {
                out.iter_mut().zip(p).for_each(|(o, v)| *o += v);
            }
        }
    }
    for s in &network.storage_systems {
        if s.kind.flex() == FlexCategory::ResilienceBackup {
            if let Some(op) = solution.storage.get(&s.id) {
                out.iter_mut().zip(&op.discharge).for_each(|(o, v)| *o += v);
            }
        }
    }
    out
}

pub fn event_features(
    span: Span,
    network: &Network,
    series: &WeatherYearSeries,
    solution: &Solution,
) -> Result<EventFeatures> {
    if span.end >= solution.hours {
        return Err(Error::InvalidArgument(format!(
            "event ending at hour {} outside a {}-hour year",
            span.end, solution.hours
        )));
    }
    let nl = net_load(network, solution);
    let window = &nl[span.hours()];
    let backup = backup_discharge(network, solution);
    let backup = &backup[span.hours()];
    let demand = series.total_demand();
    let annual_mean = mean(&demand);
    let avg_relative_load = if annual_mean > 0.0 {
        mean(&demand[span.hours()]) / annual_mean
    } else {
        0.0
    };
    let wind_cf_anomaly = match resource_cf(series, network, Resource::Wind)? {
        Some(cf) => mean(&cf[span.hours()]) - winter_mean(&cf),
        None => 0.0,
    };
    Ok(EventFeatures {
        highest_net_load: window.iter().copied().fold(f64::NEG_INFINITY, f64::max) / 1e3,
        avg_net_load: mean(window) / 1e3,
        duration: span.len() as f64,
        total_fc_discharge: backup.iter().sum::<f64>() / 1e6,
        max_fc_discharge: backup.iter().copied().fold(0.0, f64::max) / 1e3,
        avg_relative_load,
        wind_cf_anomaly,
    })
}

/// Mean over November-February, or over the whole series if it is shorter
/// than that window.
fn winter_mean(values: &[f64]) -> f64 {
    let end = WINTER_HOURS.end.min(values.len());
    let start = WINTER_HOURS.start.min(end);
    if start == end {
        mean(values)
    } else {
        mean(&values[start..end])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    NetLoad,
    WindGen,
    SolarGen,
    Flex(FlexCategory),
    Price,
}

impl Quantity {
    pub fn name(&self) -> String {
        match self {
            Quantity::NetLoad => "net_load".into(),
            Quantity::WindGen => "wind".into(),
            Quantity::SolarGen => "solar".into(),
            Quantity::Flex(c) => format!("flex_{}", c.as_str()),
            Quantity::Price => "price".into(),
        }
    }
}

/// Hourly per-bus values of a quantity.
pub fn quantity_by_bus(
    network: &Network,
    solution: &Solution,
    quantity: Quantity,
) -> IndexMap<String, Vec<f64>> {
    let zeros = || -> IndexMap<String, Vec<f64>> {
        network
            .buses
            .iter()
            .map(|b| (b.id.clone(), vec![0.0; solution.hours]))
            .collect()
    };
    let add = |out: &mut IndexMap<String, Vec<f64>>, bus: &str, values: &[f64]| {
        if let Some(row) = out.get_mut(bus) {
            row.iter_mut().zip(values).for_each(|(o, v)| *o += v);
        }
    };
    match quantity {
        Quantity::NetLoad => net_load_by_bus(network, solution),
        Quantity::Price => solution.duals_balance.clone(),
        Quantity::WindGen | Quantity::SolarGen => {
            let want = if quantity == Quantity::WindGen {
                Resource::Wind
            } else {
                Resource::Solar
            };
            let mut out = zeros();
            for g in &network.generators {
                if g.resource() == Some(want) {
                    if let Some(p) = solution.dispatch.get(&g.id) {
                        add(&mut out, &g.bus, p);
                    }
                }
            }
            out
        }
        Quantity::Flex(cat) => {
            let mut out = zeros();
            for g in &network.generators {
                if g.category.flex() == Some(cat) {
                    if let Some(p) = solution.dispatch.get(&g.id) {
                        add(&mut out, &g.bus, p);
                    }
                }
            }
            for s in &network.storage_systems {
                if s.kind.flex() == cat {
                    if let Some(op) = solution.storage.get(&s.id) {
                        add(&mut out, &s.bus, &op.discharge);
                    }
                }
            }
            out
        }
    }
}

/// Daily anomalies over the days an event touches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyAnomalies {
    pub quantity: Quantity,
    /// Day indices from the start of the weather year.
    pub days: Vec<usize>,
    /// Per bus, one anomaly per entry of `days`.
    pub per_node: IndexMap<String, Vec<f64>>,
}

/// Daily mean minus the bus's November-February mean of the same weather
/// year, for every day the span touches.
pub fn anomalies(
    network: &Network,
    solution: &Solution,
    quantity: Quantity,
    span: Span,
) -> DailyAnomalies {
    let hourly = quantity_by_bus(network, solution, quantity);
    daily_anomalies(&hourly, quantity, span)
}

pub fn daily_anomalies(
    hourly: &IndexMap<String, Vec<f64>>,
    quantity: Quantity,
    span: Span,
) -> DailyAnomalies {
    let first = span.start / HOURS_PER_DAY;
    let last = span.end / HOURS_PER_DAY;
    let days: Vec<usize> = (first..=last).collect();
    let per_node = hourly
        .iter()
        .map(|(bus, values)| {
            let baseline = winter_mean(values);
            let daily = daily_means(values);
            let row = days
                .iter()
                .map(|&d| daily.get(d).copied().unwrap_or(baseline) - baseline)
                .collect();
            (bus.clone(), row)
        })
        .collect();
    DailyAnomalies {
        quantity,
        days,
        per_node,
    }
}

/// Per-bus composites of one event.
pub fn composites(network: &Network, solution: &Solution, span: Span) -> Vec<NodeComposite> {
    let anomaly_mean = |q: Quantity| -> IndexMap<String, f64> {
        anomalies(network, solution, q, span)
            .per_node
            .into_iter()
            .map(|(b, v)| (b, mean(&v)))
            .collect()
    };
    let solar = anomaly_mean(Quantity::SolarGen);
    let wind = anomaly_mean(Quantity::WindGen);
    let net = anomaly_mean(Quantity::NetLoad);
    let price = anomaly_mean(Quantity::Price);

    network
        .buses
        .iter()
        .map(|b| {
            let lambda = &solution.duals_balance[&b.id];
            let demand = &solution.demand[&b.id];
            let avg_price = mean(&lambda[span.hours()]);
            let costs: Vec<f64> = span.hours().map(|t| lambda[t] * demand[t]).collect();
            let mut utilisation = IndexMap::new();
            for cat in FlexCategory::ALL {
                let mut capacity = 0.0;
                let mut dispatched = vec![0.0; span.len()];
                for g in network.generators.iter().filter(|g| g.bus == b.id && g.category.flex() == Some(cat)) {
                    capacity += solution.capacities.generators.get(&g.id).copied().unwrap_or(0.0);
                    if let Some(p) = solution.dispatch.get(&g.id) {
                        dispatched.iter_mut().zip(&p[span.hours()]).for_each(|(o, v)| *o += v);
                    }
                }
                for s in network.storage_systems.iter().filter(|s| s.bus == b.id && s.kind.flex() == cat) {
                    capacity += solution.capacities.storage.get(&s.id).map_or(0.0, |c| c.discharger);
                    if let Some(op) = solution.storage.get(&s.id) {
                        dispatched.iter_mut().zip(&op.discharge[span.hours()]).for_each(|(o, v)| *o += v);
                    }
                }
                let u = if capacity > 0.0 { mean(&dispatched) / capacity } else { 0.0 };
                utilisation.insert(cat, u);
            }
            NodeComposite {
                bus: b.id.clone(),
                solar_anomaly: solar[&b.id],
                wind_anomaly: wind[&b.id],
                net_load_anomaly: net[&b.id],
                price_anomaly: price[&b.id],
                avg_price,
                avg_hourly_cost: mean(&costs),
                utilisation,
            }
        })
        .collect()
}

/// Averages per-bus composites over several events.
pub fn mean_composites(events: &[SdeEvent]) -> Vec<NodeComposite> {
    let Some(first) = events.first() else {
        return Vec::new();
    };
    let n = events.len() as f64;
    first
        .composites
        .iter()
        .enumerate()
        .map(|(i, c0)| {
            let all = events.iter().map(|e| &e.composites[i]);
            let avg = |f: &dyn Fn(&NodeComposite) -> f64| all.clone().map(f).sum::<f64>() / n;
            NodeComposite {
                bus: c0.bus.clone(),
                solar_anomaly: avg(&|c| c.solar_anomaly),
                wind_anomaly: avg(&|c| c.wind_anomaly),
                net_load_anomaly: avg(&|c| c.net_load_anomaly),
                price_anomaly: avg(&|c| c.price_anomaly),
                avg_price: avg(&|c| c.avg_price),
                avg_hourly_cost: avg(&|c| c.avg_hourly_cost),
                utilisation: c0
                    .utilisation
                    .keys()
                    .map(|k| (*k, avg(&|c| c.utilisation.get(k).copied().unwrap_or(0.0))))
                    .collect(),
            }
        })
        .collect()
}

/// Values sorted in descending order.
pub fn duration_curve(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    out.sort_by(|a, b| b.total_cmp(a));
    out
}

/// Hour of maximal net load within the span; ties go to the earliest hour.
pub fn peak_hour(span: Span, net_load: &[f64]) -> usize {
    span.hours()
        .fold(span.start, |best, t| if net_load[t] > net_load[best] { t } else { best })
}

/// Detects and characterises every event of one weather year.
pub fn detect_year(
    network: &Network,
    series: &WeatherYearSeries,
    solution: &Solution,
    config: &SdeConfig,
    first_id: usize,
) -> Result<Vec<SdeEvent>> {
    if !solution.is_optimal() {
        return Err(Error::MissingInput(format!(
            "solution for {} is {}",
            solution.label,
            solution.status.as_str()
        )));
    }
    let cost = hourly_cost(solution);
    let nl = net_load(network, solution);
    detect_sdes(&cost, config)?
        .into_iter()
        .enumerate()
        .map(|(i, ev)| {
            Ok(SdeEvent {
                id: first_id + i,
                weather_year: series.label.clone(),
                raw: ev.raw,
                span: ev.span,
                peak_hour: peak_hour(ev.span, &nl),
                cost: cost[ev.span.hours()].iter().sum(),
                features: event_features(ev.span, network, series, solution)?,
                composites: composites(network, solution, ev.span),
            })
        })
        .collect()
}

/// One rung of a threshold ladder: the events found at that threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderLevel<'a> {
    pub threshold: f64,
    pub events: &'a [SdeEvent],
}

/// For each reference event, the highest threshold at which an event of the
/// same weather year with an overlapping span is found, or `None`.
pub fn highest_matching_threshold(reference: &[SdeEvent], ladder: &[LadderLevel<'_>]) -> Vec<Option<f64>> {
    let mut levels: Vec<&LadderLevel> = ladder.iter().collect();
    levels.sort_by(|a, b| b.threshold.total_cmp(&a.threshold));
    reference
        .iter()
        .map(|r| {
            levels
                .iter()
                .find(|lvl| {
                    lvl.events
                        .iter()
                        .any(|e| e.weather_year == r.weather_year && e.span.overlaps(&r.span))
                })
                .map(|lvl| lvl.threshold)
        })
        .collect()
}

/// Hour mask that is true inside any of the events.
pub fn event_mask(events: &[SdeEvent], hours: usize) -> Vec<bool> {
    let mut mask = vec![false; hours];
    for e in events {
        for t in e.span.hours().filter(|&t| t < hours) {
            mask[t] = true;
        }
    }
    mask
}
