//! Hourly demand, capacity-factor and inflow series, organised by weather
//! year. A weather year runs from July 1 00:00 to June 30 23:00 with Feb 29
//! removed, so every full year has exactly 8760 hours.

use std::f64::consts::PI;
use std::ops::Range;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Network, Resource};

pub const HOURS_PER_YEAR: usize = 8760;
pub const HOURS_PER_DAY: usize = 24;

/// November 1 through the end of February, as hour offsets from July 1.
/// Shared by the winter-load metric and the seasonal anomaly baseline.
pub const WINTER_HOURS: Range<usize> = (123 * 24)..(243 * 24);

/// Mid-January, the phase of the seasonal cycle used by the synthesiser.
const MID_WINTER_HOUR: f64 = 198.0 * 24.0;

const DEMAND_PREFIX: &str = "demand:";
const INFLOW_PREFIX: &str = "inflow:";

/// One weather year of hourly inputs.
///
/// `demand` is keyed by bus id (MW), `cf` by profile id (capacity factors in
/// [0, 1]) and `inflow` by profile id (MW).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherYearSeries {
    pub label: String,
    pub demand: IndexMap<String, Vec<f64>>,
    #[serde(default)]
    pub cf: IndexMap<String, Vec<f64>>,
    #[serde(default)]
    pub inflow: IndexMap<String, Vec<f64>>,
}

impl WeatherYearSeries {
    pub fn hours(&self) -> usize {
        self.demand
            .values()
            .chain(self.cf.values())
            .chain(self.inflow.values())
            .map(Vec::len)
            .next()
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let hours = self.hours();
        let all = self
            .demand
            .iter()
            .map(|(k, v)| (k, v, "demand"))
            .chain(self.cf.iter().map(|(k, v)| (k, v, "cf")))
            .chain(self.inflow.iter().map(|(k, v)| (k, v, "inflow")));
        for (id, values, kind) in all {
            if values.len() != hours {
                return Err(Error::TimeSeries(format!(
                    "{}: {kind} series '{id}' has {} hours, expected {hours}",
                    self.label,
                    values.len()
                )));
            }
            let ok = match kind {
                "cf" => values.iter().all(|v| (0.0..=1.0).contains(v)),
                _ => values.iter().all(|v| *v >= 0.0 && v.is_finite()),
            };
            if !ok {
                let bound = if kind == "cf" { "[0, 1]" } else { ">= 0" };
                return Err(Error::TimeSeries(format!(
                    "{}: {kind} series '{id}' has values outside {bound}",
                    self.label
                )));
            }
        }
        Ok(())
    }

    /// System-wide demand per hour.
    pub fn total_demand(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.hours()];
        for d in self.demand.values() {
            for (o, v) in out.iter_mut().zip(d) {
                *o += v;
            }
        }
        out
    }

    /// The first calendar year of the label, e.g. 1964 for "1964/65".
    pub fn start_year(&self) -> Option<i32> {
        self.label.split('/').next()?.trim().parse().ok()
    }
}

/// A timestamped multi-column series as read from CSV, before splitting.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawSeries {
    pub timestamps: Vec<NaiveDateTime>,
    pub columns: IndexMap<String, Vec<f64>>,
}

/// A year boundary that could not be turned into a full weather year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitWarning {
    pub label: String,
    pub hours: usize,
    pub message: String,
}

pub fn weather_year_label(start_year: i32) -> String {
    format!("{}/{:02}", start_year, (start_year + 1).rem_euclid(100))
}

fn is_leap_day(ts: &NaiveDateTime) -> bool {
    ts.month() == 2 && ts.day() == 29
}

fn weather_year_of(ts: &NaiveDateTime) -> i32 {
    if ts.month() >= 7 {
        ts.year()
    } else {
        ts.year() - 1
    }
}

/// Splits a contiguous hourly series into July-to-June weather years.
///
/// Feb 29 rows are dropped. Incomplete first/last years are dropped and
/// reported in the returned warnings.
pub fn split_weather_years(raw: &RawSeries) -> Result<(Vec<WeatherYearSeries>, Vec<SplitWarning>)> {
    for (name, col) in &raw.columns {
        if col.len() != raw.timestamps.len() {
            return Err(Error::TimeSeries(format!(
                "column '{name}' has {} rows, expected {}",
                col.len(),
                raw.timestamps.len()
            )));
        }
    }
    for pair in raw.timestamps.windows(2) {
        let expected = pair[0] + Duration::hours(1);
        // Inputs that already omit Feb 29 are contiguous too.
        let mut after_leap = expected;
        while is_leap_day(&after_leap) {
            after_leap += Duration::hours(1);
        }
        if pair[1] != expected && pair[1] != after_leap {
            if pair[1] > expected {
                return Err(Error::MissingHour(expected));
            }
            return Err(Error::TimeSeries(format!(
                "timestamps not strictly hourly increasing at {}",
                pair[1]
            )));
        }
    }
    if let Some(first) = raw.timestamps.first() {
        if first.minute() != 0 || first.second() != 0 {
            return Err(Error::TimeSeries(format!("timestamp {first} is not on the hour")));
        }
    }

    // Group row indices by weather year, skipping leap days.
    let mut groups: Vec<(i32, Vec<usize>)> = Vec::new();
    for (i, ts) in raw.timestamps.iter().enumerate() {
        if is_leap_day(ts) {
            continue;
        }
        let y = weather_year_of(ts);
        match groups.last_mut() {
            Some((gy, rows)) if *gy == y => rows.push(i),
            _ => groups.push((y, vec![i])),
        }
    }

    let mut years = Vec::new();
    let mut warnings = Vec::new();
    for (y, rows) in groups {
        let label = weather_year_label(y);
        let first = raw.timestamps[rows[0]];
        let starts_on_july_first =
            first.date() == NaiveDate::from_ymd_opt(y, 7, 1).unwrap() && first.hour() == 0;
        if rows.len() != HOURS_PER_YEAR || !starts_on_july_first {
            log::warn!("dropping partial weather year {label} ({} hours)", rows.len());
            warnings.push(SplitWarning {
                label,
                hours: rows.len(),
                message: "partial weather year dropped".into(),
            });
            continue;
        }
        let mut series = WeatherYearSeries {
            label,
            demand: IndexMap::new(),
            cf: IndexMap::new(),
            inflow: IndexMap::new(),
        };
        for (name, col) in &raw.columns {
            let values: Vec<f64> = rows.iter().map(|&r| col[r]).collect();
            if let Some(bus) = name.strip_prefix(DEMAND_PREFIX) {
                series.demand.insert(bus.to_string(), values);
            } else if let Some(id) = name.strip_prefix(INFLOW_PREFIX) {
                series.inflow.insert(id.to_string(), values);
            } else {
                series.cf.insert(name.clone(), values);
            }
        }
        years.push(series);
    }
    Ok((years, warnings))
}

/// Timestamps of a weather year starting July 1 of `start_year`, leap day
/// removed.
pub fn weather_year_timestamps(start_year: i32) -> Vec<NaiveDateTime> {
    let start = NaiveDate::from_ymd_opt(start_year, 7, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    (0..)
        .map(|h| start + Duration::hours(h))
        .filter(|ts| !is_leap_day(ts))
        .take(HOURS_PER_YEAR)
        .collect()
}

fn parse_timestamp(s: &str) -> Result<NaiveDateTime> {
    const FORMATS: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ];
    let s = s.trim().trim_end_matches('Z');
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .ok_or_else(|| Error::TimeSeries(format!("unparseable timestamp '{s}'")))
}

/// Reads a CSV whose first column is an ISO-8601 timestamp and whose other
/// columns are named series. Columns named `demand:<bus>` hold demand,
/// `inflow:<id>` hold inflows, everything else is a capacity factor.
pub fn read_csv(path: &Path) -> Result<RawSeries> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv_from(file)
}

pub fn read_csv_from<R: std::io::Read>(reader: R) -> Result<RawSeries> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::TimeSeries("empty CSV header".into()));
    }
    let mut raw = RawSeries::default();
    for name in headers.iter().skip(1) {
        raw.columns.insert(name.to_string(), Vec::new());
    }
    for record in rdr.records() {
        let record = record?;
        raw.timestamps.push(parse_timestamp(&record[0])?);
        for (col, field) in raw.columns.values_mut().zip(record.iter().skip(1)) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::TimeSeries(format!("non-numeric value '{field}'")))?;
            col.push(v);
        }
    }
    Ok(raw)
}

/// Writes consecutive weather years as one timestamped CSV that
/// [`read_csv`] + [`split_weather_years`] read back.
pub fn write_csv<W: std::io::Write>(years: &[WeatherYearSeries], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let Some(first) = years.first() else {
        return Ok(());
    };
    let mut header = vec!["timestamp".to_string()];
    header.extend(first.demand.keys().map(|b| format!("{DEMAND_PREFIX}{b}")));
    header.extend(first.cf.keys().cloned());
    header.extend(first.inflow.keys().map(|b| format!("{INFLOW_PREFIX}{b}")));
    w.write_record(&header)?;
    for year in years {
        let start = year.start_year().ok_or_else(|| {
            Error::TimeSeries(format!("label '{}' does not start with a year", year.label))
        })?;
        if year.hours() != HOURS_PER_YEAR {
            return Err(Error::TimeSeries(format!(
                "{}: only full {HOURS_PER_YEAR}-hour years can be written with timestamps",
                year.label
            )));
        }
        let cols: Vec<&Vec<f64>> = year
            .demand
            .values()
            .chain(year.cf.values())
            .chain(year.inflow.values())
            .collect();
        for (h, ts) in weather_year_timestamps(start).iter().enumerate() {
            let mut row = Vec::with_capacity(cols.len() + 1);
            row.push(ts.format("%Y-%m-%dT%H:%M:%S").to_string());
            row.extend(cols.iter().map(|c| c[h].to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// A period of suppressed renewables and/or raised demand injected into
/// synthetic weather.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroughtWindow {
    pub start: usize,
    pub length: usize,
    pub cf_multiplier: f64,
    #[serde(default = "one")]
    pub demand_multiplier: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthResource {
    Wind,
    Solar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthProfile {
    pub id: String,
    pub kind: SynthResource,
    /// Annual mean for wind; noon peak for solar.
    pub level: f64,
    /// Relative seasonal swing. Wind peaks in winter, solar in summer.
    #[serde(default)]
    pub seasonal_amplitude: f64,
    /// Standard deviation of the additive AR(1) noise.
    #[serde(default)]
    pub noise: f64,
    /// Lag-one autocorrelation of the noise.
    #[serde(default = "default_autocorrelation")]
    pub autocorrelation: f64,
}

fn default_autocorrelation() -> f64 {
    0.97
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthDemand {
    pub bus: String,
    /// Mean MW.
    pub mean: f64,
    /// Relative winter peak.
    #[serde(default)]
    pub seasonal_amplitude: f64,
    /// Relative evening peak.
    #[serde(default)]
    pub daily_amplitude: f64,
    /// Relative noise standard deviation.
    #[serde(default)]
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthInflow {
    pub id: String,
    /// Mean MW.
    pub mean: f64,
    #[serde(default)]
    pub seasonal_amplitude: f64,
}

/// Parameters for [`synth_weather`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub start_year: i32,
    pub seed: u64,
    #[serde(default = "default_hours")]
    pub hours: usize,
    pub demand: Vec<SynthDemand>,
    #[serde(default)]
    pub profiles: Vec<SynthProfile>,
    #[serde(default)]
    pub inflows: Vec<SynthInflow>,
    #[serde(default)]
    pub droughts: Vec<DroughtWindow>,
}

fn default_hours() -> usize {
    HOURS_PER_YEAR
}

fn check_droughts(windows: &[DroughtWindow], hours: usize) -> Result<()> {
    let mut sorted: Vec<&DroughtWindow> = windows.iter().collect();
    sorted.sort_by_key(|w| w.start);
    for w in &sorted {
        if w.length == 0 || w.start + w.length > hours {
            return Err(Error::InvalidArgument(format!(
                "drought window at hour {} (length {}) outside [0, {hours})",
                w.start, w.length
            )));
        }
        if !(w.cf_multiplier >= 0.0 && w.demand_multiplier >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "drought window at hour {} has a negative multiplier",
                w.start
            )));
        }
    }
    for pair in sorted.windows(2) {
        if pair[0].start + pair[0].length > pair[1].start {
            return Err(Error::InvalidArgument(format!(
                "drought windows at hours {} and {} overlap",
                pair[0].start, pair[1].start
            )));
        }
    }
    Ok(())
}

/// Cosine seasonal cycle: +1 in mid-winter, -1 in mid-summer.
fn season(hour: usize) -> f64 {
    (2.0 * PI * (hour as f64 - MID_WINTER_HOUR) / HOURS_PER_YEAR as f64).cos()
}

/// Zero outside 06:00-18:00, half-sine in between.
fn diurnal(hour: usize) -> f64 {
    let h = (hour % HOURS_PER_DAY) as f64;
    if (6.0..=18.0).contains(&h) {
        (PI * (h - 6.0) / 12.0).sin().max(0.0)
    } else {
        0.0
    }
}

/// Deterministic synthetic weather year. Wind and solar capacity factors are
/// clipped seasonal sinusoids with AR(1) noise; solar is zero at night.
/// Inside each drought window capacity factors and demand are scaled by the
/// window's multipliers.
pub fn synth_weather(spec: &SynthSpec) -> Result<WeatherYearSeries> {
    let hours = spec.hours;
    check_droughts(&spec.droughts, hours)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut normal = move || -> f64 { StandardNormal.sample(&mut rng) };

    let mut cf = IndexMap::new();
    for p in &spec.profiles {
        let rho = p.autocorrelation.clamp(0.0, 0.999_999);
        let innovation = p.noise * (1.0 - rho * rho).sqrt();
        let mut eps = 0.0;
        let values: Vec<f64> = (0..hours)
            .map(|t| {
                if p.noise > 0.0 {
                    eps = rho * eps + innovation * normal();
                }
                let v = match p.kind {
                    SynthResource::Wind => p.level * (1.0 + p.seasonal_amplitude * season(t)) + eps,
                    SynthResource::Solar => {
                        (p.level * (1.0 - p.seasonal_amplitude * season(t)) + eps) * diurnal(t)
                    }
                };
                v.clamp(0.0, 1.0)
            })
            .collect();
        cf.insert(p.id.clone(), values);
    }

    let mut demand = IndexMap::new();
    for d in &spec.demand {
        let values: Vec<f64> = (0..hours)
            .map(|t| {
                let daily = (2.0 * PI * ((t % HOURS_PER_DAY) as f64 - 18.0) / 24.0).cos();
                let noise = if d.noise > 0.0 { d.noise * normal() } else { 0.0 };
                (d.mean * (1.0 + d.seasonal_amplitude * season(t) + d.daily_amplitude * daily + noise))
                    .max(0.0)
            })
            .collect();
        demand.insert(d.bus.clone(), values);
    }

    let mut inflow = IndexMap::new();
    for i in &spec.inflows {
        let values: Vec<f64> = (0..hours)
            .map(|t| (i.mean * (1.0 - i.seasonal_amplitude * season(t))).max(0.0))
            .collect();
        inflow.insert(i.id.clone(), values);
    }

    for w in &spec.droughts {
        let span = w.start..w.start + w.length;
        for values in cf.values_mut() {
            for v in &mut values[span.clone()] {
                *v = (*v * w.cf_multiplier).clamp(0.0, 1.0);
            }
        }
        for values in demand.values_mut() {
            for v in &mut values[span.clone()] {
                *v *= w.demand_multiplier;
            }
        }
    }

    Ok(WeatherYearSeries {
        label: weather_year_label(spec.start_year),
        demand,
        cf,
        inflow,
    })
}

/// Mean capacity factor of one profile over the year.
pub fn annual_cf(series: &WeatherYearSeries, profile: &str) -> Result<f64> {
    let values = series
        .cf
        .get(profile)
        .ok_or_else(|| Error::UnknownProfile(profile.to_string()))?;
    Ok(mean(values))
}

/// Mean system-wide demand over November to February, in MW.
pub fn winter_load(series: &WeatherYearSeries) -> f64 {
    let total = series.total_demand();
    let end = WINTER_HOURS.end.min(total.len());
    let start = WINTER_HOURS.start.min(end);
    mean(&total[start..end])
}

/// Hourly system availability of a resource: the mean over the distinct
/// profiles used by generators of that resource. `None` if no generator uses
/// the resource.
pub fn resource_cf(
    series: &WeatherYearSeries,
    network: &Network,
    resource: Resource,
) -> Result<Option<Vec<f64>>> {
    let mut ids: Vec<&str> = Vec::new();
    for g in &network.generators {
        if g.resource() == Some(resource) {
            if let Some(p) = &g.cf_profile {
                if !ids.contains(&p.as_str()) {
                    ids.push(p);
                }
            }
        }
    }
    if ids.is_empty() {
        return Ok(None);
    }
    let mut out = vec![0.0; series.hours()];
    for id in &ids {
        let values = series
            .cf
            .get(*id)
            .ok_or_else(|| Error::UnknownProfile(id.to_string()))?;
        for (o, v) in out.iter_mut().zip(values) {
            *o += v / ids.len() as f64;
        }
    }
    Ok(Some(out))
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Calendar-day means; a trailing partial day is averaged over its hours.
pub fn daily_means(values: &[f64]) -> Vec<f64> {
    values.chunks(HOURS_PER_DAY).map(mean).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hourly_raw(start: NaiveDateTime, hours: usize) -> RawSeries {
        let timestamps: Vec<_> = (0..hours as i64).map(|h| start + Duration::hours(h)).collect();
        let n = timestamps.len();
        let mut columns = IndexMap::new();
        columns.insert("demand:A".to_string(), (0..n).map(|i| i as f64).collect());
        columns.insert("wind".to_string(), vec![0.5; n]);
        RawSeries {
            timestamps,
            columns,
        }
    }

    fn ymd(y: i32, m: u32, d: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(0, 0, 0).unwrap()
    }

    #[test]
    fn winter_window_is_november_to_february() {
        let ts = weather_year_timestamps(1965);
        assert_eq!(ts[WINTER_HOURS.start].date(), NaiveDate::from_ymd_opt(1965, 11, 1).unwrap());
        assert_eq!(
            ts[WINTER_HOURS.end - 1].date(),
            NaiveDate::from_ymd_opt(1966, 2, 28).unwrap()
        );
        assert_eq!(ts[WINTER_HOURS.end].date(), NaiveDate::from_ymd_opt(1966, 3, 1).unwrap());
    }

    #[test]
    fn two_full_years_are_labelled() {
        let raw = hourly_raw(ymd(1964, 7, 1), 2 * 365 * 24);
        let (years, warnings) = split_weather_years(&raw).unwrap();
        assert!(warnings.is_empty());
        let labels: Vec<_> = years.iter().map(|y| y.label.as_str()).collect();
        assert_eq!(labels, ["1964/65", "1965/66"]);
        assert!(years.iter().all(|y| y.hours() == HOURS_PER_YEAR));
    }

    #[test]
    fn leap_day_is_dropped() {
        // 1963-07-01 .. 1964-06-30 contains 1964-02-29.
        let raw = hourly_raw(ymd(1963, 7, 1), 366 * 24);
        let (years, _) = split_weather_years(&raw).unwrap();
        assert_eq!(years.len(), 1);
        assert_eq!(years[0].hours(), HOURS_PER_YEAR);
        // Row values are the raw row index: the day after Feb 28 must jump by 48 h.
        let d = &years[0].demand["A"];
        let feb28_last = (243 * 24 - 1) as usize;
        assert_eq!(d[feb28_last + 1] - d[feb28_last], 25.0);
    }

    #[test]
    fn csv_round_trip_across_leap_year() {
        let mut years = Vec::new();
        for start in [1991, 1992] {
            let mut y = hourly_raw(ymd(start, 7, 1), 1);
            y.timestamps = weather_year_timestamps(start);
            let n = y.timestamps.len();
            y.columns.insert("demand:A".into(), (0..n).map(|i| i as f64).collect());
            y.columns.insert("wind".into(), vec![0.5; n]);
            let (mut split, _) = split_weather_years(&y).unwrap();
            years.append(&mut split);
        }
        let mut buf = Vec::new();
        write_csv(&years, &mut buf).unwrap();
        let raw = read_csv_from(buf.as_slice()).unwrap();
        let (back, warnings) = split_weather_years(&raw).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(back, years);
    }

    #[test]
    fn missing_hour_is_reported() {
        let mut raw = hourly_raw(ymd(1964, 7, 1), 100);
        raw.timestamps.remove(50);
        for c in raw.columns.values_mut() {
            c.remove(50);
        }
        match split_weather_years(&raw) {
            Err(Error::MissingHour(ts)) => assert_eq!(ts, ymd(1964, 7, 1) + Duration::hours(50)),
            other => panic!("expected MissingHour, got {other:?}"),
        }
    }

    #[test]
    fn partial_years_are_dropped_with_warning() {
        let raw = hourly_raw(ymd(1964, 1, 1), 365 * 24 + 182 * 24 + 100);
        let (years, warnings) = split_weather_years(&raw).unwrap();
        assert_eq!(years.len(), 1);
        assert_eq!(years[0].label, "1964/65");
        assert_eq!(warnings.len(), 2);
    }

    #[test]
    fn csv_round_trip_preserves_values() {
        let spec = demo_spec(vec![]);
        let year = synth_weather(&spec).unwrap();
        let mut buf = Vec::new();
        write_csv(std::slice::from_ref(&year), &mut buf).unwrap();
        let raw = read_csv_from(buf.as_slice()).unwrap();
        let (years, _) = split_weather_years(&raw).unwrap();
        assert_eq!(years, vec![year]);
    }

    fn demo_spec(droughts: Vec<DroughtWindow>) -> SynthSpec {
        SynthSpec {
            start_year: 2001,
            seed: 7,
            hours: HOURS_PER_YEAR,
            demand: vec![SynthDemand {
                bus: "A".into(),
                mean: 100.0,
                seasonal_amplitude: 0.2,
                daily_amplitude: 0.1,
                noise: 0.0,
            }],
            profiles: vec![
                SynthProfile {
                    id: "wind".into(),
                    kind: SynthResource::Wind,
                    level: 0.35,
                    seasonal_amplitude: 0.3,
                    noise: 0.0,
                    autocorrelation: 0.97,
                },
                SynthProfile {
                    id: "solar".into(),
                    kind: SynthResource::Solar,
                    level: 0.7,
                    seasonal_amplitude: 0.6,
                    noise: 0.0,
                    autocorrelation: 0.9,
                },
            ],
            inflows: vec![],
            droughts,
        }
    }

    #[test]
    fn smooth_synth_has_seasonal_solar() {
        let y = synth_weather(&demo_spec(vec![])).unwrap();
        let solar = &y.cf["solar"];
        let winter = mean(&solar[WINTER_HOURS]);
        let summer = mean(&solar[0..(62 * 24)]);
        assert!(winter < summer);
        for (t, v) in solar.iter().enumerate() {
            if t % 24 < 6 || t % 24 > 18 {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn drought_window_scales_cf_and_demand() {
        let base = synth_weather(&demo_spec(vec![])).unwrap();
        let w = DroughtWindow {
            start: 4000,
            length: 72,
            cf_multiplier: 0.1,
            demand_multiplier: 1.3,
        };
        let dry = synth_weather(&demo_spec(vec![w])).unwrap();
        for t in 0..HOURS_PER_YEAR {
            let inside = (4000..4072).contains(&t);
            let (k_cf, k_d) = if inside { (0.1, 1.3) } else { (1.0, 1.0) };
            assert!((dry.cf["wind"][t] - k_cf * base.cf["wind"][t]).abs() < 1e-15);
            assert!((dry.demand["A"][t] - k_d * base.demand["A"][t]).abs() < 1e-12);
        }
    }

    #[test]
    fn synth_is_deterministic() {
        let mut spec = demo_spec(vec![]);
        spec.profiles[0].noise = 0.1;
        spec.demand[0].noise = 0.02;
        assert_eq!(synth_weather(&spec).unwrap(), synth_weather(&spec).unwrap());
        let mut other = spec.clone();
        other.seed = 8;
        assert_ne!(synth_weather(&spec).unwrap(), synth_weather(&other).unwrap());
    }

    #[test]
    fn overlapping_droughts_are_rejected() {
        let w = |start| DroughtWindow {
            start,
            length: 100,
            cf_multiplier: 0.1,
            demand_multiplier: 1.0,
        };
        assert!(synth_weather(&demo_spec(vec![w(1000), w(1050)])).is_err());
        assert!(synth_weather(&demo_spec(vec![w(1000), w(1100)])).is_ok());
        assert!(synth_weather(&demo_spec(vec![w(8700)])).is_err());
    }

    fn constant_year(demand: Vec<f64>, wind: Vec<f64>) -> WeatherYearSeries {
        let mut d = IndexMap::new();
        d.insert("A".to_string(), demand);
        let mut cf = IndexMap::new();
        cf.insert("wind".to_string(), wind);
        WeatherYearSeries {
            label: "2000/01".into(),
            demand: d,
            cf,
            inflow: IndexMap::new(),
        }
    }

    #[test]
    fn annual_cf_examples() {
        let y = constant_year(vec![1.0; HOURS_PER_YEAR], vec![0.3; HOURS_PER_YEAR]);
        assert!((annual_cf(&y, "wind").unwrap() - 0.3).abs() < 1e-12);
        let half: Vec<f64> = (0..HOURS_PER_YEAR).map(|t| (t % 2) as f64).collect();
        let y = constant_year(vec![1.0; HOURS_PER_YEAR], half);
        assert_eq!(annual_cf(&y, "wind").unwrap(), 0.5);
        assert!(matches!(annual_cf(&y, "solar"), Err(Error::UnknownProfile(_))));
    }

    #[test]
    fn winter_load_examples() {
        let y = constant_year(vec![10_000.0; HOURS_PER_YEAR], vec![0.3; HOURS_PER_YEAR]);
        assert_eq!(winter_load(&y), 10_000.0);
        let d: Vec<f64> = (0..HOURS_PER_YEAR)
            .map(|t| if WINTER_HOURS.contains(&t) { 12_000.0 } else { 8_000.0 })
            .collect();
        let y = constant_year(d, vec![0.3; HOURS_PER_YEAR]);
        assert_eq!(winter_load(&y), 12_000.0);
    }

    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn split_preserves_retained_values(start_day in 0i64..400, extra in 0usize..2000) {
            let start = ymd(1970, 1, 1) + Duration::days(start_day);
            let raw = hourly_raw(start, 2 * HOURS_PER_YEAR + extra);
            let (years, _) = split_weather_years(&raw).unwrap();
            // Every retained row carries its original row index; re-concatenated
            // they must be a strictly increasing subsequence of the input and
            // skip exactly the leap-day rows.
            for y in &years {
                let d = &y.demand["A"];
                prop_assert_eq!(d.len(), HOURS_PER_YEAR);
                for pair in d.windows(2) {
                    let gap = pair[1] - pair[0];
                    prop_assert!(gap == 1.0 || gap == 25.0);
                    let ts = raw.timestamps[pair[1] as usize];
                    if gap == 25.0 {
                        prop_assert_eq!((ts.month(), ts.day()), (3, 1));
                    }
                }
            }
        }
    }
}
