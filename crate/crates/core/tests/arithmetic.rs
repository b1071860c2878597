//! Library arithmetic against independent recomputations: CSV slice means,
//! matrix aggregates, sorted-sample distances, rank tables and clustering
//! scores on planted structure.

use adequacy_core::cluster::{kmeans_restarts, normalize, select_k, silhouette};
use adequacy_core::events::{EventFeatures, SdeEvent, Span};
use adequacy_core::resilience::{
    aggregate_rows_cols, build_report, similarity_matrix, write_report_csv, Cell, Metric, ReportInputs,
    SimilarityQuantity, ValidationMatrix, YearMetrics,
};
use adequacy_core::timeseries::{annual_cf, synth_weather, winter_load, write_csv, SynthDemand, SynthProfile, SynthResource, SynthSpec};
use chrono::{Datelike, NaiveDateTime};
use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn seven() -> SynthSpec {
    SynthSpec {
        start_year: 1995,
        seed: 7,
        hours: 8760,
        demand: vec![
            SynthDemand {
                bus: "north".into(),
                mean: 4_000.0,
                seasonal_amplitude: 0.2,
                daily_amplitude: 0.1,
                noise: 0.03,
            },
            SynthDemand {
                bus: "south".into(),
                mean: 2_500.0,
                seasonal_amplitude: 0.1,
                daily_amplitude: 0.15,
                noise: 0.03,
            },
        ],
        profiles: vec![
            SynthProfile {
                id: "wind-north".into(),
                kind: SynthResource::Wind,
                level: 0.33,
                seasonal_amplitude: 0.3,
                noise: 0.15,
                autocorrelation: 0.97,
            },
            SynthProfile {
                id: "solar-south".into(),
                kind: SynthResource::Solar,
                level: 0.8,
                seasonal_amplitude: 0.4,
                noise: 0.1,
                autocorrelation: 0.9,
            },
        ],
        inflows: vec![],
        droughts: vec![],
    }
}

fn emitted_csv() -> (Vec<String>, Vec<csv::StringRecord>) {
    let year = synth_weather(&seven()).unwrap();
    let mut bytes = Vec::new();
    write_csv(&[year], &mut bytes).unwrap();
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    let headers = rdr.headers().unwrap().iter().map(String::from).collect();
    (headers, rdr.records().map(Result::unwrap).collect())
}

#[test]
fn annual_cf_equals_streaming_mean_of_the_csv() {
    let year = synth_weather(&seven()).unwrap();
    let (headers, records) = emitted_csv();
    for id in ["wind-north", "solar-south"] {
        let col = headers.iter().position(|h| h == id).unwrap();
        let (mut mean, mut n) = (0.0, 0.0);
        for r in &records {
            n += 1.0;
            mean += (r[col].parse::<f64>().unwrap() - mean) / n;
        }
        let got = annual_cf(&year, id).unwrap();
        assert!((got - mean).abs() <= 1e-12, "{id}: {got} vs {mean}");
    }
}

#[test]
fn winter_load_equals_november_to_february_slice_of_the_csv() {
    let year = synth_weather(&seven()).unwrap();
    let (headers, records) = emitted_csv();
    let demand_cols: Vec<usize> = (0..headers.len()).filter(|&i| headers[i].starts_with("demand:")).collect();
    let mut total = 0.0;
    let mut hours = 0;
    for r in &records {
        let ts = NaiveDateTime::parse_from_str(&r[0], "%Y-%m-%dT%H:%M:%S").unwrap();
        if matches!(ts.month(), 11 | 12 | 1 | 2) {
            total += demand_cols.iter().map(|&c| r[c].parse::<f64>().unwrap()).sum::<f64>();
            hours += 1;
        }
    }
    assert_eq!(hours, (30 + 31 + 31 + 28) * 24);
    let expected = total / hours as f64;
    assert!((winter_load(&year) - expected).abs() <= 1e-9 * expected);
}

fn matrix(eens: [[f64; 3]; 3], peaks: [[f64; 3]; 3]) -> ValidationMatrix {
    ValidationMatrix {
        years: vec!["1990/91".into(), "1991/92".into(), "1992/93".into()],
        cells: (0..3)
            .map(|i| {
                (0..3)
                    .map(|j| Cell::Ok {
                        eens: eens[i][j],
                        max_unserved_gw: peaks[i][j],
                    })
                    .collect()
            })
            .collect(),
    }
}

#[test]
fn three_by_three_aggregates_by_hand() {
    let eens = [[0.0, 0.02, 0.04], [0.01, 0.0, 0.03], [0.0, 0.05, 0.0]];
    let peaks = [[0.0, 2.0, 6.0], [1.0, 0.0, 3.0], [0.0, 8.0, 0.0]];
    let a = aggregate_rows_cols(&matrix(eens, peaks)).unwrap();
    // Row means exclude the diagonal: design 0 in years 1 and 2.
    let hand = [
        // prevents_deficits, causes_deficits, prevents_peaks, causes_peaks
        [0.03, 0.005, 4.0, 0.5],
        [0.02, 0.035, 2.0, 5.0],
        [0.025, 0.035, 4.0, 4.5],
    ];
    for (y, h) in hand.iter().enumerate() {
        let got = [a[y].prevents_deficits, a[y].causes_deficits, a[y].prevents_peaks, a[y].causes_peaks];
        for (g, e) in got.iter().zip(h) {
            assert!((g - e).abs() <= 1e-15, "year {y}: {got:?} vs {h:?}");
        }
    }
    assert_eq!(a[2].causes_peaks_max, 6.0);
    assert_eq!(a[1].prevents_peaks_max, 3.0);
}

#[test]
fn similarity_of_four_years_matches_sorted_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let samples: Vec<Vec<f64>> = (0..4)
        .map(|y| (0..365).map(|_| 10.0 + y as f64 + rng.random_range(-3.0..3.0)).collect())
        .collect();
    let years: Vec<String> = (0..4).map(|y| format!("{}/{:02}", 1980 + y, 81 + y)).collect();
    let sim = similarity_matrix(SimilarityQuantity::NetLoad, years, &samples).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let mut a = samples[i].clone();
            let mut b = samples[j].clone();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            let expected = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / 365.0;
            assert!((sim.values[i][j] - expected).abs() <= 1e-12, "({i}, {j})");
        }
    }
}

fn event(id: usize, year: &str, start: usize) -> SdeEvent {
    SdeEvent {
        id,
        weather_year: year.into(),
        raw: Span::new(start, start + 400),
        span: Span::new(start + 50, start + 200),
        peak_hour: start + 100,
        cost: 1e9,
        features: EventFeatures::default(),
        composites: vec![],
    }
}

#[test]
fn ranks_match_a_stable_sort_of_the_exported_metrics() {
    let labels = ["1980/81", "1981/82", "1982/83", "1983/84", "1984/85"];
    let metrics: Vec<YearMetrics> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| YearMetrics {
            weather_year: l.to_string(),
            peak_window_cost: [3e9, 7e9, 3e9, 1e9, 5e9][i],
            max_net_load_gw: [40.0, 44.5, 39.0, 44.5, 41.0][i],
            system_cost: [9e9, 8e9, 9.5e9, 8e9, 8.7e9][i],
            solar_cf: Some([0.12, 0.11, 0.125, 0.11, 0.13][i]),
            wind_cf: Some([0.31, 0.28, 0.33, 0.30, 0.28][i]),
            winter_load_gw: [30.0, 31.0, 29.0, 33.0, 31.0][i],
        })
        .collect();
    let eens = [0.0, 0.02, 0.01, 0.0, 0.03];
    let aggregates: Vec<_> = (0..5)
        .map(|i| {
            let mut a = adequacy_core::resilience::YearAggregates::default();
            a.prevents_deficits = eens[i];
            a.causes_deficits = eens[4 - i];
            a.prevents_peaks = eens[i] * 100.0;
            a.causes_peaks = 1.0;
            a
        })
        .collect();
    let events = vec![event(0, "1981/82", 3000), event(1, "1983/84", 4000)];
    let report = build_report(&ReportInputs {
        years: &metrics,
        aggregates: Some(&aggregates),
        events: &events,
        event_types: &IndexMap::new(),
    })
    .unwrap();
    let mut bytes = Vec::new();
    write_report_csv(&mut bytes, &report).unwrap();

    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    let headers: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 5);
    for (m, metric) in Metric::ALL.iter().enumerate() {
        let col = headers.iter().position(|h| h == metric.name()).unwrap();
        let values: Vec<f64> = rows.iter().map(|r| r[col].parse().unwrap()).collect();
        let mut order: Vec<usize> = (0..values.len()).collect();
        // Stable: ties keep their row order.
        order.sort_by(|&a, &b| {
            let o = values[a].partial_cmp(&values[b]).unwrap();
            if metric.higher_is_severe() {
                o.reverse()
            } else {
                o
            }
        });
        let mut expected = vec![0; values.len()];
        let mut rank = 0;
        for (pos, &i) in order.iter().enumerate() {
            if pos == 0 || values[i] != values[order[pos - 1]] {
                rank += 1;
            }
            expected[i] = rank;
        }
        let got: Vec<usize> = report.rows.iter().map(|r| r.ranks[m].unwrap()).collect();
        assert_eq!(got, expected, "{}", metric.name());
    }
}

fn blob(rng: &mut ChaCha8Rng, center: [f64; 2], spread: f64, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| center.iter().map(|c| c + rng.random_range(-spread..spread)).collect())
        .collect()
}

#[test]
fn random_labels_on_one_blob_score_near_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows = blob(&mut rng, [0.0, 0.0], 1.0, 200);
    let matrix = normalize(&rows).unwrap();
    let labels: Vec<usize> = (0..200).map(|_| rng.random_range(0..3)).collect();
    let s = silhouette(&matrix, &labels).unwrap();
    assert!(s <= 0.1, "{s}");
}

#[test]
fn two_blobs_select_two_clusters() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut rows = blob(&mut rng, [0.0, 0.0], 0.5, 25);
    rows.extend(blob(&mut rng, [6.0, 4.0], 0.5, 25));
    let chosen = select_k(&normalize(&rows).unwrap(), 2..=6, 1).unwrap();
    assert_eq!(chosen.model.k, 2);
}

#[test]
fn calinski_harabasz_prefers_planted_k_over_n_minus_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut rows = Vec::new();
    for c in [[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]] {
        rows.extend(blob(&mut rng, c, 0.4, 8));
    }
    let structured = normalize(&rows).unwrap();
    let noise = normalize(&blob(&mut rng, [0.0, 0.0], 1.0, 24)).unwrap();
    let n = rows.len();
    let ch = |m, k| kmeans_restarts(m, k, 3, 10).unwrap().calinski_harabasz.unwrap().value;
    let planted = ch(&structured, 3);
    let crowded = ch(&noise, n - 1);
    assert!(crowded < planted, "{crowded} vs {planted}");
}
