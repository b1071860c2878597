use adequacy_core::cluster::{kmeans_restarts, normalize};
use adequacy_core::events::{detect_sdes, SdeConfig};
use adequacy_core::optim::DEFAULT_TOL;
use adequacy_core::resilience::wasserstein_1d;
use adequacy_core::{
    build_design, solve, Bus, Generator, GeneratorCategory, HighsSolver, Network, Scenario, WeatherYearSeries,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn cost_series(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..8760)
        .map(|t| {
            let spike = if (4000..4200).contains(&t) { 50.0 } else { 1.0 };
            spike * rng.random_range(0.5..1.5)
        })
        .collect()
}

fn bench_detect(c: &mut Criterion) {
    let cost = cost_series(1);
    let config = SdeConfig {
        threshold: 2000.0,
        window_hours: 336,
        trim_quantile: 0.99,
    };
    c.bench_function("detect_sdes_8760h", |b| b.iter(|| detect_sdes(black_box(&cost), &config).unwrap()));
}

fn bench_kmeans(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rows: Vec<Vec<f64>> = (0..40)
        .map(|i| (0..7).map(|j| (i % 4 * 10 + j) as f64 + rng.random_range(-0.5..0.5)).collect())
        .collect();
    let m = normalize(&rows).unwrap();
    c.bench_function("kmeans_40x7_k4_10_restarts", |b| {
        b.iter(|| kmeans_restarts(black_box(&m), 4, 7, 10).unwrap())
    });
}

fn bench_wasserstein(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a: Vec<f64> = (0..365).map(|_| rng.random_range(0.0..100.0)).collect();
    let b: Vec<f64> = (0..365).map(|_| rng.random_range(0.0..100.0)).collect();
    let short: Vec<f64> = b[..200].to_vec();
    let mut group = c.benchmark_group("wasserstein_1d");
    group.bench_with_input(BenchmarkId::new("equal", 365), &b, |bench, b| {
        bench.iter(|| wasserstein_1d(black_box(&a), b).unwrap())
    });
    group.bench_with_input(BenchmarkId::new("unequal", 200), &short, |bench, b| {
        bench.iter(|| wasserstein_1d(black_box(&a), b).unwrap())
    });
    group.finish();
}

fn one_bus_network() -> Network {
    let gen = |id: &str, mc: f64, cap: f64| Generator {
        id: id.into(),
        bus: "A".into(),
        carrier: "gas".into(),
        category: GeneratorCategory::ExistingDispatch,
        marginal_cost: mc,
        capital_cost: 0.0,
        emission_factor: 0.0,
        extendable: false,
        p_nom_fixed: cap,
        p_nom_max: None,
        cf_profile: None,
    };
    Network {
        buses: vec![Bus {
            id: "A".into(),
            country: "AA".into(),
        }],
        generators: vec![
            gen("base", 10.0, 600.0),
            gen("peak", 90.0, 1000.0),
            Generator {
                carrier: "wind".into(),
                category: GeneratorCategory::Renewable,
                capital_cost: 1e5,
                extendable: true,
                cf_profile: Some("wind".into()),
                ..gen("wind", 0.5, 0.0)
            },
        ],
        storage_systems: vec![],
        lines: vec![],
        scenario: Scenario::default(),
    }
}

fn bench_lp(c: &mut Criterion) {
    let net = one_bus_network();
    let hours = 24 * 28;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let series = WeatherYearSeries {
        label: "2000/01".into(),
        demand: [("A".to_string(), (0..hours).map(|_| rng.random_range(700.0..1000.0)).collect())].into(),
        cf: [("wind".to_string(), (0..hours).map(|_| rng.random_range(0.0..1.0)).collect())].into(),
        inflow: IndexMap::new(),
    };
    let solver = HighsSolver::default();
    c.bench_function("design_lp_1bus_672h", |b| {
        b.iter(|| {
            let model = build_design(black_box(&net), &series).unwrap();
            solve(&model, &solver, DEFAULT_TOL).unwrap()
        })
    });
}

criterion_group!(benches, bench_detect, bench_kmeans, bench_wasserstein, bench_lp);
criterion_main!(benches);
