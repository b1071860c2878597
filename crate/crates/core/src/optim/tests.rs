use indexmap::IndexMap;

use super::*;
use crate::error::Error;
use crate::model::*;
use crate::timeseries::WeatherYearSeries;

fn bus(id: &str, country: &str) -> Bus {
    Bus {
        id: id.into(),
        country: country.into(),
    }
}

fn gen(id: &str, bus: &str, mc: f64, cap: f64) -> Generator {
    Generator {
        id: id.into(),
        bus: bus.into(),
        carrier: "gas".into(),
        category: GeneratorCategory::ExistingDispatch,
        marginal_cost: mc,
        capital_cost: 0.0,
        emission_factor: 0.0,
        extendable: false,
        p_nom_fixed: cap,
        p_nom_max: None,
        cf_profile: None,
    }
}

fn extendable(id: &str, bus: &str, capital: f64, mc: f64) -> Generator {
    Generator {
        category: GeneratorCategory::Renewable,
        carrier: "solar".into(),
        capital_cost: capital,
        extendable: true,
        p_nom_fixed: 0.0,
        ..gen(id, bus, mc, 0.0)
    }
}

fn one_bus(generators: Vec<Generator>) -> Network {
    Network {
        buses: vec![bus("A", "AA")],
        generators,
        storage_systems: vec![],
        lines: vec![],
        scenario: Scenario::default(),
    }
}

fn flat(buses: &[&str], mw: f64, hours: usize) -> WeatherYearSeries {
    let demand: IndexMap<String, Vec<f64>> =
        buses.iter().map(|b| (b.to_string(), vec![mw; hours])).collect();
    WeatherYearSeries {
        label: "2000/01".into(),
        demand,
        cf: IndexMap::new(),
        inflow: IndexMap::new(),
    }
}

fn run(model: &LpModel) -> Solution {
    let s = solve(model, &HighsSolver::default(), DEFAULT_TOL).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    s
}

#[test]
fn single_marginal_technology_sets_price() {
    let n = one_bus(vec![gen("g", "A", 50.0, 1e6)]);
    let y = flat(&["A"], 10_000.0, 168);
    let s = run(&build_design(&n, &y).unwrap());
    assert!(s.dispatch["g"].iter().all(|p| (p - 10_000.0).abs() < 1e-6));
    assert!(s.duals_balance["A"].iter().all(|l| (l - 50.0).abs() < 1e-8));
}

#[test]
fn merit_order_sets_price() {
    let n = one_bus(vec![gen("cheap", "A", 10.0, 5_000.0), gen("dear", "A", 100.0, 1e6)]);
    let y = flat(&["A"], 8_000.0, 168);
    let s = run(&build_design(&n, &y).unwrap());
    assert!(s.dispatch["cheap"].iter().all(|p| (p - 5_000.0).abs() < 1e-6));
    assert!(s.dispatch["dear"].iter().all(|p| (p - 3_000.0).abs() < 1e-6));
    assert!(s.duals_balance["A"].iter().all(|l| (l - 100.0).abs() < 1e-8));
}

#[test]
fn zero_profit_of_extendable_generator() {
    let n = one_bus(vec![extendable("pv", "A", 100.0, 0.0)]);
    let y = flat(&["A"], 1_000.0, 8760);
    let model = build_design(&n, &y).unwrap();
    assert_eq!(model.num_balance_rows(), 8760);
    assert_eq!(model.num_capacity_vars(), 1);
    let s = run(&model);
    assert!((s.capacities.generators["pv"] - 1_000.0).abs() < 1e-6);
    let price_sum: f64 = s.duals_balance["A"].iter().sum();
    assert!((price_sum - 100.0).abs() < 1e-6);
    let ledger = revenue_ledger(&s, &n, None);
    assert!((ledger[0].revenue - 100.0 * 1_000.0).abs() < 1e-3);
    assert!((ledger[0].capital_cost - 100.0 * 1_000.0).abs() < 1e-6);
    assert!(ledger[0].interior);
}

#[test]
fn zero_dispatch_asset_earns_nothing() {
    let n = one_bus(vec![gen("cheap", "A", 10.0, 1e6), gen("idle", "A", 90.0, 1e6)]);
    let s = run(&build_design(&n, &flat(&["A"], 100.0, 24)).unwrap());
    let ledger = revenue_ledger(&s, &n, None);
    let idle = ledger.iter().find(|e| e.asset == "idle").unwrap();
    assert_eq!(idle.revenue, 0.0);
    assert_eq!(idle.operating_cost, 0.0);
}

fn three_bus() -> Network {
    Network {
        buses: vec![bus("A", "X"), bus("B", "X"), bus("C", "Y")],
        generators: vec![gen("ga", "A", 10.0, 1e5), gen("gc", "C", 30.0, 1e5)],
        storage_systems: vec![],
        lines: vec![
            TransmissionLine {
                id: "AB".into(),
                bus0: "A".into(),
                bus1: "B".into(),
                p_nom_existing: 1_000.0,
                length: 100.0,
                extendable: true,
            },
            TransmissionLine {
                id: "BC".into(),
                bus0: "B".into(),
                bus1: "C".into(),
                p_nom_existing: 1_000.0,
                length: 100.0,
                extendable: true,
            },
        ],
        scenario: Scenario::default(),
    }
}

#[test]
fn transmission_volume_limit() {
    let n = three_bus();
    let y = flat(&["A", "B", "C"], 100.0, 24);
    let m = build_design(&n, &y).unwrap();
    // 2 x 100 km x 1 GW existing = 200 GW km; 25 % more admissible.
    assert!((m.transmission_volume_limit().unwrap() - 250_000.0).abs() < 1e-9);
    let mut n0 = n.clone();
    n0.scenario.transmission_expansion = 0.0;
    let m0 = build_design(&n0, &y).unwrap();
    assert_eq!(m0.transmission_volume_limit(), None);
    let s = run(&m0);
    assert_eq!(s.capacities.lines["AB"], 1_000.0);
}

#[test]
fn equity_rows_per_country() {
    let mut n = three_bus();
    n.scenario.equity_share = Some(0.9);
    let m = build_design(&n, &flat(&["A", "B", "C"], 100.0, 24)).unwrap();
    assert_eq!(m.num_equity_rows(), 2);
}

#[test]
fn equity_without_domestic_generation_is_a_build_error() {
    let mut n = three_bus();
    n.generators.retain(|g| g.id != "gc");
    n.scenario.equity_share = Some(0.7);
    let err = build_design(&n, &flat(&["A", "B", "C"], 100.0, 24)).unwrap_err();
    assert!(matches!(err, Error::Build(_)));
}

#[test]
fn validation_uses_shedding_cost() {
    let n = one_bus(vec![extendable("pv", "A", 100.0, 0.0)]);
    let y = flat(&["A"], 1_000.0, 24);
    let mut fixed = Capacities::default();
    fixed.generators.insert("pv".into(), 0.0);
    let m = build_validation(&n, &fixed, &y).unwrap();
    assert_eq!(m.shedding_cost(0, 0), Some(100_000.0));
    assert_eq!(m.num_capacity_vars(), 0);
    let s = run(&m);
    for (shed, d) in s.unserved["A"].iter().zip(&y.demand["A"]) {
        assert!((shed - d).abs() < 1e-9);
    }
    assert!((s.objective - 24.0 * 1_000.0 * 1e5).abs() < 1e-3);
}

#[test]
fn validation_requires_every_extendable_capacity() {
    let n = one_bus(vec![extendable("pv", "A", 100.0, 0.0)]);
    let err = build_validation(&n, &Capacities::default(), &flat(&["A"], 1.0, 4)).unwrap_err();
    assert!(matches!(err, Error::MissingInput(_)));
}

#[test]
fn design_fed_back_is_served() {
    let mut n = one_bus(vec![extendable("pv", "A", 100.0, 1.0)]);
    n.storage_systems.push(StorageSystem {
        id: "bat".into(),
        bus: "A".into(),
        kind: StorageKind::Battery,
        charger_cost: 5.0,
        discharger_cost: 5.0,
        energy_cost: 2.0,
        eta_charge: 0.9,
        eta_discharge: 0.9,
        extendable: true,
        fixed_charger: 0.0,
        fixed_discharger: 0.0,
        fixed_energy: 0.0,
        inflow_profile: None,
    });
    let mut y = flat(&["A"], 1_000.0, 48);
    n.generators[0].cf_profile = Some("sun".into());
    y.cf.insert(
        "sun".into(),
        (0..48).map(|t| if t % 24 < 12 { 1.0 } else { 0.0 }).collect(),
    );
    let design = run(&build_design(&n, &y).unwrap());
    assert!(design.capacities.storage["bat"].energy > 0.0);
    let check = run(&build_validation(&n, &design.capacities, &y).unwrap());
    assert!(check.total_unserved() <= 1e-6);
}

#[test]
fn storage_soc_is_cyclic_and_bounded() {
    let mut n = one_bus(vec![
        gen("base", "A", 10.0, 800.0),
        gen("peak", "A", 200.0, 1e5),
    ]);
    n.storage_systems.push(StorageSystem {
        id: "bat".into(),
        bus: "A".into(),
        kind: StorageKind::Battery,
        charger_cost: 0.0,
        discharger_cost: 0.0,
        energy_cost: 0.0,
        eta_charge: 0.9,
        eta_discharge: 0.8,
        extendable: false,
        fixed_charger: 200.0,
        fixed_discharger: 300.0,
        fixed_energy: 1_000.0,
        inflow_profile: None,
    });
    let mut y = flat(&["A"], 0.0, 48);
    y.demand["A"] = (0..48).map(|t| if t % 24 >= 18 { 1_000.0 } else { 500.0 }).collect();
    let s = run(&build_design(&n, &y).unwrap());
    let op = &s.storage["bat"];
    let tol = 1e-6 * 1_000.0;
    for t in 0..48 {
        let prev = op.soc[(t + 47) % 48];
        let expect = prev + 0.9 * op.charge[t] - op.discharge[t] / 0.8;
        assert!((op.soc[t] - expect).abs() <= tol);
        assert!(op.soc[t] >= -tol && op.soc[t] <= 1_000.0 + tol);
        assert!(op.charge[t] <= 200.0 + tol && op.discharge[t] <= 300.0 + tol);
    }
    assert!(op.discharge.iter().sum::<f64>() > 0.0);
}

#[test]
fn reservoir_inflow_can_spill() {
    let mut n = one_bus(vec![gen("g", "A", 50.0, 1e5)]);
    n.storage_systems.push(StorageSystem {
        id: "hydro".into(),
        bus: "A".into(),
        kind: StorageKind::Reservoir,
        charger_cost: 0.0,
        discharger_cost: 0.0,
        energy_cost: 0.0,
        eta_charge: 1.0,
        eta_discharge: 0.9,
        extendable: false,
        fixed_charger: 0.0,
        fixed_discharger: 10.0,
        fixed_energy: 100.0,
        inflow_profile: Some("river".into()),
    });
    let mut y = flat(&["A"], 100.0, 24);
    y.inflow.insert("river".into(), vec![50.0; 24]);
    let s = run(&build_design(&n, &y).unwrap());
    let op = &s.storage["hydro"];
    assert!(op.discharge.iter().all(|d| (d - 10.0).abs() < 1e-6));
    assert!(op.spill.iter().sum::<f64>() > 0.0);
}

#[test]
fn co2_cap_limits_emitters() {
    let mut dirty = gen("gas", "A", 20.0, 1e5);
    dirty.emission_factor = 0.5;
    dirty.category = GeneratorCategory::ResilienceBackup;
    let clean = gen("clean", "A", 80.0, 1e5);
    let mut n = one_bus(vec![dirty, clean]);
    n.scenario.co2_baseline = 1_000.0;
    n.scenario.co2_reduction = 0.99;
    let y = flat(&["A"], 10.0, 24);
    let s = run(&build_design(&n, &y).unwrap());
    // 10 tCO2 admissible -> 20 MWh of gas.
    let gas: f64 = s.dispatch["gas"].iter().sum();
    assert!((gas - 20.0).abs() < 1e-6);
    // Gas earns its fuel cost plus the carbon rent.
    assert!((s.dual_co2.unwrap() - 120.0).abs() < 1e-6);
    n.scenario.co2_reduction = 1.0;
    let s = run(&build_design(&n, &y).unwrap());
    assert!(s.dispatch["gas"].iter().all(|p| p.abs() < 1e-9));
}

struct NoDuals;

impl LpSolver for NoDuals {
    fn name(&self) -> &str {
        "no-duals"
    }
    fn provides_duals(&self) -> bool {
        false
    }
    fn solve(&self, _: &LpProblem) -> crate::Result<RawSolution> {
        unreachable!()
    }
}

#[test]
fn solver_without_duals_is_rejected() {
    let n = one_bus(vec![gen("g", "A", 50.0, 1e6)]);
    let m = build_design(&n, &flat(&["A"], 1.0, 2)).unwrap();
    assert!(matches!(solve(&m, &NoDuals, DEFAULT_TOL), Err(Error::SolverConfig(_))));
}

#[test]
fn infeasible_status_is_carried() {
    let n = one_bus(vec![gen("g", "A", 50.0, 1.0)]);
    let m = build_design(&n, &flat(&["A"], 10.0, 2)).unwrap();
    let s = solve(&m, &HighsSolver::default(), DEFAULT_TOL).unwrap();
    assert_eq!(s.status, LpStatus::Infeasible);
    assert!(s.dispatch.is_empty());
}

#[test]
fn snapshot_prices_stay_per_mwh() {
    let mut n = one_bus(vec![gen("g", "A", 50.0, 1e6)]);
    n.scenario.snapshot_hours = 4;
    let s = run(&build_design(&n, &flat(&["A"], 10_000.0, 168)).unwrap());
    assert_eq!(s.hours, 168);
    assert_eq!(s.dispatch["g"].len(), 168);
    assert!(s.duals_balance["A"].iter().all(|l| (l - 50.0).abs() < 1e-8));
    assert!((s.objective - 50.0 * 10_000.0 * 168.0).abs() < 1e-6 * s.objective);
}

#[test]
fn snapshot_hours_must_divide_the_year() {
    let mut n = one_bus(vec![gen("g", "A", 50.0, 1e6)]);
    n.scenario.snapshot_hours = 5;
    assert!(matches!(build_design(&n, &flat(&["A"], 1.0, 24)), Err(Error::Build(_))));
}

#[test]
fn snapshots_reproduce_hourly_on_block_constant_input() {
    // Solar and demand constant within 3-hour blocks: aggregation is exact.
    let mut n = one_bus(vec![extendable("pv", "A", 30.0, 0.5), gen("peak", "A", 300.0, 1e5)]);
    n.generators[0].cf_profile = Some("pv".into());
    n.storage_systems.push(StorageSystem {
        id: "bat".into(),
        bus: "A".into(),
        kind: StorageKind::Battery,
        charger_cost: 2.0,
        discharger_cost: 2.0,
        energy_cost: 1.0,
        eta_charge: 0.9,
        eta_discharge: 0.9,
        extendable: true,
        fixed_charger: 0.0,
        fixed_discharger: 0.0,
        fixed_energy: 0.0,
        inflow_profile: None,
    });
    let hours = 24 * 14;
    let mut y = flat(&["A"], 0.0, hours);
    y.demand["A"] = (0..hours).map(|t| 800.0 + 200.0 * ((t / 3) % 8) as f64 / 7.0).collect();
    y.cf.insert(
        "pv".into(),
        (0..hours).map(|t| [0.0, 0.0, 0.3, 0.8, 0.9, 0.5, 0.1, 0.0][(t / 3) % 8]).collect(),
    );
    let hourly = run(&build_design(&n, &y).unwrap());
    n.scenario.snapshot_hours = 3;
    let coarse = run(&build_design(&n, &y).unwrap());
    assert!((hourly.objective - coarse.objective).abs() <= 1e-6 * hourly.objective);
    let ledger = revenue_ledger(&coarse, &n, None);
    for e in ledger.iter().filter(|e| e.interior) {
        assert!(e.profit().abs() <= 1e-4 * e.total_cost(), "{}: {}", e.asset, e.profit());
    }
    let served: f64 = coarse.dispatch.values().flatten().sum::<f64>()
        + coarse.storage["bat"].discharge.iter().sum::<f64>()
        - coarse.storage["bat"].charge.iter().sum::<f64>();
    assert!((served - coarse.total_demand()).abs() <= 1e-6 * coarse.total_demand());
}
