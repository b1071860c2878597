//! Resource-adequacy toolkit: co-optimised capacity expansion and dispatch
//! as a linear program, nodal shadow prices, detection and clustering of
//! system-defining events, and weather-year resilience metrics.

pub mod cluster;
pub mod error;
pub mod events;
pub mod model;
pub mod optim;
pub mod resilience;
pub mod timeseries;

pub use error::{Error, Result};
pub use model::{
    apply_scenario, validate_network, Bus, FlexCategory, Generator, GeneratorCategory, Network,
    Scenario, StorageKind, StorageSystem, TransmissionLine, Violation,
};
pub use optim::{
    build_design, build_validation, revenue_ledger, solve, Capacities, HighsSolver, LpSolver,
    LpStatus, Mode, Solution,
};
pub use timeseries::{WeatherYearSeries, HOURS_PER_YEAR};
