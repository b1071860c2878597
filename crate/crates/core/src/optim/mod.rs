//! Capacity-expansion and validation LPs, solving, and dual-based accounting.

mod build;
pub mod export;
pub mod highs;
pub mod lp;
mod solution;

pub use build::{build_design, build_validation, Capacities, LpModel, Mode, StorageCapacity};
pub use highs::{HighsMethod, HighsSolver};
pub use lp::{LpProblem, LpSolver, LpStatus, RawSolution};
pub use solution::{
    revenue_ledger, solve, AssetKind, LedgerEntry, Solution, SolverStats, StorageOperation,
    DEFAULT_TOL,
};

#[cfg(test)]
mod tests;
