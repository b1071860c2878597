//! Solver-neutral linear program in sparse triplet form and the narrow
//! contract a backend has to satisfy: load, solve, return primal values,
//! row and column duals and a status.

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// `min c'x  s.t.  row_lower <= A x <= row_upper,  col_lower <= x <= col_upper`
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpProblem {
    pub col_cost: Vec<f64>,
    pub col_lower: Vec<f64>,
    pub col_upper: Vec<f64>,
    pub row_lower: Vec<f64>,
    pub row_upper: Vec<f64>,
    /// (row, col, value); duplicates are summed.
    pub triplets: Vec<(usize, usize, f64)>,
}

impl LpProblem {
    pub fn num_cols(&self) -> usize {
        self.col_cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.row_lower.len()
    }

    pub fn add_col(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.col_cost.push(cost);
        self.col_lower.push(lower);
        self.col_upper.push(upper);
        self.col_cost.len() - 1
    }

    /// Adds `n` columns with identical bounds and cost; returns the first index.
    pub fn add_cols(&mut self, n: usize, cost: f64, lower: f64, upper: f64) -> usize {
        let first = self.num_cols();
        self.col_cost.resize(first + n, cost);
        self.col_lower.resize(first + n, lower);
        self.col_upper.resize(first + n, upper);
        first
    }

    pub fn add_row(&mut self, lower: f64, upper: f64, coeffs: &[(usize, f64)]) -> usize {
        let row = self.row_lower.len();
        self.row_lower.push(lower);
        self.row_upper.push(upper);
        self.triplets
            .extend(coeffs.iter().filter(|(_, v)| *v != 0.0).map(|&(c, v)| (row, c, v)));
        row
    }

    /// Compressed sparse column form: (start, index, value), with
    /// `start.len() == num_cols + 1`. Duplicate entries are merged.
    pub fn to_csc(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let mut entries = self.triplets.clone();
        entries.sort_by_key(|&(r, c, _)| (c, r));
        let mut start = vec![0usize; self.num_cols() + 1];
        let mut index = Vec::with_capacity(entries.len());
        let mut value: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *value.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            start[c + 1] += 1;
            index.push(r);
            value.push(v);
        }
        for c in 0..self.num_cols() {
            start[c + 1] += start[c];
        }
        (start, index, value)
    }

    /// Row activities `A x`.
    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_rows()];
        for &(r, c, v) in &self.triplets {
            out[r] += v * x[c];
        }
        out
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.col_cost.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Largest violation of any row or column bound at `x`.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        let activity = self.row_activity(x);
        let rows = activity
            .iter()
            .zip(self.row_lower.iter().zip(&self.row_upper))
            .map(|(a, (lo, hi))| (lo - a).max(a - hi).max(0.0));
        let cols = x
            .iter()
            .zip(self.col_lower.iter().zip(&self.col_upper))
            .map(|(v, (lo, hi))| (lo - v).max(v - hi).max(0.0));
        rows.chain(cols).fold(0.0, f64::max)
    }

    /// Lagrangian dual objective for duals in the convention
    /// `c = A' y + z`: a positive multiplier is attached to the lower bound,
    /// a negative one to the upper bound.
    pub fn dual_objective(&self, row_dual: &[f64], col_dual: &[f64]) -> f64 {
        fn term(mult: f64, lo: f64, hi: f64) -> f64 {
            let bound = if mult > 0.0 { lo } else { hi };
            if mult == 0.0 || !bound.is_finite() {
                0.0
            } else {
                mult * bound
            }
        }
        let rows: f64 = row_dual
            .iter()
            .zip(self.row_lower.iter().zip(&self.row_upper))
            .map(|(&y, (&lo, &hi))| term(y, lo, hi))
            .sum();
        let cols: f64 = col_dual
            .iter()
            .zip(self.col_lower.iter().zip(&self.col_upper))
            .map(|(&z, (&lo, &hi))| term(z, lo, hi))
            .sum();
        rows + cols
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl LpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
            LpStatus::NumericalFailure => "numerical-failure",
        }
    }
}

/// Raw solver output. Duals follow `c = A' y + z` for a minimisation, so the
/// dual of a binding `>=` row is non-negative and of a binding `<=` row
/// non-positive.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub col_value: Vec<f64>,
    pub col_dual: Vec<f64>,
    pub row_dual: Vec<f64>,
    pub iterations: u64,
}

pub trait LpSolver: Send + Sync {
    fn name(&self) -> &str;

    /// Whether [`LpSolver::solve`] fills `row_dual` and `col_dual`.
    fn provides_duals(&self) -> bool;

    fn solve(&self, problem: &LpProblem) -> Result<RawSolution>;
}
