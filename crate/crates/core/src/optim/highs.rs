//! HiGHS backend over the C API.

use std::ffi::{c_void, CString};

use highs_sys::*;

use super::lp::{LpProblem, LpSolver, LpStatus, RawSolution};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HighsMethod {
    #[default]
    Choose,
    Simplex,
    Ipm,
}

/// HiGHS with deterministic single-threaded defaults.
#[derive(Debug, Clone)]
pub struct HighsSolver {
    pub method: HighsMethod,
    pub threads: u32,
    pub time_limit: Option<f64>,
    pub verbose: bool,
}

impl Default for HighsSolver {
    fn default() -> Self {
        HighsSolver {
            method: HighsMethod::Choose,
            threads: 1,
            time_limit: None,
            verbose: false,
        }
    }
}

struct Instance(*mut c_void);

impl Drop for Instance {
    fn drop(&mut self) {
        unsafe { Highs_destroy(self.0) }
    }
}

impl Instance {
    fn new() -> Self {
        Instance(unsafe { Highs_create() })
    }

    fn set_bool(&self, name: &str, value: bool) -> Result<()> {
        let key = CString::new(name).unwrap();
        let status = unsafe { Highs_setBoolOptionValue(self.0, key.as_ptr(), value as HighsInt) };
        check(status, name)
    }

    fn set_int(&self, name: &str, value: i64) -> Result<()> {
        let key = CString::new(name).unwrap();
        let status = unsafe { Highs_setIntOptionValue(self.0, key.as_ptr(), value as HighsInt) };
        check(status, name)
    }

    fn set_double(&self, name: &str, value: f64) -> Result<()> {
        let key = CString::new(name).unwrap();
        let status = unsafe { Highs_setDoubleOptionValue(self.0, key.as_ptr(), value) };
        check(status, name)
    }

    fn set_string(&self, name: &str, value: &str) -> Result<()> {
        let key = CString::new(name).unwrap();
        let val = CString::new(value).unwrap();
        let status = unsafe { Highs_setStringOptionValue(self.0, key.as_ptr(), val.as_ptr()) };
        check(status, name)
    }
}

fn check(status: HighsInt, what: &str) -> Result<()> {
    if status == kHighsStatusError {
        Err(Error::SolverConfig(format!("HiGHS rejected '{what}'")))
    } else {
        Ok(())
    }
}

fn to_int(n: usize) -> Result<HighsInt> {
    HighsInt::try_from(n).map_err(|_| Error::Solver(format!("problem dimension {n} exceeds HiGHS index range")))
}

impl LpSolver for HighsSolver {
    fn name(&self) -> &str {
        "highs"
    }

    fn provides_duals(&self) -> bool {
        true
    }

    fn solve(&self, problem: &LpProblem) -> Result<RawSolution> {
        let num_col = problem.num_cols();
        let num_row = problem.num_rows();
        let (start, index, value) = problem.to_csc();
        let start: Vec<HighsInt> = start[..num_col]
            .iter()
            .map(|&s| to_int(s))
            .collect::<Result<_>>()?;
        let index: Vec<HighsInt> = index.iter().map(|&i| to_int(i)).collect::<Result<_>>()?;

        let highs = Instance::new();
        highs.set_bool("output_flag", self.verbose)?;
        highs.set_int("threads", self.threads.max(1) as i64)?;
        highs.set_string(
            "solver",
            match self.method {
                HighsMethod::Choose => "choose",
                HighsMethod::Simplex => "simplex",
                HighsMethod::Ipm => "ipm",
            },
        )?;
        if let Some(limit) = self.time_limit {
            highs.set_double("time_limit", limit)?;
        }

        let status = unsafe {
            Highs_passLp(
                highs.0,
                to_int(num_col)?,
                to_int(num_row)?,
                to_int(value.len())?,
                kHighsMatrixFormatColwise,
                kHighsObjSenseMinimize,
                0.0,
                problem.col_cost.as_ptr(),
                problem.col_lower.as_ptr(),
                problem.col_upper.as_ptr(),
                problem.row_lower.as_ptr(),
                problem.row_upper.as_ptr(),
                start.as_ptr(),
                index.as_ptr(),
                value.as_ptr(),
            )
        };
        if status == kHighsStatusError {
            return Err(Error::Solver("HiGHS rejected the model".into()));
        }

        let run = unsafe { Highs_run(highs.0) };
        let model_status = unsafe { Highs_getModelStatus(highs.0) };
        let status = match model_status {
            s if s == kHighsModelStatusOptimal => LpStatus::Optimal,
            s if s == kHighsModelStatusModelEmpty => LpStatus::Optimal,
            s if s == kHighsModelStatusInfeasible || s == kHighsModelStatusUnboundedOrInfeasible => {
                LpStatus::Infeasible
            }
            s if s == kHighsModelStatusUnbounded => LpStatus::Unbounded,
            _ => LpStatus::NumericalFailure,
        };
        if run == kHighsStatusError && status == LpStatus::Optimal {
            return Err(Error::Solver("HiGHS reported an error for an optimal model".into()));
        }

        let mut col_value = vec![0.0; num_col];
        let mut col_dual = vec![0.0; num_col];
        let mut row_value = vec![0.0; num_row];
        let mut row_dual = vec![0.0; num_row];
        let mut objective = 0.0;
        let mut iterations = 0;
        if status == LpStatus::Optimal {
            unsafe {
                Highs_getSolution(
                    highs.0,
                    col_value.as_mut_ptr(),
                    col_dual.as_mut_ptr(),
                    row_value.as_mut_ptr(),
                    row_dual.as_mut_ptr(),
                );
                objective = Highs_getObjectiveValue(highs.0);
                iterations = Highs_getSimplexIterationCount(highs.0).max(0) as u64;
            }
        }
        Ok(RawSolution {
            status,
            objective,
            col_value,
            col_dual,
            row_dual,
            iterations,
        })
    }
}
