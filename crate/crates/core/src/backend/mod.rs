//! LP, MILP and QP solvers plus MPS export and an external-solver adapter.

pub mod lp;
pub mod milp;
pub mod mps;
pub mod qp;

use serde::{Deserialize, Serialize};

pub use lp::{solve_lp, LpInstance, LpRow, LpWorkspace};
pub use milp::{solve_milp, MilpBudget, MilpInstance};
pub use mps::{export_mps, external_solve, parse_solution, ExternalError, MpsExport};
pub use qp::{solve_qp, Ball, QpInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: Status,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Best proven lower bound (equals `objective` when optimal).
    pub bound: f64,
    pub iterations: usize,
    pub nodes: usize,
    /// Row shadow prices `∂objective/∂(row activity)` for LPs.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
}

impl SolveResult {
    pub(crate) fn failed(status: Status, n: usize) -> Self {
        SolveResult {
            status,
            x: vec![f64::NAN; n],
            objective: f64::NAN,
            bound: match status {
                Status::Infeasible => f64::INFINITY,
                _ => f64::NEG_INFINITY,
            },
            iterations: 0,
            nodes: 0,
            duals: Vec::new(),
            reduced_costs: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}
