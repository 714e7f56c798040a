//! Projected-gradient repair of surrogate solutions against the true
//! constraints.
//!
//! Each iterate linearizes the nonlinear constraints by forward-mode AD and
//! solves a QP for the step `d`. Feasible iterates take a descent step
//! inside the ball `‖d/R‖² ≤ α e^{−rt/T}`; infeasible ones take a projection
//! step with the ball replaced by the penalty `β‖d/R‖²`. Linear rows of the
//! problem and the box hold exactly in every subproblem and integer
//! variables stay at their starting values.

mod dual;
mod grad;

use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{solve_qp, Ball, LpInstance, QpInstance, Status};
use crate::problem::{EvalError, NonlinearConstraint, Sense, StandardFormProblem};

pub use dual::Dual;
pub use grad::{constraint_gradient, expr_gradient, objective_gradient};

/// Value assigned to a constraint that cannot be evaluated.
const DOMAIN_PENALTY: f64 = 1e10;
const LINEAR_TOL: f64 = 1e-7;
const RESTORE_ITERS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgdParams {
    /// Infeasibility penalty.
    pub gamma: f64,
    /// Projection distance penalty.
    pub beta: f64,
    /// Step size.
    pub alpha: f64,
    /// Step decay rate.
    pub r: f64,
    /// Maximum iterations.
    pub max_iters: usize,
    /// Absolute objective tolerance.
    pub epsilon: f64,
    /// Tightness tolerance.
    pub phi: f64,
}

impl Default for PgdParams {
    fn default() -> Self {
        PgdParams {
            gamma: 1e6,
            beta: 1e4,
            alpha: 1e-3,
            r: 2.0,
            max_iters: 100,
            epsilon: 1e-4,
            phi: 1e-8,
        }
    }
}

impl PgdParams {
    pub fn validate(&self) -> Result<(), String> {
        let reals = [
            ("gamma", self.gamma),
            ("beta", self.beta),
            ("alpha", self.alpha),
            ("r", self.r),
            ("epsilon", self.epsilon),
            ("phi", self.phi),
        ];
        for (name, v) in reals {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if self.max_iters == 0 {
            return Err("max_iters must be positive".into());
        }
        Ok(())
    }

    /// Bound on `‖d/R‖²` at iteration `t`.
    pub fn step_bound(&self, t: usize) -> f64 {
        self.alpha * (-self.r * t as f64 / self.max_iters as f64).exp()
    }
}

/// How a linearized constraint enters the step QP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relax {
    /// `∇g·d + g ≥ 0`
    None,
    /// `∇g·d + g + λ ≥ 0`
    Lambda,
    /// `∇h·d + h + μ ≥ 0`
    MuLower,
    /// `∇h·d + h ≤ μ`
    MuUpper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedRow {
    pub constraint: usize,
    pub grad: Vec<f64>,
    pub value: f64,
    pub relax: Relax,
}

/// Rows for one constraint given its value and gradient at the iterate.
pub fn linearize_value(constraint: usize, sense: Sense, value: f64, grad: &[f64]) -> Vec<LinearizedRow> {
    let row = |relax| LinearizedRow {
        constraint,
        grad: grad.to_vec(),
        value,
        relax,
    };
    match sense {
        Sense::Geq if value >= 0.0 => vec![row(Relax::None)],
        Sense::Geq => vec![row(Relax::Lambda)],
        Sense::Eq => vec![row(Relax::MuLower), row(Relax::MuUpper)],
    }
}

/// Linearizes `c` at `x`.
pub fn linearize(
    c: &NonlinearConstraint,
    constraint: usize,
    x: &[f64],
    lower: &[f64],
    upper: &[f64],
    ranges: &[f64],
) -> Result<Vec<LinearizedRow>, EvalError> {
    let (v, g, _) = constraint_gradient(c, x, lower, upper, ranges)?;
    Ok(linearize_value(constraint, c.sense, v, &g))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Start,
    Descent,
    Projection,
    Restoration,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Start => "start",
            Mode::Descent => "descent",
            Mode::Projection => "projection",
            Mode::Restoration => "restoration",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// PGD step count; restoration rows repeat the step they follow.
    pub iteration: usize,
    pub mode: Mode,
    pub objective: f64,
    pub max_violation: f64,
    /// `‖d/R‖` of the step that produced this iterate.
    pub step_norm: f64,
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from("iteration,mode,objective,max_violation,step_norm\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.iteration, r.mode, r.objective, r.max_violation, r.step_norm
        ));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepairStatus {
    Converged,
    IterationLimit,
    /// A step QP failed; the best iterate so far is returned.
    StepFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintCheck {
    pub name: String,
    /// `None` when the constraint could not be evaluated.
    pub value: Option<f64>,
    pub violation: f64,
}

/// True-constraint check of a point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointCheck {
    pub objective: f64,
    pub nonlinear: Vec<ConstraintCheck>,
    pub linear_violation: f64,
    pub bound_violation: f64,
    pub max_violation: f64,
    /// Within `phi` on nonlinear constraints and `1e-7` (relative) on
    /// linear rows and bounds.
    pub feasible: bool,
}

pub fn check_point(p: &StandardFormProblem, x: &[f64], phi: f64) -> PointCheck {
    let mut nonlinear = Vec::new();
    let mut nl_ok = true;
    for c in &p.nonlinear {
        let value = c.value(x).ok();
        let violation = match (value, c.sense) {
            (None, _) => DOMAIN_PENALTY,
            (Some(v), Sense::Geq) => (-v).max(0.0),
            (Some(v), Sense::Eq) => v.abs(),
        };
        nl_ok &= violation <= phi;
        nonlinear.push(ConstraintCheck {
            name: c.name.clone(),
            value,
            violation,
        });
    }
    let mut lin_ok = true;
    let mut linear_violation: f64 = 0.0;
    for r in &p.inequalities {
        let v = (r.rhs - r.activity(x)).max(0.0);
        lin_ok &= v <= LINEAR_TOL * (1.0 + r.rhs.abs());
        linear_violation = linear_violation.max(v);
    }
    for r in &p.equalities {
        let v = (r.activity(x) - r.rhs).abs();
        lin_ok &= v <= LINEAR_TOL * (1.0 + r.rhs.abs());
        linear_violation = linear_violation.max(v);
    }
    let mut bound_violation: f64 = 0.0;
    for (v, xi) in p.variables.iter().zip(x) {
        let b = (v.lower - xi).max(xi - v.upper).max(0.0);
        lin_ok &= b <= LINEAR_TOL * (1.0 + xi.abs());
        bound_violation = bound_violation.max(b);
    }
    let max_violation = nonlinear
        .iter()
        .map(|c| c.violation)
        .fold(linear_violation.max(bound_violation), f64::max);
    PointCheck {
        objective: p.objective.value(x).unwrap_or(f64::INFINITY),
        nonlinear,
        linear_violation,
        bound_violation,
        max_violation,
        feasible: nl_ok && lin_ok,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepairResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub feasible: bool,
    pub max_violation: f64,
    pub iterations: usize,
    pub status: RepairStatus,
    /// Some gradient came from finite differences.
    pub approximate_gradients: bool,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Error)]
pub enum RepairError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("start point has {got} coordinates, problem has {want}")]
    Dimension { got: usize, want: usize },
}

/// Values and gradients at an iterate.
#[derive(Debug, Clone)]
struct State {
    x: Vec<f64>,
    f: f64,
    grad_f: Vec<f64>,
    values: Vec<f64>,
    grads: Vec<Vec<f64>>,
    approximate: bool,
    check: PointCheck,
}

struct Repairer<'a> {
    p: &'a StandardFormProblem,
    params: PgdParams,
    lower: Vec<f64>,
    upper: Vec<f64>,
    ranges: Vec<f64>,
    integral: Vec<bool>,
}

impl Repairer<'_> {
    fn evaluate(&self, x: Vec<f64>) -> State {
        let n = x.len();
        let (f, grad_f) = objective_gradient(&self.p.objective, &x).unwrap_or((f64::INFINITY, vec![0.0; n]));
        let mut values = Vec::new();
        let mut grads = Vec::new();
        let mut approximate = false;
        for c in &self.p.nonlinear {
            let (v, g) = match self.gradient_or_retry(c, &x) {
                Some((v, g, a)) => {
                    approximate |= a;
                    (v, g)
                }
                None => {
                    let v = match c.sense {
                        Sense::Geq => -DOMAIN_PENALTY,
                        Sense::Eq => DOMAIN_PENALTY,
                    };
                    (v, vec![0.0; n])
                }
            };
            values.push(v);
            grads.push(g);
        }
        let check = check_point(self.p, &x, self.params.phi);
        State {
            x,
            f,
            grad_f,
            values,
            grads,
            approximate,
            check,
        }
    }

    /// Gradient at `x`, or once more after nudging `x` toward the box
    /// centre by `1e-9·range`.
    fn gradient_or_retry(&self, c: &NonlinearConstraint, x: &[f64]) -> Option<(f64, Vec<f64>, bool)> {
        match constraint_gradient(c, x, &self.lower, &self.upper, &self.ranges) {
            Ok(r) => Some(r),
            Err(_) => {
                let nudged: Vec<f64> = x
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| {
                        if self.integral[k] {
                            return v;
                        }
                        let mid = 0.5 * (self.lower[k] + self.upper[k]);
                        let dir = if mid.is_finite() { (mid - v).signum() } else { 0.0 };
                        v + dir * 1e-9 * self.ranges[k]
                    })
                    .collect();
                constraint_gradient(c, &nudged, &self.lower, &self.upper, &self.ranges).ok()
            }
        }
    }

    fn rows(&self, s: &State, restoring: bool) -> Vec<LinearizedRow> {
        let margin = 0.1 * self.params.phi;
        let mut rows = Vec::new();
        for (i, c) in self.p.nonlinear.iter().enumerate() {
            let mut r = linearize_value(i, c.sense, s.values[i], &s.grads[i]);
            if restoring && c.sense == Sense::Geq && s.values[i] < 0.0 {
                // aim slightly inside so curvature does not leave a residue
                r[0].value -= margin;
            }
            rows.extend(r);
        }
        rows
    }

    /// Solves one step QP. `restoring` drops the objective and uses a unit
    /// distance penalty.
    fn step(&self, s: &State, mode: Mode, t: usize) -> Option<Vec<f64>> {
        let n = s.x.len();
        let rows = self.rows(s, mode == Mode::Restoration);
        let nlambda = rows.iter().filter(|r| r.relax == Relax::Lambda).count();
        let nmu = self.p.nonlinear.iter().filter(|c| c.sense == Sense::Eq).count();
        let ncols = n + nlambda + nmu;

        let mut lo = vec![0.0; ncols];
        let mut hi = vec![f64::INFINITY; ncols];
        for k in 0..n {
            if self.integral[k] {
                hi[k] = 0.0;
            } else {
                lo[k] = self.lower[k] - s.x[k];
                hi[k] = self.upper[k] - s.x[k];
            }
        }
        let mut c = vec![0.0; ncols];
        if mode != Mode::Restoration {
            c[..n].copy_from_slice(&s.grad_f);
        }
        let mut lp = LpInstance::new(lo, hi, c);

        let mut hessian = vec![0.0; ncols * ncols];
        let dist = match mode {
            Mode::Projection => self.params.beta,
            Mode::Restoration => 1.0,
            _ => 0.0,
        };
        for k in 0..n {
            hessian[k * ncols + k] = 2.0 * dist / self.ranges[k].powi(2);
        }
        for j in n..ncols {
            hessian[j * ncols + j] = 2.0 * self.params.gamma;
        }

        let mut next_lambda = n;
        let mut mu_col = vec![usize::MAX; self.p.nonlinear.len()];
        let mut next_mu = n + nlambda;
        for r in &rows {
            let mut terms: Vec<(usize, f64)> = r
                .grad
                .iter()
                .enumerate()
                .filter(|(_, g)| **g != 0.0)
                .map(|(k, g)| (k, *g))
                .collect();
            match r.relax {
                Relax::None => lp.add_row(terms, -r.value, f64::INFINITY),
                Relax::Lambda => {
                    terms.push((next_lambda, 1.0));
                    next_lambda += 1;
                    lp.add_row(terms, -r.value, f64::INFINITY);
                }
                Relax::MuLower | Relax::MuUpper => {
                    if mu_col[r.constraint] == usize::MAX {
                        mu_col[r.constraint] = next_mu;
                        next_mu += 1;
                    }
                    let m = mu_col[r.constraint];
                    if r.relax == Relax::MuLower {
                        terms.push((m, 1.0));
                        lp.add_row(terms, -r.value, f64::INFINITY);
                    } else {
                        terms.push((m, -1.0));
                        lp.add_row(terms, f64::NEG_INFINITY, -r.value);
                    }
                }
            }
        }
        for r in &self.p.inequalities {
            lp.add_row(sparse(&r.coeffs), r.rhs - r.activity(&s.x), f64::INFINITY);
        }
        for r in &self.p.equalities {
            let rhs = r.rhs - r.activity(&s.x);
            lp.add_row(sparse(&r.coeffs), rhs, rhs);
        }

        let ball = (mode == Mode::Descent).then(|| Ball {
            weights: (0..n).filter(|&k| !self.integral[k]).map(|k| (k, 1.0 / self.ranges[k])).collect(),
            radius: self.params.step_bound(t).sqrt(),
        });
        let qp = QpInstance { lp, hessian, ball };
        let sol = solve_qp(&qp);
        if sol.status != Status::Optimal {
            warn!("{mode} step QP at iteration {t} ended {:?}", sol.status);
            return None;
        }
        let mut x: Vec<f64> = s.x.iter().zip(&sol.x).map(|(a, d)| a + d).collect();
        for k in 0..n {
            x[k] = if self.integral[k] { s.x[k] } else { x[k].clamp(self.lower[k], self.upper[k]) };
        }
        Some(x)
    }

    fn step_norm(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.ranges)
            .map(|((u, v), r)| ((u - v) / r).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Projects `s` onto the true feasible set by repeated distance-only
    /// steps. Returns the iterates produced.
    fn restore(&self, s: &State, t: usize, trace: &mut Vec<TraceRow>) -> Vec<State> {
        let mut out = Vec::new();
        let mut cur = s.clone();
        for _ in 0..RESTORE_ITERS {
            if cur.check.feasible && cur.values.iter().zip(&self.p.nonlinear).all(|(v, c)| c.sense == Sense::Eq || *v >= 0.0) {
                break;
            }
            let Some(x) = self.step(&cur, Mode::Restoration, t) else { break };
            let next = self.evaluate(x);
            trace.push(TraceRow {
                iteration: t,
                mode: Mode::Restoration,
                objective: next.f,
                max_violation: next.check.max_violation,
                step_norm: self.step_norm(&next.x, &cur.x),
            });
            let stalled = next.check.max_violation >= cur.check.max_violation && !next.check.feasible;
            cur = next;
            out.push(cur.clone());
            if stalled {
                break;
            }
        }
        out
    }
}

fn sparse(coeffs: &[f64]) -> Vec<(usize, f64)> {
    coeffs
        .iter()
        .enumerate()
        .filter(|(_, a)| **a != 0.0)
        .map(|(k, a)| (k, *a))
        .collect()
}

/// Repairs `x0` against the true constraints of `p`.
///
/// Iterates until the last two iterates are feasible with objective change
/// below `epsilon`, or `max_iters` steps. An infeasible final iterate gets a
/// short restoration phase. Returns the best feasible iterate by objective,
/// or the least-violating one.
pub fn repair(p: &StandardFormProblem, x0: &[f64], params: &PgdParams) -> Result<RepairResult, RepairError> {
    params.validate().map_err(RepairError::Params)?;
    let n = p.n();
    if x0.len() != n {
        return Err(RepairError::Dimension { got: x0.len(), want: n });
    }
    let rp = Repairer {
        p,
        params: *params,
        lower: p.lower(),
        upper: p.upper(),
        ranges: p.ranges(),
        integral: p.integral(),
    };
    let start: Vec<f64> = (0..n)
        .map(|k| {
            let v = x0[k].clamp(rp.lower[k], rp.upper[k]);
            if rp.integral[k] {
                v.round()
            } else {
                v
            }
        })
        .collect();

    let mut cur = rp.evaluate(start);
    let mut approximate = cur.approximate;
    let mut trace = vec![TraceRow {
        iteration: 0,
        mode: Mode::Start,
        objective: cur.f,
        max_violation: cur.check.max_violation,
        step_norm: 0.0,
    }];
    let mut seen = vec![cur.clone()];
    let mut status = RepairStatus::IterationLimit;
    let mut t = 0;
    while t < params.max_iters {
        let mode = if cur.check.feasible { Mode::Descent } else { Mode::Projection };
        let Some(x) = rp.step(&cur, mode, t) else {
            status = RepairStatus::StepFailed;
            break;
        };
        let mut next = rp.evaluate(x);
        approximate |= next.approximate;
        t += 1;
        trace.push(TraceRow {
            iteration: t,
            mode,
            objective: next.f,
            max_violation: next.check.max_violation,
            step_norm: rp.step_norm(&next.x, &cur.x),
        });
        if mode == Mode::Projection && !next.check.feasible {
            // The penalized projection leaves a residue of order
            // |∇f|/γ; close it so descent steps can resume.
            seen.push(next.clone());
            if let Some(r) = rp.restore(&next, t, &mut trace).pop() {
                next = r;
            }
        }
        let done = cur.check.feasible && next.check.feasible && (next.f - cur.f).abs() < params.epsilon;
        cur = next;
        seen.push(cur.clone());
        if done {
            status = RepairStatus::Converged;
            break;
        }
    }
    let iterations = t;

    let best_feasible = |seen: &[State]| {
        seen.iter()
            .filter(|s| s.check.feasible)
            .map(|s| s.f)
            .fold(f64::INFINITY, f64::min)
    };
    if !cur.check.feasible {
        let restored = rp.restore(&cur, t, &mut trace);
        seen.extend(restored);
    }
    // The lowest-objective iterate is worth restoring when it beats every
    // feasible one.
    let lowest = seen
        .iter()
        .filter(|s| !s.check.feasible)
        .min_by(|a, b| a.f.total_cmp(&b.f))
        .cloned();
    if let Some(s) = lowest {
        if s.f < best_feasible(&seen) {
            let restored = rp.restore(&s, t, &mut trace);
            seen.extend(restored);
        }
    }

    let best = seen
        .iter()
        .filter(|s| s.check.feasible)
        .min_by(|a, b| a.f.total_cmp(&b.f))
        .or_else(|| {
            seen.iter()
                .min_by(|a, b| a.check.max_violation.total_cmp(&b.check.max_violation))
        })
        .expect("at least the start point");
    Ok(RepairResult {
        x: best.x.clone(),
        objective: best.f,
        feasible: best.check.feasible,
        max_violation: best.check.max_violation,
        iterations,
        status,
        approximate_gradients: approximate,
        trace,
    })
}

#[cfg(test)]
mod tests;
