//! Convex QP by a primal active-set method.
//!
//! Minimizes `½ xᵀHx + cᵀx` over linear rows and bounds. An optional ball
//! `Σ_k (w_k x_k)² ≤ ρ²` is enforced exactly by bisecting on its multiplier
//! `ν`: each trial solves the QP with `H + 2ν diag(w²)`.

use nalgebra::{DMatrix, DVector};

use super::lp::{solve_lp, LpInstance};
use super::{SolveResult, Status};

const ACTIVE_TOL: f64 = 1e-10;

/// Ball constraint over a subset of columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    /// `(column, weight)` pairs.
    pub weights: Vec<(usize, f64)>,
    pub radius: f64,
}

impl Ball {
    pub fn norm(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .map(|&(j, w)| (w * x[j]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpInstance {
    pub lp: LpInstance,
    /// Dense symmetric positive semidefinite Hessian, row-major `n × n`.
    pub hessian: Vec<f64>,
    pub ball: Option<Ball>,
}

impl QpInstance {
    pub fn objective(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let mut v: f64 = self.lp.objective.iter().zip(x).map(|(c, a)| c * a).sum();
        for i in 0..n {
            for j in 0..n {
                v += 0.5 * x[i] * self.hessian[i * n + j] * x[j];
            }
        }
        v
    }
}

/// Constraint `a·x ≥ b` in the active-set solver.
#[derive(Debug, Clone)]
struct Half {
    a: Vec<(usize, f64)>,
    b: f64,
    equality: bool,
}

/// Solves the QP. `iterations` counts active-set steps; `objective` is the
/// QP objective without the ball multiplier term.
pub fn solve_qp(inst: &QpInstance) -> SolveResult {
    let n = inst.lp.ncols();
    // A vertex of the feasible set serves as a start.
    let mut phase = inst.lp.clone();
    phase.objective = vec![0.0; n];
    let start = solve_lp(&phase);
    if start.status != Status::Optimal {
        return SolveResult::failed(start.status, n);
    }
    let halves = halfspaces(&inst.lp);
    let Some(ball) = inst.ball.as_ref() else {
        return active_set(inst, &inst.hessian, &halves, start.x);
    };

    // A singular Hessian may leave the ball-free problem unbounded; only
    // definite or purely linear problems are tried without the ball.
    let trial = |nu: f64, x0: Vec<f64>| {
        let mut h = inst.hessian.clone();
        for &(j, w) in &ball.weights {
            h[j * n + j] += 2.0 * nu * w * w;
        }
        active_set(inst, &h, &halves, x0)
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    let free = if is_positive_definite(&inst.hessian, n) {
        Some(active_set(inst, &inst.hessian, &halves, start.x.clone()))
    } else if inst.hessian.iter().all(|&v| v == 0.0) {
        Some(solve_lp(&inst.lp))
    } else {
        None
    };
    if let Some(r) = &free {
        if r.status == Status::Optimal && ball.norm(&r.x) <= ball.radius * (1.0 + 1e-12) {
            return r.clone();
        }
    }
    let mut best = trial(hi, start.x.clone());
    let mut guard = 0;
    while ball.norm(&best.x) > ball.radius && guard < 200 {
        lo = hi;
        hi *= 4.0;
        best = trial(hi, best.x.clone());
        guard += 1;
    }
    let mut iterations = best.iterations;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let r = trial(mid, best.x.clone());
        iterations += r.iterations;
        if ball.norm(&r.x) > ball.radius {
            lo = mid;
        } else {
            hi = mid;
            best = r;
        }
        if hi - lo <= 1e-13 * hi.max(1e-300) {
            break;
        }
    }
    best.objective = inst.objective(&best.x);
    best.bound = f64::NEG_INFINITY;
    best.iterations = iterations;
    best
}

fn is_positive_definite(h: &[f64], n: usize) -> bool {
    let m = DMatrix::from_row_slice(n, n, h);
    m.cholesky().is_some()
}

fn halfspaces(lp: &LpInstance) -> Vec<Half> {
    let mut out = Vec::new();
    for r in &lp.rows {
        if r.lo == r.hi {
            out.push(Half {
                a: r.coeffs.clone(),
                b: r.lo,
                equality: true,
            });
            continue;
        }
        if r.lo.is_finite() {
            out.push(Half {
                a: r.coeffs.clone(),
                b: r.lo,
                equality: false,
            });
        }
        if r.hi.is_finite() {
            out.push(Half {
                a: r.coeffs.iter().map(|&(j, v)| (j, -v)).collect(),
                b: -r.hi,
                equality: false,
            });
        }
    }
    for j in 0..lp.ncols() {
        let (l, u) = (lp.col_lo[j], lp.col_hi[j]);
        if l == u {
            out.push(Half {
                a: vec![(j, 1.0)],
                b: l,
                equality: true,
            });
            continue;
        }
        if l.is_finite() {
            out.push(Half {
                a: vec![(j, 1.0)],
                b: l,
                equality: false,
            });
        }
        if u.is_finite() {
            out.push(Half {
                a: vec![(j, -1.0)],
                b: -u,
                equality: false,
            });
        }
    }
    out
}

fn dot(a: &[(usize, f64)], x: &[f64]) -> f64 {
    a.iter().map(|&(j, v)| v * x[j]).sum()
}

fn active_set(inst: &QpInstance, h: &[f64], halves: &[Half], mut x: Vec<f64>) -> SolveResult {
    let n = x.len();
    let c = &inst.lp.objective;
    let objective = |x: &[f64]| {
        let mut v: f64 = c.iter().zip(x).map(|(a, b)| a * b).sum();
        for i in 0..n {
            for j in 0..n {
                v += 0.5 * x[i] * h[i * n + j] * x[j];
            }
        }
        v
    };
    let mut working: Vec<usize> = (0..halves.len()).filter(|&k| halves[k].equality).collect();
    let max_iter = 50 * (halves.len() + n) + 100;
    let mut iterations = 0;
    let mut trace_obj = objective(&x);
    while iterations < max_iter {
        iterations += 1;
        let mut g = c.clone();
        for i in 0..n {
            for j in 0..n {
                g[i] += h[i * n + j] * x[j];
            }
        }
        let w = working.len();
        let dim = n + w;
        let mut kkt = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..n {
            for j in 0..n {
                kkt[(i, j)] = h[i * n + j];
            }
        }
        for (r, &k) in working.iter().enumerate() {
            for &(j, v) in &halves[k].a {
                kkt[(n + r, j)] += v;
                kkt[(j, n + r)] += v;
            }
        }
        let mut rhs = DVector::<f64>::zeros(dim);
        for i in 0..n {
            rhs[i] = -g[i];
        }
        let sol = kkt.clone().lu().solve(&rhs).or_else(|| {
            // Singular KKT (dependent working rows or flat directions):
            // regularize lightly.
            let mut k2 = kkt.clone();
            for i in 0..dim {
                k2[(i, i)] += if i < n { 1e-10 } else { -1e-10 };
            }
            k2.lu().solve(&rhs)
        });
        let Some(sol) = sol else {
            break;
        };
        let p: Vec<f64> = (0..n).map(|i| sol[i]).collect();
        let pnorm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if pnorm <= 1e-11 * (1.0 + xnorm) {
            // Hp + Aᵀv = -g with p = 0 gives g = Σ a_k λ_k for λ = -v;
            // a·x ≥ b needs λ ≥ 0.
            let mut worst: Option<(usize, f64)> = None;
            for (r, &k) in working.iter().enumerate() {
                if halves[k].equality {
                    continue;
                }
                let lam = -sol[n + r];
                if lam < -1e-10 && worst.is_none_or(|(_, v)| lam < v) {
                    worst = Some((r, lam));
                }
            }
            match worst {
                None => {
                    return SolveResult {
                        status: Status::Optimal,
                        objective: objective(&x),
                        bound: objective(&x),
                        x,
                        iterations,
                        nodes: 0,
                        duals: Vec::new(),
                        reduced_costs: Vec::new(),
                    };
                }
                Some((r, _)) => {
                    working.remove(r);
                    continue;
                }
            }
        }
        let mut step = 1.0;
        let mut blocking = None;
        for (k, half) in halves.iter().enumerate() {
            if working.contains(&k) {
                continue;
            }
            let ap = dot(&half.a, &p);
            if ap < -ACTIVE_TOL * (1.0 + pnorm) {
                let t = ((half.b - dot(&half.a, &x)) / ap).max(0.0);
                if t < step {
                    step = t;
                    blocking = Some(k);
                }
            }
        }
        for i in 0..n {
            x[i] += step * p[i];
        }
        if let Some(k) = blocking {
            working.push(k);
        }
        let now = objective(&x);
        debug_assert!(now <= trace_obj + 1e-9 * (1.0 + trace_obj.abs()));
        trace_obj = now;
    }
    SolveResult {
        status: Status::IterationLimit,
        objective: objective(&x),
        bound: f64::NEG_INFINITY,
        x,
        iterations,
        nodes: 0,
        duals: Vec::new(),
        reduced_costs: Vec::new(),
    }
}
