//! Depth-first branch and bound over warm-started LP relaxations.
//!
//! Σz = 1 groups are branched first by picking their largest fractional
//! member (`z = 1` child explored before `z = 0`); remaining integer columns
//! are branched on the most fractional value.

use super::lp::{LpInstance, LpWorkspace};
use super::{SolveResult, Status};

const INT_TOL: f64 = 1e-7;

/// Mixed-integer linear program.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MilpInstance {
    pub lp: LpInstance,
    pub integral: Vec<bool>,
    /// Binary column groups constrained by `Σ z = 1`.
    pub groups: Vec<Vec<usize>>,
    pub col_names: Vec<String>,
    pub row_names: Vec<String>,
    pub obj_constant: f64,
}

impl MilpInstance {
    pub fn ncols(&self) -> usize {
        self.lp.ncols()
    }

    /// Largest row/bound violation, also counting integrality gaps.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut v = self.lp.max_violation(x);
        for (j, &int) in self.integral.iter().enumerate() {
            if int {
                v = v.max((x[j] - x[j].round()).abs());
            }
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MilpBudget {
    pub max_nodes: usize,
    /// Absolute optimality gap for pruning.
    pub gap: f64,
}

impl Default for MilpBudget {
    fn default() -> Self {
        MilpBudget {
            max_nodes: 200_000,
            gap: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    changes: Vec<(usize, f64, f64)>,
    parent_bound: f64,
}

/// Branch and bound. Returns the incumbent with the best bound proven; the
/// status is `IterationLimit` when the node budget ran out.
pub fn solve_milp(inst: &MilpInstance, budget: MilpBudget) -> SolveResult {
    let n = inst.ncols();
    let root_lo = inst.lp.col_lo.clone();
    let root_hi = inst.lp.col_hi.clone();
    let mut ws = LpWorkspace::new(&inst.lp);
    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let mut stack = vec![Node {
        changes: Vec::new(),
        parent_bound: f64::NEG_INFINITY,
    }];
    let mut applied: Vec<usize> = Vec::new();
    let mut nodes = 0usize;
    let mut iterations = 0usize;
    let mut lp_trouble = false;

    while let Some(node) = stack.pop() {
        let cutoff = incumbent.as_ref().map_or(f64::INFINITY, |(_, v)| *v - budget.gap);
        if node.parent_bound >= cutoff {
            continue;
        }
        if nodes >= budget.max_nodes {
            stack.push(node);
            break;
        }
        nodes += 1;
        for &j in &applied {
            ws.set_col_bounds(j, root_lo[j], root_hi[j]);
        }
        applied.clear();
        let mut empty = false;
        for &(j, lo, hi) in &node.changes {
            let (cl, ch) = ws.col_bounds(j);
            let (l, h) = (cl.max(lo), ch.min(hi));
            if l > h {
                empty = true;
            }
            ws.set_col_bounds(j, l, h);
            applied.push(j);
        }
        if empty {
            continue;
        }
        let r = ws.solve();
        iterations += r.iterations;
        match r.status {
            Status::Optimal => {}
            Status::Infeasible => continue,
            Status::Unbounded => {
                if incumbent.is_none() {
                    let mut out = r;
                    out.nodes = nodes;
                    out.iterations = iterations;
                    return out;
                }
                continue;
            }
            Status::IterationLimit => {
                lp_trouble = true;
                continue;
            }
        }
        if r.objective >= cutoff {
            continue;
        }
        match branch_choice(inst, &r.x) {
            None => {
                let mut x = r.x.clone();
                for (j, &int) in inst.integral.iter().enumerate() {
                    if int {
                        x[j] = x[j].round();
                    }
                }
                incumbent = Some((x, r.objective));
            }
            Some(Branch::Group(g, pick)) => {
                let mut one = node.changes.clone();
                for &j in &inst.groups[g] {
                    if j == pick {
                        one.push((j, 1.0, 1.0));
                    } else {
                        one.push((j, 0.0, 0.0));
                    }
                }
                let mut zero = node.changes.clone();
                zero.push((pick, 0.0, 0.0));
                stack.push(Node {
                    changes: zero,
                    parent_bound: r.objective,
                });
                stack.push(Node {
                    changes: one,
                    parent_bound: r.objective,
                });
            }
            Some(Branch::Var(j, v)) => {
                let mut down = node.changes.clone();
                down.push((j, f64::NEG_INFINITY, v.floor()));
                let mut up = node.changes.clone();
                up.push((j, v.ceil(), f64::INFINITY));
                let (first, second) = if v - v.floor() > 0.5 {
                    (up, down)
                } else {
                    (down, up)
                };
                stack.push(Node {
                    changes: second,
                    parent_bound: r.objective,
                });
                stack.push(Node {
                    changes: first,
                    parent_bound: r.objective,
                });
            }
        }
    }

    let open_bound = stack
        .iter()
        .map(|nd| nd.parent_bound)
        .fold(f64::INFINITY, f64::min);
    match incumbent {
        Some((x, obj)) => {
            let exhausted = stack.is_empty();
            let status = if exhausted && !lp_trouble {
                Status::Optimal
            } else {
                Status::IterationLimit
            };
            let bound = if exhausted { obj } else { open_bound.min(obj) };
            SolveResult {
                status,
                x,
                objective: obj + inst.obj_constant,
                bound: bound + inst.obj_constant,
                iterations,
                nodes,
                duals: Vec::new(),
                reduced_costs: Vec::new(),
            }
        }
        None => {
            let status = if stack.is_empty() && !lp_trouble {
                Status::Infeasible
            } else {
                Status::IterationLimit
            };
            let mut out = SolveResult::failed(status, n);
            out.nodes = nodes;
            out.iterations = iterations;
            out
        }
    }
}

enum Branch {
    Group(usize, usize),
    Var(usize, f64),
}

fn branch_choice(inst: &MilpInstance, x: &[f64]) -> Option<Branch> {
    // Group whose largest member is least decided.
    let mut best: Option<(usize, usize, f64)> = None;
    for (g, members) in inst.groups.iter().enumerate() {
        let fractional = members
            .iter()
            .any(|&j| (x[j] - x[j].round()).abs() > INT_TOL);
        if !fractional {
            continue;
        }
        let (pick, top) = members
            .iter()
            .map(|&j| (j, x[j]))
            .fold((members[0], f64::NEG_INFINITY), |acc, (j, v)| {
                if v > acc.1 {
                    (j, v)
                } else {
                    acc
                }
            });
        if best.is_none_or(|(_, _, b)| top < b) {
            best = Some((g, pick, top));
        }
    }
    if let Some((g, pick, _)) = best {
        return Some(Branch::Group(g, pick));
    }
    let mut var: Option<(usize, f64)> = None;
    let mut frac_best = INT_TOL;
    for (j, &int) in inst.integral.iter().enumerate() {
        if !int {
            continue;
        }
        let f = (x[j] - x[j].floor()).min(x[j].ceil() - x[j]);
        if f > frac_best {
            frac_best = f;
            var = Some((j, x[j]));
        }
    }
    var.map(|(j, v)| Branch::Var(j, v))
}
