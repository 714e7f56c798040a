//! Variable outer bounds from the linear rows.

use crate::backend::{solve_lp, LpInstance, LpWorkspace, Status};

use super::{ProblemError, StandardFormProblem};

fn linear_lp(p: &StandardFormProblem) -> LpInstance {
    let n = p.n();
    let mut lp = LpInstance::new(p.lower(), p.upper(), vec![0.0; n]);
    let sparse = |c: &[f64]| -> Vec<(usize, f64)> {
        c.iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .collect()
    };
    for r in &p.inequalities {
        lp.add_row(sparse(&r.coeffs), r.rhs, f64::INFINITY);
    }
    for r in &p.equalities {
        lp.add_row(sparse(&r.coeffs), r.rhs, r.rhs);
    }
    lp
}

fn bound_from(ws: &mut LpWorkspace, k: usize, n: usize, sign: f64) -> Result<Option<f64>, ProblemError> {
    let mut c = vec![0.0; n];
    c[k] = sign;
    ws.set_objective(&c);
    let r = ws.solve();
    match r.status {
        Status::Optimal => Ok(Some(r.x[k])),
        Status::Unbounded => Ok(None),
        Status::Infeasible => Err(ProblemError::InfeasibleLinear),
        Status::IterationLimit => Ok(None),
    }
}

fn merge(p: &StandardFormProblem, k: usize, lo: Option<f64>, hi: Option<f64>) -> Result<(f64, f64), ProblemError> {
    let v = &p.variables[k];
    let mut l = lo.map_or(v.lower, |x| x.max(v.lower));
    let mut u = hi.map_or(v.upper, |x| x.min(v.upper));
    if v.integral {
        l = (l - 1e-9).ceil();
        u = (u + 1e-9).floor();
    }
    if !(l.is_finite() && u.is_finite()) {
        return Err(ProblemError::Unbounded(v.name.clone()));
    }
    // LP noise can push an endpoint past the other by a hair.
    if l > u {
        let mid = 0.5 * (l + u);
        l = mid;
        u = mid;
    }
    Ok((l, u))
}

/// `[min x_k, max x_k]` over the linear rows and declared bounds, never
/// wider than the declared bounds.
pub fn tighten_bounds(p: &StandardFormProblem, k: usize) -> Result<(f64, f64), ProblemError> {
    let mut ws = LpWorkspace::new(&linear_lp(p));
    let n = p.n();
    let lo = bound_from(&mut ws, k, n, 1.0)?;
    let hi = bound_from(&mut ws, k, n, -1.0)?;
    merge(p, k, lo, hi)
}

/// Tightens every variable in `which`, failing if one stays unbounded.
/// Variables outside `which` keep their bounds, tightened where the LP is
/// bounded.
pub fn tighten_all_bounds(
    p: &StandardFormProblem,
    which: &[usize],
) -> Result<StandardFormProblem, ProblemError> {
    let n = p.n();
    let lp = linear_lp(p);
    if solve_lp(&lp).status == Status::Infeasible {
        return Err(ProblemError::InfeasibleLinear);
    }
    let mut ws = LpWorkspace::new(&lp);
    let mut out = p.clone();
    for k in 0..n {
        let lo = bound_from(&mut ws, k, n, 1.0)?;
        let hi = bound_from(&mut ws, k, n, -1.0)?;
        match merge(p, k, lo, hi) {
            Ok((l, u)) => {
                out.variables[k].lower = l;
                out.variables[k].upper = u;
            }
            Err(e) if which.contains(&k) => return Err(e),
            Err(_) => {
                if let Some(l) = lo {
                    out.variables[k].lower = l.max(p.variables[k].lower);
                }
                if let Some(u) = hi {
                    out.variables[k].upper = u.min(p.variables[k].upper);
                }
            }
        }
    }
    Ok(out)
}
