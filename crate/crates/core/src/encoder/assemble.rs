use std::collections::BTreeSet;

use serde::Serialize;

use super::{AuxRole, Col, EncodeError, FragmentKind, MilpFragment};
use crate::backend::{solve_lp, LpInstance, MilpInstance, Status};
use crate::problem::{Objective, StandardFormProblem};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnOrigin {
    Original { index: usize },
    Aux {
        constraint: String,
        leaf: Option<usize>,
        role: AuxRole,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assembly {
    pub milp: MilpInstance,
    /// One entry per MILP column.
    pub origins: Vec<ColumnOrigin>,
    /// Column offset of each fragment's first auxiliary variable.
    pub offsets: Vec<usize>,
    pub objective_col: Option<usize>,
    /// Constraints left out because every sample satisfied them.
    pub box_redundant: Vec<String>,
}

impl Assembly {
    /// Original-variable part of a MILP point.
    pub fn original_point<'a>(&self, x: &'a [f64], n: usize) -> &'a [f64] {
        &x[..n]
    }

    pub fn provenance_json(&self) -> String {
        serde_json::to_string_pretty(&self.origins).expect("provenance serializes")
    }
}

/// Builds the surrogate MILP: original columns (with the given bounds)
/// followed by each fragment's auxiliaries; linear rows of `p` verbatim,
/// then fragment rows.
pub fn assemble(
    p: &StandardFormProblem,
    lower: &[f64],
    upper: &[f64],
    fragments: &[MilpFragment],
    box_redundant: &[String],
) -> Result<Assembly, EncodeError> {
    let n = p.n();
    if lower.len() != n || upper.len() != n {
        return Err(EncodeError::Mismatch(format!("bounds for {} of {n} variables", lower.len())));
    }
    let mut seen = BTreeSet::new();
    for f in fragments {
        if !seen.insert(f.constraint.clone()) {
            return Err(EncodeError::Mismatch(format!("duplicate fragment for {}", f.constraint)));
        }
        for r in &f.rows {
            for (c, _) in &r.terms {
                match c {
                    Col::X(k) if *k >= n => {
                        return Err(EncodeError::Mismatch(format!(
                            "{} refers to variable {k} of {n}",
                            f.constraint
                        )))
                    }
                    Col::Aux(a) if *a >= f.aux.len() => {
                        return Err(EncodeError::Mismatch(format!("{} refers to missing aux {a}", f.constraint)))
                    }
                    _ => {}
                }
            }
        }
    }

    let mut col_lo = lower.to_vec();
    let mut col_hi = upper.to_vec();
    let mut integral = p.integral();
    let mut col_names = p.names();
    let mut origins: Vec<ColumnOrigin> = (0..n).map(|index| ColumnOrigin::Original { index }).collect();
    let mut offsets = Vec::new();
    for f in fragments {
        offsets.push(col_lo.len());
        for a in &f.aux {
            col_lo.push(a.lower);
            col_hi.push(a.upper);
            integral.push(a.binary);
            col_names.push(a.name.clone());
            origins.push(ColumnOrigin::Aux {
                constraint: f.constraint.clone(),
                leaf: a.leaf,
                role: a.role,
            });
        }
    }
    let ncols = col_lo.len();

    let mut objective = vec![0.0; ncols];
    let mut obj_constant = 0.0;
    let mut objective_col = None;
    match &p.objective {
        Objective::Linear { coeffs, constant } => {
            objective[..n].copy_from_slice(coeffs);
            obj_constant = *constant;
        }
        Objective::Nonlinear { .. } => {
            let found: Vec<usize> = fragments
                .iter()
                .enumerate()
                .filter(|(_, f)| f.kind == FragmentKind::Objective)
                .map(|(i, _)| i)
                .collect();
            let [i] = found[..] else {
                return Err(EncodeError::Mismatch(format!(
                    "nonlinear objective needs one objective fragment, got {}",
                    found.len()
                )));
            };
            let col = offsets[i] + fragments[i].value_var.expect("objective fragment has f*");
            objective[col] = 1.0;
            objective_col = Some(col);
        }
    }

    let mut lp = LpInstance::new(col_lo, col_hi, objective);
    let mut row_names = Vec::new();
    for r in &p.inequalities {
        lp.add_row(sparse(&r.coeffs), r.rhs, f64::INFINITY);
        row_names.push(r.name.clone());
    }
    for r in &p.equalities {
        lp.add_row(sparse(&r.coeffs), r.rhs, r.rhs);
        row_names.push(r.name.clone());
    }
    let mut groups = Vec::new();
    for (f, off) in fragments.iter().zip(&offsets) {
        let col = |c: &Col| match c {
            Col::X(k) => *k,
            Col::Aux(a) => off + a,
        };
        for r in &f.rows {
            lp.add_row(r.terms.iter().map(|(c, v)| (col(c), *v)).collect(), r.lo, r.hi);
            row_names.push(r.name.clone());
        }
        for g in &f.groups {
            groups.push(g.iter().map(|a| off + a).collect());
        }
    }
    Ok(Assembly {
        milp: MilpInstance {
            lp,
            integral,
            groups,
            col_names,
            row_names,
            obj_constant,
        },
        origins,
        offsets,
        objective_col,
        box_redundant: box_redundant.to_vec(),
    })
}

fn sparse(coeffs: &[f64]) -> Vec<(usize, f64)> {
    coeffs
        .iter()
        .enumerate()
        .filter(|(_, a)| **a != 0.0)
        .map(|(k, a)| (k, *a))
        .collect()
}

/// LP over a fragment's auxiliaries with the original variables fixed at
/// `x` (problem-indexed) and, optionally, indicator values fixed. Used to
/// check what a fragment admits at a given point. `None` if a row without
/// auxiliaries is already violated.
pub fn fragment_lp_at(f: &MilpFragment, x: &[f64], indicators: Option<&[(usize, f64)]>) -> Option<LpInstance> {
    let mut lo: Vec<f64> = f.aux.iter().map(|a| a.lower).collect();
    let mut hi: Vec<f64> = f.aux.iter().map(|a| a.upper).collect();
    if let Some(fixed) = indicators {
        for (a, v) in fixed {
            lo[*a] = *v;
            hi[*a] = *v;
        }
    }
    let mut lp = LpInstance::new(lo, hi, vec![0.0; f.aux.len()]);
    for r in &f.rows {
        let mut shift = 0.0;
        let mut coeffs = Vec::new();
        for (c, v) in &r.terms {
            match c {
                Col::X(k) => shift += v * x[*k],
                Col::Aux(a) => coeffs.push((*a, *v)),
            }
        }
        if coeffs.is_empty() {
            let tol = 1e-9 * (1.0 + shift.abs());
            if shift < r.lo - tol || shift > r.hi + tol {
                return None;
            }
            continue;
        }
        lp.add_row(coeffs, r.lo - shift, r.hi - shift);
    }
    Some(lp)
}

/// Whether the fragment can be satisfied with the original variables at `x`
/// and the given indicators (all others free in `[0, 1]`).
pub fn fragment_admits(f: &MilpFragment, x: &[f64], indicators: Option<&[(usize, f64)]>) -> bool {
    fragment_lp_at(f, x, indicators).is_some_and(|lp| solve_lp(&lp).status == Status::Optimal)
}
