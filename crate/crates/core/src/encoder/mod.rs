//! Disjunctive MILP encodings of trained trees and assembly of the
//! surrogate MILP.

mod assemble;
mod count;

use serde::Serialize;
use thiserror::Error;

use crate::backend::{solve_lp, LpInstance, Status};
use crate::sampler::SampleSet;
use crate::tree::{HyperplaneTree, LeafPayload, LeafPolyhedron, TreeMode};

pub use assemble::{assemble, fragment_admits, fragment_lp_at, Assembly, ColumnOrigin};
pub use count::{count_aux, AuxCounts, TreeRole};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncodeError {
    #[error("constraint {0}: tree has no feasible leaf, unsatisfiable in the box")]
    NoFeasibleLeaf(String),
    #[error("constraint {0}: equality needs feasible and infeasible leaves")]
    SingleClass(String),
    #[error("constraint {0}: expected a regression tree")]
    NotRegressor(String),
    #[error("variable mismatch: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderMode {
    #[default]
    BigMFree,
    BigM,
}

/// The active variables of a constraint and their box.
#[derive(Debug, Clone, PartialEq)]
pub struct Scope {
    pub name: String,
    /// Problem indices, in tree-coordinate order.
    pub active: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Scope {
    pub fn dim(&self) -> usize {
        self.active.len()
    }
}

/// Column reference inside a fragment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Col {
    /// Original problem variable.
    X(usize),
    /// Auxiliary variable of the fragment.
    Aux(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuxRole {
    /// Copy `y_l` of a problem variable.
    Copy(usize),
    Indicator,
    /// Per-leaf share `f_l` of the surrogate value.
    LeafValue,
    /// Surrogate value `f*`.
    Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuxVar {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub binary: bool,
    pub leaf: Option<usize>,
    pub role: AuxRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowKind {
    Path,
    BoxLower,
    BoxUpper,
    /// `Σ y_l = x`, one row per coordinate.
    Link,
    /// `Σ z_l = 1`.
    Choice,
    LeafPlane,
    LeafBound,
    /// `Σ f_l = f*`.
    Aggregate,
    /// `aᵀx + b ≥ g*` for separable constraints.
    Separable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FragmentRow {
    pub name: String,
    pub kind: RowKind,
    pub terms: Vec<(Col, f64)>,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FragmentKind {
    Inequality,
    Equality,
    Objective,
    Separable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MilpFragment {
    pub constraint: String,
    pub kind: FragmentKind,
    pub aux: Vec<AuxVar>,
    pub rows: Vec<FragmentRow>,
    /// Indicator groups, each carrying one `Σz = 1` row.
    pub groups: Vec<Vec<usize>>,
    /// Column of `f*` for objective and separable fragments.
    pub value_var: Option<usize>,
}

impl MilpFragment {
    fn new(constraint: &str, kind: FragmentKind) -> Self {
        MilpFragment {
            constraint: constraint.to_string(),
            kind,
            aux: Vec::new(),
            rows: Vec::new(),
            groups: Vec::new(),
            value_var: None,
        }
    }

    fn add_aux(&mut self, name: String, lower: f64, upper: f64, binary: bool, leaf: Option<usize>, role: AuxRole) -> usize {
        self.aux.push(AuxVar {
            name,
            lower,
            upper,
            binary,
            leaf,
            role,
        });
        self.aux.len() - 1
    }

    fn add_row(&mut self, kind: RowKind, terms: Vec<(Col, f64)>, lo: f64, hi: f64) {
        let name = format!("{}_{:?}{}", self.constraint, kind, self.rows.len()).to_lowercase();
        self.rows.push(FragmentRow {
            name,
            kind,
            terms,
            lo,
            hi,
        });
    }

    pub fn binaries(&self) -> usize {
        self.aux.iter().filter(|a| a.binary).count()
    }

    pub fn continuous(&self) -> usize {
        self.aux.len() - self.binaries()
    }

    /// Disjunctive row count with each vector equality `Σ y_l = x`
    /// counted once, and without the bounding rows of the copies.
    pub fn disjunctive_rows(&self) -> usize {
        let links = self.rows.iter().filter(|r| r.kind == RowKind::Link).count();
        let groups_of_links = if links == 0 { 0 } else { self.groups.len() };
        self.rows
            .iter()
            .filter(|r| {
                matches!(
                    r.kind,
                    RowKind::Path | RowKind::Choice | RowKind::LeafPlane | RowKind::Aggregate
                )
            })
            .count()
            + groups_of_links
    }

    /// Leaves selected by a full assignment of the indicator columns.
    pub fn indicator_columns(&self) -> Vec<usize> {
        self.groups.iter().flatten().copied().collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fragment serializes")
    }
}

/// `M_h = |β| + max over the box of |αᵀx|`, by interval arithmetic.
pub fn big_m(alpha: &[f64], beta: f64, lower: &[f64], upper: &[f64]) -> f64 {
    let reach: f64 = alpha
        .iter()
        .zip(lower.iter().zip(upper))
        .map(|(a, (l, u))| a.abs() * l.abs().max(u.abs()))
        .sum();
    beta.abs() + reach
}

/// Emits one disjunction over `leaves`: indicator per leaf, copies (or
/// big-M rows), path rows, and the choice row. Returns each leaf's
/// `(leaf id, z column, y columns)`.
fn disjunction(
    frag: &mut MilpFragment,
    scope: &Scope,
    leaves: &[LeafPolyhedron],
    mode: EncoderMode,
    tag: &str,
) -> Vec<(usize, usize, Vec<usize>)> {
    let p = scope.dim();
    let mut out = Vec::new();
    for leaf in leaves {
        let z = frag.add_aux(
            format!("z[{}{tag},{}]", scope.name, leaf.leaf_id),
            0.0,
            1.0,
            true,
            Some(leaf.leaf_id),
            AuxRole::Indicator,
        );
        let mut ys = Vec::new();
        match mode {
            EncoderMode::BigMFree => {
                for k in 0..p {
                    let lo = scope.lower[k].min(0.0);
                    let hi = scope.upper[k].max(0.0);
                    ys.push(frag.add_aux(
                        format!("y[{}{tag},{},{}]", scope.name, leaf.leaf_id, k),
                        lo,
                        hi,
                        false,
                        Some(leaf.leaf_id),
                        AuxRole::Copy(scope.active[k]),
                    ));
                }
                let path_terms = |h: &crate::tree::HyperplaneSplit| -> Vec<(Col, f64)> {
                    let mut t: Vec<(Col, f64)> = h
                        .alpha
                        .iter()
                        .enumerate()
                        .filter(|(_, a)| **a != 0.0)
                        .map(|(k, a)| (Col::Aux(ys[k]), *a))
                        .collect();
                    t.push((Col::Aux(z), -h.beta));
                    t
                };
                for h in &leaf.left {
                    frag.add_row(RowKind::Path, path_terms(h), f64::NEG_INFINITY, 0.0);
                }
                for h in &leaf.right {
                    frag.add_row(RowKind::Path, path_terms(h), 0.0, f64::INFINITY);
                }
                for k in 0..p {
                    frag.add_row(
                        RowKind::BoxLower,
                        vec![(Col::Aux(ys[k]), 1.0), (Col::Aux(z), -scope.lower[k])],
                        0.0,
                        f64::INFINITY,
                    );
                    frag.add_row(
                        RowKind::BoxUpper,
                        vec![(Col::Aux(ys[k]), 1.0), (Col::Aux(z), -scope.upper[k])],
                        f64::NEG_INFINITY,
                        0.0,
                    );
                }
            }
            EncoderMode::BigM => {
                let x_terms = |h: &crate::tree::HyperplaneSplit, m: f64, sign: f64| -> Vec<(Col, f64)> {
                    let mut t: Vec<(Col, f64)> = h
                        .alpha
                        .iter()
                        .enumerate()
                        .filter(|(_, a)| **a != 0.0)
                        .map(|(k, a)| (Col::X(scope.active[k]), *a))
                        .collect();
                    t.push((Col::Aux(z), sign * m));
                    t
                };
                // αᵀx ≤ β + M(1 − z)  ⇔  αᵀx + M z ≤ β + M
                for h in &leaf.left {
                    let m = big_m(&h.alpha, h.beta, &scope.lower, &scope.upper);
                    frag.add_row(RowKind::Path, x_terms(h, m, 1.0), f64::NEG_INFINITY, h.beta + m);
                }
                // β ≤ αᵀx + M(1 − z)  ⇔  αᵀx − M z ≥ β − M
                for h in &leaf.right {
                    let m = big_m(&h.alpha, h.beta, &scope.lower, &scope.upper);
                    frag.add_row(RowKind::Path, x_terms(h, m, -1.0), h.beta - m, f64::INFINITY);
                }
            }
        }
        out.push((leaf.leaf_id, z, ys));
    }
    if mode == EncoderMode::BigMFree {
        for k in 0..p {
            let mut terms: Vec<(Col, f64)> = out.iter().map(|(_, _, ys)| (Col::Aux(ys[k]), 1.0)).collect();
            terms.push((Col::X(scope.active[k]), -1.0));
            frag.add_row(RowKind::Link, terms, 0.0, 0.0);
        }
    }
    let group: Vec<usize> = out.iter().map(|(_, z, _)| *z).collect();
    frag.add_row(RowKind::Choice, group.iter().map(|z| (Col::Aux(*z), 1.0)).collect(), 1.0, 1.0);
    frag.groups.push(group);
    out
}

/// Feasible-leaf disjunction for `g(x) ≥ 0`.
pub fn encode_inequality(t: &HyperplaneTree, scope: &Scope, mode: EncoderMode) -> Result<MilpFragment, EncodeError> {
    check_dim(t, scope)?;
    let leaves = t.feasible_leaves();
    if leaves.is_empty() {
        return Err(EncodeError::NoFeasibleLeaf(scope.name.clone()));
    }
    let mut frag = MilpFragment::new(&scope.name, FragmentKind::Inequality);
    disjunction(&mut frag, scope, &leaves, mode, "");
    Ok(frag)
}

/// `x` lies in one feasible and one infeasible leaf polyhedron at once,
/// i.e. on a face separating the two classes.
pub fn encode_equality(t: &HyperplaneTree, scope: &Scope, mode: EncoderMode) -> Result<MilpFragment, EncodeError> {
    check_dim(t, scope)?;
    let feasible = t.feasible_leaves();
    let infeasible = t.infeasible_leaves();
    if feasible.is_empty() || infeasible.is_empty() {
        return Err(EncodeError::SingleClass(scope.name.clone()));
    }
    let mut frag = MilpFragment::new(&scope.name, FragmentKind::Equality);
    disjunction(&mut frag, scope, &feasible, mode, "+");
    disjunction(&mut frag, scope, &infeasible, mode, "-");
    Ok(frag)
}

/// Tightest plane under the data: maximizes `Σ (aᵀx_i + b)` subject to
/// `aᵀx_i + b ≤ y_i`. Returns `(a, b)`.
pub fn fit_lower_bounding_hyperplane(points: &[Vec<f64>], targets: &[f64]) -> (Vec<f64>, f64) {
    let p = points.first().map_or(0, |x| x.len());
    if points.is_empty() {
        return (vec![0.0; p], 0.0);
    }
    let ymin = targets.iter().cloned().fold(f64::INFINITY, f64::min);
    if points.len() == 1 {
        return (vec![0.0; p], targets[0]);
    }
    // Work on a unit box around the data so the slopes stay well scaled.
    let lo: Vec<f64> = (0..p).map(|k| points.iter().map(|x| x[k]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..p).map(|k| points.iter().map(|x| x[k]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let width: Vec<f64> = (0..p).map(|k| if hi[k] > lo[k] { hi[k] - lo[k] } else { 1.0 }).collect();
    let ymax = targets.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let cap = 1e4 * (ymax - ymin + ymax.abs() + ymin.abs() + 1.0);
    let mut col_lo = vec![-cap; p + 1];
    let mut col_hi = vec![cap; p + 1];
    col_lo[p] = f64::NEG_INFINITY;
    col_hi[p] = f64::INFINITY;
    let mut obj = vec![0.0; p + 1];
    let unit: Vec<Vec<f64>> = points
        .iter()
        .map(|x| (0..p).map(|k| (x[k] - lo[k]) / width[k]).collect())
        .collect();
    for u in &unit {
        for k in 0..p {
            obj[k] -= u[k];
        }
        obj[p] -= 1.0;
    }
    let mut lp = LpInstance::new(col_lo, col_hi, obj);
    for (u, y) in unit.iter().zip(targets) {
        let mut coeffs: Vec<(usize, f64)> = u.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(k, v)| (k, *v)).collect();
        coeffs.push((p, 1.0));
        lp.add_row(coeffs, f64::NEG_INFINITY, *y);
    }
    let res = solve_lp(&lp);
    if res.status != Status::Optimal {
        return (vec![0.0; p], ymin);
    }
    let mut a: Vec<f64> = (0..p).map(|k| res.x[k] / width[k]).collect();
    let mut b = res.x[p] - (0..p).map(|k| res.x[k] * lo[k] / width[k]).sum::<f64>();
    // Back in raw coordinates, push the plane down by any rounding excess.
    let excess = points
        .iter()
        .zip(targets)
        .map(|(x, y)| b + a.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() - y)
        .fold(0.0f64, f64::max);
    b -= excess;
    for v in a.iter_mut() {
        if v.abs() < 1e-14 * cap {
            *v = 0.0;
        }
    }
    (a, b)
}

/// Surrogate value bounds: sampled range widened by 5% on each side.
pub fn value_bounds(targets: &[f64]) -> (f64, f64) {
    let lo = targets.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = targets.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let margin = if range > 0.0 { 0.05 * range } else { 0.05 * lo.abs().max(1.0) };
    (lo - margin, hi + margin)
}

/// Lower-bounding disjunction over all leaves of a regression tree:
/// `a_lᵀy_l + b_l z_l ≤ f_l`, `f_l ∈ [f̲ z_l, f̄ z_l]`, `Σ f_l = f*`.
/// `samples`/`targets` are the training data, used to fit each leaf's plane.
pub fn encode_objective(
    t: &HyperplaneTree,
    scope: &Scope,
    samples: &SampleSet,
    targets: &[f64],
) -> Result<MilpFragment, EncodeError> {
    let mut frag = MilpFragment::new(&scope.name, FragmentKind::Objective);
    value_disjunction(&mut frag, t, scope, samples, targets)?;
    Ok(frag)
}

/// Separable constraint `aᵀx + b ≥ g(x)`: the surrogate `g*` is bounded
/// below by the leaf planes and above by the affine part. `affine` holds
/// problem-indexed coefficients and the constant.
pub fn encode_separable(
    t: &HyperplaneTree,
    scope: &Scope,
    samples: &SampleSet,
    targets: &[f64],
    affine: (&[f64], f64),
) -> Result<MilpFragment, EncodeError> {
    let mut frag = MilpFragment::new(&scope.name, FragmentKind::Separable);
    let value = value_disjunction(&mut frag, t, scope, samples, targets)?;
    let (coeffs, constant) = affine;
    let mut terms: Vec<(Col, f64)> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, a)| **a != 0.0)
        .map(|(k, a)| (Col::X(k), *a))
        .collect();
    terms.push((Col::Aux(value), -1.0));
    frag.add_row(RowKind::Separable, terms, -constant, f64::INFINITY);
    Ok(frag)
}

fn value_disjunction(
    frag: &mut MilpFragment,
    t: &HyperplaneTree,
    scope: &Scope,
    samples: &SampleSet,
    targets: &[f64],
) -> Result<usize, EncodeError> {
    check_dim(t, scope)?;
    if t.mode != TreeMode::Regress {
        return Err(EncodeError::NotRegressor(scope.name.clone()));
    }
    let leaves = t.leaf_polyhedra();
    let (fmin, fmax) = value_bounds(targets);
    let picked = disjunction(frag, scope, &leaves, EncoderMode::BigMFree, "");
    let mut shares = Vec::new();
    for (leaf, (leaf_id, z, ys)) in leaves.iter().zip(&picked) {
        let idx: Vec<usize> = (0..samples.len())
            .filter(|&i| t.leaf_id(&samples.points[i]) == *leaf_id)
            .collect();
        let (a, b) = if idx.is_empty() {
            match &leaf.payload {
                LeafPayload::Linear { weights, intercept } => (weights.clone(), *intercept),
                LeafPayload::Class { .. } => (vec![0.0; scope.dim()], fmin),
            }
        } else {
            let pts: Vec<Vec<f64>> = idx.iter().map(|&i| samples.points[i].clone()).collect();
            let ys_t: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
            fit_lower_bounding_hyperplane(&pts, &ys_t)
        };
        let f = frag.add_aux(
            format!("f[{},{}]", scope.name, leaf_id),
            fmin.min(0.0),
            fmax.max(0.0),
            false,
            Some(*leaf_id),
            AuxRole::LeafValue,
        );
        let mut terms: Vec<(Col, f64)> = a
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(k, c)| (Col::Aux(ys[k]), *c))
            .collect();
        terms.push((Col::Aux(*z), b));
        terms.push((Col::Aux(f), -1.0));
        frag.add_row(RowKind::LeafPlane, terms, f64::NEG_INFINITY, 0.0);
        frag.add_row(RowKind::LeafBound, vec![(Col::Aux(f), 1.0), (Col::Aux(*z), -fmin)], 0.0, f64::INFINITY);
        frag.add_row(RowKind::LeafBound, vec![(Col::Aux(f), 1.0), (Col::Aux(*z), -fmax)], f64::NEG_INFINITY, 0.0);
        shares.push(f);
    }
    let value = frag.add_aux(format!("fstar[{}]", scope.name), fmin, fmax, false, None, AuxRole::Value);
    let mut terms: Vec<(Col, f64)> = shares.iter().map(|f| (Col::Aux(*f), 1.0)).collect();
    terms.push((Col::Aux(value), -1.0));
    frag.add_row(RowKind::Aggregate, terms, 0.0, 0.0);
    frag.value_var = Some(value);
    Ok(value)
}

fn check_dim(t: &HyperplaneTree, scope: &Scope) -> Result<(), EncodeError> {
    if t.dim != scope.dim() || scope.lower.len() != scope.dim() || scope.upper.len() != scope.dim() {
        return Err(EncodeError::Mismatch(format!(
            "{}: tree over {} variables, scope over {}",
            scope.name,
            t.dim,
            scope.dim()
        )));
    }
    Ok(())
}
