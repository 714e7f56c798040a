//! JSON problem files and conversion into standard form.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::expr::{BinaryOp, Expr, UnaryOp};
use super::parse::{parse_expression, ParseError};
use super::{
    BlackBox, BlackBoxRegistry, Body, LinearRow, NonlinearConstraint, Objective, Sense, Separable,
    StandardFormProblem, Variable,
};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("variable `{name}` has lower bound {lower} above upper bound {upper}")]
    InvertedBounds { name: String, lower: f64, upper: f64 },
    #[error("{context}: unknown variable `{name}`")]
    UnknownVariable { context: String, name: String },
    #[error("{context}: {source}")]
    Parse {
        context: String,
        #[source]
        source: ParseError,
    },
    #[error("{context}: unknown black box `{id}`")]
    UnknownBlackBox { context: String, id: String },
    #[error("{context}: give exactly one of `expr` and `blackbox`")]
    BodyChoice { context: String },
    #[error("{context}: black box needs a non-empty `vars` list")]
    BlackBoxVars { context: String },
    #[error("linear constraints are infeasible")]
    InfeasibleLinear,
    #[error("variable `{0}` cannot be bounded: no finite declared bound and the linear rows leave it unbounded")]
    Unbounded(String),
}

/// Comparison operator in problem files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RawSense {
    #[serde(rename = ">=")]
    Geq,
    #[serde(rename = "<=")]
    Leq,
    #[serde(rename = "=")]
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawVariable {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lb: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ub: Option<f64>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub integer: bool,
}

/// `Σ coeffs[name]·name (sense) rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLinear {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub coeffs: BTreeMap<String, f64>,
    pub sense: RawSense,
    #[serde(default)]
    pub rhs: f64,
}

/// `expr (sense) rhs`, or a black box over `vars`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawNonlinear {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blackbox: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vars: Option<Vec<String>>,
    pub sense: RawSense,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub rhs: f64,
    /// Approximate `g` in `a·x + b ≥ g(x)` with a regression tree.
    #[serde(default, skip_serializing_if = "is_false")]
    pub separable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawObjective {
    /// Minimized expression.
    pub expr: String,
}

/// Reference solution shipped with a benchmark file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BestKnown {
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawProblem {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub variables: Vec<RawVariable>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub linear: Vec<RawLinear>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nonlinear: Vec<RawNonlinear>,
    pub objective: RawObjective,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_known: Option<BestKnown>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

fn body_with_rhs(expr: Expr, sense: RawSense, rhs: f64) -> Expr {
    match (sense, rhs == 0.0) {
        (RawSense::Leq, true) => Expr::unary(UnaryOp::Neg, expr),
        (RawSense::Leq, false) => Expr::binary(BinaryOp::Sub, Expr::Const(rhs), expr),
        (_, true) => expr,
        (_, false) => Expr::binary(BinaryOp::Sub, expr, Expr::Const(rhs)),
    }
}

/// Splits a body into affine terms and a nonlinear remainder `g` with
/// `body = a·x + b - g(x)`. `None` when there is no non-affine term.
fn split_separable(body: &Expr, n: usize) -> Option<Separable> {
    let mut coeffs = vec![0.0; n];
    let mut constant = 0.0;
    let mut rest = Vec::new();
    for (sign, term) in body.sum_terms() {
        match term.as_affine(n) {
            Some((a, b)) => {
                for (c, v) in coeffs.iter_mut().zip(&a) {
                    *c += sign * v;
                }
                constant += sign * b;
            }
            None => rest.push((-sign, term)),
        }
    }
    if rest.is_empty() {
        return None;
    }
    Some(Separable {
        coeffs,
        constant,
        g: Expr::from_terms(&rest),
    })
}

/// Validates a raw problem and puts it into standard form: affine
/// constraint bodies become linear rows, the rest stay nonlinear.
pub fn standardize(
    raw: &RawProblem,
    registry: &BlackBoxRegistry,
) -> Result<StandardFormProblem, ProblemError> {
    let mut seen = BTreeSet::new();
    let mut variables = Vec::with_capacity(raw.variables.len());
    for v in &raw.variables {
        if !seen.insert(v.name.clone()) {
            return Err(ProblemError::DuplicateVariable(v.name.clone()));
        }
        let lower = v.lb.unwrap_or(f64::NEG_INFINITY);
        let upper = v.ub.unwrap_or(f64::INFINITY);
        if lower > upper {
            return Err(ProblemError::InvertedBounds {
                name: v.name.clone(),
                lower,
                upper,
            });
        }
        variables.push(Variable {
            name: v.name.clone(),
            lower,
            upper,
            integral: v.integer,
        });
    }
    let names: Vec<String> = variables.iter().map(|v| v.name.clone()).collect();
    let n = names.len();
    let index = |context: &str, name: &str| {
        names
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| ProblemError::UnknownVariable {
                context: context.to_string(),
                name: name.to_string(),
            })
    };

    let mut inequalities = Vec::new();
    let mut equalities = Vec::new();
    let mut push_row = |name: String, mut coeffs: Vec<f64>, mut rhs: f64, sense: RawSense| {
        if sense == RawSense::Leq {
            coeffs.iter_mut().for_each(|c| *c = -*c);
            rhs = -rhs;
        }
        let row = LinearRow { name, coeffs, rhs };
        if sense == RawSense::Eq {
            equalities.push(row);
        } else {
            inequalities.push(row);
        }
    };

    for (k, l) in raw.linear.iter().enumerate() {
        let name = if l.name.is_empty() {
            format!("lin{}", k + 1)
        } else {
            l.name.clone()
        };
        let mut coeffs = vec![0.0; n];
        for (v, c) in &l.coeffs {
            coeffs[index(&name, v)?] += c;
        }
        push_row(name, coeffs, l.rhs, l.sense);
    }

    let mut nonlinear = Vec::new();
    for (k, c) in raw.nonlinear.iter().enumerate() {
        let name = if c.name.is_empty() {
            format!("g{}", k + 1)
        } else {
            c.name.clone()
        };
        let sense = if c.sense == RawSense::Eq {
            Sense::Eq
        } else {
            Sense::Geq
        };
        match (&c.expr, &c.blackbox) {
            (Some(text), None) => {
                let parsed = parse_expression(text, &names).map_err(|source| ProblemError::Parse {
                    context: name.clone(),
                    source,
                })?;
                let body = body_with_rhs(parsed, c.sense, c.rhs);
                if let Some((a, b)) = body.as_affine(n) {
                    push_row(name, a, -b, if sense == Sense::Eq { RawSense::Eq } else { RawSense::Geq });
                    continue;
                }
                let separable = if sense == Sense::Geq {
                    split_separable(&body, n)
                } else {
                    None
                };
                let active: Vec<usize> = body.variables().into_iter().collect();
                let use_regressor = c.separable && separable.is_some();
                if c.separable && !use_regressor {
                    log::warn!("{name}: `separable` ignored for an equality constraint");
                }
                nonlinear.push(NonlinearConstraint {
                    name,
                    body: Body::Explicit(body),
                    sense,
                    separable,
                    use_regressor,
                    active,
                });
            }
            (None, Some(id)) => {
                let func = registry
                    .get(id)
                    .ok_or_else(|| ProblemError::UnknownBlackBox {
                        context: name.clone(),
                        id: id.clone(),
                    })?
                    .clone();
                let vars = c
                    .vars
                    .as_ref()
                    .filter(|v| !v.is_empty())
                    .ok_or_else(|| ProblemError::BlackBoxVars {
                        context: name.clone(),
                    })?;
                let mut active = vars
                    .iter()
                    .map(|v| index(&name, v))
                    .collect::<Result<Vec<_>, _>>()?;
                active.sort_unstable();
                active.dedup();
                nonlinear.push(NonlinearConstraint {
                    name,
                    body: Body::BlackBox(BlackBox {
                        id: id.clone(),
                        func,
                    }),
                    sense,
                    separable: None,
                    use_regressor: false,
                    active,
                });
            }
            _ => return Err(ProblemError::BodyChoice { context: name }),
        }
    }

    let obj = parse_expression(&raw.objective.expr, &names).map_err(|source| ProblemError::Parse {
        context: "objective".into(),
        source,
    })?;
    let objective = match obj.as_affine(n) {
        Some((coeffs, constant)) => Objective::Linear { coeffs, constant },
        None => Objective::Nonlinear {
            active: obj.variables().into_iter().collect(),
            expr: obj,
        },
    };

    Ok(StandardFormProblem {
        name: raw.name.clone(),
        variables,
        inequalities,
        equalities,
        nonlinear,
        objective,
        best_known: raw.best_known.clone(),
    })
}

fn affine_expr(coeffs: &[f64], constant: f64) -> Expr {
    let mut terms: Vec<(f64, Expr)> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(i, c)| (1.0, Expr::binary(BinaryOp::Mul, Expr::Const(*c), Expr::Var(i))))
        .collect();
    if constant != 0.0 || terms.is_empty() {
        terms.push((1.0, Expr::Const(constant)));
    }
    Expr::from_terms(&terms)
}

impl StandardFormProblem {
    /// Problem-file form of this problem; `standardize` maps it back to an
    /// identical problem.
    pub fn to_raw(&self) -> RawProblem {
        let names = self.names();
        let row = |r: &LinearRow, sense: RawSense| RawLinear {
            name: r.name.clone(),
            coeffs: r
                .coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(i, c)| (names[i].clone(), *c))
                .collect(),
            sense,
            rhs: r.rhs,
        };
        let mut linear: Vec<RawLinear> =
            self.inequalities.iter().map(|r| row(r, RawSense::Geq)).collect();
        linear.extend(self.equalities.iter().map(|r| row(r, RawSense::Eq)));
        let nonlinear = self
            .nonlinear
            .iter()
            .map(|c| {
                let sense = match c.sense {
                    Sense::Geq => RawSense::Geq,
                    Sense::Eq => RawSense::Eq,
                };
                match &c.body {
                    Body::Explicit(e) => RawNonlinear {
                        name: c.name.clone(),
                        expr: Some(e.render(&names)),
                        blackbox: None,
                        vars: None,
                        sense,
                        rhs: 0.0,
                        separable: c.use_regressor,
                    },
                    Body::BlackBox(b) => RawNonlinear {
                        name: c.name.clone(),
                        expr: None,
                        blackbox: Some(b.id.clone()),
                        vars: Some(c.active.iter().map(|&i| names[i].clone()).collect()),
                        sense,
                        rhs: 0.0,
                        separable: false,
                    },
                }
            })
            .collect();
        let objective = match &self.objective {
            Objective::Linear { coeffs, constant } => affine_expr(coeffs, *constant),
            Objective::Nonlinear { expr, .. } => expr.clone(),
        };
        RawProblem {
            name: self.name.clone(),
            description: String::new(),
            variables: self
                .variables
                .iter()
                .map(|v| RawVariable {
                    name: v.name.clone(),
                    lb: v.lower.is_finite().then_some(v.lower),
                    ub: v.upper.is_finite().then_some(v.upper),
                    integer: v.integral,
                })
                .collect(),
            linear,
            nonlinear,
            objective: RawObjective {
                expr: objective.render(&names),
            },
            best_known: self.best_known.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_raw() -> RawProblem {
        serde_json::from_str(
            r#"{
            "name": "demo",
            "variables": [
                {"name": "x1", "lb": 0, "ub": 2},
                {"name": "x2", "lb": 0, "ub": 2},
                {"name": "x3", "lb": 0, "ub": 1},
                {"name": "x4", "lb": 0, "ub": 1, "integer": true},
                {"name": "x5", "lb": 0, "ub": 1, "integer": true},
                {"name": "x6", "lb": 0, "ub": 1, "integer": true}
            ],
            "nonlinear": [
                {"name": "g1", "expr": "0.8*log(x2 + 1) + 0.96*log(x1 - x2 + 1) - 0.8*x3", "sense": ">="},
                {"name": "g2", "expr": "log(x2 + 1) + 1.2*log(x1 - x2 + 1) - x3 - 2*x6 + 2", "sense": ">="},
                {"name": "l1", "expr": "x1 - x2", "sense": ">="},
                {"name": "l2", "expr": "2*x4 - x2", "sense": ">="},
                {"name": "l3", "expr": "2*x5 - x1 + x2", "sense": ">="},
                {"name": "l4", "expr": "x4 + x5", "sense": "<=", "rhs": 1}
            ],
            "objective": {"expr": "10*x1 - 17*x3 - 5*x4 + 6*x5 + 8*x6"}
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn demo_partition() {
        let p = standardize(&demo_raw(), &BlackBoxRegistry::new()).unwrap();
        assert_eq!(p.inequalities.len(), 4);
        assert!(p.equalities.is_empty());
        assert_eq!(p.nonlinear.len(), 2);
        assert!(matches!(p.objective, Objective::Linear { .. }));
        assert_eq!(p.nonlinear[0].active, vec![0, 1, 2]);
        assert_eq!(p.nonlinear[1].active, vec![0, 1, 2, 5]);
        // x4 + x5 <= 1 becomes -x4 - x5 >= -1
        let l4 = &p.inequalities[3];
        assert_eq!(l4.coeffs, vec![0.0, 0.0, 0.0, -1.0, -1.0, 0.0]);
        assert_eq!(l4.rhs, -1.0);
        let sep = p.nonlinear[1].separable.as_ref().unwrap();
        assert_eq!(sep.coeffs, vec![0.0, 0.0, -1.0, 0.0, 0.0, -2.0]);
        assert_eq!(sep.constant, 2.0);
        let x = [0.7, 0.3, 0.2, 0.0, 1.0, 1.0];
        let lhs = sep.coeffs.iter().zip(&x).map(|(a, v)| a * v).sum::<f64>() + sep.constant;
        let body = p.nonlinear[1].value(&x).unwrap();
        assert!((lhs - sep.g.eval(&x).unwrap() - body).abs() < 1e-14);
    }

    #[test]
    fn standardize_is_idempotent() {
        let p = standardize(&demo_raw(), &BlackBoxRegistry::new()).unwrap();
        let q = standardize(&p.to_raw(), &BlackBoxRegistry::new()).unwrap();
        assert_eq!(p, q);
        let json = serde_json::to_string(&p.to_raw()).unwrap();
        let back: RawProblem = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p.to_raw());
    }

    #[test]
    fn affine_only_problem_has_no_nonlinear_part() {
        let raw: RawProblem = serde_json::from_str(
            r#"{"variables": [{"name": "a", "lb": 0}, {"name": "b"}],
                "nonlinear": [{"expr": "2*(a - b)/4 + 1", "sense": "="}],
                "objective": {"expr": "a + b"}}"#,
        )
        .unwrap();
        let p = standardize(&raw, &BlackBoxRegistry::new()).unwrap();
        assert!(p.nonlinear.is_empty());
        assert_eq!(p.equalities.len(), 1);
        assert_eq!(p.equalities[0].coeffs, vec![0.5, -0.5]);
        assert_eq!(p.equalities[0].rhs, -1.0);
    }

    #[test]
    fn schema_errors() {
        let reg = BlackBoxRegistry::new();
        let mut raw = demo_raw();
        raw.nonlinear[0].expr = Some("log(x9)".into());
        assert!(matches!(standardize(&raw, &reg), Err(ProblemError::Parse { .. })));
        let mut raw = demo_raw();
        raw.variables[1].name = "x1".into();
        assert!(matches!(standardize(&raw, &reg), Err(ProblemError::DuplicateVariable(_))));
        let mut raw = demo_raw();
        raw.nonlinear[0].blackbox = Some("bb".into());
        assert!(matches!(standardize(&raw, &reg), Err(ProblemError::BodyChoice { .. })));
    }

    #[test]
    fn black_box_constraints_keep_declared_vars() {
        let mut reg = BlackBoxRegistry::new();
        reg.insert(
            "disk".into(),
            std::sync::Arc::new(|v: &[f64]| Some(1.0 - v[0] * v[0] - v[1] * v[1])),
        );
        let raw: RawProblem = serde_json::from_str(
            r#"{"variables": [{"name": "a", "lb": -1, "ub": 1}, {"name": "b", "lb": -1, "ub": 1}],
                "nonlinear": [{"blackbox": "disk", "vars": ["b", "a"], "sense": ">="}],
                "objective": {"expr": "a"}}"#,
        )
        .unwrap();
        let p = standardize(&raw, &reg).unwrap();
        assert_eq!(p.nonlinear[0].active, vec![0, 1]);
        assert!((p.nonlinear[0].value(&[0.6, 0.0]).unwrap() - 0.64).abs() < 1e-15);
        let q = standardize(&p.to_raw(), &reg).unwrap();
        assert_eq!(p, q);
    }
}
