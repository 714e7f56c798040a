//! Problem representation: variables, linear rows, nonlinear constraints and
//! the objective, plus JSON loading and bound tightening.

mod bounds;
pub mod expr;
pub mod parse;
mod schema;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

pub use bounds::{tighten_all_bounds, tighten_bounds};
pub use expr::{BinaryOp, EvalError, Expr, NaryOp, Scalar, UnaryOp};
pub use parse::{parse_expression, ParseError, ParseErrorKind};
pub use schema::{
    standardize, BestKnown, ProblemError, RawLinear, RawNonlinear, RawObjective, RawProblem,
    RawSense, RawVariable,
};

/// Decision variable with (possibly infinite) bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integral: bool,
}

impl Variable {
    pub fn continuous(name: &str, lower: f64, upper: f64) -> Self {
        Variable {
            name: name.to_string(),
            lower,
            upper,
            integral: false,
        }
    }

    pub fn integer(name: &str, lower: f64, upper: f64) -> Self {
        Variable {
            integral: true,
            ..Variable::continuous(name, lower, upper)
        }
    }

    pub fn is_boxed(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }
}

/// Sense of a nonlinear constraint: `body ≥ 0` or `body = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Geq,
    Eq,
}

/// Feasibility oracle over the active variables, ordered by problem index.
/// `None` means the point is outside the oracle's domain.
pub type BlackBoxFn = Arc<dyn Fn(&[f64]) -> Option<f64> + Send + Sync>;

/// Named black-box functions available to problem files.
pub type BlackBoxRegistry = BTreeMap<String, BlackBoxFn>;

#[derive(Clone)]
pub struct BlackBox {
    pub id: String,
    pub func: BlackBoxFn,
}

impl fmt::Debug for BlackBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BlackBox({})", self.id)
    }
}

impl PartialEq for BlackBox {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Explicit(Expr),
    BlackBox(BlackBox),
}

/// `a·x + b - g(x)`: the body split into its affine part and a nonlinear
/// remainder `g`, so the constraint reads `a·x + b ≥ g(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Separable {
    pub coeffs: Vec<f64>,
    pub constant: f64,
    pub g: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearConstraint {
    pub name: String,
    pub body: Body,
    pub sense: Sense,
    pub separable: Option<Separable>,
    /// Train a regressor on `g` instead of a feasibility classifier.
    pub use_regressor: bool,
    /// Sorted problem indices of the variables the body depends on.
    pub active: Vec<usize>,
}

impl NonlinearConstraint {
    /// Value at a full problem point.
    pub fn value(&self, x: &[f64]) -> Result<f64, EvalError> {
        match &self.body {
            Body::Explicit(e) => e.eval(x),
            Body::BlackBox(b) => {
                let local: Vec<f64> = self.active.iter().map(|&i| x[i]).collect();
                (b.func)(&local).filter(|v| v.is_finite()).ok_or_else(|| EvalError::Domain {
                    subexpr: b.id.clone(),
                    reason: "black box returned no value".into(),
                })
            }
        }
    }

    /// Value from the active-variable coordinates only.
    pub fn value_local(&self, local: &[f64], n: usize) -> Result<f64, EvalError> {
        match &self.body {
            Body::Explicit(e) => {
                let active = &self.active;
                e.eval_with(
                    &|i| active.binary_search(&i).ok().map(|k| local[k]),
                    n,
                )
            }
            Body::BlackBox(b) => {
                (b.func)(local).filter(|v| v.is_finite()).ok_or_else(|| EvalError::Domain {
                    subexpr: b.id.clone(),
                    reason: "black box returned no value".into(),
                })
            }
        }
    }

    pub fn is_explicit(&self) -> bool {
        matches!(self.body, Body::Explicit(_))
    }
}

/// Linear row `coeffs·x (≥ | =) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub name: String,
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl LinearRow {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum()
    }
}

/// Minimization objective.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    Linear { coeffs: Vec<f64>, constant: f64 },
    Nonlinear { expr: Expr, active: Vec<usize> },
}

impl Objective {
    pub fn value(&self, x: &[f64]) -> Result<f64, EvalError> {
        match self {
            Objective::Linear { coeffs, constant } => {
                Ok(constant + coeffs.iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
            }
            Objective::Nonlinear { expr, .. } => expr.eval(x),
        }
    }
}

/// Problem in standard form: minimize `f(x)` subject to `Ax ≥ b`, `Cx = d`,
/// nonlinear constraints and variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardFormProblem {
    pub name: String,
    pub variables: Vec<Variable>,
    pub inequalities: Vec<LinearRow>,
    pub equalities: Vec<LinearRow>,
    pub nonlinear: Vec<NonlinearConstraint>,
    pub objective: Objective,
    pub best_known: Option<BestKnown>,
}

impl StandardFormProblem {
    pub fn n(&self) -> usize {
        self.variables.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.lower).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.upper).collect()
    }

    pub fn integral(&self) -> Vec<bool> {
        self.variables.iter().map(|v| v.integral).collect()
    }

    /// Variable ranges, using `max(ub) - min(lb)` over finite bounds where a
    /// variable's own range is missing.
    pub fn ranges(&self) -> Vec<f64> {
        let max_ub = self
            .variables
            .iter()
            .map(|v| v.upper)
            .filter(|u| u.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        let min_lb = self
            .variables
            .iter()
            .map(|v| v.lower)
            .filter(|l| l.is_finite())
            .fold(f64::INFINITY, f64::min);
        let fallback = if max_ub.is_finite() && min_lb.is_finite() && max_ub > min_lb {
            max_ub - min_lb
        } else {
            1.0
        };
        self.variables
            .iter()
            .map(|v| {
                let r = v.upper - v.lower;
                if r.is_finite() && r > 0.0 {
                    r
                } else {
                    fallback
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_fall_back_to_widest_span() {
        let p = StandardFormProblem {
            name: "t".into(),
            variables: vec![
                Variable::continuous("a", 0.0, 2.0),
                Variable::continuous("b", -1.0, f64::INFINITY),
                Variable::continuous("c", 1.0, 5.0),
            ],
            inequalities: vec![],
            equalities: vec![],
            nonlinear: vec![],
            objective: Objective::Linear {
                coeffs: vec![0.0; 3],
                constant: 0.0,
            },
            best_known: None,
        };
        assert_eq!(p.ranges(), vec![2.0, 6.0, 4.0]);
    }
}
