//! Expression trees for explicit constraint and objective bodies.
//!
//! Expressions are evaluated generically over [`Scalar`], so the same tree
//! serves plain `f64` evaluation and forward-mode differentiation with
//! [`Dual`](crate::repair::Dual).

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Unary operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnaryOp {
    Neg,
    Exp,
    Log,
    Sqrt,
    Abs,
    Sin,
    Cos,
    Tan,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Abs => "abs",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tan => "tan",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => UnaryOp::Exp,
            "log" | "ln" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            "abs" => UnaryOp::Abs,
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "tan" => UnaryOp::Tan,
            _ => return None,
        })
    }
}

/// Binary operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }
}

/// Operators taking two or more arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NaryOp {
    Min,
    Max,
}

impl NaryOp {
    pub fn name(self) -> &'static str {
        match self {
            NaryOp::Min => "min",
            NaryOp::Max => "max",
        }
    }
}

/// Expression AST over variables referenced by problem index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Nary(NaryOp, Vec<Expr>),
}

/// Numeric type an expression can be evaluated over.
pub trait Scalar:
    Copy
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
{
    fn constant(v: f64) -> Self;
    fn value(&self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tan(self) -> Self;
    fn powf(self, e: Self) -> Self;
    /// Whether every component (value and any derivative parts) is finite.
    fn is_finite(&self) -> bool;
}

impl Scalar for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn tan(self) -> Self {
        f64::tan(self)
    }
    fn powf(self, e: Self) -> Self {
        pow_real(self, e)
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

/// `powi` for integral exponents keeps `x^3` exact on negative bases.
pub(crate) fn pow_real(base: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() <= i32::MAX as f64 {
        base.powi(e as i32)
    } else {
        base.powf(e)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error in `{subexpr}`: {reason}")]
    Domain { subexpr: String, reason: String },
    #[error("non-finite result in `{subexpr}`")]
    NonFinite { subexpr: String },
    #[error("variable index {index} outside point of dimension {dim}")]
    Dimension { index: usize, dim: usize },
}

impl Expr {
    pub fn var(i: usize) -> Self {
        Expr::Var(i)
    }

    pub fn constant(v: f64) -> Self {
        Expr::Const(v)
    }

    pub fn unary(op: UnaryOp, e: Expr) -> Self {
        Expr::Unary(op, Box::new(e))
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Self {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    /// Evaluates at `point`, which is indexed by problem variable index.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        self.eval_with(&|i| point.get(i).copied(), point.len())
    }

    /// Generic evaluation; `lookup` maps a variable index to its value.
    pub fn eval_with<T: Scalar>(
        &self,
        lookup: &dyn Fn(usize) -> Option<T>,
        dim: usize,
    ) -> Result<T, EvalError> {
        let out = match self {
            Expr::Const(c) => T::constant(*c),
            Expr::Var(i) => lookup(*i).ok_or(EvalError::Dimension { index: *i, dim })?,
            Expr::Unary(op, a) => {
                let v = a.eval_with(lookup, dim)?;
                let x = v.value();
                match op {
                    UnaryOp::Neg => -v,
                    UnaryOp::Exp => v.exp(),
                    UnaryOp::Log => {
                        if x <= 0.0 {
                            return Err(self.domain(format!("log of non-positive value {x}")));
                        }
                        v.ln()
                    }
                    UnaryOp::Sqrt => {
                        if x < 0.0 {
                            return Err(self.domain(format!("sqrt of negative value {x}")));
                        }
                        v.sqrt()
                    }
                    UnaryOp::Abs => v.abs(),
                    UnaryOp::Sin => v.sin(),
                    UnaryOp::Cos => v.cos(),
                    UnaryOp::Tan => v.tan(),
                }
            }
            Expr::Binary(op, a, b) => {
                let u = a.eval_with(lookup, dim)?;
                let w = b.eval_with(lookup, dim)?;
                match op {
                    BinaryOp::Add => u + w,
                    BinaryOp::Sub => u - w,
                    BinaryOp::Mul => u * w,
                    BinaryOp::Div => {
                        if w.value() == 0.0 {
                            return Err(self.domain("division by zero".to_string()));
                        }
                        u / w
                    }
                    BinaryOp::Pow => {
                        let (base, e) = (u.value(), w.value());
                        if base < 0.0 && e.fract() != 0.0 {
                            return Err(self.domain(format!(
                                "negative base {base} raised to non-integer power {e}"
                            )));
                        }
                        if base == 0.0 && e < 0.0 {
                            return Err(self.domain("zero raised to a negative power".to_string()));
                        }
                        u.powf(w)
                    }
                }
            }
            Expr::Nary(op, args) => {
                let mut best: Option<T> = None;
                for a in args {
                    let v = a.eval_with(lookup, dim)?;
                    best = Some(match best {
                        None => v,
                        Some(b) => {
                            let take = match op {
                                NaryOp::Min => v.value() < b.value(),
                                NaryOp::Max => v.value() > b.value(),
                            };
                            if take {
                                v
                            } else {
                                b
                            }
                        }
                    });
                }
                best.ok_or_else(|| self.domain("empty argument list".to_string()))?
            }
        };
        if !out.is_finite() {
            return Err(EvalError::NonFinite {
                subexpr: self.to_string(),
            });
        }
        Ok(out)
    }

    fn domain(&self, reason: String) -> EvalError {
        EvalError::Domain {
            subexpr: self.to_string(),
            reason,
        }
    }

    /// Sorted set of referenced variable indices.
    pub fn variables(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<usize>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(i) => {
                out.insert(*i);
            }
            Expr::Unary(_, a) => a.collect_vars(out),
            Expr::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Nary(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    /// Rewrites variable indices through `map`.
    pub fn remap(&self, map: &dyn Fn(usize) -> usize) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(i) => Expr::Var(map(*i)),
            Expr::Unary(op, a) => Expr::unary(*op, a.remap(map)),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.remap(map), b.remap(map)),
            Expr::Nary(op, args) => Expr::Nary(*op, args.iter().map(|a| a.remap(map)).collect()),
        }
    }

    /// Returns `(coefficients, constant)` when the expression is affine in
    /// the first `nvars` variables.
    pub fn as_affine(&self, nvars: usize) -> Option<(Vec<f64>, f64)> {
        match self {
            Expr::Const(c) => Some((vec![0.0; nvars], *c)),
            Expr::Var(i) => {
                if *i >= nvars {
                    return None;
                }
                let mut a = vec![0.0; nvars];
                a[*i] = 1.0;
                Some((a, 0.0))
            }
            Expr::Unary(UnaryOp::Neg, e) => {
                let (a, b) = e.as_affine(nvars)?;
                Some((a.into_iter().map(|v| -v).collect(), -b))
            }
            Expr::Unary(..) | Expr::Nary(..) => self.constant_value().map(|c| (vec![0.0; nvars], c)),
            Expr::Binary(op, l, r) => match op {
                BinaryOp::Add | BinaryOp::Sub => {
                    let (a1, b1) = l.as_affine(nvars)?;
                    let (a2, b2) = r.as_affine(nvars)?;
                    let s = if *op == BinaryOp::Add { 1.0 } else { -1.0 };
                    Some((
                        a1.iter().zip(&a2).map(|(x, y)| x + s * y).collect(),
                        b1 + s * b2,
                    ))
                }
                BinaryOp::Mul => {
                    if let Some(c) = l.constant_value() {
                        let (a, b) = r.as_affine(nvars)?;
                        Some((a.into_iter().map(|v| c * v).collect(), c * b))
                    } else if let Some(c) = r.constant_value() {
                        let (a, b) = l.as_affine(nvars)?;
                        Some((a.into_iter().map(|v| c * v).collect(), c * b))
                    } else {
                        None
                    }
                }
                BinaryOp::Div => {
                    let c = r.constant_value()?;
                    if c == 0.0 {
                        return None;
                    }
                    let (a, b) = l.as_affine(nvars)?;
                    Some((a.into_iter().map(|v| v / c).collect(), b / c))
                }
                BinaryOp::Pow => {
                    if let Some(c) = self.constant_value() {
                        return Some((vec![0.0; nvars], c));
                    }
                    if r.constant_value() == Some(1.0) {
                        l.as_affine(nvars)
                    } else {
                        None
                    }
                }
            },
        }
    }

    /// Value of a variable-free subtree.
    pub fn constant_value(&self) -> Option<f64> {
        if !self.variables().is_empty() {
            return None;
        }
        self.eval(&[]).ok()
    }

    /// Flattens a top-level chain of `+`/`-` into signed terms.
    pub fn sum_terms(&self) -> Vec<(f64, Expr)> {
        let mut out = Vec::new();
        self.push_terms(1.0, &mut out);
        out
    }

    fn push_terms(&self, sign: f64, out: &mut Vec<(f64, Expr)>) {
        match self {
            Expr::Binary(BinaryOp::Add, a, b) => {
                a.push_terms(sign, out);
                b.push_terms(sign, out);
            }
            Expr::Binary(BinaryOp::Sub, a, b) => {
                a.push_terms(sign, out);
                b.push_terms(-sign, out);
            }
            Expr::Unary(UnaryOp::Neg, a) => a.push_terms(-sign, out),
            other => out.push((sign, other.clone())),
        }
    }

    /// Rebuilds a sum from signed terms; an empty list becomes `0`.
    pub fn from_terms(terms: &[(f64, Expr)]) -> Expr {
        let mut acc: Option<Expr> = None;
        for (s, t) in terms {
            acc = Some(match acc {
                None if *s < 0.0 => Expr::unary(UnaryOp::Neg, t.clone()),
                None => t.clone(),
                Some(a) if *s < 0.0 => Expr::binary(BinaryOp::Sub, a, t.clone()),
                Some(a) => Expr::binary(BinaryOp::Add, a, t.clone()),
            });
        }
        acc.unwrap_or(Expr::Const(0.0))
    }

    /// Canonical, fully parenthesized text using `names` for variables.
    pub fn render(&self, names: &[String]) -> String {
        let mut s = String::new();
        self.write_to(&mut s, &|i| names.get(i).cloned().unwrap_or_else(|| format!("v{i}")));
        s
    }

    fn write_to(&self, s: &mut String, name: &dyn Fn(usize) -> String) {
        match self {
            Expr::Const(c) => {
                if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) {
                    s.push_str(&format!("(-{:?})", -c));
                } else {
                    s.push_str(&format!("{c:?}"));
                }
            }
            Expr::Var(i) => s.push_str(&name(*i)),
            Expr::Unary(UnaryOp::Neg, a) => {
                s.push_str("(-");
                a.write_to(s, name);
                s.push(')');
            }
            Expr::Unary(op, a) => {
                s.push_str(op.name());
                s.push('(');
                a.write_to(s, name);
                s.push(')');
            }
            Expr::Binary(op, a, b) => {
                s.push('(');
                a.write_to(s, name);
                s.push(' ');
                s.push_str(op.symbol());
                s.push(' ');
                b.write_to(s, name);
                s.push(')');
            }
            Expr::Nary(op, args) => {
                s.push_str(op.name());
                s.push('(');
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        s.push_str(", ");
                    }
                    a.write_to(s, name);
                }
                s.push(')');
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.write_to(&mut s, &|i| format!("x[{i}]"));
        f.write_str(&s)
    }
}
