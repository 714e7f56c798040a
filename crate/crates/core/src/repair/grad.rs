use super::dual::Dual;
use crate::problem::{Body, EvalError, Expr, NonlinearConstraint, Objective};

/// Value and full-length gradient of `e` at `x`, one seeded forward pass
/// per variable in `active`.
pub fn expr_gradient(e: &Expr, x: &[f64], active: &[usize]) -> Result<(f64, Vec<f64>), EvalError> {
    let n = x.len();
    let mut grad = vec![0.0; n];
    let mut value = if active.is_empty() { Some(e.eval(x)?) } else { None };
    for &k in active {
        let out = e.eval_with(
            &|i| x.get(i).map(|&v| Dual::new(v, if i == k { 1.0 } else { 0.0 })),
            n,
        )?;
        value.get_or_insert(out.v);
        grad[k] = out.d;
    }
    Ok((value.expect("value set"), grad))
}

/// Constraint gradient. Black boxes use central differences with step
/// `1e-6·range`, one-sided at the box; the flag marks such approximations.
pub fn constraint_gradient(
    c: &NonlinearConstraint,
    x: &[f64],
    lower: &[f64],
    upper: &[f64],
    ranges: &[f64],
) -> Result<(f64, Vec<f64>, bool), EvalError> {
    match &c.body {
        Body::Explicit(e) => expr_gradient(e, x, &c.active).map(|(v, g)| (v, g, false)),
        Body::BlackBox(_) => {
            let n = x.len();
            let mut local: Vec<f64> = c.active.iter().map(|&i| x[i]).collect();
            let value = c.value_local(&local, n)?;
            let mut grad = vec![0.0; n];
            for (j, &k) in c.active.iter().enumerate() {
                let h = 1e-6 * ranges[k];
                let x0 = local[j];
                let hi = (x0 + h).min(upper[k]);
                let lo = (x0 - h).max(lower[k]);
                local[j] = hi;
                let fh = if hi > x0 { c.value_local(&local, n)? } else { value };
                local[j] = lo;
                let fl = if lo < x0 { c.value_local(&local, n)? } else { value };
                local[j] = x0;
                if hi > lo {
                    grad[k] = (fh - fl) / (hi - lo);
                }
            }
            Ok((value, grad, true))
        }
    }
}

pub fn objective_gradient(obj: &Objective, x: &[f64]) -> Result<(f64, Vec<f64>), EvalError> {
    match obj {
        Objective::Linear { coeffs, constant } => {
            let v = constant + coeffs.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
            Ok((v, coeffs.clone()))
        }
        Objective::Nonlinear { expr, active } => expr_gradient(expr, x, active),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::parse_expression;

    fn names(k: usize) -> Vec<String> {
        (1..=k).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn square_at_three() {
        let e = parse_expression("x1^2", &names(1)).unwrap();
        let (v, g) = expr_gradient(&e, &[3.0], &[0]).unwrap();
        assert_eq!(v, 9.0);
        assert_eq!(g, vec![6.0]);
    }

    #[test]
    fn demo_g1_gradient() {
        let e = parse_expression("0.8*log(x2 + 1) + 0.96*log(x1 - x2 + 1) - 0.8*x3", &names(3)).unwrap();
        let (_, g) = expr_gradient(&e, &[1.0, 1.0, 0.0], &[0, 1, 2]).unwrap();
        let want = [0.96, -0.56, -0.8];
        for (a, b) in g.iter().zip(want) {
            assert!((a - b).abs() < 1e-14, "{g:?}");
        }
    }

    #[test]
    fn log_at_zero_is_a_domain_error() {
        let e = parse_expression("log(x1)", &names(1)).unwrap();
        assert!(expr_gradient(&e, &[0.0], &[0]).is_err());
    }
}
