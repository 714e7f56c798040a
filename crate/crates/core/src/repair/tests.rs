use std::sync::Arc;

use super::*;
use crate::problem::{standardize, BlackBoxRegistry, RawProblem};

fn problem(json: &str) -> StandardFormProblem {
    problem_with(json, &BlackBoxRegistry::new())
}

fn problem_with(json: &str, reg: &BlackBoxRegistry) -> StandardFormProblem {
    let raw: RawProblem = serde_json::from_str(json).unwrap();
    standardize(&raw, reg).unwrap()
}

fn demo() -> StandardFormProblem {
    problem(
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
}

fn repairer(p: &StandardFormProblem, params: PgdParams) -> Repairer<'_> {
    Repairer {
        p,
        params,
        lower: p.lower(),
        upper: p.upper(),
        ranges: p.ranges(),
        integral: p.integral(),
    }
}

#[test]
fn linearize_branches() {
    let rows = linearize_value(0, Sense::Geq, 1.0, &[1.0, 0.0]);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].relax, Relax::None);
    assert_eq!(rows[0].grad, vec![1.0, 0.0]);

    let rows = linearize_value(0, Sense::Eq, 0.5, &[2.0]);
    let kinds: Vec<Relax> = rows.iter().map(|r| r.relax).collect();
    assert_eq!(kinds, vec![Relax::MuLower, Relax::MuUpper]);
    assert!(rows.iter().all(|r| r.value == 0.5 && r.grad == vec![2.0]));

    assert_eq!(linearize_value(0, Sense::Geq, -1e-9, &[1.0])[0].relax, Relax::Lambda);
    assert_eq!(linearize_value(0, Sense::Geq, -3.0, &[1.0])[0].relax, Relax::Lambda);
}

#[test]
fn linearize_constraint() {
    let p = demo();
    let x = [1.0, 1.0, 0.0, 1.0, 0.0, 0.0];
    let rows = linearize(&p.nonlinear[0], 0, &x, &p.lower(), &p.upper(), &p.ranges()).unwrap();
    assert_eq!(rows[0].relax, Relax::None);
    assert!((rows[0].value - 0.8 * 2f64.ln()).abs() < 1e-14);
    assert!((rows[0].grad[1] + 0.56).abs() < 1e-14);
}

#[test]
fn step_schedule() {
    let prm = PgdParams::default();
    assert_eq!(prm.step_bound(0), 1e-3);
    assert!((prm.step_bound(100) - 1e-3 * (-2f64).exp()).abs() < 1e-18);
    assert!(PgdParams { alpha: 0.0, ..prm }.validate().is_err());
    assert!(PgdParams { max_iters: 0, ..prm }.validate().is_err());
    assert!(prm.validate().is_ok());
}

#[test]
fn descent_step_fills_the_ball() {
    let p = problem(r#"{"variables": [{"name": "x", "lb": 0, "ub": 1}], "objective": {"expr": "x"}}"#);
    let prm = PgdParams::default();
    let rp = repairer(&p, prm);
    let s = rp.evaluate(vec![0.5]);
    let x = rp.step(&s, Mode::Descent, 0).unwrap();
    assert!((x[0] - (0.5 - 1e-3f64.sqrt())).abs() < 1e-8, "{x:?}");
    let x = rp.step(&s, Mode::Descent, 100).unwrap();
    assert!((0.5 - x[0] - prm.step_bound(100).sqrt()).abs() < 1e-8);
}

#[test]
fn projection_reduces_violation() {
    let p = problem(
        r#"{"variables": [{"name": "a", "lb": -2, "ub": 2}, {"name": "b", "lb": -2, "ub": 2}],
            "nonlinear": [{"name": "disk", "expr": "1 - a^2 - b^2", "sense": ">="}],
            "objective": {"expr": "0*a"}}"#,
    );
    let rp = repairer(&p, PgdParams::default());
    let s = rp.evaluate(vec![1.0, 1.0]);
    assert!(!s.check.feasible);
    let x = rp.step(&s, Mode::Projection, 0).unwrap();
    let after = p.nonlinear[0].value(&x).unwrap();
    assert!(after > s.values[0], "{after}");

    // heavy distance penalty freezes the point
    let rp = repairer(
        &p,
        PgdParams {
            beta: 1e16,
            ..PgdParams::default()
        },
    );
    let x = rp.step(&s, Mode::Projection, 0).unwrap();
    assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6, "{x:?}");

    let r = repair(&p, &[1.0, 1.0], &PgdParams::default()).unwrap();
    assert!(r.feasible);
    assert!(p.nonlinear[0].value(&r.x).unwrap() >= 0.0);
}

#[test]
fn local_optimum_start_stays_put() {
    let p = problem(
        r#"{"variables": [{"name": "a", "lb": 0, "ub": 2}, {"name": "b", "lb": 0, "ub": 2}],
            "nonlinear": [{"name": "disk", "expr": "2 - a^2 - b^2", "sense": ">="}],
            "objective": {"expr": "-a - b"}}"#,
    );
    let r = repair(&p, &[1.0, 1.0], &PgdParams::default()).unwrap();
    assert_eq!(r.status, RepairStatus::Converged);
    assert!(r.iterations <= 2, "{}", r.iterations);
    assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
}

#[test]
fn demo_repair_from_mio_point() {
    let p = demo();
    let x0 = [0.375, 0.375, 0.379, 1.0, 0.0, 0.0];
    let r = repair(&p, &x0, &PgdParams::default()).unwrap();
    assert!(r.feasible, "{r:?}");
    assert!((r.objective + 7.021).abs() < 5e-3, "{}", r.objective);
    for (a, b) in r.x.iter().zip([0.699, 0.699, 0.530, 1.0, 0.0, 0.0]) {
        assert!((a - b).abs() < 1e-2, "{:?}", r.x);
    }
    let check = check_point(&p, &r.x, 1e-8);
    assert!(check.linear_violation <= 1e-9 && check.bound_violation == 0.0);
    assert!(r.objective <= p.objective.value(&x0).unwrap() || check.max_violation < check_point(&p, &x0, 1e-8).max_violation);

    // descent steps respect the schedule
    for w in r.trace.windows(2) {
        if w[1].mode == Mode::Descent {
            let bound = PgdParams::default().step_bound(w[1].iteration - 1);
            assert!(w[1].step_norm.powi(2) <= bound + 1e-9, "{w:?}");
        }
    }
    let csv = trace_csv(&r.trace);
    assert!(csv.starts_with("iteration,mode,objective,max_violation,step_norm\n0,start,"));
}

#[test]
fn equality_is_repaired() {
    let p = problem(
        r#"{"variables": [{"name": "a", "lb": 0, "ub": 3}, {"name": "b", "lb": 0, "ub": 3}],
            "nonlinear": [{"name": "curve", "expr": "a*b - 1", "sense": "="}],
            "objective": {"expr": "a + b"}}"#,
    );
    let r = repair(&p, &[2.0, 1.5], &PgdParams::default()).unwrap();
    assert!(r.feasible, "{r:?}");
    assert!((r.x[0] * r.x[1] - 1.0).abs() <= 1e-8);
    assert!(r.objective < 3.5 && r.objective >= 2.0 - 1e-6);
}

#[test]
fn black_box_gradients_are_flagged() {
    let mut reg = BlackBoxRegistry::new();
    let f: crate::problem::BlackBoxFn = Arc::new(|x: &[f64]| Some(1.0 - x[0] * x[0] - x[1] * x[1]));
    reg.insert("disk".into(), f);
    let p = problem_with(
        r#"{"variables": [{"name": "a", "lb": -2, "ub": 2}, {"name": "b", "lb": -2, "ub": 2}],
            "nonlinear": [{"name": "disk", "blackbox": "disk", "vars": ["a", "b"], "sense": ">="}],
            "objective": {"expr": "-a"}}"#,
        &reg,
    );
    let (v, g, approx) =
        constraint_gradient(&p.nonlinear[0], &[0.5, 0.25], &p.lower(), &p.upper(), &p.ranges()).unwrap();
    assert!(approx);
    assert!((v - 0.6875).abs() < 1e-15);
    assert!((g[0] + 1.0).abs() < 1e-6 && (g[1] + 0.5).abs() < 1e-6, "{g:?}");
    let r = repair(&p, &[0.0, 0.0], &PgdParams::default()).unwrap();
    assert!(r.approximate_gradients && r.feasible);
    assert!(r.objective < -0.9, "{}", r.objective);
}

#[test]
fn domain_errors_count_as_violations() {
    let p = problem(
        r#"{"variables": [{"name": "a", "lb": -1, "ub": 1}],
            "nonlinear": [{"name": "root", "expr": "sqrt(a) - 0.5", "sense": ">="}],
            "objective": {"expr": "a"}}"#,
    );
    let c = check_point(&p, &[-0.5], 1e-8);
    assert!(!c.feasible);
    assert_eq!(c.nonlinear[0].value, None);
    assert!(repair(&p, &[0.5], &PgdParams::default()).unwrap().feasible);
    assert!(matches!(
        repair(&p, &[0.5, 0.1], &PgdParams::default()),
        Err(RepairError::Dimension { .. })
    ));
}
