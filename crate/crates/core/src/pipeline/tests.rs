use super::*;
use crate::backend::solve_lp;
use crate::problem::{standardize, BlackBoxRegistry, RawProblem};

fn problem(json: &str) -> StandardFormProblem {
    let raw: RawProblem = serde_json::from_str(json).unwrap();
    standardize(&raw, &BlackBoxRegistry::new()).unwrap()
}

const DEMO: &str = r#"{
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
}"#;

#[test]
fn seeds_are_distinct() {
    let mut seen: Vec<u64> = (0..100).map(|k| derive_seed(7, k)).collect();
    seen.sort_unstable();
    seen.dedup();
    assert_eq!(seen.len(), 100);
    assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    assert_ne!(derive_seed(7, 3), derive_seed(8, 3));
}

#[test]
fn linear_problem_short_circuits() {
    let p = problem(
        r#"{"name": "lp",
            "variables": [{"name": "a", "lb": 0, "ub": 4}, {"name": "b", "lb": 0, "ub": 4}],
            "nonlinear": [{"expr": "a + 2*b", "sense": ">=", "rhs": 3},
                          {"expr": "3*a + b", "sense": ">=", "rhs": 4}],
            "objective": {"expr": "2*a + 3*b"}}"#,
    );
    let r = solve_global(&p, &PipelineConfig::default()).unwrap();
    assert!(r.models.is_empty() && r.repair.is_none());
    let direct = solve_lp(&assemble(&p, &p.lower(), &p.upper(), &[], &[]).unwrap().milp.lp);
    assert_eq!(r.x, direct.x);
    assert!((r.objective - direct.objective).abs() < 1e-12);
    assert!(r.feasible);
}

#[test]
fn check_reports_violations() {
    let p = problem(DEMO);
    let mid = [1.0, 1.0, 0.5, 0.5, 0.5, 0.5];
    let a = check_solution(&p, &mid, 1e-8);
    assert_eq!(a, check_solution(&p, &mid, 1e-8));
    assert!((a.nonlinear[0].value.unwrap() - (0.8 * 2f64.ln() - 0.4)).abs() < 1e-15);
    assert!((a.nonlinear[1].value.unwrap() - (2f64.ln() - 0.5 - 1.0 + 2.0)).abs() < 1e-15);
    assert!(a.feasible);

    let corner = [0.0, 0.0, 1.0, 0.0, 0.0, 1.0];
    let b = check_solution(&p, &corner, 1e-8);
    assert!(!b.feasible);
    let violated: Vec<&str> = b.nonlinear.iter().filter(|c| c.violation > 0.0).map(|c| c.name.as_str()).collect();
    assert_eq!(violated, vec!["g1", "g2"]);
    assert!((b.nonlinear[1].violation - 1.0).abs() < 1e-15);
}

#[test]
fn surrogate_has_two_classifiers() {
    let p = problem(DEMO);
    let mut t = StageTimings::default();
    let s = build_surrogate(&p, &PipelineConfig::default(), 3, 1, &mut t).unwrap();
    let kinds: Vec<ModelKind> = s.models.iter().map(|m| m.kind).collect();
    assert_eq!(kinds, vec![ModelKind::Classifier, ModelKind::Classifier]);
    // corners + OLH + kNN
    assert!(s.models[0].data.len() > 8 + 400);
    assert_eq!(s.fragments.len(), 2);
    assert_eq!(s.counts.binaries, s.fragments.iter().map(|f| f.binaries()).sum::<usize>());
    assert!(s.models.iter().all(|m| m.loss < 0.05));
}

#[test]
fn demo_end_to_end() {
    let p = problem(DEMO);
    let cfg = PipelineConfig {
        seed: 1,
        ..PipelineConfig::default()
    };
    let r = solve_global(&p, &cfg).unwrap();
    assert!(r.feasible, "{}", r.to_json());
    assert!(r.objective <= -6.9, "{}", r.objective);
    assert!(r.check.max_violation <= 1e-6);
    assert!(r.objective <= r.milp.true_objective || r.max_violation < r.milp.max_violation);
    let again = solve_global(&p, &cfg).unwrap();
    assert_eq!(r.to_json(), again.to_json());
}
