use std::path::{Path, PathBuf};

use serde_json::Value;
use tree_gopt::pipeline::check_solution;
use tree_gopt::problem::parse_expression;
use tree_gopt::repair::expr_gradient;
use tree_gopt_cli::{bundled_case, load_problem, parse_raw, run_cli, stub_cases, LoadError, EXIT_INFEASIBLE, EXIT_INPUT};

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["tree-gopt"];
    full.extend_from_slice(args);
    let code = run_cli(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name).display().to_string()
}

const SPEED_REDUCER_SOLUTION: [f64; 7] = [3.5, 0.7, 17.0, 7.3, 7.71532, 3.35021, 5.28665];

#[test]
fn missing_file_is_an_input_error() {
    let (code, _, err) = run(&["solve", "missing.json"]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("missing.json"), "{err}");
    assert!(matches!(load_problem(Path::new("missing.json")), Err(LoadError::Io { .. })));
}

#[test]
fn malformed_files_report_positions() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"variables\": [\n    {\"name\": \"x\", \"lb\": 0,, \"ub\": 1}\n  ]\n}\n").unwrap();
    let e = load_problem(&bad).unwrap_err();
    assert_eq!(e.position().map(|p| p.line), Some(3), "{e}");
    let (code, _, err) = run(&["solve", bad.to_str().unwrap()]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains(":3:"), "{err}");

    std::fs::write(
        &bad,
        "{\n  \"variables\": [{\"name\": \"x\", \"lb\": 0, \"ub\": 1}],\n  \"nonlinear\": [\n    {\"name\": \"c\", \"expr\": \"x^2 + * 1\", \"sense\": \">=\"}\n  ],\n  \"objective\": {\"expr\": \"x\"}\n}\n",
    )
    .unwrap();
    let e = load_problem(&bad).unwrap_err();
    let pos = e.position().unwrap();
    assert_eq!(pos.line, 4, "{e}");
    let line = std::fs::read_to_string(&bad).unwrap().lines().nth(3).unwrap().to_string();
    assert_eq!(&line[pos.column - 1..pos.column], "*", "{e}");

    std::fs::write(&bad, r#"{"variables": [{"name": "x", "lb": 2, "ub": 1}], "objective": {"expr": "x"}}"#).unwrap();
    assert!(matches!(load_problem(&bad), Err(LoadError::Problem { .. })));
}

#[test]
fn bundled_demo() {
    let p = load_problem(Path::new(&data("demo.json"))).unwrap();
    assert_eq!(p.n(), 6);
    let binary = p.variables.iter().filter(|v| v.integral && v.lower == 0.0 && v.upper == 1.0).count();
    assert_eq!(binary, 3);
    assert_eq!(p.nonlinear.len(), 2);
    let case = bundled_case("demo").unwrap();
    assert_eq!(case.best_known, -7.021);
    assert_eq!(case.problem().unwrap(), p);
}

#[test]
fn bundled_speed_reducer() {
    let text = std::fs::read_to_string(data("speed_reducer.json")).unwrap();
    let raw = parse_raw(&text, "speed_reducer.json").unwrap();
    assert_eq!(raw.nonlinear.len(), 11);
    let p = load_problem(Path::new(&data("speed_reducer.json"))).unwrap();
    assert_eq!(p.n(), 7);
    let ints: Vec<&str> = p.variables.iter().filter(|v| v.integral).map(|v| v.name.as_str()).collect();
    assert_eq!(ints, vec!["x3"]);
    // the four affine entries become linear rows
    assert_eq!(p.nonlinear.len() + p.inequalities.len(), 11);

    let f = p.objective.value(&SPEED_REDUCER_SOLUTION).unwrap();
    assert!((f - 2994.355).abs() <= 0.01, "{f}");
    // g5 and g6 are steep in x6 and x7, so five printed digits leave a few hundredths
    let c = check_solution(&p, &SPEED_REDUCER_SOLUTION, 1e-8);
    assert!(c.max_violation < 0.05, "{c:?}");
}

#[test]
fn printed_speed_reducer_point_is_feasible_up_to_rounding() {
    let case = bundled_case("speed_reducer").unwrap();
    let raw = parse_raw(case.text, case.file).unwrap();
    let names: Vec<String> = raw.variables.iter().map(|v| v.name.clone()).collect();
    let x = &case.best_point;
    // half a unit in the last printed digit; the first four sit on their bounds
    let half = [0.0, 0.0, 0.0, 0.0, 5e-5, 5e-5, 5e-5];
    let all: Vec<usize> = (0..7).collect();
    for c in &raw.nonlinear {
        let e = parse_expression(c.expr.as_deref().unwrap(), &names).unwrap();
        let (v, g) = expr_gradient(&e, x, &all).unwrap();
        let slack: f64 = g.iter().zip(half).map(|(g, h)| g.abs() * h).sum();
        assert!(v - c.rhs >= -1e-4 - slack, "{}: {v} (rounding allowance {slack})", c.name);
    }
}

#[test]
fn stubs_are_listed_but_not_runnable() {
    let stubs = stub_cases();
    assert_eq!(stubs.len(), 11);
    assert!(stubs.iter().any(|s| s.id == "himmel16" && s.nonlinear_eq == 6));
    let (code, _, err) = run(&["bench", "pool1"]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("stub"), "{err}");
    assert_eq!(run(&["bench", "nope"]).0, EXIT_INPUT);
}

#[test]
fn bad_flags_are_input_errors() {
    assert_eq!(run(&["solve", &data("demo.json"), "--encoder", "fancy"]).0, EXIT_INPUT);
    assert_eq!(run(&["solve", &data("demo.json"), "--restarts", "0"]).0, EXIT_INPUT);
    assert_eq!(run(&["solve", &data("demo.json"), "--max-pgd-iters", "0"]).0, EXIT_INPUT);
    if std::env::var_os("TREE_GOPT_SOLVER_CMD").is_none() {
        assert_eq!(run(&["solve", &data("demo.json"), "--backend", "external"]).0, EXIT_INPUT);
    }
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("dump-samples"));
}

#[test]
fn seeded_json_runs_are_identical() {
    let args = ["solve", &data("demo.json"), "--seed", "7", "--json"];
    let (a, out_a, _) = run(&args);
    let (b, out_b, _) = run(&args);
    assert_eq!((a, b), (0, 0));
    assert_eq!(out_a, out_b);
    let v: Value = serde_json::from_str(&out_a).unwrap();
    assert_eq!(v["feasible"], Value::Bool(true));
    assert!(v["objective"].as_f64().unwrap() <= -6.9);
}

/// Key paths and value types of a JSON document; arrays are merged.
fn schema(v: &Value, path: &str, out: &mut Vec<String>) {
    match v {
        Value::Object(m) => {
            out.push(format!("{path} object"));
            for (k, x) in m {
                schema(x, &format!("{path}.{k}"), out);
            }
        }
        Value::Array(a) => {
            out.push(format!("{path} array"));
            for x in a {
                schema(x, &format!("{path}[]"), out);
            }
        }
        Value::String(_) => out.push(format!("{path} string")),
        Value::Number(_) => out.push(format!("{path} number")),
        Value::Bool(_) => out.push(format!("{path} bool")),
        Value::Null => out.push(format!("{path} null")),
    }
}

#[test]
fn report_schema_matches_golden() {
    let (code, out, err) = run(&["solve", &data("demo.json"), "--seed", "3", "--restarts", "1", "--json"]);
    assert!(code == 0 || code == EXIT_INFEASIBLE, "{err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    let mut lines = Vec::new();
    schema(&v, "$", &mut lines);
    lines.retain(|l| !l.ends_with(" null"));
    lines.sort();
    lines.dedup();
    let got = lines.join("\n") + "\n";
    let golden = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/report_schema.txt");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&golden, &got).unwrap();
    }
    let want = std::fs::read_to_string(&golden).unwrap();
    assert_eq!(got, want, "report schema changed; rerun with UPDATE_GOLDEN=1 if intended");
}

#[test]
fn bench_demo_table() {
    let (code, out, err) = run(&["bench", "demo", "--restarts", "1", "--seed", "1"]);
    assert_eq!(code, 0, "{err}");
    let rows: Vec<&str> = out.lines().collect();
    assert!(rows[0].starts_with("case") && rows[0].contains("objective") && rows[0].contains("violation"));
    assert!(rows.iter().any(|r| r.starts_with("demo") && r.contains("MIO")));
    let repaired = rows.iter().find(|r| r.contains("PGD repaired")).unwrap();
    let obj: f64 = repaired.split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!(obj <= -6.9, "{out}");
    assert!(rows.iter().any(|r| r.contains("best known") && r.contains("-7.0210")));
}

#[test]
fn stage_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let demo = data("demo.json");
    let fast = ["--samples", "100", "--seed", "2"];
    let mps = d.join("demo.mps");
    let mut args = vec!["export-mps", &demo, "-o", mps.to_str().unwrap()];
    args.extend(fast);
    assert_eq!(run(&args).0, 0);
    let text = std::fs::read_to_string(&mps).unwrap();
    assert!(text.starts_with("NAME") && text.contains("ENDATA"));
    let map: Value = serde_json::from_str(&std::fs::read_to_string(d.join("demo.mps.map.json")).unwrap()).unwrap();
    assert!(map["columns"].as_array().unwrap().len() > 6);

    let samples = d.join("samples");
    let mut args = vec!["dump-samples", &demo, "--out", samples.to_str().unwrap()];
    args.extend(fast);
    assert_eq!(run(&args).0, 0);
    let csv = std::fs::read_to_string(samples.join("g1.csv")).unwrap();
    assert!(csv.starts_with("x1,x2,x3,value,label\n"), "{}", &csv[..40]);
    assert!(samples.join("g2.csv").exists());

    let mut args = vec!["dump-trees", &demo];
    args.extend(fast);
    let (code, out, _) = run(&args);
    assert_eq!(code, 0);
    let trees: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(trees.as_object().unwrap().len(), 2);

    let traces = d.join("traces");
    let mut args = vec!["solve", &demo, "--restarts", "1", "--trace-dir", traces.to_str().unwrap()];
    args.extend(fast);
    let (code, out, _) = run(&args);
    assert!(code == 0 || code == EXIT_INFEASIBLE);
    assert!(out.contains("objective"));
    let trace = std::fs::read_to_string(traces.join("demo_trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,mode,objective,max_violation,step_norm\n"));
}
