use serde::Deserialize;
use tree_gopt::problem::StandardFormProblem;

use crate::load::{parse_problem, parse_raw, LoadError};

/// A bundled benchmark problem with its reference solution.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkCase {
    pub id: &'static str,
    pub file: &'static str,
    pub text: &'static str,
    pub best_known: f64,
    pub best_point: Vec<f64>,
    pub tolerance: f64,
    pub source: String,
}

impl BenchmarkCase {
    pub fn problem(&self) -> Result<StandardFormProblem, LoadError> {
        parse_problem(self.text, self.file)
    }
}

const BUNDLED: [(&str, &str, &str); 2] = [
    ("demo", "demo.json", include_str!("../data/demo.json")),
    ("speed_reducer", "speed_reducer.json", include_str!("../data/speed_reducer.json")),
];

/// Cases with full constraint definitions, in table order.
pub fn bundled_cases() -> Vec<BenchmarkCase> {
    BUNDLED
        .iter()
        .map(|&(id, file, text)| {
            let raw = parse_raw(text, file).expect("bundled file parses");
            let bk = raw.best_known.expect("bundled file has a reference solution");
            BenchmarkCase {
                id,
                file,
                text,
                best_known: bk.objective,
                best_point: bk.point.unwrap_or_default(),
                tolerance: bk.tolerance.unwrap_or(0.0),
                source: bk.source,
            }
        })
        .collect()
}

pub fn bundled_case(id: &str) -> Option<BenchmarkCase> {
    bundled_cases().into_iter().find(|c| c.id == id)
}

/// MINLPLib entries shipped as size and reference-value records only.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct StubCase {
    pub id: String,
    pub continuous: usize,
    pub integer: usize,
    pub linear: usize,
    pub nonlinear_ineq: usize,
    pub nonlinear_eq: usize,
    pub nonlinear_objective: bool,
    pub best_known: f64,
}

#[derive(Deserialize)]
struct Stubs {
    cases: Vec<StubCase>,
}

pub fn stub_cases() -> Vec<StubCase> {
    let s: Stubs = serde_json::from_str(include_str!("../data/minlplib/stubs.json")).expect("stubs parse");
    s.cases
}
