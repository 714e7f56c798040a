//! Fixtures shared by the benchmarks.

use tree_gopt::pipeline::{build_surrogate, PipelineConfig, StageTimings, Surrogate};
use tree_gopt::problem::StandardFormProblem;
use tree_gopt_cli::bundled_case;

pub fn problem(id: &str) -> StandardFormProblem {
    bundled_case(id).expect("bundled case").problem().expect("bundled file loads")
}

pub fn surrogate(p: &StandardFormProblem, seed: u64) -> Surrogate {
    let mut t = StageTimings::default();
    build_surrogate(p, &PipelineConfig::default(), seed, 1, &mut t).expect("surrogate builds")
}

/// Demo surrogate solution point used as the repair start.
pub const DEMO_MIO_POINT: [f64; 6] = [0.375, 0.375, 0.379, 1.0, 0.0, 0.0];
