//! Command-line front end, problem loading and the bundled benchmarks.

// load errors carry the full problem error with its source position
#![allow(clippy::result_large_err)]

mod app;
mod cases;
mod load;

pub use app::{config, run_cli, Cli, Command, Options, EXIT_INFEASIBLE, EXIT_INPUT};
pub use cases::{bundled_case, bundled_cases, stub_cases, BenchmarkCase, StubCase};
pub use load::{load_problem, parse_problem, parse_raw, LoadError, Position};
