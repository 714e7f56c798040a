use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tree_gopt::backend::export_mps;
use tree_gopt::encoder::EncoderMode;
use tree_gopt::pipeline::{build_surrogate, solve_global, Backend, PipelineConfig, RunReport, StageTimings};
use tree_gopt::problem::StandardFormProblem;
use tree_gopt::repair::trace_csv;

use crate::cases::{bundled_case, bundled_cases, stub_cases, BenchmarkCase};
use crate::load::load_problem;

pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "tree-gopt", version, about = "Global optimization of nonlinear problems with tree surrogates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Args)]
pub struct Options {
    /// Master seed; restarts derive theirs from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// OLH points per constraint [default: max(400, 100p)].
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Maximum tree depth for classifiers and regressors.
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    #[arg(long, global = true, default_value_t = 3)]
    pub restarts: usize,
    #[arg(long, global = true, value_enum, default_value_t = EncoderArg::BigmFree)]
    pub encoder: EncoderArg,
    #[arg(long, global = true, value_enum, default_value_t = BackendArg::Internal)]
    pub backend: BackendArg,
    /// MILP solver command with {input} and {output} placeholders.
    #[arg(long, global = true, env = "TREE_GOPT_SOLVER_CMD")]
    pub solver_cmd: Option<String>,
    #[arg(long, global = true)]
    pub max_pgd_iters: Option<usize>,
    /// Print the JSON report instead of a table.
    #[arg(long, global = true)]
    pub json: bool,
    /// Directory for PGD trace CSV files.
    #[arg(long, global = true)]
    pub trace_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EncoderArg {
    BigmFree,
    Bigm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Internal,
    External,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a problem file.
    Solve { problem: PathBuf },
    /// Run bundled benchmark cases and print a comparison table.
    Bench {
        /// Case id; all cases when omitted.
        id: Option<String>,
    },
    /// Write the surrogate MILP in MPS format.
    ExportMps {
        problem: PathBuf,
        /// Output file; a `.map.json` column mapping is written beside it.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write the labeled samples of every constraint as CSV.
    DumpSamples {
        problem: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Write the trained trees as JSON.
    DumpTrees {
        problem: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn input(message: impl ToString) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: message.to_string(),
    }
}

fn runtime(message: impl ToString) -> Failure {
    Failure {
        code: EXIT_INFEASIBLE,
        message: message.to_string(),
    }
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    match run(&cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

pub fn config(opts: &Options) -> Result<PipelineConfig, String> {
    let mut cfg = PipelineConfig {
        seed: opts.seed,
        samples: opts.samples,
        restarts: opts.restarts,
        ..PipelineConfig::default()
    };
    if opts.restarts == 0 {
        return Err("--restarts must be at least 1".into());
    }
    if let Some(d) = opts.depth {
        if d == 0 {
            return Err("--depth must be at least 1".into());
        }
        cfg.classifier.max_depth = d;
        cfg.regressor.max_depth = d;
    }
    cfg.encoder = match opts.encoder {
        EncoderArg::BigmFree => EncoderMode::BigMFree,
        EncoderArg::Bigm => EncoderMode::BigM,
    };
    cfg.backend = match (opts.backend, &opts.solver_cmd) {
        (BackendArg::Internal, _) => Backend::Internal,
        (BackendArg::External, Some(cmd)) => Backend::External(cmd.clone()),
        (BackendArg::External, None) => {
            return Err("--backend external needs --solver-cmd or TREE_GOPT_SOLVER_CMD".into())
        }
    };
    if let Some(n) = opts.max_pgd_iters {
        cfg.pgd.max_iters = n;
    }
    cfg.pgd.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn run(cli: &Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    let cfg = config(&cli.opts).map_err(input)?;
    match &cli.command {
        Command::Solve { problem } => {
            let p = open(problem)?;
            let report = solve_global(&p, &cfg).map_err(runtime)?;
            write_trace(&cli.opts, &p.name, &report)?;
            if cli.opts.json {
                emit(out, &report.to_json())?;
            } else {
                emit(out, &summary(&p, &report))?;
            }
            Ok(if report.feasible { 0 } else { EXIT_INFEASIBLE })
        }
        Command::Bench { id } => {
            let cases = match id {
                None => bundled_cases(),
                Some(id) => match bundled_case(id) {
                    Some(c) => vec![c],
                    None if stub_cases().iter().any(|s| s.id == *id) => {
                        return Err(input(format!(
                            "case `{id}` is a MINLPLib stub without a model; fetch the model and use `solve`"
                        )))
                    }
                    None => return Err(input(format!("unknown case `{id}`"))),
                },
            };
            bench(&cases, &cli.opts, &cfg, out)
        }
        Command::ExportMps { problem, output } => {
            let p = open(problem)?;
            let s = surrogate(&p, &cfg)?;
            let mps = export_mps(&s.assembly.milp, &p.name);
            match output {
                Some(path) => {
                    write_file(path, &mps.text)?;
                    write_file(&sibling(path, "map.json"), &mps.mapping_json())?;
                }
                None => emit(out, &mps.text)?,
            }
            Ok(0)
        }
        Command::DumpSamples { problem, out: dir } => {
            let p = open(problem)?;
            let s = surrogate(&p, &cfg)?;
            create_dir(dir)?;
            for m in &s.models {
                let names: Vec<String> = m.scope.active.iter().map(|&i| p.variables[i].name.clone()).collect();
                write_file(&dir.join(format!("{}.csv", file_stem(&m.name))), &m.data.to_csv(&names))?;
            }
            Ok(0)
        }
        Command::DumpTrees { problem, out: dir } => {
            let p = open(problem)?;
            let s = surrogate(&p, &cfg)?;
            let trees: Vec<(&str, &tree_gopt::tree::HyperplaneTree)> =
                s.models.iter().filter_map(|m| m.tree.as_ref().map(|t| (m.name.as_str(), t))).collect();
            match dir {
                Some(dir) => {
                    create_dir(dir)?;
                    for (name, t) in trees {
                        write_file(&dir.join(format!("{}.json", file_stem(name))), &t.to_json())?;
                    }
                }
                None => {
                    let map: serde_json::Map<String, serde_json::Value> = trees
                        .into_iter()
                        .map(|(name, t)| (name.to_string(), serde_json::to_value(t).expect("tree serializes")))
                        .collect();
                    emit(out, &serde_json::to_string_pretty(&map).expect("trees serialize"))?;
                }
            }
            Ok(0)
        }
    }
}

/// Loads `path`; a bundled file name is used when no such file exists.
fn open(path: &Path) -> Result<StandardFormProblem, Failure> {
    if !path.exists() {
        let name = path.to_str().unwrap_or_default();
        if let Some(c) = bundled_cases().into_iter().find(|c| c.file == name) {
            log::info!("using bundled {}", c.file);
            return c.problem().map_err(input);
        }
    }
    load_problem(path).map_err(input)
}

fn surrogate(p: &StandardFormProblem, cfg: &PipelineConfig) -> Result<tree_gopt::pipeline::Surrogate, Failure> {
    let mut t = StageTimings::default();
    build_surrogate(p, cfg, cfg.seed, 1, &mut t).map_err(runtime)
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    let r = if text.ends_with('\n') {
        out.write_all(text.as_bytes())
    } else {
        writeln!(out, "{text}")
    };
    r.map_err(runtime)
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))
}

fn sibling(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn write_trace(opts: &Options, name: &str, r: &RunReport) -> Result<(), Failure> {
    if let Some(dir) = &opts.trace_dir {
        create_dir(dir)?;
        let stem = if name.is_empty() { "problem".to_string() } else { file_stem(name) };
        write_file(&dir.join(format!("{stem}_trace.csv")), &trace_csv(&r.trace))?;
    }
    Ok(())
}

fn point(p: &StandardFormProblem, x: &[f64]) -> String {
    p.variables
        .iter()
        .zip(x)
        .map(|(v, x)| format!("{}={}", v.name, fmt_num(*x)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn fmt_num(v: f64) -> String {
    let v = v + 0.0;
    if v.is_finite() && v.fract() == 0.0 && v.abs() < 1e9 {
        format!("{v:.0}")
    } else {
        format!("{v:.4}")
    }
}

fn summary(p: &StandardFormProblem, r: &RunReport) -> String {
    let mut s = String::new();
    let status = if r.feasible { "feasible" } else { "infeasible" };
    s.push_str(&format!("problem        {}\n", r.problem));
    s.push_str(&format!("status         {status}\n"));
    s.push_str(&format!("objective      {:.6}\n", r.objective));
    s.push_str(&format!("max violation  {:.3e}\n", r.max_violation));
    s.push_str(&format!(
        "MIO objective  {:.6} (true {:.6}, {:?}, {} nodes)\n",
        r.milp.objective, r.milp.true_objective, r.milp.status, r.milp.nodes
    ));
    if let Some(rep) = &r.repair {
        s.push_str(&format!("repair         {:?} after {} iterations\n", rep.status, rep.iterations));
    }
    s.push_str(&format!("restart        {} of {}\n", r.best_restart + 1, r.restarts.len()));
    s.push_str(&format!("time           {:.2} s\n", r.timings.total().as_secs_f64()));
    s.push_str(&format!("x              {}\n", point(p, &r.x)));
    s
}

fn bench(cases: &[BenchmarkCase], opts: &Options, cfg: &PipelineConfig, out: &mut dyn Write) -> Result<i32, Failure> {
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    let mut code = 0;
    for case in cases {
        let p = case.problem().map_err(input)?;
        let t0 = Instant::now();
        let r = solve_global(&p, cfg).map_err(runtime)?;
        let secs = t0.elapsed().as_secs_f64();
        write_trace(opts, case.id, &r)?;
        if !r.feasible {
            code = EXIT_INFEASIBLE;
        }
        let gap = |v: f64| 100.0 * (v - case.best_known) / case.best_known.abs().max(1e-12);
        rows.push([
            case.id.to_string(),
            "MIO".into(),
            format!("{:.4}", r.milp.true_objective),
            format!("{:+.2}%", gap(r.milp.true_objective)),
            format!("{:.2e}", r.milp.max_violation),
            format!("{:.2}", (r.timings.total() - r.timings.repair).as_secs_f64()),
            point(&p, &r.milp.x),
        ]);
        rows.push([
            case.id.to_string(),
            "PGD repaired".into(),
            format!("{:.4}", r.objective),
            format!("{:+.2}%", gap(r.objective)),
            format!("{:.2e}", r.max_violation),
            format!("{secs:.2}"),
            point(&p, &r.x),
        ]);
        rows.push([
            case.id.to_string(),
            "best known".into(),
            format!("{:.4}", case.best_known),
            String::new(),
            String::new(),
            String::new(),
            point(&p, &case.best_point),
        ]);
        reports.push(r);
    }
    if opts.json {
        let all: Vec<serde_json::Value> = reports
            .iter()
            .map(|r| serde_json::to_value(r).expect("report serializes"))
            .collect();
        emit(out, &serde_json::to_string_pretty(&all).expect("reports serialize"))?;
    } else {
        emit(out, &table(&rows))?;
    }
    Ok(code)
}

fn table(rows: &[[String; 7]]) -> String {
    let head = ["case", "solution", "objective", "gap", "violation", "time (s)", "x"];
    let mut width: Vec<usize> = head.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&width).enumerate() {
            if i + 1 == cells.len() {
                s.push_str(c);
            } else if (2..6).contains(&i) {
                s.push_str(&format!("{c:>w$}  "));
            } else {
                s.push_str(&format!("{c:<w$}  "));
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut s = line(head.to_vec());
    s.push_str(&line(width.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(|s| s.as_str()).collect()));
    for r in rows {
        s.push_str(&line(r.iter().map(|c| c.as_str()).collect()));
    }
    s
}
