//! End-to-end solve: bound, sample, train, encode, solve the surrogate
//! MILP and repair its solution against the true constraints.

use std::time::{Duration, Instant};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::backend::{external_solve, solve_milp, MilpBudget, SolveResult, Status};
use crate::encoder::{
    assemble, count_aux, encode_equality, encode_inequality, encode_objective, encode_separable, AuxCounts, Assembly,
    EncoderMode, MilpFragment, Scope, TreeRole,
};
use crate::problem::{tighten_all_bounds, Expr, NonlinearConstraint, Objective, Sense, StandardFormProblem};
use crate::repair::{check_point, repair, PgdParams, PointCheck, RepairStatus, TraceRow};
use crate::sampler::{
    boundary_samples, evaluate_constraint, knn_quasi_newton, olh_samples, LabeledSampleSet, SampleSet,
};
use crate::tree::{
    misclassification_error, one_minus_r2, train_classifier, train_regressor, HyperplaneTree, TreeParams,
};

/// Corner samples per constraint at most.
pub const CORNER_CAP: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    Internal,
    /// External MILP solver command template (see `external_solve`).
    External(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    /// OLH points per constraint; `None` means `max(400, 100p)`.
    pub samples: Option<usize>,
    pub classifier: TreeParams,
    pub regressor: TreeParams,
    pub encoder: EncoderMode,
    pub milp: MilpBudget,
    pub pgd: PgdParams,
    pub restarts: usize,
    pub backend: Backend,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            samples: None,
            classifier: TreeParams::classifier(),
            regressor: TreeParams::regressor(),
            encoder: EncoderMode::BigMFree,
            milp: MilpBudget::default(),
            pgd: PgdParams::default(),
            restarts: 3,
            backend: Backend::Internal,
        }
    }
}

impl PipelineConfig {
    pub fn olh_count(&self, p: usize) -> usize {
        self.samples.unwrap_or_else(|| (100 * p).max(400))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Bounds,
    Sampling,
    Training,
    Encoding,
    Solving,
    Repair,
}

#[derive(Debug, Error)]
#[error("{stage:?} stage: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

impl PipelineError {
    fn new(stage: Stage, message: impl Into<String>) -> Self {
        PipelineError {
            stage,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Classifier,
    /// Regressor on the nonlinear part of a separable constraint.
    Separable,
    Objective,
    /// Every sample was feasible; left out of the MILP.
    BoxRedundant,
}

/// Data and tree for one nonlinear constraint or the objective.
#[derive(Debug, Clone)]
pub struct ConstraintModel {
    pub name: String,
    pub kind: ModelKind,
    pub scope: Scope,
    pub data: LabeledSampleSet,
    pub tree: Option<HyperplaneTree>,
    /// Misclassification rate or `1 − R²` on the training data.
    pub loss: f64,
    pub sample_time: Duration,
    pub train_time: Duration,
}

impl ConstraintModel {
    fn report(&self) -> ModelReport {
        ModelReport {
            name: self.name.clone(),
            kind: self.kind,
            samples: self.data.len(),
            feasible_samples: self.data.feasible_count(),
            leaves: self.tree.as_ref().map(|t| t.leaf_count()),
            depth: self.tree.as_ref().map(|t| t.depth()),
            loss: self.loss,
        }
    }
}

/// Everything built before the MILP solve.
#[derive(Debug, Clone)]
pub struct Surrogate {
    /// The problem with bounds tightened over its linear rows.
    pub bounded: StandardFormProblem,
    pub models: Vec<ConstraintModel>,
    pub fragments: Vec<MilpFragment>,
    pub assembly: Assembly,
    pub counts: AuxCounts,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageTimings {
    pub bounds: Duration,
    pub sampling: Duration,
    pub training: Duration,
    pub encoding: Duration,
    pub solving: Duration,
    pub repair: Duration,
}

impl StageTimings {
    fn add(&mut self, o: &StageTimings) {
        self.bounds += o.bounds;
        self.sampling += o.sampling;
        self.training += o.training;
        self.encoding += o.encoding;
        self.solving += o.solving;
        self.repair += o.repair;
    }

    pub fn total(&self) -> Duration {
        self.bounds + self.sampling + self.training + self.encoding + self.solving + self.repair
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub name: String,
    pub kind: ModelKind,
    pub samples: usize,
    pub feasible_samples: usize,
    pub leaves: Option<usize>,
    pub depth: Option<usize>,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MilpReport {
    pub status: Status,
    /// Surrogate objective.
    pub objective: f64,
    pub bound: f64,
    pub nodes: usize,
    pub columns: usize,
    pub rows: usize,
    pub binaries: usize,
    /// Original variables of the MILP point.
    pub x: Vec<f64>,
    /// True objective at `x`.
    pub true_objective: f64,
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepairReport {
    pub status: RepairStatus,
    pub iterations: usize,
    pub approximate_gradients: bool,
}

/// Outcome of one restart.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartSummary {
    pub seed: u64,
    pub retried: bool,
    pub objective: Option<f64>,
    pub feasible: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub problem: String,
    pub seed: u64,
    pub best_restart: usize,
    pub restarts: Vec<RestartSummary>,
    pub variables: Vec<String>,
    pub x: Vec<f64>,
    pub objective: f64,
    pub feasible: bool,
    pub max_violation: f64,
    pub models: Vec<ModelReport>,
    pub aux: Option<AuxCounts>,
    pub milp: MilpReport,
    pub repair: Option<RepairReport>,
    /// Check of `x` against the original constraints.
    pub check: PointCheck,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
    /// Wall-clock time per stage, summed over restarts. Not serialized so
    /// reports stay reproducible.
    #[serde(skip)]
    pub timings: StageTimings,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Seed for sub-task `k` of the run seeded with `seed`.
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn nonlinear_vars(p: &StandardFormProblem) -> Vec<usize> {
    let mut vars: Vec<usize> = p.nonlinear.iter().flat_map(|c| c.active.iter().copied()).collect();
    if let Objective::Nonlinear { active, .. } = &p.objective {
        vars.extend(active);
    }
    vars.sort_unstable();
    vars.dedup();
    vars
}

fn scope_of(p: &StandardFormProblem, name: &str, active: &[usize]) -> Scope {
    Scope {
        name: name.to_string(),
        active: active.to_vec(),
        lower: active.iter().map(|&k| p.variables[k].lower).collect(),
        upper: active.iter().map(|&k| p.variables[k].upper).collect(),
    }
}

/// Labeled samples for `c` over `scope`: corners, `olh` OLH points, then one
/// kNN pass with clusters of `knn_factor·(p + 1)`. `n` is the problem dimension.
pub fn sample_constraint(
    c: &NonlinearConstraint,
    scope: &Scope,
    n: usize,
    olh: usize,
    knn_factor: usize,
    seed: u64,
) -> LabeledSampleSet {
    let mut set = boundary_samples(&scope.lower, &scope.upper, CORNER_CAP, derive_seed(seed, 0));
    set.extend_unique(olh_samples(&scope.lower, &scope.upper, olh, derive_seed(seed, 1)).points);
    let mut data = evaluate_constraint(c, &set, n);
    let k = knn_factor * (scope.dim() + 1);
    if let Ok(extra) = knn_quasi_newton(&data, k) {
        let mut fresh = SampleSet::empty(set.lower.clone(), set.upper.clone());
        let known = &mut set;
        for x in extra.points {
            if known.extend_unique([x.clone()]) == 1 {
                fresh.points.push(x);
            }
        }
        data.append(evaluate_constraint(c, &fresh, n));
    }
    data
}

/// Samples and targets for a function of the `active` variables; points
/// where it cannot be evaluated are dropped.
fn sample_function(expr: &Expr, scope: &Scope, n: usize, olh: usize, seed: u64) -> (SampleSet, Vec<f64>) {
    let mut set = boundary_samples(&scope.lower, &scope.upper, CORNER_CAP, derive_seed(seed, 0));
    set.extend_unique(olh_samples(&scope.lower, &scope.upper, olh, derive_seed(seed, 1)).points);
    let active = &scope.active;
    let mut kept = SampleSet::empty(set.lower.clone(), set.upper.clone());
    let mut targets = Vec::new();
    for x in set.points {
        let v = expr.eval_with(&|i| active.binary_search(&i).ok().map(|k| x[k]), n);
        if let Ok(v) = v {
            kept.points.push(x);
            targets.push(v);
        }
    }
    (kept, targets)
}

fn regression_data(set: SampleSet, targets: &[f64]) -> LabeledSampleSet {
    LabeledSampleSet {
        values: targets.iter().map(|&v| Some(v)).collect(),
        labels: targets.iter().map(|&v| v >= 0.0).collect(),
        samples: set,
    }
}

fn build_model(
    bounded: &StandardFormProblem,
    c: &NonlinearConstraint,
    cfg: &PipelineConfig,
    knn_factor: usize,
    seed: u64,
) -> Result<ConstraintModel, PipelineError> {
    let n = bounded.n();
    if c.use_regressor {
        if let Some(sep) = &c.separable {
            let active: Vec<usize> = sep.g.variables().into_iter().collect();
            let scope = scope_of(bounded, &c.name, &active);
            return regression_model(&c.name, ModelKind::Separable, &sep.g, scope, n, cfg, seed);
        }
        warn!("{}: regressor requested but the constraint is not separable", c.name);
    }
    let scope = scope_of(bounded, &c.name, &c.active);
    let t0 = Instant::now();
    let data = sample_constraint(c, &scope, n, cfg.olh_count(scope.dim()), knn_factor, seed);
    let sample_time = t0.elapsed();
    let feasible = data.feasible_count();
    if feasible == data.len() && c.sense == Sense::Geq {
        return Ok(ConstraintModel {
            name: c.name.clone(),
            kind: ModelKind::BoxRedundant,
            scope,
            data,
            tree: None,
            loss: 0.0,
            sample_time,
            train_time: Duration::ZERO,
        });
    }
    if feasible == 0 || feasible == data.len() {
        return Err(PipelineError::new(
            Stage::Sampling,
            format!("{}: every sample has the same label, {feasible} of {} feasible", c.name, data.len()),
        ));
    }
    let t0 = Instant::now();
    let tree = train_classifier(&data, &cfg.classifier, derive_seed(seed, 2))
        .map_err(|e| PipelineError::new(Stage::Training, format!("{}: {e}", c.name)))?;
    let loss = misclassification_error(&tree, &data.samples.points, &data.labels);
    Ok(ConstraintModel {
        name: c.name.clone(),
        kind: ModelKind::Classifier,
        scope,
        data,
        tree: Some(tree),
        loss,
        sample_time,
        train_time: t0.elapsed(),
    })
}

fn regression_model(
    name: &str,
    kind: ModelKind,
    expr: &Expr,
    scope: Scope,
    n: usize,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<ConstraintModel, PipelineError> {
    let t0 = Instant::now();
    let (set, targets) = sample_function(expr, &scope, n, cfg.olh_count(scope.dim()), seed);
    let sample_time = t0.elapsed();
    if targets.is_empty() {
        return Err(PipelineError::new(Stage::Sampling, format!("{name}: no evaluable samples")));
    }
    let t0 = Instant::now();
    let tree = train_regressor(&set, &targets, &cfg.regressor, derive_seed(seed, 2))
        .map_err(|e| PipelineError::new(Stage::Training, format!("{name}: {e}")))?;
    let loss = one_minus_r2(&tree, &set.points, &targets);
    Ok(ConstraintModel {
        name: name.to_string(),
        kind,
        scope,
        data: regression_data(set, &targets),
        tree: Some(tree),
        loss,
        sample_time,
        train_time: t0.elapsed(),
    })
}

fn encode(
    bounded: &StandardFormProblem,
    models: &[ConstraintModel],
    mode: EncoderMode,
) -> Result<(Vec<MilpFragment>, AuxCounts), PipelineError> {
    let err = |name: &str, e: crate::encoder::EncodeError| PipelineError::new(Stage::Encoding, format!("{name}: {e}"));
    let mut fragments = Vec::new();
    let mut roles = Vec::new();
    for m in models {
        let Some(tree) = &m.tree else { continue };
        let targets: Vec<f64> = m.data.values.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        let frag = match m.kind {
            ModelKind::Objective => {
                roles.push((TreeRole::Objective, tree));
                encode_objective(tree, &m.scope, &m.data.samples, &targets)
            }
            ModelKind::Separable => {
                let c = bounded.nonlinear.iter().find(|c| c.name == m.name).expect("model of a constraint");
                let sep = c.separable.as_ref().expect("separable model");
                roles.push((TreeRole::Objective, tree));
                encode_separable(tree, &m.scope, &m.data.samples, &targets, (&sep.coeffs, sep.constant))
            }
            ModelKind::Classifier => {
                let c = bounded.nonlinear.iter().find(|c| c.name == m.name).expect("model of a constraint");
                if c.sense == Sense::Eq {
                    roles.push((TreeRole::Equality, tree));
                    encode_equality(tree, &m.scope, mode)
                } else {
                    roles.push((TreeRole::Inequality, tree));
                    encode_inequality(tree, &m.scope, mode)
                }
            }
            ModelKind::BoxRedundant => continue,
        }
        .map_err(|e| err(&m.name, e))?;
        fragments.push(frag);
    }
    Ok((fragments, count_aux(&roles)))
}

/// Bounds, samples, trains and encodes `p` into a surrogate MILP.
/// `knn_factor` scales the kNN cluster size.
pub fn build_surrogate(
    p: &StandardFormProblem,
    cfg: &PipelineConfig,
    seed: u64,
    knn_factor: usize,
    timings: &mut StageTimings,
) -> Result<Surrogate, PipelineError> {
    let t0 = Instant::now();
    let bounded = tighten_all_bounds(p, &nonlinear_vars(p)).map_err(|e| PipelineError::new(Stage::Bounds, e.to_string()))?;
    timings.bounds += t0.elapsed();

    let mut models: Vec<ConstraintModel> = bounded
        .nonlinear
        .par_iter()
        .enumerate()
        .map(|(i, c)| build_model(&bounded, c, cfg, knn_factor, derive_seed(seed, 100 + i as u64)))
        .collect::<Result<_, _>>()?;
    if let Objective::Nonlinear { expr, active } = &bounded.objective {
        let scope = scope_of(&bounded, "objective", active);
        models.push(regression_model(
            "objective",
            ModelKind::Objective,
            expr,
            scope,
            bounded.n(),
            cfg,
            derive_seed(seed, 99),
        )?);
    }
    for m in &models {
        timings.sampling += m.sample_time;
        timings.training += m.train_time;
    }

    let t0 = Instant::now();
    let (fragments, counts) = encode(&bounded, &models, cfg.encoder)?;
    let redundant: Vec<String> = models
        .iter()
        .filter(|m| m.kind == ModelKind::BoxRedundant)
        .map(|m| m.name.clone())
        .collect();
    let assembly = assemble(&bounded, &bounded.lower(), &bounded.upper(), &fragments, &redundant)
        .map_err(|e| PipelineError::new(Stage::Encoding, e.to_string()))?;
    timings.encoding += t0.elapsed();
    Ok(Surrogate {
        bounded,
        models,
        fragments,
        assembly,
        counts,
    })
}

fn solve(s: &Surrogate, cfg: &PipelineConfig) -> Result<SolveResult, PipelineError> {
    match &cfg.backend {
        Backend::Internal => Ok(solve_milp(&s.assembly.milp, cfg.milp)),
        Backend::External(cmd) => {
            external_solve(&s.assembly.milp, cmd, None).map_err(|e| PipelineError::new(Stage::Solving, e.to_string()))
        }
    }
}

/// Per-constraint signed values and the verdict at `phi`.
pub fn check_solution(p: &StandardFormProblem, x: &[f64], phi: f64) -> PointCheck {
    check_point(p, x, phi)
}

struct Attempt {
    report: RunReport,
    retried: bool,
}

fn milp_report(p: &StandardFormProblem, sol: &SolveResult, s: Option<&Surrogate>, phi: f64) -> MilpReport {
    let n = p.n();
    let x = sol.x[..n].to_vec();
    let check = check_point(p, &x, phi);
    let milp = s.map(|s| &s.assembly.milp);
    MilpReport {
        status: sol.status,
        objective: sol.objective,
        bound: sol.bound,
        nodes: sol.nodes,
        columns: milp.map_or(n, |m| m.ncols()),
        rows: milp.map_or(p.inequalities.len() + p.equalities.len(), |m| m.lp.rows.len()),
        binaries: milp.map_or(0, |m| m.integral[n..].iter().filter(|b| **b).count()),
        x,
        true_objective: check.objective,
        max_violation: check.max_violation,
    }
}

fn run_once(p: &StandardFormProblem, cfg: &PipelineConfig, seed: u64) -> Result<Attempt, PipelineError> {
    let mut timings = StageTimings::default();
    let mut retried = false;
    let mut surrogate = build_surrogate(p, cfg, seed, 1, &mut timings)?;
    let t0 = Instant::now();
    let mut sol = solve(&surrogate, cfg)?;
    timings.solving += t0.elapsed();
    if sol.status == Status::Infeasible {
        info!("surrogate MILP infeasible; resampling with wider kNN clusters");
        retried = true;
        surrogate = build_surrogate(p, cfg, derive_seed(seed, 1), 2, &mut timings)?;
        let t0 = Instant::now();
        sol = solve(&surrogate, cfg)?;
        timings.solving += t0.elapsed();
    }
    if sol.x.iter().any(|v| !v.is_finite()) {
        return Err(PipelineError::new(
            Stage::Solving,
            format!("surrogate MILP ended {:?} without a solution", sol.status),
        ));
    }
    let milp = milp_report(p, &sol, Some(&surrogate), cfg.pgd.phi);

    let t0 = Instant::now();
    let r = repair(p, &milp.x, &cfg.pgd).map_err(|e| PipelineError::new(Stage::Repair, e.to_string()))?;
    timings.repair += t0.elapsed();
    let check = check_point(p, &r.x, cfg.pgd.phi);
    Ok(Attempt {
        report: RunReport {
            problem: p.name.clone(),
            seed,
            best_restart: 0,
            restarts: Vec::new(),
            variables: p.names(),
            x: r.x.clone(),
            objective: r.objective,
            feasible: r.feasible,
            max_violation: r.max_violation,
            models: surrogate.models.iter().map(|m| m.report()).collect(),
            aux: Some(surrogate.counts),
            milp,
            repair: Some(RepairReport {
                status: r.status,
                iterations: r.iterations,
                approximate_gradients: r.approximate_gradients,
            }),
            check,
            trace: r.trace,
            timings,
        },
        retried,
    })
}

/// Problems without nonlinear parts go straight to the MILP (an LP when
/// nothing is integral).
fn solve_linear(p: &StandardFormProblem, cfg: &PipelineConfig) -> Result<RunReport, PipelineError> {
    let mut timings = StageTimings::default();
    let t0 = Instant::now();
    let assembly = assemble(p, &p.lower(), &p.upper(), &[], &[])
        .map_err(|e| PipelineError::new(Stage::Encoding, e.to_string()))?;
    timings.encoding += t0.elapsed();
    let t0 = Instant::now();
    let sol = match &cfg.backend {
        Backend::Internal => solve_milp(&assembly.milp, cfg.milp),
        Backend::External(cmd) => external_solve(&assembly.milp, cmd, None)
            .map_err(|e| PipelineError::new(Stage::Solving, e.to_string()))?,
    };
    timings.solving += t0.elapsed();
    if sol.x.iter().any(|v| !v.is_finite()) {
        return Err(PipelineError::new(Stage::Solving, format!("linear problem ended {:?}", sol.status)));
    }
    let milp = milp_report(p, &sol, None, cfg.pgd.phi);
    let check = check_point(p, &milp.x, cfg.pgd.phi);
    Ok(RunReport {
        problem: p.name.clone(),
        seed: cfg.seed,
        best_restart: 0,
        restarts: vec![RestartSummary {
            seed: cfg.seed,
            retried: false,
            objective: Some(check.objective),
            feasible: check.feasible,
            error: None,
        }],
        variables: p.names(),
        x: milp.x.clone(),
        objective: check.objective,
        feasible: check.feasible,
        max_violation: check.max_violation,
        models: Vec::new(),
        aux: None,
        milp,
        repair: None,
        check,
        trace: Vec::new(),
        timings,
    })
}

/// Runs the full method with `cfg.restarts` independently seeded restarts
/// and returns the best feasible result (least violation if none is).
pub fn solve_global(p: &StandardFormProblem, cfg: &PipelineConfig) -> Result<RunReport, PipelineError> {
    if cfg.restarts == 0 {
        return Err(PipelineError::new(Stage::Sampling, "restart count must be positive"));
    }
    cfg.pgd.validate().map_err(|e| PipelineError::new(Stage::Repair, e))?;
    if p.nonlinear.is_empty() && matches!(p.objective, Objective::Linear { .. }) {
        return solve_linear(p, cfg);
    }
    let seeds: Vec<u64> = (0..cfg.restarts)
        .map(|r| if r == 0 { cfg.seed } else { derive_seed(cfg.seed, r as u64) })
        .collect();
    let attempts: Vec<Result<Attempt, PipelineError>> = seeds.par_iter().map(|&s| run_once(p, cfg, s)).collect();

    let summaries: Vec<RestartSummary> = attempts
        .iter()
        .zip(&seeds)
        .map(|(a, &seed)| match a {
            Ok(a) => RestartSummary {
                seed,
                retried: a.retried,
                objective: Some(a.report.objective),
                feasible: a.report.feasible,
                error: None,
            },
            Err(e) => RestartSummary {
                seed,
                retried: false,
                objective: None,
                feasible: false,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let mut timings = StageTimings::default();
    for a in attempts.iter().flatten() {
        timings.add(&a.report.timings);
    }
    let best = attempts
        .iter()
        .enumerate()
        .filter_map(|(i, a)| a.as_ref().ok().map(|a| (i, a)))
        .min_by(|(_, a), (_, b)| {
            let (a, b) = (&a.report, &b.report);
            b.feasible
                .cmp(&a.feasible)
                .then(if a.feasible {
                    a.objective.total_cmp(&b.objective)
                } else {
                    a.max_violation.total_cmp(&b.max_violation)
                })
        })
        .map(|(i, _)| i);
    let Some(best) = best else {
        let first = attempts.into_iter().next().expect("at least one restart");
        return Err(first.err().expect("no successful restart"));
    };
    let Some(Ok(Attempt { mut report, .. })) = attempts.into_iter().nth(best) else {
        unreachable!("best restart succeeded")
    };
    report.seed = cfg.seed;
    report.best_restart = best;
    report.restarts = summaries;
    report.timings = timings;
    Ok(report)
}

#[cfg(test)]
mod tests;
