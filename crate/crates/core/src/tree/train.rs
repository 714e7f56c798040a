//! Greedy top-down induction of oblique trees with cost-complexity pruning.
//!
//! Training works in unit-normalized coordinates; the finished tree is
//! mapped back to the raw box.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::linalg::{fit_linear, lda_direction, normalized, solve_ridge};
use super::{
    HyperplaneSplit, HyperplaneTree, LeafPayload, TreeError, TreeMode, TreeNode, TreeParams,
    TREE_FORMAT_VERSION,
};
use crate::sampler::{LabeledSampleSet, SampleSet};

const TIE: f64 = 1e-12;
const LOOKAHEAD_CANDIDATES: usize = 8;
const REGRESSION_PERTURB: [f64; 6] = [0.5, -0.5, 0.15, -0.15, 0.03, -0.03];

#[derive(Clone, Copy)]
enum Targets<'a> {
    Class(&'a [bool]),
    Value(&'a [f64]),
}

#[derive(Debug, Clone)]
enum Fit {
    Class(bool),
    /// Weights over normalized coordinates, then the intercept.
    Linear(Vec<f64>, f64),
}

struct Node {
    count: usize,
    fit: Fit,
    loss: f64,
    split: Option<(Vec<f64>, f64, Box<Node>, Box<Node>)>,
}

#[derive(Debug, Clone, Copy)]
struct Cut {
    score: f64,
    imbalance: usize,
    beta: f64,
}

impl Cut {
    fn beats(&self, other: Option<&Cut>) -> bool {
        match other {
            None => true,
            Some(o) => {
                let tol = TIE * (1.0 + o.score.abs());
                self.score < o.score - tol || (self.score <= o.score + tol && self.imbalance < o.imbalance)
            }
        }
    }
}

fn gini(m: usize, a: usize) -> f64 {
    if m == 0 {
        0.0
    } else {
        2.0 * a as f64 * (m - a) as f64 / m as f64
    }
}

fn check_params(p: &TreeParams) -> Result<(), TreeError> {
    if p.max_depth < 1 {
        return Err(TreeError::Params("max depth must be at least 1".into()));
    }
    if !(p.minbucket > 0.0 && p.minbucket < 0.5) {
        return Err(TreeError::Params(format!("minbucket {} outside (0, 0.5)", p.minbucket)));
    }
    if !(p.complexity >= 0.0) {
        return Err(TreeError::Params("complexity factor must be nonnegative".into()));
    }
    Ok(())
}

/// Classification tree on labeled samples (`true` = feasible).
pub fn train_classifier(d: &LabeledSampleSet, params: &TreeParams, seed: u64) -> Result<HyperplaneTree, TreeError> {
    check_params(params)?;
    if d.is_empty() {
        return Err(TreeError::Empty);
    }
    let pos = d.feasible_count();
    if pos == 0 || pos == d.len() {
        return Err(TreeError::SingleClass);
    }
    let params = TreeParams {
        mode: TreeMode::Classify,
        ..*params
    };
    Ok(train(&d.samples, Targets::Class(&d.labels), &params, seed))
}

/// Regression tree with least-squares linear leaves.
pub fn train_regressor(
    samples: &SampleSet,
    targets: &[f64],
    params: &TreeParams,
    seed: u64,
) -> Result<HyperplaneTree, TreeError> {
    check_params(params)?;
    if samples.is_empty() || targets.len() != samples.len() {
        return Err(TreeError::Empty);
    }
    let params = TreeParams {
        mode: TreeMode::Regress,
        ..*params
    };
    let first = targets[0];
    if targets.iter().all(|y| *y == first) {
        return Ok(HyperplaneTree::constant(
            samples.dim(),
            LeafPayload::Linear {
                weights: vec![0.0; samples.dim()],
                intercept: first,
            },
            samples.len(),
        ));
    }
    Ok(train(samples, Targets::Value(targets), &params, seed))
}

fn train(samples: &SampleSet, targets: Targets, params: &TreeParams, seed: u64) -> HyperplaneTree {
    let z: Vec<Vec<f64>> = samples.points.iter().map(|x| samples.normalize(x)).collect();
    let n = z.len();
    let sst = match targets {
        Targets::Class(_) => 0.0,
        Targets::Value(y) => {
            let m = y.iter().sum::<f64>() / n as f64;
            y.iter().map(|v| (v - m).powi(2)).sum()
        }
    };
    let minb = ((params.minbucket * n as f64).ceil() as usize).max(1);
    let mut best: Option<(f64, usize, Node)> = None;
    for r in 0..params.tree_restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let mut b = Builder {
            z: &z,
            targets,
            params,
            minb,
            n,
            sst,
            rng,
            lookahead: r % 2 == 1,
        };
        let mut root = b.grow((0..n).collect(), 0);
        let (loss, splits) = prune(&mut root, params.complexity);
        let cost = loss + params.complexity * splits as f64;
        let better = match &best {
            None => true,
            Some((c, s, _)) => cost < c - TIE || (cost <= c + TIE && splits < *s),
        };
        if better {
            best = Some((cost, splits, root));
        }
    }
    let (_, _, root) = best.expect("at least one restart");
    let mut nodes = Vec::new();
    emit(&root, &samples.lower, &samples.upper, &mut nodes);
    HyperplaneTree {
        version: TREE_FORMAT_VERSION,
        mode: params.mode,
        dim: samples.dim(),
        nodes,
    }
}

/// Collapses subtrees whose loss gain does not pay for their splits.
/// Returns the pruned subtree's `(loss, split count)`.
fn prune(node: &mut Node, cp: f64) -> (f64, usize) {
    let Some((_, _, left, right)) = node.split.as_mut() else {
        return (node.loss, 0);
    };
    let (ll, ls) = prune(left, cp);
    let (rl, rs) = prune(right, cp);
    let sub_loss = ll + rl;
    let splits = ls + rs + 1;
    if node.loss <= sub_loss + cp * splits as f64 + 1e-15 {
        node.split = None;
        (node.loss, 0)
    } else {
        (sub_loss, splits)
    }
}

fn emit(node: &Node, lower: &[f64], upper: &[f64], out: &mut Vec<TreeNode>) -> usize {
    let at = out.len();
    let width = |k: usize| upper[k] - lower[k];
    match &node.split {
        None => {
            let payload = match &node.fit {
                Fit::Class(f) => LeafPayload::Class { feasible: *f },
                Fit::Linear(w, c) => {
                    let mut intercept = *c;
                    let weights = (0..w.len())
                        .map(|k| {
                            if width(k) > 0.0 {
                                intercept -= w[k] * lower[k] / width(k);
                                w[k] / width(k)
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    LeafPayload::Linear { weights, intercept }
                }
            };
            out.push(TreeNode::Leaf {
                payload,
                support: node.count,
            });
        }
        Some((alpha, beta, left, right)) => {
            let mut b = *beta;
            let a: Vec<f64> = (0..alpha.len())
                .map(|k| {
                    if width(k) > 0.0 {
                        b += alpha[k] * lower[k] / width(k);
                        alpha[k] / width(k)
                    } else {
                        0.0
                    }
                })
                .collect();
            out.push(TreeNode::Leaf {
                payload: LeafPayload::Class { feasible: false },
                support: 0,
            });
            let l = emit(left, lower, upper, out);
            let r = emit(right, lower, upper, out);
            out[at] = TreeNode::Split {
                split: HyperplaneSplit::new(a, b),
                left: l,
                right: r,
            };
        }
    }
    at
}

struct Builder<'a> {
    z: &'a [Vec<f64>],
    targets: Targets<'a>,
    params: &'a TreeParams,
    minb: usize,
    n: usize,
    sst: f64,
    rng: ChaCha8Rng,
    /// Score root-level candidates by the best splits of their children.
    lookahead: bool,
}

impl Builder<'_> {
    fn p(&self) -> usize {
        self.z.first().map_or(0, |r| r.len())
    }

    fn fit(&self, idx: &[usize]) -> (Fit, f64) {
        match self.targets {
            Targets::Class(y) => {
                let pos = idx.iter().filter(|&&i| y[i]).count();
                let neg = idx.len() - pos;
                // Ties go to infeasible.
                let feasible = pos > neg;
                (Fit::Class(feasible), pos.min(neg) as f64 / self.n as f64)
            }
            Targets::Value(y) => {
                let (w, c, sse) = fit_linear(self.z, y, idx);
                let loss = if self.sst > 0.0 { sse / self.sst } else { 0.0 };
                (Fit::Linear(w, c), loss)
            }
        }
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> Node {
        let (fit, loss) = self.fit(&idx);
        let mut node = Node {
            count: idx.len(),
            fit,
            loss,
            split: None,
        };
        if depth >= self.params.max_depth || idx.len() < 2 * self.minb || loss <= 1e-15 {
            return node;
        }
        let Some((alpha, beta)) = self.best_split(&idx, depth) else {
            return node;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| dot(&alpha, &self.z[i]) <= beta);
        if l.len() < self.minb || r.len() < self.minb {
            return node;
        }
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        node.split = Some((alpha, beta, Box::new(left), Box::new(right)));
        node
    }

    fn best_split(&mut self, idx: &[usize], depth: usize) -> Option<(Vec<f64>, f64)> {
        let dirs = self.directions(idx);
        let p = self.p();
        let mut axis = 0;
        let mut cands: Vec<(Cut, Vec<f64>)> = Vec::new();
        for (k, d) in dirs.into_iter().enumerate() {
            if let Some(c) = self.sweep(idx, &d) {
                axis += (k < p) as usize;
                cands.push((c, d));
            }
        }
        if cands.is_empty() {
            return None;
        }
        if self.lookahead && depth <= 1 && depth + 2 <= self.params.max_depth {
            return self.lookahead_split(idx, cands, axis);
        }
        let mut b = 0;
        for i in 1..cands.len() {
            if cands[i].0.beats(Some(&cands[b].0)) {
                b = i;
            }
        }
        let (mut cut, mut alpha) = cands.swap_remove(b);
        match self.targets {
            Targets::Class(y) => self.coordinate_search(idx, y, &mut alpha, &mut cut),
            Targets::Value(_) => self.perturb(idx, &mut alpha, &mut cut),
        }
        Some((alpha, cut.beta))
    }

    /// Picks the candidate whose children admit the best second-level
    /// splits.
    fn lookahead_split(&mut self, idx: &[usize], mut cands: Vec<(Cut, Vec<f64>)>, axis: usize) -> Option<(Vec<f64>, f64)> {
        // Axis candidates come first and are always kept.
        let mut rest = cands.split_off(axis);
        rest.sort_by(|a, b| a.0.score.total_cmp(&b.0.score).then(a.0.imbalance.cmp(&b.0.imbalance)));
        rest.truncate(LOOKAHEAD_CANDIDATES);
        cands.extend(rest);
        let mut best: Option<(f64, usize)> = None;
        for (ci, (cut, alpha)) in cands.iter().enumerate() {
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| dot(alpha, &self.z[i]) <= cut.beta);
            let score = self.child_score(&l) + self.child_score(&r);
            if best.is_none_or(|(s, _)| score < s - TIE * (1.0 + s.abs())) {
                best = Some((score, ci));
            }
        }
        let (_, ci) = best?;
        let (cut, alpha) = cands.swap_remove(ci);
        Some((alpha, cut.beta))
    }

    fn child_score(&mut self, idx: &[usize]) -> f64 {
        let own = match self.targets {
            Targets::Class(y) => gini(idx.len(), idx.iter().filter(|&&i| y[i]).count()),
            Targets::Value(y) => fit_linear(self.z, y, idx).2,
        };
        if idx.len() < 2 * self.minb || own <= 0.0 {
            return own;
        }
        self.directions(idx)
            .iter()
            .filter_map(|d| self.sweep(idx, d))
            .map(|c| c.score)
            .fold(own, f64::min)
    }

    /// Axis directions, a discriminant fit on the whole node, and randomized
    /// discriminant fits on subsamples.
    fn directions(&mut self, idx: &[usize]) -> Vec<Vec<f64>> {
        let p = self.p();
        let mut dirs: Vec<Vec<f64>> = (0..p)
            .map(|k| (0..p).map(|j| if j == k { 1.0 } else { 0.0 }).collect())
            .collect();
        let side: Vec<bool> = match self.targets {
            Targets::Class(y) => y.to_vec(),
            Targets::Value(y) => {
                // Classes are the signs of the residuals of one linear fit.
                let (w, c, _) = fit_linear(self.z, y, idx);
                let mut s = vec![false; self.n];
                for &i in idx {
                    s[i] = y[i] - c - dot(&w, &self.z[i]) > 0.0;
                }
                s
            }
        };
        let base = lda_direction(self.z, idx, |i| side[i], 1e-6);
        if let Some(b) = &base {
            dirs.push(b.clone());
        }
        for _ in 0..self.params.hyperplane_restarts {
            let sub: Vec<usize> = idx.iter().copied().filter(|_| self.rng.gen_bool(0.7)).collect();
            let ridge = 10f64.powf(self.rng.gen_range(-6.0..-1.0));
            if let Some(d) = lda_direction(self.z, &sub, |i| side[i], ridge) {
                dirs.push(d);
            }
            if let Some(b) = &base {
                let noisy: Vec<f64> = b.iter().map(|v| v + 0.3 * self.rng.gen_range(-1.0..1.0)).collect();
                if let Some(d) = normalized(noisy) {
                    dirs.push(d);
                }
            }
        }
        dirs
    }

    fn sweep(&self, idx: &[usize], alpha: &[f64]) -> Option<Cut> {
        let mut proj: Vec<(f64, usize)> = idx.iter().map(|&i| (dot(alpha, &self.z[i]), i)).collect();
        proj.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        match self.targets {
            Targets::Class(y) => self.sweep_class(&proj, y),
            Targets::Value(y) => self.sweep_value(&proj, y),
        }
    }

    fn valid_cut(&self, proj: &[(f64, usize)], k: usize) -> bool {
        let n = proj.len();
        k >= self.minb && n - k >= self.minb && proj[k].0 - proj[k - 1].0 > TIE * (1.0 + proj[k].0.abs())
    }

    fn sweep_class(&self, proj: &[(f64, usize)], y: &[bool]) -> Option<Cut> {
        let n = proj.len();
        let total = proj.iter().filter(|(_, i)| y[*i]).count();
        let mut left = 0;
        let mut best: Option<Cut> = None;
        for k in 1..n {
            left += y[proj[k - 1].1] as usize;
            if !self.valid_cut(proj, k) {
                continue;
            }
            let c = Cut {
                score: gini(k, left) + gini(n - k, total - left),
                imbalance: k.abs_diff(n - k),
                beta: 0.5 * (proj[k - 1].0 + proj[k].0),
            };
            if c.beats(best.as_ref()) {
                best = Some(c);
            }
        }
        best
    }

    /// Residual sum of squares of linear fits on both sides. Evaluated on a
    /// coarse grid of cut positions, then refined around the best.
    fn sweep_value(&self, proj: &[(f64, usize)], y: &[f64]) -> Option<Cut> {
        let n = proj.len();
        let p = self.p();
        let m = p + 1;
        let ymean = proj.iter().map(|(_, i)| y[*i]).sum::<f64>() / n as f64;
        let mut zmean = vec![0.0; p];
        for (_, i) in proj {
            for k in 0..p {
                zmean[k] += self.z[*i][k];
            }
        }
        zmean.iter_mut().for_each(|v| *v /= n as f64);
        // Prefix sums of [z, 1][z, 1]^T, [z, 1] y and y^2.
        let mut gram = vec![0.0; (n + 1) * m * m];
        let mut rhs = vec![0.0; (n + 1) * m];
        let mut yy = vec![0.0; n + 1];
        let mut row = vec![0.0; m];
        for (k, (_, i)) in proj.iter().enumerate() {
            for a in 0..p {
                row[a] = self.z[*i][a] - zmean[a];
            }
            row[p] = 1.0;
            let t = y[*i] - ymean;
            let (prev, next) = gram.split_at_mut((k + 1) * m * m);
            let prev = &prev[k * m * m..];
            for a in 0..m {
                for b in 0..m {
                    next[a * m + b] = prev[a * m + b] + row[a] * row[b];
                }
                rhs[(k + 1) * m + a] = rhs[k * m + a] + row[a] * t;
            }
            yy[k + 1] = yy[k] + t * t;
        }
        let side_sse = |g: &[f64], b: &[f64], s: f64| -> f64 {
            let theta = solve_ridge(g, b, m, 1e-10);
            let mut quad = 0.0;
            for a in 0..m {
                let mut ga = 0.0;
                for c in 0..m {
                    ga += g[a * m + c] * theta[c];
                }
                quad += theta[a] * ga;
            }
            let lin: f64 = theta.iter().zip(b).map(|(t, v)| t * v).sum();
            (s - 2.0 * lin + quad).max(0.0)
        };
        let total_g = &gram[n * m * m..];
        let total_b = &rhs[n * m..];
        let eval = |k: usize| -> Cut {
            let gl = &gram[k * m * m..(k + 1) * m * m];
            let bl = &rhs[k * m..(k + 1) * m];
            let gr: Vec<f64> = total_g.iter().zip(gl).map(|(t, l)| t - l).collect();
            let br: Vec<f64> = total_b.iter().zip(bl).map(|(t, l)| t - l).collect();
            let sse = side_sse(gl, bl, yy[k]) + side_sse(&gr, &br, yy[n] - yy[k]);
            Cut {
                score: sse,
                imbalance: k.abs_diff(n - k),
                beta: 0.5 * (proj[k - 1].0 + proj[k].0),
            }
        };
        let stride = (n / 40).max(1);
        let mut best: Option<(Cut, usize)> = None;
        let consider = |k: usize, best: &mut Option<(Cut, usize)>| {
            if k >= 1 && k < n && self.valid_cut(proj, k) {
                let c = eval(k);
                if c.beats(best.as_ref().map(|b| &b.0)) {
                    *best = Some((c, k));
                }
            }
        };
        let mut k = stride;
        while k < n {
            consider(k, &mut best);
            k += stride;
        }
        if best.is_none() {
            for k in 1..n {
                consider(k, &mut best);
            }
        } else if stride > 1 {
            let centre = best.as_ref().unwrap().1;
            for k in centre.saturating_sub(stride - 1)..(centre + stride).min(n) {
                consider(k, &mut best);
            }
        }
        best.map(|b| b.0)
    }

    /// Exact one-coordinate moves of the hyperplane: for each coefficient,
    /// scans every value at which a point changes side, keeping the offset
    /// fixed, then re-sweeps the offset.
    fn coordinate_search(&self, idx: &[usize], y: &[bool], alpha: &mut Vec<f64>, cut: &mut Cut) {
        let p = self.p();
        let n = idx.len();
        let total = idx.iter().filter(|&&i| y[i]).count();
        for _ in 0..5 {
            let mut improved = false;
            for k in 0..p {
                let v: Vec<f64> = idx.iter().map(|&i| dot(alpha, &self.z[i]) - cut.beta).collect();
                // Points with z_k > 0 leave the left side as t passes their
                // breakpoint; points with z_k < 0 join it.
                let mut events: Vec<(f64, usize)> = Vec::new();
                let mut left = 0usize;
                let mut left_pos = 0usize;
                for (j, &i) in idx.iter().enumerate() {
                    let zk = self.z[i][k];
                    let starts_left = if zk > 0.0 {
                        true
                    } else if zk < 0.0 {
                        false
                    } else {
                        v[j] <= 0.0
                    };
                    if starts_left {
                        left += 1;
                        left_pos += y[i] as usize;
                    }
                    if zk != 0.0 {
                        events.push((-v[j] / zk, j));
                    }
                }
                if events.is_empty() {
                    continue;
                }
                events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let mut best_t: Option<(f64, f64)> = None;
                let mut consider = |t: f64, left: usize, left_pos: usize| {
                    if left < self.minb || n - left < self.minb {
                        return;
                    }
                    let s = gini(left, left_pos) + gini(n - left, total - left_pos);
                    if best_t.is_none_or(|(bs, _)| s < bs - TIE * (1.0 + bs.abs())) {
                        best_t = Some((s, t));
                    }
                };
                let first = events[0].0;
                consider(first - 0.1 * (1.0 + first.abs()), left, left_pos);
                let mut e = 0;
                while e < events.len() {
                    let t = events[e].0;
                    while e < events.len() && events[e].0 == t {
                        let i = idx[events[e].1];
                        if self.z[i][k] > 0.0 {
                            left -= 1;
                            left_pos -= y[i] as usize;
                        } else {
                            left += 1;
                            left_pos += y[i] as usize;
                        }
                        e += 1;
                    }
                    let next = if e < events.len() {
                        0.5 * (t + events[e].0)
                    } else {
                        t + 0.1 * (1.0 + t.abs())
                    };
                    consider(next, left, left_pos);
                }
                let Some((s, t)) = best_t else { continue };
                if s < cut.score - TIE * (1.0 + cut.score.abs()) {
                    let mut cand = alpha.clone();
                    cand[k] += t;
                    let Some(cand) = normalized(cand) else { continue };
                    if let Some(c) = self.sweep(idx, &cand) {
                        if c.beats(Some(cut)) {
                            *alpha = cand;
                            *cut = c;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                break;
            }
        }
    }

    fn perturb(&self, idx: &[usize], alpha: &mut Vec<f64>, cut: &mut Cut) {
        for k in 0..self.p() {
            for delta in REGRESSION_PERTURB {
                let mut cand = alpha.clone();
                cand[k] += delta;
                let Some(cand) = normalized(cand) else { continue };
                if let Some(c) = self.sweep(idx, &cand) {
                    if c.score < cut.score - TIE * (1.0 + cut.score.abs()) {
                        *alpha = cand;
                        *cut = c;
                    }
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
