//! Hyperplane-split decision trees: classification trees for constraint
//! feasibility and regression trees with linear leaves.

mod linalg;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use train::{train_classifier, train_regressor};

pub const TREE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeMode {
    Classify,
    Regress,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub complexity: f64,
    /// Minimum leaf size as a fraction of the training set.
    pub minbucket: f64,
    pub tree_restarts: usize,
    pub hyperplane_restarts: usize,
    pub mode: TreeMode,
}

impl TreeParams {
    pub fn classifier() -> Self {
        TreeParams {
            max_depth: 5,
            complexity: 1e-6,
            minbucket: 0.01,
            tree_restarts: 10,
            hyperplane_restarts: 5,
            mode: TreeMode::Classify,
        }
    }

    pub fn regressor() -> Self {
        TreeParams {
            minbucket: 0.02,
            mode: TreeMode::Regress,
            ..TreeParams::classifier()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error("training data holds a single class")]
    SingleClass,
    #[error("no training data")]
    Empty,
    #[error("invalid parameters: {0}")]
    Params(String),
}

/// `αᵀx ≤ β` goes left. Normalized so that `max |α_h| = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperplaneSplit {
    pub alpha: Vec<f64>,
    pub beta: f64,
}

impl HyperplaneSplit {
    pub fn new(alpha: Vec<f64>, beta: f64) -> Self {
        let scale = alpha.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        if scale > 0.0 {
            HyperplaneSplit {
                alpha: alpha.iter().map(|a| a / scale).collect(),
                beta: beta / scale,
            }
        } else {
            HyperplaneSplit { alpha, beta }
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.alpha.iter().zip(x).map(|(a, v)| a * v).sum()
    }

    /// Tie rule: equality routes left.
    pub fn goes_left(&self, x: &[f64]) -> bool {
        self.value(x) <= self.beta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LeafPayload {
    Class { feasible: bool },
    Linear { weights: Vec<f64>, intercept: f64 },
}

impl LeafPayload {
    pub fn evaluate(&self, x: &[f64]) -> Prediction {
        match self {
            LeafPayload::Class { feasible } => Prediction::Class(*feasible),
            LeafPayload::Linear { weights, intercept } => Prediction::Value(
                intercept + weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>(),
            ),
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, LeafPayload::Class { feasible: true })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prediction {
    Class(bool),
    Value(f64),
}

impl Prediction {
    pub fn feasible(self) -> bool {
        matches!(self, Prediction::Class(true))
    }

    pub fn value(self) -> f64 {
        match self {
            Prediction::Value(v) => v,
            Prediction::Class(b) => {
                if b {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        #[serde(flatten)]
        split: HyperplaneSplit,
        left: usize,
        right: usize,
    },
    Leaf {
        payload: LeafPayload,
        /// Training points routed here.
        support: usize,
    },
}

/// Binary tree stored in preorder; node `i` has id `i + 1`, so the root is
/// node 1 and leaves are numbered in the order a depth-first walk meets them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperplaneTree {
    pub version: u32,
    pub mode: TreeMode,
    pub dim: usize,
    pub nodes: Vec<TreeNode>,
}

/// Decision path of one leaf: `αᵀx ≤ β` for `left`, `αᵀx ≥ β` for `right`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafPolyhedron {
    pub leaf_id: usize,
    pub payload: LeafPayload,
    pub left: Vec<HyperplaneSplit>,
    pub right: Vec<HyperplaneSplit>,
}

impl LeafPolyhedron {
    pub fn path_len(&self) -> usize {
        self.left.len() + self.right.len()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.left.iter().all(|h| h.value(x) <= h.beta + tol)
            && self.right.iter().all(|h| h.value(x) >= h.beta - tol)
    }
}

impl HyperplaneTree {
    /// Tree with a single leaf.
    pub fn constant(dim: usize, payload: LeafPayload, support: usize) -> Self {
        let mode = match payload {
            LeafPayload::Class { .. } => TreeMode::Classify,
            LeafPayload::Linear { .. } => TreeMode::Regress,
        };
        HyperplaneTree {
            version: TREE_FORMAT_VERSION,
            mode,
            dim,
            nodes: vec![TreeNode::Leaf { payload, support }],
        }
    }

    /// Index of the leaf reached by `x`.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { .. } => return i,
                TreeNode::Split { split, left, right } => {
                    i = if split.goes_left(x) { *left } else { *right };
                }
            }
        }
    }

    /// Preorder id (1-based) of the leaf reached by `x`.
    pub fn leaf_id(&self, x: &[f64]) -> usize {
        self.leaf_index(x) + 1
    }

    pub fn predict(&self, x: &[f64]) -> Prediction {
        match &self.nodes[self.leaf_index(x)] {
            TreeNode::Leaf { payload, .. } => payload.evaluate(x),
            TreeNode::Split { .. } => unreachable!(),
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    pub fn split_count(&self) -> usize {
        self.nodes.len() - self.leaf_count()
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &HyperplaneTree, i: usize) -> usize {
            match &t.nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
            }
        }
        walk(self, 0)
    }

    /// Polyhedron of every leaf, in preorder.
    pub fn leaf_polyhedra(&self) -> Vec<LeafPolyhedron> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, Vec::new(), Vec::new())];
        while let Some((i, left, right)) = stack.pop() {
            match &self.nodes[i] {
                TreeNode::Leaf { payload, .. } => out.push(LeafPolyhedron {
                    leaf_id: i + 1,
                    payload: payload.clone(),
                    left,
                    right,
                }),
                TreeNode::Split {
                    split,
                    left: l,
                    right: r,
                } => {
                    let mut rr = right.clone();
                    rr.push(split.clone());
                    stack.push((*r, left.clone(), rr));
                    let mut ll = left;
                    ll.push(split.clone());
                    stack.push((*l, ll, right));
                }
            }
        }
        out
    }

    /// Leaves labeled feasible.
    pub fn feasible_leaves(&self) -> Vec<LeafPolyhedron> {
        self.leaf_polyhedra()
            .into_iter()
            .filter(|l| l.payload.is_feasible())
            .collect()
    }

    pub fn infeasible_leaves(&self) -> Vec<LeafPolyhedron> {
        self.leaf_polyhedra()
            .into_iter()
            .filter(|l| matches!(l.payload, LeafPayload::Class { feasible: false }))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Builds a tree from a preorder list of splits and leaves; used for
    /// hand-specified trees.
    pub fn from_preorder(dim: usize, mode: TreeMode, items: Vec<PreorderItem>) -> Self {
        fn build(items: &[PreorderItem], pos: &mut usize, nodes: &mut Vec<TreeNode>) -> usize {
            let at = nodes.len();
            let item = items[*pos].clone();
            *pos += 1;
            match item {
                PreorderItem::Leaf(payload) => {
                    nodes.push(TreeNode::Leaf {
                        payload,
                        support: 0,
                    });
                }
                PreorderItem::Split(split) => {
                    nodes.push(TreeNode::Leaf {
                        payload: LeafPayload::Class { feasible: false },
                        support: 0,
                    });
                    let left = build(items, pos, nodes);
                    let right = build(items, pos, nodes);
                    nodes[at] = TreeNode::Split { split, left, right };
                }
            }
            at
        }
        let mut nodes = Vec::new();
        let mut pos = 0;
        build(&items, &mut pos, &mut nodes);
        HyperplaneTree {
            version: TREE_FORMAT_VERSION,
            mode,
            dim,
            nodes,
        }
    }
}

impl HyperplaneTree {
    /// Random tree over the box: each split passes through a random point of
    /// its parent's sampled region, leaf depth up to `max_depth`, random
    /// class labels (or random linear leaves in regression mode).
    pub fn random(lower: &[f64], upper: &[f64], max_depth: usize, mode: TreeMode, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let p = lower.len();
        let mut items = Vec::new();
        fn go(
            items: &mut Vec<PreorderItem>,
            rng: &mut rand_chacha::ChaCha8Rng,
            lower: &[f64],
            upper: &[f64],
            depth: usize,
            max_depth: usize,
            mode: TreeMode,
        ) {
            let p = lower.len();
            let split_here = depth < max_depth && (depth == 0 || rng.gen_bool(0.7));
            if !split_here {
                let payload = match mode {
                    TreeMode::Classify => LeafPayload::Class {
                        feasible: rng.gen_bool(0.5),
                    },
                    TreeMode::Regress => LeafPayload::Linear {
                        weights: (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                        intercept: rng.gen_range(-2.0..2.0),
                    },
                };
                items.push(PreorderItem::Leaf(payload));
                return;
            }
            let alpha: Vec<f64> = (0..p)
                .map(|_| if rng.gen_bool(0.8) { rng.gen_range(-1.0..1.0) } else { 0.0 })
                .collect();
            let mut alpha = alpha;
            if alpha.iter().all(|a| *a == 0.0) {
                alpha[rng.gen_range(0..p)] = 1.0;
            }
            let point: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| rng.gen_range(*l..=*u)).collect();
            let beta = alpha.iter().zip(&point).map(|(a, x)| a * x).sum();
            items.push(PreorderItem::Split(HyperplaneSplit::new(alpha, beta)));
            go(items, rng, lower, upper, depth + 1, max_depth, mode);
            go(items, rng, lower, upper, depth + 1, max_depth, mode);
        }
        go(&mut items, &mut rng, lower, upper, 0, max_depth, mode);
        HyperplaneTree::from_preorder(p, mode, items)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PreorderItem {
    Split(HyperplaneSplit),
    Leaf(LeafPayload),
}

/// Fraction of misclassified points: `(1/n) Σ 𝕀(T(x_i) ≠ y_i)`.
pub fn misclassification_error(t: &HyperplaneTree, points: &[Vec<f64>], labels: &[bool]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let wrong = points
        .iter()
        .zip(labels)
        .filter(|(x, y)| t.predict(x).feasible() != **y)
        .count();
    wrong as f64 / points.len() as f64
}

/// `1 - R² = Σ (y_i - T(x_i))² / Σ (y_i - ȳ)²`. For constant targets the
/// value is 0 when every residual is 0 and 1 otherwise.
pub fn one_minus_r2(t: &HyperplaneTree, points: &[Vec<f64>], targets: &[f64]) -> f64 {
    if targets.is_empty() {
        return 0.0;
    }
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let sst: f64 = targets.iter().map(|y| (y - mean).powi(2)).sum();
    let sse: f64 = points
        .iter()
        .zip(targets)
        .map(|(x, y)| (y - t.predict(x).value()).powi(2))
        .sum();
    if sst <= 0.0 {
        return if sse <= 0.0 { 0.0 } else { 1.0 };
    }
    sse / sst
}
