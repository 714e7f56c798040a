//! Labeled sample generation over a constraint's active-variable box.

mod knn;
mod olh;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::NonlinearConstraint;

pub use knn::{knn_quasi_newton, secant_point};
pub use olh::{olh_design, olh_samples, GaParams, OlhDesign};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("secant needs distinct values, both were {0}")]
    EqualValues(f64),
    #[error("no feasible samples found")]
    NoFeasiblePoint,
    #[error("need at least {needed} points for k = {k}, got {got}")]
    TooFewPoints { needed: usize, got: usize, k: usize },
}

/// Points over a box. Rows are points in raw coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub points: Vec<Vec<f64>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SampleSet {
    pub fn empty(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        SampleSet {
            points: Vec::new(),
            lower,
            upper,
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| if u > l { (v - l) / (u - l) } else { 0.0 })
            .collect()
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| l + v * (u - l))
            .collect()
    }

    pub fn clip(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    /// Appends points that are not already present (within 1e-12 in
    /// normalized coordinates). Returns how many were added.
    pub fn extend_unique(&mut self, points: impl IntoIterator<Item = Vec<f64>>) -> usize {
        let mut keys: BTreeSet<Vec<i64>> = self.points.iter().map(|p| self.key(p)).collect();
        let mut added = 0;
        for p in points {
            if keys.insert(self.key(&p)) {
                self.points.push(p);
                added += 1;
            }
        }
        added
    }

    fn key(&self, p: &[f64]) -> Vec<i64> {
        self.normalize(p)
            .iter()
            .map(|v| (v * 1e12).round() as i64)
            .collect()
    }
}

/// Sample set with constraint values; `None` marks a domain error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSampleSet {
    pub samples: SampleSet,
    pub values: Vec<Option<f64>>,
    pub labels: Vec<bool>,
}

impl LabeledSampleSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feasible_count(&self) -> usize {
        self.labels.iter().filter(|l| **l).count()
    }

    pub fn append(&mut self, other: LabeledSampleSet) {
        self.samples.points.extend(other.samples.points);
        self.values.extend(other.values);
        self.labels.extend(other.labels);
    }

    /// CSV with columns `x…, value, label`.
    pub fn to_csv(&self, names: &[String]) -> String {
        let mut out = String::new();
        for name in names {
            out.push_str(name);
            out.push(',');
        }
        out.push_str("value,label\n");
        for ((p, v), l) in self.samples.points.iter().zip(&self.values).zip(&self.labels) {
            for x in p {
                out.push_str(&format!("{x:?},"));
            }
            match v {
                Some(v) => out.push_str(&format!("{v:?}")),
                None => out.push_str("nan"),
            }
            out.push_str(if *l { ",1\n" } else { ",0\n" });
        }
        out
    }
}

/// Corners of the box: all `2^p` when that is at most `cap`, otherwise
/// `cap` distinct corners drawn with `seed`.
pub fn boundary_samples(lower: &[f64], upper: &[f64], cap: usize, seed: u64) -> SampleSet {
    let p = lower.len();
    let corner = |bits: &[bool]| -> Vec<f64> {
        bits.iter()
            .enumerate()
            .map(|(k, &b)| if b { upper[k] } else { lower[k] })
            .collect()
    };
    let mut set = SampleSet::empty(lower.to_vec(), upper.to_vec());
    let total = if p >= 63 { u64::MAX } else { 1u64 << p };
    if total <= cap as u64 {
        for mask in 0..total {
            let bits: Vec<bool> = (0..p).map(|k| mask >> k & 1 == 1).collect();
            set.points.push(corner(&bits));
        }
        return set;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    while seen.len() < cap {
        let bits: Vec<bool> = (0..p).map(|_| rng.gen_bool(0.5)).collect();
        if seen.insert(bits.clone()) {
            set.points.push(corner(&bits));
        }
    }
    set
}

/// Evaluates `c` on points over its active variables; `n` is the problem
/// dimension. Equalities are labeled by `h ≥ 0`.
pub fn evaluate_constraint(c: &NonlinearConstraint, set: &SampleSet, n: usize) -> LabeledSampleSet {
    let values: Vec<Option<f64>> = set
        .points
        .iter()
        .map(|p| c.value_local(p, n).ok())
        .collect();
    let labels = values.iter().map(|v| v.is_some_and(|v| v >= 0.0)).collect();
    LabeledSampleSet {
        samples: set.clone(),
        values,
        labels,
    }
}

/// Random points uniformly in the box.
pub fn uniform_samples(lower: &[f64], upper: &[f64], n: usize, seed: u64) -> SampleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            lower
                .iter()
                .zip(upper)
                .map(|(l, u)| if u > l { rng.gen_range(*l..=*u) } else { *l })
                .collect()
        })
        .collect();
    SampleSet {
        points,
        lower: lower.to_vec(),
        upper: upper.to_vec(),
    }
}

pub(crate) fn shuffled(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(rng);
    v
}
