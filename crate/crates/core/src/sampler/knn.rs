//! Boundary refinement by secant steps inside mixed kNN clusters.

use super::{LabeledSampleSet, SampleSet, SamplerError};

/// Secant root `x_j - y_j (x_j - x_i) / (y_j - y_i)`.
pub fn secant_point(xi: &[f64], yi: f64, xj: &[f64], yj: f64) -> Result<Vec<f64>, SamplerError> {
    if yi == yj {
        return Err(SamplerError::EqualValues(yi));
    }
    let s = yj / (yj - yi);
    Ok(xj.iter().zip(xi).map(|(b, a)| b - s * (b - a)).collect())
}

/// One pass of kNN quasi-Newton sampling with clusters of `k` points (the
/// center and its `k - 1` nearest neighbors in the unit-normalized box).
/// For each mixed cluster whose center is infeasible, emits the secant
/// point between the center and every feasible neighbor. Output is clipped
/// to the box and deduplicated.
pub fn knn_quasi_newton(d: &LabeledSampleSet, k: usize) -> Result<SampleSet, SamplerError> {
    let n = d.len();
    if n < k.max(2) {
        return Err(SamplerError::TooFewPoints {
            needed: k.max(2),
            got: n,
            k,
        });
    }
    if d.feasible_count() == 0 {
        return Err(SamplerError::NoFeasiblePoint);
    }
    let set = &d.samples;
    let unit: Vec<Vec<f64>> = set.points.iter().map(|p| set.normalize(p)).collect();
    let mut out = SampleSet::empty(set.lower.clone(), set.upper.clone());
    let neighbors = k.saturating_sub(1);
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut fresh = Vec::new();
    for i in 0..n {
        if d.labels[i] {
            continue;
        }
        dist.clear();
        for j in 0..n {
            if j != i {
                let d2: f64 = unit[i]
                    .iter()
                    .zip(&unit[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                dist.push((d2, j));
            }
        }
        let take = neighbors.min(dist.len());
        if take == 0 {
            continue;
        }
        dist.select_nth_unstable_by(take - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut cluster: Vec<(f64, usize)> = dist[..take].to_vec();
        cluster.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let Some(yi) = d.values[i] else {
            continue;
        };
        for &(_, j) in &cluster {
            if !d.labels[j] {
                continue;
            }
            let Some(yj) = d.values[j] else {
                continue;
            };
            if let Ok(mut x) = secant_point(&set.points[i], yi, &set.points[j], yj) {
                set.clip(&mut x);
                fresh.push(x);
            }
        }
    }
    out.extend_unique(fresh);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn secant_unit_cases() {
        assert_eq!(secant_point(&[0.0], -1.0, &[1.0], 1.0).unwrap(), vec![0.5]);
        assert_eq!(secant_point(&[0.0], -1.0, &[1.0], 3.0).unwrap(), vec![0.25]);
        assert!(secant_point(&[0.0], 2.0, &[1.0], 2.0).is_err());
    }

    fn labeled(points: Vec<Vec<f64>>, values: Vec<f64>, lo: Vec<f64>, hi: Vec<f64>) -> LabeledSampleSet {
        LabeledSampleSet {
            labels: values.iter().map(|v| *v >= 0.0).collect(),
            values: values.into_iter().map(Some).collect(),
            samples: SampleSet {
                points,
                lower: lo,
                upper: hi,
            },
        }
    }

    #[test]
    fn one_dimensional_trace() {
        let d = labeled(vec![vec![0.0], vec![1.0]], vec![-1.0, 1.0], vec![0.0], vec![1.0]);
        let s = knn_quasi_newton(&d, 2).unwrap();
        assert_eq!(s.points, vec![vec![0.5]]);
    }

    #[test]
    fn all_feasible_gives_nothing() {
        let d = labeled(
            vec![vec![0.0], vec![0.5], vec![1.0]],
            vec![1.0, 2.0, 3.0],
            vec![0.0],
            vec![1.0],
        );
        assert!(knn_quasi_newton(&d, 2).unwrap().is_empty());
    }

    #[test]
    fn feasible_center_contributes_nothing() {
        // Point 1 is a feasible center of a mixed cluster {1, 0}; point 0 is
        // an infeasible center whose nearest neighbor is point 1. Only the
        // pair seen from the infeasible side is emitted, once.
        let d = labeled(
            vec![vec![0.0], vec![0.4], vec![1.0]],
            vec![-1.0, 1.0, 2.0],
            vec![0.0],
            vec![1.0],
        );
        let s = knn_quasi_newton(&d, 2).unwrap();
        assert_eq!(s.points, vec![vec![0.2]]);
    }

    #[test]
    fn no_feasible_point_is_an_error() {
        let d = labeled(vec![vec![0.0], vec![1.0]], vec![-1.0, -2.0], vec![0.0], vec![1.0]);
        assert_eq!(knn_quasi_newton(&d, 2), Err(SamplerError::NoFeasiblePoint));
    }
}
