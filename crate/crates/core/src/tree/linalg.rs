//! Small dense solves used by the trainer.

/// Solves `a x = b` for symmetric positive definite `a` (row-major, `m × m`)
/// by Cholesky, overwriting `b` with `x`. Returns false if `a` is not
/// numerically positive definite.
pub fn cholesky_solve(a: &mut [f64], b: &mut [f64], m: usize) -> bool {
    for j in 0..m {
        let mut d = a[j * m + j];
        for k in 0..j {
            d -= a[j * m + k] * a[j * m + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * m + j] = d;
        for i in j + 1..m {
            let mut s = a[i * m + j];
            for k in 0..j {
                s -= a[i * m + k] * a[j * m + k];
            }
            a[i * m + j] = s / d;
        }
    }
    for i in 0..m {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * m + k] * b[k];
        }
        b[i] = s / a[i * m + i];
    }
    for i in (0..m).rev() {
        let mut s = b[i];
        for k in i + 1..m {
            s -= a[k * m + i] * b[k];
        }
        b[i] = s / a[i * m + i];
    }
    true
}

/// Ridge-stabilized solve: retries with a growing diagonal shift.
pub fn solve_ridge(a: &[f64], b: &[f64], m: usize, ridge: f64) -> Vec<f64> {
    let scale = (0..m).map(|i| a[i * m + i].abs()).fold(0.0f64, f64::max);
    if scale == 0.0 {
        return vec![0.0; m];
    }
    let mut shift = ridge * scale;
    for _ in 0..12 {
        let mut aa = a.to_vec();
        for i in 0..m {
            aa[i * m + i] += shift;
        }
        let mut x = b.to_vec();
        if cholesky_solve(&mut aa, &mut x, m) && x.iter().all(|v| v.is_finite()) {
            return x;
        }
        shift = if shift == 0.0 { 1e-12 * scale } else { shift * 100.0 };
    }
    vec![0.0; m]
}

/// Least-squares fit `y ≈ w·x + c` over the selected rows. Returns
/// `(w, c, sse)`.
pub fn fit_linear(z: &[Vec<f64>], y: &[f64], idx: &[usize]) -> (Vec<f64>, f64, f64) {
    let p = z.first().map_or(0, |r| r.len());
    let n = idx.len() as f64;
    if idx.is_empty() {
        return (vec![0.0; p], 0.0, 0.0);
    }
    let mut xm = vec![0.0; p];
    let mut ym = 0.0;
    for &i in idx {
        for k in 0..p {
            xm[k] += z[i][k];
        }
        ym += y[i];
    }
    xm.iter_mut().for_each(|v| *v /= n);
    ym /= n;
    let mut g = vec![0.0; p * p];
    let mut c = vec![0.0; p];
    let mut dx = vec![0.0; p];
    for &i in idx {
        for k in 0..p {
            dx[k] = z[i][k] - xm[k];
        }
        let dy = y[i] - ym;
        for a in 0..p {
            c[a] += dx[a] * dy;
            for b in 0..=a {
                g[a * p + b] += dx[a] * dx[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            g[b * p + a] = g[a * p + b];
        }
    }
    let w = solve_ridge(&g, &c, p, 1e-10);
    let intercept = ym - w.iter().zip(&xm).map(|(a, b)| a * b).sum::<f64>();
    let sse = idx
        .iter()
        .map(|&i| {
            let r = y[i] - intercept - w.iter().zip(&z[i]).map(|(a, b)| a * b).sum::<f64>();
            r * r
        })
        .sum();
    (w, intercept, sse)
}

/// Fisher discriminant `(S_w + λ I)⁻¹ (μ₁ − μ₀)` for the rows in `idx`;
/// `None` if a class is missing or the direction vanishes.
pub fn lda_direction(z: &[Vec<f64>], idx: &[usize], class: impl Fn(usize) -> bool, ridge: f64) -> Option<Vec<f64>> {
    let p = z.first().map_or(0, |r| r.len());
    let mut mu = [vec![0.0; p], vec![0.0; p]];
    let mut cnt = [0usize; 2];
    for &i in idx {
        let c = class(i) as usize;
        cnt[c] += 1;
        for k in 0..p {
            mu[c][k] += z[i][k];
        }
    }
    if cnt[0] == 0 || cnt[1] == 0 {
        return None;
    }
    for c in 0..2 {
        let n = cnt[c] as f64;
        mu[c].iter_mut().for_each(|v| *v /= n);
    }
    let mut s = vec![0.0; p * p];
    for &i in idx {
        let m = &mu[class(i) as usize];
        for a in 0..p {
            let da = z[i][a] - m[a];
            for b in 0..=a {
                s[a * p + b] += da * (z[i][b] - m[b]);
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            s[b * p + a] = s[a * p + b];
        }
    }
    let trace: f64 = (0..p).map(|k| s[k * p + k]).sum();
    let diff: Vec<f64> = (0..p).map(|k| mu[1][k] - mu[0][k]).collect();
    let mut a = s;
    let shift = ridge * (trace / p.max(1) as f64) + 1e-12;
    for k in 0..p {
        a[k * p + k] += shift;
    }
    let w = solve_ridge(&a, &diff, p, 0.0);
    normalized(w)
}

/// Scales so that `max |w_k| = 1`; `None` for a zero or non-finite vector.
pub fn normalized(mut w: Vec<f64>) -> Option<Vec<f64>> {
    let m = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(m > 0.0) || !m.is_finite() {
        return None;
    }
    w.iter_mut().for_each(|v| *v /= m);
    Some(w)
}
