//! Dense bounded-variable primal simplex.
//!
//! Every row `i` gets a slack `s_i = a_i·x` carrying the row bounds, so all
//! constraints are homogeneous and the dictionary `x_B = T x_N` starts from
//! the slack basis with `T = A`. Phase 1 minimizes the sum of bound
//! infeasibilities of the basic variables; phase 2 the true objective.
//! Dantzig pricing switches to Bland's rule after a run of degenerate pivots.

use nalgebra::DMatrix;

use super::{SolveResult, Status};

const FEAS_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const CHECK_TOL: f64 = 1e-7;
const DEGENERATE_RUN: usize = 50;

/// Linear row `lo ≤ Σ coeffs ≤ hi` over sparse `(column, value)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub lo: f64,
    pub hi: f64,
}

impl LpRow {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

/// Minimize `objective·x` subject to rows and column bounds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LpInstance {
    pub col_lo: Vec<f64>,
    pub col_hi: Vec<f64>,
    pub rows: Vec<LpRow>,
    pub objective: Vec<f64>,
}

impl LpInstance {
    pub fn new(col_lo: Vec<f64>, col_hi: Vec<f64>, objective: Vec<f64>) -> Self {
        LpInstance {
            col_lo,
            col_hi,
            rows: Vec::new(),
            objective,
        }
    }

    pub fn ncols(&self) -> usize {
        self.col_lo.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, lo: f64, hi: f64) {
        self.rows.push(LpRow { coeffs, lo, hi });
    }

    /// Largest violation of rows and bounds at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, v) in x.iter().enumerate() {
            worst = worst.max(self.col_lo[j] - v).max(v - self.col_hi[j]);
        }
        for r in &self.rows {
            let a = r.activity(x);
            worst = worst.max(r.lo - a).max(a - r.hi);
        }
        worst
    }
}

/// Solves an LP from scratch.
pub fn solve_lp(inst: &LpInstance) -> SolveResult {
    LpWorkspace::new(inst).solve()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Place {
    Basic(usize),
    Nonbasic(usize),
}

/// Reusable simplex state; bounds may change between solves, keeping the
/// basis as a warm start.
#[derive(Debug, Clone)]
pub struct LpWorkspace {
    inst: LpInstance,
    n: usize,
    m: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    nonbasic: Vec<usize>,
    place: Vec<Place>,
    t: Vec<f64>,
    x: Vec<f64>,
    pub max_iterations: usize,
    pub total_pivots: usize,
}

impl LpWorkspace {
    pub fn new(inst: &LpInstance) -> Self {
        let n = inst.ncols();
        let m = inst.rows.len();
        let mut lo = inst.col_lo.clone();
        let mut hi = inst.col_hi.clone();
        for r in &inst.rows {
            lo.push(r.lo);
            hi.push(r.hi);
        }
        let mut cost = inst.objective.clone();
        cost.resize(n + m, 0.0);
        let mut ws = LpWorkspace {
            inst: inst.clone(),
            n,
            m,
            lo,
            hi,
            cost,
            basis: Vec::new(),
            nonbasic: Vec::new(),
            place: Vec::new(),
            t: Vec::new(),
            x: vec![0.0; n + m],
            max_iterations: 50 * (n + m) + 1000,
            total_pivots: 0,
        };
        ws.slack_basis();
        ws
    }

    fn slack_basis(&mut self) {
        let (n, m) = (self.n, self.m);
        self.basis = (n..n + m).collect();
        self.nonbasic = (0..n).collect();
        self.place = (0..n)
            .map(Place::Nonbasic)
            .chain((0..m).map(Place::Basic))
            .collect();
        self.t = vec![0.0; m * n];
        for (i, r) in self.inst.rows.iter().enumerate() {
            for &(j, a) in &r.coeffs {
                self.t[i * n + j] += a;
            }
        }
        for j in 0..n {
            self.x[j] = self.resting_value(j, 0.0);
        }
        self.recompute_basics();
    }

    pub fn instance(&self) -> &LpInstance {
        &self.inst
    }

    pub fn col_bounds(&self, j: usize) -> (f64, f64) {
        (self.lo[j], self.hi[j])
    }

    /// Changes the bounds of structural column `j`.
    pub fn set_col_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lo[j] = lo;
        self.hi[j] = hi;
        self.inst.col_lo[j] = lo;
        self.inst.col_hi[j] = hi;
    }

    /// Replaces the objective.
    pub fn set_objective(&mut self, c: &[f64]) {
        self.cost[..self.n].copy_from_slice(c);
        self.cost[self.n..].iter_mut().for_each(|v| *v = 0.0);
        self.inst.objective = c.to_vec();
    }

    /// Bound a nonbasic variable rests at, preferring the one nearest `near`.
    fn resting_value(&self, j: usize, near: f64) -> f64 {
        let (l, u) = (self.lo[j], self.hi[j]);
        match (l.is_finite(), u.is_finite()) {
            (true, true) => {
                if (near - l).abs() <= (near - u).abs() {
                    l
                } else {
                    u
                }
            }
            (true, false) => l,
            (false, true) => u,
            (false, false) => 0.0,
        }
    }

    fn recompute_basics(&mut self) {
        let n = self.n;
        for r in 0..self.m {
            let row = &self.t[r * n..(r + 1) * n];
            let v: f64 = row
                .iter()
                .zip(&self.nonbasic)
                .map(|(a, &j)| a * self.x[j])
                .sum();
            self.x[self.basis[r]] = v;
        }
    }

    fn tol(v: f64) -> f64 {
        if v.is_finite() {
            FEAS_TOL * (1.0 + v.abs())
        } else {
            0.0
        }
    }

    /// Runs the simplex from the current basis.
    pub fn solve(&mut self) -> SolveResult {
        for q in 0..self.n {
            let j = self.nonbasic[q];
            self.x[j] = self.resting_value(j, self.x[j]);
        }
        self.recompute_basics();
        let mut out = self.iterate();
        if matches!(out.status, Status::Optimal) && self.residual() > CHECK_TOL {
            log::debug!("lp residual {:.2e}, refactoring", self.residual());
            if self.refactor() {
                out = self.iterate();
            }
            if !matches!(out.status, Status::Optimal) || self.residual() > CHECK_TOL {
                log::debug!("lp residual still high, cold restart");
                self.slack_basis();
                out = self.iterate();
            }
        }
        out
    }

    fn residual(&self) -> f64 {
        let x = &self.x[..self.n];
        let mut worst: f64 = 0.0;
        for j in 0..self.n {
            worst = worst.max(self.lo[j] - x[j]).max(x[j] - self.hi[j]);
        }
        for (i, r) in self.inst.rows.iter().enumerate() {
            let a = r.activity(x);
            let scale = 1.0 + a.abs();
            worst = worst
                .max((self.lo[self.n + i] - a) / scale)
                .max((a - self.hi[self.n + i]) / scale);
        }
        worst
    }

    /// Rebuilds the dictionary from the original rows for the current basis.
    fn refactor(&mut self) -> bool {
        let (n, m) = (self.n, self.m);
        // Columns of [A | -I]; x_B = -B^{-1} N x_N.
        let column = |j: usize| -> Vec<f64> {
            let mut c = vec![0.0; m];
            if j < n {
                for (i, r) in self.inst.rows.iter().enumerate() {
                    for &(k, a) in &r.coeffs {
                        if k == j {
                            c[i] += a;
                        }
                    }
                }
            } else {
                c[j - n] = -1.0;
            }
            c
        };
        let mut bmat = DMatrix::<f64>::zeros(m, m);
        for (r, &j) in self.basis.iter().enumerate() {
            for (i, v) in column(j).into_iter().enumerate() {
                bmat[(i, r)] = v;
            }
        }
        let mut nmat = DMatrix::<f64>::zeros(m, n);
        for (q, &j) in self.nonbasic.iter().enumerate() {
            for (i, v) in column(j).into_iter().enumerate() {
                nmat[(i, q)] = v;
            }
        }
        let lu = bmat.lu();
        let Some(sol) = lu.solve(&nmat) else {
            return false;
        };
        for r in 0..m {
            for q in 0..n {
                self.t[r * n + q] = -sol[(r, q)];
            }
        }
        self.recompute_basics();
        true
    }

    fn iterate(&mut self) -> SolveResult {
        let (n, m) = (self.n, self.m);
        let mut degenerate = 0usize;
        let mut d = vec![0.0; n];
        let mut cb = vec![0.0; m];
        let mut iterations = 0usize;
        loop {
            if iterations >= self.max_iterations {
                return self.finish(Status::IterationLimit, iterations);
            }
            iterations += 1;
            let mut phase1 = false;
            for r in 0..m {
                let j = self.basis[r];
                let v = self.x[j];
                cb[r] = if v < self.lo[j] - Self::tol(self.lo[j]) {
                    phase1 = true;
                    -1.0
                } else if v > self.hi[j] + Self::tol(self.hi[j]) {
                    phase1 = true;
                    1.0
                } else {
                    0.0
                };
            }
            if !phase1 {
                for r in 0..m {
                    cb[r] = self.cost[self.basis[r]];
                }
            }
            for q in 0..n {
                d[q] = if phase1 { 0.0 } else { self.cost[self.nonbasic[q]] };
            }
            for r in 0..m {
                let c = cb[r];
                if c != 0.0 {
                    let row = &self.t[r * n..(r + 1) * n];
                    for q in 0..n {
                        d[q] += c * row[q];
                    }
                }
            }

            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for q in 0..n {
                let j = self.nonbasic[q];
                let v = self.x[j];
                let can_up = v < self.hi[j] - Self::tol(self.hi[j]);
                let can_down = v > self.lo[j] + Self::tol(self.lo[j]);
                let dir = if d[q] < -COST_TOL && can_up {
                    1.0
                } else if d[q] > COST_TOL && can_down {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    let better = match enter {
                        None => true,
                        Some((pq, _)) => j < self.nonbasic[pq],
                    };
                    if better {
                        enter = Some((q, dir));
                    }
                } else if d[q].abs() > best {
                    best = d[q].abs();
                    enter = Some((q, dir));
                }
            }
            let Some((q, dir)) = enter else {
                let status = if phase1 {
                    Status::Infeasible
                } else {
                    Status::Optimal
                };
                return self.finish(status, iterations);
            };

            let e = self.nonbasic[q];
            // Ratio test, Harris style: bound the step with relaxed
            // tolerances, then take the largest pivot within that bound.
            let own = self.hi[e] - self.lo[e];
            let mut tmax = if own.is_finite() { own } else { f64::INFINITY };
            let limit = |ws: &Self, r: usize, relax: f64| -> Option<(f64, f64)> {
                let alpha = ws.t[r * n + q] * dir;
                if alpha.abs() <= PIVOT_TOL {
                    return None;
                }
                let j = ws.basis[r];
                let v = ws.x[j];
                let (l, u) = (ws.lo[j], ws.hi[j]);
                let below = v < l - Self::tol(l);
                let above = v > u + Self::tol(u);
                let target = if alpha > 0.0 {
                    if below {
                        l
                    } else if above {
                        return None;
                    } else {
                        u
                    }
                } else if above {
                    u
                } else if below {
                    return None;
                } else {
                    l
                };
                if !target.is_finite() {
                    return None;
                }
                let slack = if alpha > 0.0 { relax } else { -relax };
                Some((((target + slack * Self::tol(target)) - v) / alpha, target))
            };
            for r in 0..m {
                if let Some((t, _)) = limit(self, r, 1.0) {
                    tmax = tmax.min(t.max(0.0));
                }
            }
            if !tmax.is_finite() {
                if phase1 {
                    // Cannot happen in exact arithmetic; treat as breakdown.
                    return self.finish(Status::IterationLimit, iterations);
                }
                return self.finish(Status::Unbounded, iterations);
            }
            let mut leave: Option<(usize, f64, f64)> = None;
            let mut best_alpha = 0.0;
            for r in 0..m {
                if let Some((t, target)) = limit(self, r, 0.0) {
                    if t <= tmax {
                        let a = self.t[r * n + q].abs();
                        if a > best_alpha {
                            best_alpha = a;
                            leave = Some((r, t.max(0.0), target));
                        }
                    }
                }
            }
            let step = match leave {
                Some((_, t, _)) if !(own.is_finite() && own <= t) => t,
                _ => own,
            };
            if step <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.x[e] += dir * step;
            for r in 0..m {
                let a = self.t[r * n + q];
                if a != 0.0 {
                    self.x[self.basis[r]] += a * dir * step;
                }
            }
            match leave {
                Some((r, t, target)) if !(own.is_finite() && own <= t) => {
                    self.x[self.basis[r]] = target;
                    self.pivot(r, q);
                }
                _ => {
                    // Bound flip of the entering variable.
                    self.x[e] = if dir > 0.0 { self.hi[e] } else { self.lo[e] };
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let n = self.n;
        let p = self.t[r * n + q];
        let mut newrow: Vec<f64> = self.t[r * n..(r + 1) * n].iter().map(|a| -a / p).collect();
        newrow[q] = 1.0 / p;
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * n + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * n..(i + 1) * n];
            for k in 0..n {
                row[k] += f * newrow[k];
            }
            row[q] = f * newrow[q];
        }
        self.t[r * n..(r + 1) * n].copy_from_slice(&newrow);
        let b = self.basis[r];
        let e = self.nonbasic[q];
        self.basis[r] = e;
        self.nonbasic[q] = b;
        self.place[e] = Place::Basic(r);
        self.place[b] = Place::Nonbasic(q);
        self.total_pivots += 1;
    }

    fn finish(&mut self, status: Status, iterations: usize) -> SolveResult {
        let n = self.n;
        let x = self.x[..n].to_vec();
        let objective: f64 = x.iter().zip(&self.cost).map(|(a, b)| a * b).sum();
        let mut duals = vec![0.0; self.m];
        let mut reduced = vec![0.0; n];
        if status == Status::Optimal {
            for (j, place) in self.place.iter().enumerate() {
                if let Place::Nonbasic(q) = *place {
                    let mut dq = self.cost[j];
                    for r in 0..self.m {
                        dq += self.cost[self.basis[r]] * self.t[r * n + q];
                    }
                    if j < n {
                        reduced[j] = dq;
                    } else {
                        duals[j - n] = dq;
                    }
                }
            }
        }
        let bound = match status {
            Status::Optimal => objective,
            Status::Infeasible => f64::INFINITY,
            _ => f64::NEG_INFINITY,
        };
        SolveResult {
            status,
            x,
            objective,
            bound,
            iterations,
            nodes: 0,
            duals,
            reduced_costs: reduced,
        }
    }
}
