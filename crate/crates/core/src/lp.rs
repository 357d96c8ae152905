//! Dense two-phase simplex for box-bounded linear programs.
//!
//! Solves `min cᵀz` subject to `A_eq z = b_eq`, `A_ub z ≤ b_ub` and
//! `lo ≤ z ≤ hi` with `0 ≤ lo ≤ hi ≤ 1`. Bounds are handled by the
//! upper-bounding technique (nonbasic variables sit at either bound) so the
//! box never appears as tableau rows. Entering columns are priced by largest
//! reduced cost, falling back to Bland's rule after a run of degenerate
//! pivots; the ratio test is Harris's two-pass variant, which avoids tiny
//! pivots on the heavily degenerate programs built by [`crate::cmdp`].
//!
//! The tableau is stored densely, but pivots only touch rows with a nonzero
//! entry in the pivot column and columns with a nonzero entry in the pivot
//! row, which keeps the structured CMDP programs cheap.

use thiserror::Error;

/// Primal feasibility tolerance (phase-one objective, bound violations).
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Reduced-cost tolerance for optimality.
pub const OPTIMALITY_TOL: f64 = 1e-9;
/// Default pivot budget.
pub const DEFAULT_MAX_PIVOTS: usize = 1_000_000;

const PIVOT_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots before switching to Bland's rule.
const STALL_LIMIT: usize = 50;
const DROP_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),

    #[error("invalid bounds for variable {var}: [{lo}, {hi}] (need 0 <= lo <= hi <= 1)")]
    InvalidBounds { var: usize, lo: f64, hi: f64 },

    #[error("iteration limit of {0} pivots reached")]
    IterationLimit(usize),
}

/// A block of linear constraints stored as sparse rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Constraints {
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
}

impl Constraints {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a block from dense rows.
    pub fn from_dense(rows: &[Vec<f64>], rhs: &[f64]) -> Result<Self, LpError> {
        if rows.len() != rhs.len() {
            return Err(LpError::DimensionMismatch(format!(
                "{} constraint rows but {} right-hand sides",
                rows.len(),
                rhs.len()
            )));
        }
        let mut out = Self::new();
        for (row, &b) in rows.iter().zip(rhs) {
            out.push(
                row.iter().copied().enumerate().filter(|&(_, a)| a != 0.0),
                b,
            );
        }
        Ok(out)
    }

    /// Appends `Σ coeffs · z (rel) rhs`. Repeated column indices are summed.
    pub fn push(&mut self, coeffs: impl IntoIterator<Item = (usize, f64)>, rhs: f64) {
        let mut row: Vec<(usize, f64)> = coeffs.into_iter().collect();
        row.sort_by_key(|&(j, _)| j);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
        for (j, a) in row {
            match merged.last_mut() {
                Some((k, v)) if *k == j => *v += a,
                _ => merged.push((j, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        self.rows.push(merged);
        self.rhs.push(rhs);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn rhs(&self, i: usize) -> f64 {
        self.rhs[i]
    }

    /// Left-hand side `a_i · z` of every row.
    pub fn activity(&self, z: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, a)| a * z[j]).sum())
            .collect()
    }
}

/// `min cᵀz` s.t. `eq`, `ub` and per-variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub eq: Constraints,
    pub ub: Constraints,
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// A program with no constraints and every variable boxed in `[0, 1]`.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            eq: Constraints::new(),
            ub: Constraints::new(),
            bounds: vec![(0.0, 1.0); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(LpError::DimensionMismatch(format!(
                "{} objective coefficients but {} bounds",
                n,
                self.bounds.len()
            )));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::NonFinite("objective"));
        }
        for (name, block) in [
            ("equality constraints", &self.eq),
            ("inequality constraints", &self.ub),
        ] {
            for (row, &b) in block.rows.iter().zip(&block.rhs) {
                if !b.is_finite() || row.iter().any(|&(_, a)| !a.is_finite()) {
                    return Err(LpError::NonFinite(name));
                }
                if let Some(&(j, _)) = row.iter().find(|&&(j, _)| j >= n) {
                    return Err(LpError::DimensionMismatch(format!(
                        "{name} reference column {j} but the program has {n} variables"
                    )));
                }
            }
        }
        for (var, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo >= 0.0 && lo <= hi && hi <= 1.0) {
                return Err(LpError::InvalidBounds { var, lo, hi });
            }
        }
        Ok(())
    }

    pub fn objective_at(&self, z: &[f64]) -> f64 {
        self.objective.iter().zip(z).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any equality, inequality or bound at `z`.
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let eq = self
            .eq
            .activity(z)
            .iter()
            .zip(&self.eq.rhs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let ub = self
            .ub
            .activity(z)
            .iter()
            .zip(&self.ub.rhs)
            .map(|(a, b)| (a - b).max(0.0))
            .fold(0.0, f64::max);
        let bounds = self
            .bounds
            .iter()
            .zip(z)
            .map(|(&(lo, hi), &v)| (lo - v).max(v - hi).max(0.0))
            .fold(0.0, f64::max);
        eq.max(ub).max(bounds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimizer when `status == Optimal`, otherwise the last iterate.
    pub values: Vec<f64>,
    pub objective_value: f64,
    pub pivots: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub max_pivots: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_pivots: DEFAULT_MAX_PIVOTS,
        }
    }
}

/// Solves `lp` with default options.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_with(lp, &SolverOptions::default())
}

pub fn solve_with(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let mut tab = Tableau::build(lp);

    // Phase one: drive the artificial variables to zero.
    let mut cost = vec![0.0; tab.ncols];
    for c in &mut cost[tab.art_start..] {
        *c = 1.0;
    }
    tab.set_costs(&cost);
    if tab.run(opts.max_pivots)? == Outcome::Unbounded {
        // Cannot happen for a sum of nonnegative artificials.
        unreachable!("phase one is bounded below by zero");
    }
    let infeasibility: f64 = tab
        .basis
        .iter()
        .zip(&tab.beta)
        .filter(|&(&j, _)| j >= tab.art_start)
        .map(|(_, &v)| v)
        .sum();
    let scale = 1.0 + tab.rhs_scale;
    if infeasibility > FEASIBILITY_TOL * scale {
        let values = tab.primal(lp);
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            objective_value: lp.objective_at(&values),
            values,
            pivots: tab.pivots,
        });
    }
    tab.expel_artificials();

    // Phase two on the structural and slack columns only.
    let mut cost = vec![0.0; tab.ncols];
    cost[..lp.num_vars()].copy_from_slice(&lp.objective);
    tab.active = tab.art_start;
    tab.set_costs(&cost);
    let mut outcome = tab.run(opts.max_pivots)?;
    // Reduced costs are updated incrementally; recompute them and resume if
    // drift hid an improving column.
    for _ in 0..3 {
        if outcome != Outcome::Optimal {
            break;
        }
        let before = tab.pivots;
        tab.set_costs(&cost);
        outcome = tab.run(opts.max_pivots)?;
        if tab.pivots == before {
            break;
        }
    }
    let values = tab.primal(lp);
    let status = match outcome {
        Outcome::Optimal => LpStatus::Optimal,
        Outcome::Unbounded => LpStatus::Unbounded,
    };
    Ok(LpSolution {
        status,
        objective_value: lp.objective_at(&values),
        values,
        pivots: tab.pivots,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Unbounded,
}

/// Bounded-variable simplex tableau over shifted variables `w = z - lo`.
///
/// Column layout: structural variables, then one slack per inequality row,
/// then one artificial per row that has no usable slack.
struct Tableau {
    m: usize,
    ncols: usize,
    art_start: usize,
    /// Columns `>= active` never enter the basis.
    active: usize,
    t: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    upper: Vec<f64>,
    at_upper: Vec<bool>,
    cost: Vec<f64>,
    d: Vec<f64>,
    pivots: usize,
    rhs_scale: f64,
    scratch: Vec<(usize, f64)>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let m_eq = lp.eq.len();
        let m_ub = lp.ub.len();
        let m = m_eq + m_ub;
        let lo: Vec<f64> = lp.bounds.iter().map(|b| b.0).collect();

        // Shifted right-hand sides and the sign each row is multiplied by.
        let mut rhs = Vec::with_capacity(m);
        let mut needs_art = Vec::with_capacity(m);
        for (block, is_eq) in [(&lp.eq, true), (&lp.ub, false)] {
            for i in 0..block.len() {
                let shift: f64 = block.rows[i].iter().map(|&(j, a)| a * lo[j]).sum();
                let b = block.rhs[i] - shift;
                rhs.push(b);
                needs_art.push(is_eq || b < 0.0);
            }
        }
        let n_art = needs_art.iter().filter(|&&a| a).count();
        let art_start = n + m_ub;
        let ncols = art_start + n_art;

        let mut t = vec![0.0; m * ncols];
        let mut beta = vec![0.0; m];
        let mut basis = vec![0; m];
        let mut upper = vec![f64::INFINITY; ncols];
        for (j, &(l, h)) in lp.bounds.iter().enumerate() {
            upper[j] = h - l;
        }
        let mut next_art = art_start;
        for i in 0..m {
            let (row, is_ub) = if i < m_eq {
                (lp.eq.row(i), false)
            } else {
                (lp.ub.row(i - m_eq), true)
            };
            let sign = if rhs[i] < 0.0 { -1.0 } else { 1.0 };
            let r = &mut t[i * ncols..(i + 1) * ncols];
            for &(j, a) in row {
                r[j] += sign * a;
            }
            if is_ub {
                r[n + (i - m_eq)] = sign;
            }
            beta[i] = sign * rhs[i];
            if needs_art[i] {
                r[next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            } else {
                basis[i] = n + (i - m_eq);
            }
        }
        let mut is_basic = vec![false; ncols];
        for &j in &basis {
            is_basic[j] = true;
        }
        let rhs_scale = rhs.iter().fold(0.0f64, |acc, b| acc.max(b.abs()));

        Self {
            m,
            ncols,
            art_start,
            active: ncols,
            t,
            beta,
            basis,
            is_basic,
            upper,
            at_upper: vec![false; ncols],
            cost: vec![0.0; ncols],
            d: vec![0.0; ncols],
            pivots: 0,
            rhs_scale,
            scratch: Vec::new(),
        }
    }

    fn set_costs(&mut self, cost: &[f64]) {
        self.cost.copy_from_slice(cost);
        self.d.copy_from_slice(cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.t[i * self.ncols..(i + 1) * self.ncols];
            for (dj, &a) in self.d.iter_mut().zip(row) {
                *dj -= cb * a;
            }
        }
        for &j in &self.basis {
            self.d[j] = 0.0;
        }
    }

    /// Dantzig pricing, or Bland's lowest-index rule while stalled on
    /// degenerate pivots so that cycling cannot persist.
    fn entering(&self, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.active {
            if self.is_basic[j] || self.upper[j] == 0.0 {
                continue;
            }
            let gain = if self.at_upper[j] {
                self.d[j]
            } else {
                -self.d[j]
            };
            if gain <= OPTIMALITY_TOL {
                continue;
            }
            if bland {
                return Some(j);
            }
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((j, gain));
            }
        }
        best.map(|(j, _)| j)
    }

    /// Step bound for row `i` when column `e` moves in direction `dir`,
    /// with the basic variable's bounds relaxed by `slack`.
    fn row_ratio(&self, i: usize, e: usize, dir: f64, slack: f64) -> Option<(f64, f64, bool)> {
        let alpha = self.t[i * self.ncols + e] * dir;
        if alpha > PIVOT_TOL {
            Some(((self.beta[i] + slack) / alpha, alpha, false))
        } else if alpha < -PIVOT_TOL {
            let ub = self.upper[self.basis[i]];
            if ub.is_infinite() {
                return None;
            }
            Some(((ub - self.beta[i] + slack) / -alpha, alpha, true))
        } else {
            None
        }
    }

    fn run(&mut self, max_pivots: usize) -> Result<Outcome, LpError> {
        let mut stalled = 0usize;
        while let Some(e) = self.entering(stalled >= STALL_LIMIT) {
            if self.pivots >= max_pivots {
                return Err(LpError::IterationLimit(max_pivots));
            }
            let dir = if self.at_upper[e] { -1.0 } else { 1.0 };

            // Harris two-pass ratio test: bound the step with tolerances,
            // then pivot on the largest entry among rows within that bound.
            let mut limit = f64::INFINITY;
            for i in 0..self.m {
                if let Some((theta, _, _)) = self.row_ratio(i, e, dir, FEASIBILITY_TOL) {
                    limit = limit.min(theta);
                }
            }
            let mut best: Option<(f64, usize, bool, f64)> = None; // (theta, row, to upper, |alpha|)
            if limit.is_finite() {
                for i in 0..self.m {
                    let Some((theta, alpha, to_upper)) = self.row_ratio(i, e, dir, 0.0) else {
                        continue;
                    };
                    if theta > limit {
                        continue;
                    }
                    let size = alpha.abs();
                    let better = match best {
                        None => true,
                        Some((_, bi, _, bs)) => {
                            size > bs * (1.0 + 1e-9)
                                || (size >= bs * (1.0 - 1e-9) && self.basis[i] < self.basis[bi])
                        }
                    };
                    if better {
                        best = Some((theta.max(0.0), i, to_upper, size));
                    }
                }
            }

            let flip = self.upper[e];
            match best {
                None if flip.is_infinite() => return Ok(Outcome::Unbounded),
                Some((theta, r, to_upper, _)) if flip > theta => {
                    stalled = if theta > 0.0 { 0 } else { stalled + 1 };
                    self.step(e, dir, theta);
                    let entering_value = if self.at_upper[e] {
                        self.upper[e] - theta
                    } else {
                        theta
                    };
                    let leaving = self.basis[r];
                    self.at_upper[leaving] = to_upper;
                    self.beta[r] = entering_value;
                    self.pivot(r, e);
                }
                _ => {
                    // The entering variable reaches its opposite bound first.
                    stalled = 0;
                    self.step(e, dir, flip);
                    self.at_upper[e] = !self.at_upper[e];
                }
            }
            self.pivots += 1;
        }
        Ok(Outcome::Optimal)
    }

    /// Moves the basic variables for a step of length `theta` along column `e`.
    fn step(&mut self, e: usize, dir: f64, theta: f64) {
        if theta == 0.0 {
            return;
        }
        for i in 0..self.m {
            let a = self.t[i * self.ncols + e];
            if a != 0.0 {
                self.beta[i] -= theta * dir * a;
            }
        }
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let nc = self.ncols;
        let active = self.active;
        let p = self.t[r * nc + e];
        self.scratch.clear();
        {
            let row = &mut self.t[r * nc..(r + 1) * nc];
            for (j, v) in row[..active].iter_mut().enumerate() {
                if *v != 0.0 {
                    *v /= p;
                    self.scratch.push((j, *v));
                }
            }
            for v in &mut row[active..] {
                *v /= p;
            }
            row[e] = 1.0;
        }
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * nc + e];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * nc..(i + 1) * nc];
            for &(j, a) in &self.scratch {
                let v = row[j] - f * a;
                row[j] = if v.abs() < DROP_TOL { 0.0 } else { v };
            }
            row[e] = 0.0;
        }
        let f = self.d[e];
        if f != 0.0 {
            for &(j, a) in &self.scratch {
                self.d[j] -= f * a;
            }
        }
        self.d[e] = 0.0;

        let leaving = self.basis[r];
        self.is_basic[leaving] = false;
        self.is_basic[e] = true;
        self.basis[r] = e;
        self.at_upper[e] = false;
    }

    /// After phase one, pivots zero-valued artificials out of the basis where
    /// possible; any that remain sit on redundant rows and are fixed at zero.
    fn expel_artificials(&mut self) {
        self.active = self.art_start;
        for r in 0..self.m {
            if self.basis[r] < self.art_start {
                continue;
            }
            let row = &self.t[r * self.ncols..(r + 1) * self.ncols];
            let candidate = (0..self.art_start)
                .filter(|&j| !self.is_basic[j] && row[j].abs() > 1e-9)
                .max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()));
            match candidate {
                Some(e) => {
                    let value = if self.at_upper[e] { self.upper[e] } else { 0.0 };
                    self.beta[r] = value;
                    self.pivot(r, e);
                    self.pivots += 1;
                }
                None => {
                    let j = self.basis[r];
                    self.upper[j] = 0.0;
                    self.beta[r] = 0.0;
                }
            }
        }
        for j in self.art_start..self.ncols {
            self.upper[j] = 0.0;
            self.at_upper[j] = false;
        }
    }

    fn primal(&self, lp: &LinearProgram) -> Vec<f64> {
        let n = lp.num_vars();
        let mut w: Vec<f64> = (0..n)
            .map(|j| if self.at_upper[j] { self.upper[j] } else { 0.0 })
            .collect();
        for (i, &j) in self.basis.iter().enumerate() {
            if j < n {
                w[j] = self.beta[i];
            }
        }
        w.iter()
            .zip(&lp.bounds)
            .map(|(&v, &(lo, hi))| (lo + v).clamp(lo, hi))
            .collect()
    }
}
