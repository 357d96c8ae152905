//! Single-sensor constrained MDP solved as an occupancy-measure LP.
//!
//! For a fixed bandwidth multiplier `W`, one sensor chooses when to transmit
//! so as to minimize `avg AoI + W · avg activation` under its average power
//! budget. The stationary randomized optimum is found from the LP over
//! `μ_{x,q}` (probability of AoI `x` in channel state `q`) and
//! `y_{x,q} = μ_{x,q} ξ_{x,q}` (probability of being there *and* scheduled),
//! with the AoI truncated at `X_max` where scheduling is forced.
//!
//! Conventions: AoI values are one-based (`1..=x_max`), channel states are
//! zero-based.

use crate::channel::ChannelModel;
use crate::lp::{self, LinearProgram, LpError, LpStatus};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod chain;

/// Default AoI truncation.
pub const DEFAULT_X_MAX: usize = 200;
/// How often [`solve_decoupled`] may double the truncation.
pub const MAX_DOUBLINGS: u32 = 4;
/// Stationary mass at `X_max` above which the truncation is deemed too tight.
pub const BOUNDARY_MASS_TOL: f64 = 1e-6;
/// `μ` at or below this is treated as zero when recovering `ξ`.
pub const MU_ZERO_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CmdpError {
    #[error("InvalidTruncation: x_max = {0}, need at least 2")]
    InvalidTruncation(usize),

    #[error("invalid power budget {0}")]
    InvalidBudget(f64),

    #[error("invalid multiplier W = {0}")]
    InvalidMultiplier(f64),

    #[error("invalid activation cap {0}")]
    InvalidCap(f64),

    #[error("InfeasiblePower: budget {budget} cannot be met even with x_max = {x_max}")]
    InfeasiblePower { budget: f64, x_max: usize },

    #[error("TruncationTooTight: boundary mass {boundary_mass:.3e} at x_max = {x_max}")]
    TruncationTooTight { x_max: usize, boundary_mass: f64 },

    #[error("policy chain has no unique stationary distribution")]
    SingularChain,

    #[error("policy has {policy} channel states, channel has {channel}")]
    StateMismatch { policy: usize, channel: usize },

    #[error("LP solver: {0}")]
    Lp(#[from] LpError),
}

/// A sensor: its channel and its time-average power budget `ℰ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub channel: ChannelModel,
    pub power_budget: f64,
}

impl SensorSpec {
    pub fn new(channel: ChannelModel, power_budget: f64) -> Result<Self, CmdpError> {
        let spec = Self {
            channel,
            power_budget,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CmdpError> {
        if !self.power_budget.is_finite() || self.power_budget < 0.0 {
            return Err(CmdpError::InvalidBudget(self.power_budget));
        }
        Ok(())
    }
}

/// Row-major `x_max × Q` table indexed by one-based AoI and zero-based state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateTable {
    x_max: usize,
    num_states: usize,
    data: Vec<f64>,
}

impl StateTable {
    pub fn zeros(x_max: usize, num_states: usize) -> Self {
        Self {
            x_max,
            num_states,
            data: vec![0.0; x_max * num_states],
        }
    }

    pub fn from_vec(x_max: usize, num_states: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), x_max * num_states, "table size mismatch");
        Self {
            x_max,
            num_states,
            data,
        }
    }

    pub fn x_max(&self) -> usize {
        self.x_max
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    #[inline]
    pub fn get(&self, x: usize, q: usize) -> f64 {
        self.data[(x - 1) * self.num_states + q]
    }

    #[inline]
    pub fn set(&mut self, x: usize, q: usize, v: f64) {
        self.data[(x - 1) * self.num_states + q] = v;
    }

    /// Entries for AoI `x` across channel states.
    pub fn row(&self, x: usize) -> &[f64] {
        &self.data[(x - 1) * self.num_states..x * self.num_states]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Copy extended with zero rows (or truncated) to `x_max`.
    pub fn resized(&self, x_max: usize) -> Self {
        let mut data = self.data.clone();
        data.resize(x_max * self.num_states, 0.0);
        Self {
            x_max,
            num_states: self.num_states,
            data,
        }
    }
}

/// Stationary state-action frequencies `{μ_{x,q}, y_{x,q}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyMeasure {
    pub mu: StateTable,
    pub y: StateTable,
}

impl OccupancyMeasure {
    pub fn x_max(&self) -> usize {
        self.mu.x_max()
    }

    pub fn num_states(&self) -> usize {
        self.mu.num_states()
    }

    /// `Σ_q μ_{X_max,q}`.
    pub fn boundary_mass(&self) -> f64 {
        self.mu.row(self.x_max()).iter().sum()
    }

    /// Largest AoI carrying more than `tol` stationary mass.
    pub fn support_max(&self, tol: f64) -> usize {
        (1..=self.x_max())
            .rev()
            .find(|&x| self.mu.row(x).iter().sum::<f64>() > tol)
            .unwrap_or(1)
    }

    pub fn resized(&self, x_max: usize) -> Self {
        Self {
            mu: self.mu.resized(x_max),
            y: self.y.resized(x_max),
        }
    }

    /// `ν · a + (1 − ν) · b`, padding the shorter table with zeros.
    pub fn mix(a: &Self, b: &Self, nu: f64) -> Self {
        let x_max = a.x_max().max(b.x_max());
        let (a, b) = (a.resized(x_max), b.resized(x_max));
        let blend = |s: &StateTable, t: &StateTable| {
            StateTable::from_vec(
                x_max,
                s.num_states(),
                s.as_slice()
                    .iter()
                    .zip(t.as_slice())
                    .map(|(u, v)| nu * u + (1.0 - nu) * v)
                    .collect(),
            )
        };
        Self {
            mu: blend(&a.mu, &b.mu),
            y: blend(&a.y, &b.y),
        }
    }

    /// Largest violation of the occupancy constraints (balance,
    /// normalization, `0 ≤ y ≤ μ ≤ 1`) for the given channel.
    pub fn max_violation(&self, channel: &ChannelModel) -> f64 {
        let (x_max, nq) = (self.x_max(), self.num_states());
        let mut worst: f64 = (self.mu.sum() - 1.0).abs();
        let total_y: Vec<f64> = (0..nq)
            .map(|q| (1..=x_max).map(|x| self.y.get(x, q)).sum())
            .collect();
        for q in 0..nq {
            let inflow: f64 = (0..nq).map(|qp| total_y[qp] * channel.prob(qp, q)).sum();
            worst = worst.max((self.mu.get(1, q) - inflow).abs());
        }
        for x in 2..=x_max {
            for q in 0..nq {
                let inflow: f64 = (0..nq)
                    .map(|qp| {
                        (self.mu.get(x - 1, qp) - self.y.get(x - 1, qp)) * channel.prob(qp, q)
                    })
                    .sum();
                worst = worst.max((self.mu.get(x, q) - inflow).abs());
            }
        }
        for x in 1..=x_max {
            for q in 0..nq {
                let (m, y) = (self.mu.get(x, q), self.y.get(x, q));
                worst = worst.max(-y).max(y - m).max(m - 1.0);
            }
        }
        worst
    }
}

/// Scheduling probabilities `ξ_{x,q}`; AoI above `x_max` uses row `x_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryPolicy {
    pub xi: StateTable,
}

impl StationaryPolicy {
    pub fn x_max(&self) -> usize {
        self.xi.x_max()
    }

    pub fn num_states(&self) -> usize {
        self.xi.num_states()
    }

    /// Scheduling probability at AoI `x` (clamped to `x_max`) in state `q`.
    #[inline]
    pub fn prob(&self, x: usize, q: usize) -> f64 {
        self.xi.get(x.clamp(1, self.x_max()), q)
    }

    /// Policy that schedules in every state.
    pub fn always(x_max: usize, num_states: usize) -> Self {
        Self {
            xi: StateTable::from_vec(x_max, num_states, vec![1.0; x_max * num_states]),
        }
    }

    /// Deterministic threshold policy: schedule iff `x ≥ τ_q` (or at `x_max`).
    pub fn threshold(x_max: usize, thresholds: &[usize]) -> Self {
        let mut xi = StateTable::zeros(x_max, thresholds.len());
        for (q, &tau) in thresholds.iter().enumerate() {
            for x in 1..=x_max {
                if x >= tau || x == x_max {
                    xi.set(x, q, 1.0);
                }
            }
        }
        Self { xi }
    }

    /// `ξ_{·,q}` is nondecreasing in `x` for every `q`.
    pub fn is_monotone(&self) -> bool {
        (0..self.num_states())
            .all(|q| (1..self.x_max()).all(|x| self.xi.get(x, q) <= self.xi.get(x + 1, q)))
    }
}

/// Averages attained by an occupancy measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyMetrics {
    pub avg_aoi: f64,
    pub avg_activation: f64,
    pub avg_power: f64,
    /// `avg_aoi + W · avg_activation`.
    pub g_value: f64,
}

fn check_inputs(
    sensor: &SensorSpec,
    w: f64,
    x_max: usize,
    cap: Option<f64>,
) -> Result<(), CmdpError> {
    if x_max < 2 {
        return Err(CmdpError::InvalidTruncation(x_max));
    }
    if !w.is_finite() || w < 0.0 {
        return Err(CmdpError::InvalidMultiplier(w));
    }
    if let Some(c) = cap {
        if !(c.is_finite() && c >= 0.0) {
            return Err(CmdpError::InvalidCap(c));
        }
    }
    sensor.validate()
}

/// The occupancy-measure LP in its original variables.
///
/// Variable layout: `μ_{x,q}` at `(x−1)Q + q`, then `y_{x,q}` at
/// `X_max·Q + (x−1)Q + q`. Rows: `Q` reset-balance equalities, `(X_max−1)Q`
/// aging-balance equalities, normalization; then `y ≤ μ` for every state,
/// the power budget, and the optional activation cap.
pub fn build_lp(
    sensor: &SensorSpec,
    w: f64,
    x_max: usize,
    activation_cap: Option<f64>,
) -> Result<LinearProgram, CmdpError> {
    check_inputs(sensor, w, x_max, activation_cap)?;
    let ch = &sensor.channel;
    let nq = ch.num_states();
    let n = x_max * nq;
    let mu = |x: usize, q: usize| (x - 1) * nq + q;
    let y = |x: usize, q: usize| n + (x - 1) * nq + q;

    let mut objective = vec![0.0; 2 * n];
    for x in 1..=x_max {
        for q in 0..nq {
            objective[mu(x, q)] = x as f64;
            objective[y(x, q)] = w;
        }
    }
    let mut lp = LinearProgram::new(objective);

    for q in 0..nq {
        let mut row = vec![(mu(1, q), 1.0)];
        for x in 1..=x_max {
            for qp in 0..nq {
                row.push((y(x, qp), -ch.prob(qp, q)));
            }
        }
        lp.eq.push(row, 0.0);
    }
    for x in 2..=x_max {
        for q in 0..nq {
            let mut row = vec![(mu(x, q), 1.0)];
            for qp in 0..nq {
                let p = ch.prob(qp, q);
                row.push((mu(x - 1, qp), -p));
                row.push((y(x - 1, qp), p));
            }
            lp.eq.push(row, 0.0);
        }
    }
    lp.eq.push((0..n).map(|j| (j, 1.0)), 1.0);

    for x in 1..=x_max {
        for q in 0..nq {
            lp.ub.push([(y(x, q), 1.0), (mu(x, q), -1.0)], 0.0);
        }
    }
    lp.ub.push(
        (1..=x_max).flat_map(|x| (0..nq).map(move |q| (y(x, q), ch.omega(q)))),
        sensor.power_budget,
    );
    if let Some(cap) = activation_cap {
        lp.ub.push((n..2 * n).map(|j| (j, 1.0)), cap);
    }
    Ok(lp)
}

/// Options for [`solve_decoupled_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoupledOptions {
    pub x_max: usize,
    pub activation_cap: Option<f64>,
    pub max_doublings: u32,
}

impl Default for DecoupledOptions {
    fn default() -> Self {
        Self {
            x_max: DEFAULT_X_MAX,
            activation_cap: None,
            max_doublings: MAX_DOUBLINGS,
        }
    }
}

/// Solves the decoupled CMDP at multiplier `w`, doubling the truncation
/// while the optimum leaves mass on the boundary or the budget is not
/// attainable.
pub fn solve_decoupled(
    sensor: &SensorSpec,
    w: f64,
    x_max: usize,
    activation_cap: Option<f64>,
) -> Result<OccupancyMeasure, CmdpError> {
    solve_decoupled_with(
        sensor,
        w,
        &DecoupledOptions {
            x_max,
            activation_cap,
            ..DecoupledOptions::default()
        },
    )
}

pub fn solve_decoupled_with(
    sensor: &SensorSpec,
    w: f64,
    opts: &DecoupledOptions,
) -> Result<OccupancyMeasure, CmdpError> {
    let nq = sensor.channel.num_states();
    let mut x_max = opts.x_max;
    let mut doublings = 0;
    loop {
        let lp = build_lp(sensor, w, x_max, opts.activation_cap)?;
        let sol = lp::solve(&lp)?;
        let retry = match sol.status {
            LpStatus::Optimal => {
                let mut mu = StateTable::zeros(x_max, nq);
                let mut y = StateTable::zeros(x_max, nq);
                for x in 1..=x_max {
                    for q in 0..nq {
                        let k = (x - 1) * nq + q;
                        mu.set(x, q, sol.values[k]);
                        y.set(x, q, sol.values[x_max * nq + k]);
                    }
                }
                let occ = OccupancyMeasure { mu, y };
                let boundary_mass = occ.boundary_mass();
                if boundary_mass <= BOUNDARY_MASS_TOL {
                    return Ok(occ);
                }
                Err(CmdpError::TruncationTooTight {
                    x_max,
                    boundary_mass,
                })
            }
            // Longer waits lower the least attainable power, so a larger
            // truncation may restore feasibility when the budget is positive.
            LpStatus::Infeasible if sensor.power_budget > 0.0 => Err(CmdpError::InfeasiblePower {
                budget: sensor.power_budget,
                x_max,
            }),
            LpStatus::Infeasible => {
                return Err(CmdpError::InfeasiblePower {
                    budget: sensor.power_budget,
                    x_max,
                })
            }
            LpStatus::Unbounded => unreachable!("every variable is boxed"),
        };
        if doublings >= opts.max_doublings {
            return retry;
        }
        doublings += 1;
        x_max *= 2;
    }
}

/// Recovers `ξ` from an occupancy measure.
///
/// `ξ_{x,q} = 1` once the previous AoI in the same channel state was
/// scheduled with certainty, where `μ_{x,q}` vanishes, and at `x_max`;
/// otherwise `ξ_{x,q} = y_{x,q} / μ_{x,q}` clamped to `[0, 1]`.
pub fn extract_policy(occ: &OccupancyMeasure) -> StationaryPolicy {
    let (x_max, nq) = (occ.x_max(), occ.num_states());
    let mut xi = StateTable::zeros(x_max, nq);
    for q in 0..nq {
        let mut forced = false;
        for x in 1..=x_max {
            let mu = occ.mu.get(x, q);
            let p = if forced || mu <= MU_ZERO_TOL || x == x_max {
                1.0
            } else {
                let ratio = (occ.y.get(x, q) / mu).clamp(0.0, 1.0);
                // Ratios within rounding of one count as certain scheduling.
                if ratio >= 1.0 - MU_ZERO_TOL {
                    1.0
                } else {
                    ratio
                }
            };
            forced = p == 1.0;
            xi.set(x, q, p);
        }
    }
    StationaryPolicy { xi }
}

pub fn policy_metrics(occ: &OccupancyMeasure, sensor: &SensorSpec, w: f64) -> PolicyMetrics {
    let nq = occ.num_states();
    let mut avg_aoi = 0.0;
    let mut avg_activation = 0.0;
    let mut avg_power = 0.0;
    for x in 1..=occ.x_max() {
        for q in 0..nq {
            avg_aoi += x as f64 * occ.mu.get(x, q);
            let y = occ.y.get(x, q);
            avg_activation += y;
            avg_power += y * sensor.channel.omega(q);
        }
    }
    PolicyMetrics {
        avg_aoi,
        avg_activation,
        avg_power,
        g_value: avg_aoi + w * avg_activation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_state(budget: f64) -> SensorSpec {
        SensorSpec::new(ChannelModel::constant(1.0).unwrap(), budget).unwrap()
    }

    /// Stationary occupancy of the deterministic "transmit every `d` slots"
    /// cycle on a single-state channel: AoI 1..d equally likely, scheduled at d.
    fn period_cycle(d: usize, x_max: usize) -> OccupancyMeasure {
        let mut mu = StateTable::zeros(x_max, 1);
        let mut y = StateTable::zeros(x_max, 1);
        for x in 1..=d {
            mu.set(x, 0, 1.0 / d as f64);
        }
        y.set(d, 0, 1.0 / d as f64);
        OccupancyMeasure { mu, y }
    }

    #[test]
    fn unconstrained_sensor_updates_every_slot() {
        let lp = build_lp(&single_state(1.0), 0.0, 5, None).unwrap();
        let sol = lp::solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value - 1.0).abs() < 1e-9);
        assert!((sol.values[0] - 1.0).abs() < 1e-9); // μ_{1,1}
        assert!((sol.values[5] - 1.0).abs() < 1e-9); // y_{1,1}
    }

    #[test]
    fn half_budget_matches_cycle_enumeration() {
        // Oracle: a period-d cycle has average AoI (d+1)/2 at power 1/d; the
        // cheapest affordable cycle under ℰ = 1/2 is d = 2.
        let best = (1..=10)
            .filter(|&d| 1.0 / d as f64 <= 0.5 + 1e-12)
            .map(|d| (d as f64 + 1.0) / 2.0)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(best, 1.5);

        let lp = build_lp(&single_state(0.5), 0.0, 10, None).unwrap();
        let sol = lp::solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value - best).abs() < 1e-9);
        let activation: f64 = sol.values[10..].iter().sum();
        assert!((activation - 0.5).abs() < 1e-9);
    }

    #[test]
    fn zero_budget_is_infeasible() {
        let lp = build_lp(&single_state(0.0), 0.0, 10, None).unwrap();
        assert_eq!(lp::solve(&lp).unwrap().status, LpStatus::Infeasible);
        assert!(matches!(
            solve_decoupled(&single_state(0.0), 0.0, 10, None),
            Err(CmdpError::InfeasiblePower { .. })
        ));
    }

    #[test]
    fn truncation_must_be_at_least_two() {
        assert_eq!(
            build_lp(&single_state(1.0), 0.0, 1, None).unwrap_err(),
            CmdpError::InvalidTruncation(1)
        );
        assert!(matches!(
            solve_decoupled(&single_state(1.0), -1.0, 10, None),
            Err(CmdpError::InvalidMultiplier(_))
        ));
        assert!(matches!(
            SensorSpec::new(ChannelModel::constant(1.0).unwrap(), -0.1),
            Err(CmdpError::InvalidBudget(_))
        ));
    }

    #[test]
    fn decoupled_half_budget_is_period_two() {
        let occ = solve_decoupled(&single_state(0.5), 0.0, 10, None).unwrap();
        let want = period_cycle(2, 10);
        for x in 1..=10 {
            assert!((occ.mu.get(x, 0) - want.mu.get(x, 0)).abs() < 1e-9, "x={x}");
            assert!((occ.y.get(x, 0) - want.y.get(x, 0)).abs() < 1e-9, "x={x}");
        }
    }

    #[test]
    fn decoupled_unconstrained() {
        let occ = solve_decoupled(&single_state(1.0), 0.0, 10, None).unwrap();
        assert!((occ.mu.get(1, 0) - 1.0).abs() < 1e-9);
        assert!((occ.y.get(1, 0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn truncation_doubles_until_feasible() {
        // ℰ = 0.1 needs a period-10 cycle; x_max = 4 must double twice.
        let occ = solve_decoupled(&single_state(0.1), 0.0, 4, None).unwrap();
        assert_eq!(occ.x_max(), 16);
        let m = policy_metrics(&occ, &single_state(0.1), 0.0);
        assert!((m.avg_aoi - 5.5).abs() < 1e-9);
    }

    #[test]
    fn truncation_doubles_until_boundary_is_empty() {
        // Period d costs (d+1)/2 + W/d, minimized at d = 20 for W = 200.
        let best = (1..=64)
            .min_by(|&a: &usize, &b: &usize| {
                let f = |d: usize| (d as f64 + 1.0) / 2.0 + 200.0 / d as f64;
                f(a).total_cmp(&f(b))
            })
            .unwrap();
        assert_eq!(best, 20);

        let sensor = single_state(1.0);
        let occ = solve_decoupled(&sensor, 200.0, 8, None).unwrap();
        assert_eq!(occ.x_max(), 32);
        assert!((policy_metrics(&occ, &sensor, 200.0).g_value - 20.5).abs() < 1e-9);

        let opts = DecoupledOptions {
            x_max: 8,
            max_doublings: 1,
            ..Default::default()
        };
        let err = solve_decoupled_with(&sensor, 200.0, &opts).unwrap_err();
        assert!(
            matches!(err, CmdpError::TruncationTooTight { x_max: 16, .. }),
            "{err}"
        );
    }

    #[test]
    fn extract_policy_cases() {
        let mut mu = StateTable::zeros(4, 2);
        let mut y = StateTable::zeros(4, 2);
        mu.set(1, 0, 0.3);
        y.set(1, 0, 0.3);
        mu.set(1, 1, 0.2);
        mu.set(2, 1, 0.2);
        y.set(2, 1, 0.05);
        mu.set(3, 1, 0.3);
        let pol = extract_policy(&OccupancyMeasure { mu, y });
        assert_eq!(pol.prob(1, 0), 1.0); // μ = y > 0
        assert_eq!(pol.prob(2, 0), 1.0); // forced by the previous AoI
        assert_eq!(pol.prob(1, 1), 0.0); // y = 0, μ > 0
        assert!((pol.prob(2, 1) - 0.25).abs() < 1e-15);
        assert_eq!(pol.prob(3, 1), 0.0);
        assert_eq!(pol.prob(4, 1), 1.0); // boundary
        assert_eq!(pol.prob(9, 1), 1.0); // beyond x_max
    }

    #[test]
    fn period_two_policy() {
        let pol = extract_policy(&period_cycle(2, 10));
        assert_eq!(pol.prob(1, 0), 0.0);
        for x in 2..=10 {
            assert_eq!(pol.prob(x, 0), 1.0);
        }
    }

    #[test]
    fn metrics_examples() {
        let sensor = single_state(1.0);
        let m = policy_metrics(&period_cycle(1, 5), &sensor, 0.0);
        assert_eq!(
            (m.avg_aoi, m.avg_activation, m.avg_power, m.g_value),
            (1.0, 1.0, 1.0, 1.0)
        );
        let m = policy_metrics(&period_cycle(2, 5), &sensor, 0.0);
        assert_eq!(
            (m.avg_aoi, m.avg_activation, m.avg_power, m.g_value),
            (1.5, 0.5, 0.5, 1.5)
        );
        let m = policy_metrics(&period_cycle(2, 5), &sensor, 2.0);
        assert_eq!(m.g_value, 2.5);
    }

    #[test]
    fn mixing_pads_and_blends() {
        let a = period_cycle(1, 2);
        let b = period_cycle(2, 4);
        let m = OccupancyMeasure::mix(&a, &b, 0.25);
        assert_eq!(m.x_max(), 4);
        assert!((m.mu.get(1, 0) - (0.25 + 0.75 * 0.5)).abs() < 1e-15);
        assert!((m.y.get(2, 0) - 0.75 * 0.5).abs() < 1e-15);
        assert!(m.max_violation(&ChannelModel::constant(1.0).unwrap()) < 1e-15);
    }
}
