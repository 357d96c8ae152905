//! Value-iteration oracle for the single-sensor problem.
//!
//! Solves the Lagrangian MDP with per-slot cost `x + W s + λ ω(q) s` by
//! relative value iteration (average cost) or plain value iteration
//! (discounted cost), and recovers the constrained optimum without any LP by
//! bisecting on the power multiplier `λ` and mixing the two bracketing
//! deterministic policies. Policies are evaluated exactly by a renewal
//! argument over update cycles, independently of [`crate::cmdp`].

use crate::channel::ChannelModel;
use crate::cmdp::{PolicyMetrics, SensorSpec, StateTable, StationaryPolicy};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Span of successive differences at which relative VI stops.
pub const RVI_TOL: f64 = 1e-9;
/// Span still accepted when the sweep cap is reached.
pub const RVI_ACCEPT_TOL: f64 = 1e-6;
pub const RVI_MAX_SWEEPS: usize = 100_000;
/// Sup-norm change at which discounted VI stops.
pub const DVI_TOL: f64 = 1e-10;
/// Width of the final `λ` bracket.
pub const LAMBDA_TOL: f64 = 1e-8;

/// Weight of the Bellman update in the aperiodicity transform; the rest
/// stays on the current iterate, which makes every policy chain aperiodic
/// without changing the optimal policy.
const DAMPING: f64 = 0.5;
/// Relative gap below which the two actions count as tied.
const TIE_TOL: f64 = 1e-12;
/// Doublings allowed when searching for a power-feasible `λ`.
const MAX_LAMBDA_DOUBLINGS: u32 = 80;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("NoConvergence: span {span:.3e} after {sweeps} sweeps")]
    NoConvergence { sweeps: usize, span: f64 },

    #[error("InvalidTruncation: x_max = {0}, need at least 2")]
    InvalidTruncation(usize),

    #[error("invalid multiplier {name} = {value}")]
    InvalidMultiplier { name: &'static str, value: f64 },

    #[error("discount factor {0} outside (0, 1)")]
    InvalidDiscount(f64),

    #[error("InfeasiblePower: budget {budget} is below the least attainable power {min_power}")]
    InfeasiblePower { budget: f64, min_power: f64 },

    #[error("power is not monotone in lambda near {lambda}")]
    NonMonotonePower { lambda: f64 },

    #[error("policy chain has no unique stationary cycle distribution")]
    SingularCycle,

    #[error("policy has {policy} channel states, channel has {channel}")]
    StateMismatch { policy: usize, channel: usize },
}

/// Solution of a value-iteration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFunction {
    pub x_max: usize,
    /// Relative (average cost) or total discounted values `V(x, q)`.
    pub values: StateTable,
    /// Average cost `γ`; for discounted runs `(1 − α) V(1, 1)`.
    pub avg_cost: f64,
    /// Greedy deterministic action `s*(x, q)`, stored as 0/1 probabilities.
    pub policy: StationaryPolicy,
    /// Smallest AoI scheduled in each channel state.
    pub thresholds: Vec<usize>,
}

impl ValueFunction {
    /// `s*(x, q) = 1` implies `s*(x + 1, q) = 1`.
    pub fn is_threshold(&self) -> bool {
        self.policy.is_monotone()
    }

    /// `V(x, q) ≤ V(x + 1, q)` up to `tol`.
    pub fn is_monotone(&self, tol: f64) -> bool {
        let nq = self.values.num_states();
        (0..nq).all(|q| {
            (1..self.x_max).all(|x| self.values.get(x, q) <= self.values.get(x + 1, q) + tol)
        })
    }
}

fn check(w: f64, lambda: f64, x_max: usize) -> Result<(), OracleError> {
    if x_max < 2 {
        return Err(OracleError::InvalidTruncation(x_max));
    }
    for (name, value) in [("W", w), ("lambda", lambda)] {
        if !value.is_finite() || value < 0.0 {
            return Err(OracleError::InvalidMultiplier { name, value });
        }
    }
    Ok(())
}

/// One Bellman backup. Writes `min_s Q(x, q, s)` into `out` and the chosen
/// actions into `act`; `beta` scales the continuation value.
fn backup(
    channel: &ChannelModel,
    w: f64,
    lambda: f64,
    beta: f64,
    h: &StateTable,
    out: &mut StateTable,
    act: &mut StateTable,
) {
    let (x_max, nq) = (h.x_max(), h.num_states());
    // Expected continuation E[h(x', q') | q] for the two possible x'.
    let expect =
        |x: usize, q: usize| -> f64 { (0..nq).map(|qn| channel.prob(q, qn) * h.get(x, qn)).sum() };
    let reset: Vec<f64> = (0..nq).map(|q| expect(1, q)).collect();
    let mut next = vec![0.0; nq];
    for x in 1..=x_max {
        let xn = (x + 1).min(x_max);
        for (q, v) in next.iter_mut().enumerate() {
            *v = expect(xn, q);
        }
        for q in 0..nq {
            let idle = x as f64 + beta * next[q];
            let send = x as f64 + w + lambda * channel.omega(q) + beta * reset[q];
            let schedule = x == x_max || send <= idle + TIE_TOL * (1.0 + idle.abs());
            if schedule {
                out.set(x, q, send);
                act.set(x, q, 1.0);
            } else {
                out.set(x, q, idle);
                act.set(x, q, 0.0);
            }
        }
    }
}

fn thresholds(policy: &StationaryPolicy) -> Vec<usize> {
    (0..policy.num_states())
        .map(|q| {
            (1..=policy.x_max())
                .find(|&x| policy.prob(x, q) == 1.0)
                .unwrap_or(policy.x_max())
        })
        .collect()
}

/// Relative value iteration on the average-cost Lagrangian MDP with
/// reference state `(1, 0)`.
pub fn relative_value_iteration(
    channel: &ChannelModel,
    w: f64,
    lambda: f64,
    x_max: usize,
) -> Result<ValueFunction, OracleError> {
    check(w, lambda, x_max)?;
    let nq = channel.num_states();
    let mut h = StateTable::zeros(x_max, nq);
    let mut th = StateTable::zeros(x_max, nq);
    let mut act = StateTable::zeros(x_max, nq);
    let mut next = StateTable::zeros(x_max, nq);
    let mut span = f64::INFINITY;
    let mut gain = 0.0;

    for _ in 0..RVI_MAX_SWEEPS {
        backup(channel, w, lambda, 1.0, &h, &mut th, &mut act);
        // Damped update h + κ(Th − h), renormalized at the reference state.
        let (hs, ts) = (h.as_slice(), th.as_slice());
        gain = ts[0] - hs[0];
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for ((n, &a), &b) in next.as_mut_slice().iter_mut().zip(hs).zip(ts) {
            let d = b - a;
            lo = lo.min(d);
            hi = hi.max(d);
            *n = a + DAMPING * (d - gain);
        }
        span = hi - lo;
        std::mem::swap(&mut h, &mut next);
        if span < RVI_TOL {
            break;
        }
    }
    if span >= RVI_ACCEPT_TOL {
        return Err(OracleError::NoConvergence {
            sweeps: RVI_MAX_SWEEPS,
            span,
        });
    }
    // Greedy policy with respect to the converged values.
    backup(channel, w, lambda, 1.0, &h, &mut th, &mut act);
    let policy = StationaryPolicy { xi: act };
    Ok(ValueFunction {
        x_max,
        values: h,
        avg_cost: gain,
        thresholds: thresholds(&policy),
        policy,
    })
}

/// Value iteration on the `α`-discounted Lagrangian MDP.
pub fn discounted_value_iteration(
    channel: &ChannelModel,
    w: f64,
    lambda: f64,
    alpha: f64,
    x_max: usize,
) -> Result<ValueFunction, OracleError> {
    check(w, lambda, x_max)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(OracleError::InvalidDiscount(alpha));
    }
    let nq = channel.num_states();
    let mut v = StateTable::zeros(x_max, nq);
    let mut tv = StateTable::zeros(x_max, nq);
    let mut act = StateTable::zeros(x_max, nq);
    loop {
        backup(channel, w, lambda, alpha, &v, &mut tv, &mut act);
        let change = v
            .as_slice()
            .iter()
            .zip(tv.as_slice())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        std::mem::swap(&mut v, &mut tv);
        if change < DVI_TOL {
            break;
        }
    }
    backup(channel, w, lambda, alpha, &v, &mut tv, &mut act);
    let policy = StationaryPolicy { xi: act };
    Ok(ValueFunction {
        x_max,
        avg_cost: (1.0 - alpha) * v.get(1, 0),
        values: v,
        thresholds: thresholds(&policy),
        policy,
    })
}

/// Exact long-run averages of a stationary policy by renewal over update
/// cycles.
///
/// A cycle starts in the slot after a transmission, at AoI 1, with the
/// channel distributed as the successor of the transmitting state. Cycle
/// start distributions form a `Q`-state Markov chain; its stationary law
/// weights the per-cycle reward and length. AoI above `x_max` is not
/// reachable because `ξ_{x_max, ·}` must be 1.
pub fn evaluate_policy(
    policy: &StationaryPolicy,
    channel: &ChannelModel,
    w: f64,
) -> Result<PolicyMetrics, OracleError> {
    let nq = channel.num_states();
    if policy.num_states() != nq {
        return Err(OracleError::StateMismatch {
            policy: policy.num_states(),
            channel: nq,
        });
    }
    // Per unit start mass in each state: next-cycle start law, expected
    // length, AoI sum, transmissions and power.
    let mut kernel = DMatrix::zeros(nq, nq);
    let mut length = vec![0.0; nq];
    let mut aoi = vec![0.0; nq];
    let mut power = vec![0.0; nq];
    let mut sends = vec![0.0; nq];
    for start in 0..nq {
        let mut alive = vec![0.0; nq];
        alive[start] = 1.0;
        for x in 1..=policy.x_max() {
            let mut carry = vec![0.0; nq];
            for (q, &m) in alive.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                let xi = if x == policy.x_max() {
                    1.0
                } else {
                    policy.prob(x, q)
                };
                length[start] += m;
                aoi[start] += x as f64 * m;
                sends[start] += m * xi;
                power[start] += m * xi * channel.omega(q);
                for qn in 0..nq {
                    let p = channel.prob(q, qn);
                    kernel[(start, qn)] += m * xi * p;
                    carry[qn] += m * (1.0 - xi) * p;
                }
            }
            alive = carry;
        }
    }
    // Stationary start law v = v K with Σ v = 1.
    let mut a = kernel.transpose() - DMatrix::identity(nq, nq);
    a.row_mut(nq - 1).fill(1.0);
    let mut b = DVector::zeros(nq);
    b[nq - 1] = 1.0;
    let v = a.lu().solve(&b).ok_or(OracleError::SingularCycle)?;
    let dot = |r: &[f64]| (0..nq).map(|q| v[q] * r[q]).sum::<f64>();
    let cycle = dot(&length);
    let avg_aoi = dot(&aoi) / cycle;
    let avg_activation = dot(&sends) / cycle;
    Ok(PolicyMetrics {
        avg_aoi,
        avg_activation,
        avg_power: dot(&power) / cycle,
        g_value: avg_aoi + w * avg_activation,
    })
}

/// Constrained optimum recovered from two deterministic policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionResult {
    /// Power multiplier at which the optimal policy switches.
    pub lambda: f64,
    /// `ρ g₁ + (1 − ρ) g₂` with `g = avg AoI + W · avg activation`.
    pub mixed_cost: f64,
    /// Weight of `first`.
    pub rho: f64,
    /// Policy just below the switch (uses at least the budget).
    pub first: ValueFunction,
    pub first_metrics: PolicyMetrics,
    /// Policy just above the switch (within the budget).
    pub second: ValueFunction,
    pub second_metrics: PolicyMetrics,
}

/// Solves the power-constrained problem at bandwidth multiplier `w` by
/// bisection on `λ`.
pub fn solve_cmdp_by_bisection(
    sensor: &SensorSpec,
    w: f64,
    x_max: usize,
) -> Result<BisectionResult, OracleError> {
    let ch = &sensor.channel;
    let budget = sensor.power_budget;
    let solve = |lambda: f64| -> Result<(ValueFunction, PolicyMetrics), OracleError> {
        let vf = relative_value_iteration(ch, w, lambda, x_max)?;
        let m = evaluate_policy(&vf.policy, ch, w)?;
        Ok((vf, m))
    };

    let (vf0, m0) = solve(0.0)?;
    if m0.avg_power <= budget {
        return Ok(BisectionResult {
            lambda: 0.0,
            mixed_cost: m0.g_value,
            rho: 1.0,
            first: vf0.clone(),
            first_metrics: m0,
            second: vf0,
            second_metrics: m0,
        });
    }

    // The cheapest policy in power waits until the forced boundary.
    let lazy = StationaryPolicy::threshold(x_max, &vec![x_max; ch.num_states()]);
    let min_power = evaluate_policy(&lazy, ch, w)?.avg_power;
    if min_power > budget {
        return Err(OracleError::InfeasiblePower { budget, min_power });
    }

    let mut lo = (0.0, vf0, m0);
    let mut hi_lambda = 1.0;
    let mut hi = solve(hi_lambda)?;
    let mut doublings = 0;
    while hi.1.avg_power > budget {
        if doublings == MAX_LAMBDA_DOUBLINGS {
            return Err(OracleError::InfeasiblePower { budget, min_power });
        }
        if hi.1.avg_power > lo.2.avg_power + 1e-12 {
            return Err(OracleError::NonMonotonePower { lambda: hi_lambda });
        }
        lo = (hi_lambda, hi.0, hi.1);
        hi_lambda *= 2.0;
        hi = solve(hi_lambda)?;
        doublings += 1;
    }
    while hi_lambda - lo.0 > LAMBDA_TOL {
        let mid = 0.5 * (lo.0 + hi_lambda);
        let (vf, m) = solve(mid)?;
        if m.avg_power > lo.2.avg_power + 1e-12 || m.avg_power < hi.1.avg_power - 1e-12 {
            return Err(OracleError::NonMonotonePower { lambda: mid });
        }
        if m.avg_power > budget {
            lo = (mid, vf, m);
        } else {
            hi_lambda = mid;
            hi = (vf, m);
        }
    }

    let (p1, p2) = (lo.2.avg_power, hi.1.avg_power);
    let rho = if p1 - p2 > 0.0 {
        ((budget - p2) / (p1 - p2)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(BisectionResult {
        lambda: hi_lambda,
        mixed_cost: rho * lo.2.g_value + (1.0 - rho) * hi.1.g_value,
        rho,
        first: lo.1,
        first_metrics: lo.2,
        second: hi.0,
        second_metrics: hi.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single() -> ChannelModel {
        ChannelModel::constant(1.0).unwrap()
    }

    /// Best deterministic period on a single-state channel: threshold τ
    /// costs `(τ+1)/2 + c/τ` per slot.
    fn best_period(c: f64) -> (usize, f64) {
        (1..=10)
            .map(|t| (t, (t as f64 + 1.0) / 2.0 + c / t as f64))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
    }

    #[test]
    fn free_scheduling_every_slot() {
        let vf = relative_value_iteration(&single(), 0.0, 0.0, 20).unwrap();
        assert_eq!(vf.thresholds, vec![1]);
        assert!((vf.avg_cost - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bandwidth_price_matches_enumeration() {
        let (tau, cost) = best_period(2.0);
        assert_eq!((tau, cost), (2, 2.5));
        let vf = relative_value_iteration(&single(), 2.0, 0.0, 20).unwrap();
        assert_eq!(vf.thresholds, vec![tau]);
        assert!((vf.avg_cost - cost).abs() < 1e-8);
    }

    #[test]
    fn power_price_plays_the_same_role() {
        let vf = relative_value_iteration(&single(), 0.0, 2.0, 20).unwrap();
        assert_eq!(vf.thresholds, vec![2]);
        assert!((vf.avg_cost - 2.5).abs() < 1e-8);
    }

    #[test]
    fn larger_price_gives_longer_period() {
        let (tau, cost) = best_period(12.0);
        let vf = relative_value_iteration(&single(), 12.0, 0.0, 30).unwrap();
        assert_eq!(vf.thresholds, vec![tau]);
        assert!((vf.avg_cost - cost).abs() < 1e-8);
        assert!(vf.is_threshold());
        assert!(vf.is_monotone(1e-9));
    }

    #[test]
    fn discounted_free_scheduling() {
        let vf = discounted_value_iteration(&single(), 0.0, 0.0, 0.5, 10).unwrap();
        assert!(vf.policy.xi.as_slice().iter().all(|&s| s == 1.0));
        // V(x) = x + α V(1) with V(1) = 1/(1 − α).
        for x in 1..=10 {
            assert!((vf.values.get(x, 0) - (x as f64 + 1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn discounted_agrees_with_average_cost() {
        let d = discounted_value_iteration(&single(), 2.0, 0.0, 0.99, 20).unwrap();
        assert_eq!(d.thresholds, vec![2]);
        assert!(d.is_monotone(0.0));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            relative_value_iteration(&single(), -1.0, 0.0, 10),
            Err(OracleError::InvalidMultiplier { name: "W", .. })
        ));
        assert!(matches!(
            relative_value_iteration(&single(), 0.0, 0.0, 1),
            Err(OracleError::InvalidTruncation(1))
        ));
        assert!(matches!(
            discounted_value_iteration(&single(), 0.0, 0.0, 1.0, 10),
            Err(OracleError::InvalidDiscount(_))
        ));
    }

    #[test]
    fn renewal_evaluation_of_cycles() {
        for d in 1..=6 {
            let m =
                evaluate_policy(&StationaryPolicy::threshold(10, &[d]), &single(), 3.0).unwrap();
            let period = d as f64;
            assert!((m.avg_aoi - (period + 1.0) / 2.0).abs() < 1e-12);
            assert!((m.avg_activation - 1.0 / period).abs() < 1e-12);
            assert!((m.g_value - m.avg_aoi - 3.0 / period).abs() < 1e-12);
        }
    }

    #[test]
    fn renewal_two_state_channel() {
        // Channel alternates deterministically between states with ω = 1, 3;
        // transmitting only in state 0 gives period 2 and power 1/2.
        let ch = ChannelModel::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![1.0, 3.0]).unwrap();
        let m = evaluate_policy(&StationaryPolicy::threshold(8, &[1, 8]), &ch, 0.0).unwrap();
        assert!((m.avg_aoi - 1.5).abs() < 1e-12);
        assert!((m.avg_power - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bisection_slack_budget() {
        let sensor = SensorSpec::new(single(), 1.0).unwrap();
        let r = solve_cmdp_by_bisection(&sensor, 0.0, 20).unwrap();
        assert_eq!((r.lambda, r.rho), (0.0, 1.0));
        assert!((r.mixed_cost - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bisection_half_budget() {
        let sensor = SensorSpec::new(single(), 0.5).unwrap();
        let r = solve_cmdp_by_bisection(&sensor, 0.0, 20).unwrap();
        assert!((r.mixed_cost - 1.5).abs() < 1e-6, "{}", r.mixed_cost);
    }

    #[test]
    fn bisection_mixes_periods() {
        // ℰ = 0.4 lies between periods 2 (0.5) and 3 (1/3): mix them.
        let sensor = SensorSpec::new(single(), 0.4).unwrap();
        let r = solve_cmdp_by_bisection(&sensor, 0.0, 20).unwrap();
        let rho = (0.4 - 1.0 / 3.0) / (0.5 - 1.0 / 3.0);
        assert!((r.rho - rho).abs() < 1e-6);
        assert!((r.mixed_cost - (rho * 1.5 + (1.0 - rho) * 2.0)).abs() < 1e-6);
    }

    #[test]
    fn bisection_infeasible() {
        let sensor = SensorSpec::new(single(), 0.01).unwrap();
        assert!(matches!(
            solve_cmdp_by_bisection(&sensor, 0.0, 20),
            Err(OracleError::InfeasiblePower { .. })
        ));
    }
}
