//! The Markov chain a stationary policy induces on `(AoI, channel)`.
//!
//! Rebuilding the chain from `ξ` and solving its balance equations gives an
//! occupancy measure that does not depend on the LP, which makes it a check
//! on both the solver and policy recovery.

use super::{CmdpError, OccupancyMeasure, StateTable, StationaryPolicy};
use crate::channel::ChannelModel;
use nalgebra::{DMatrix, DVector};

/// Row-stochastic transition matrix over states `(x−1)Q + q`.
///
/// From `(x, q)` the sensor transmits with probability `ξ_{x,q}` and moves
/// to AoI 1; otherwise the AoI grows by one, saturating at `x_max`. The
/// channel moves independently by its own kernel.
pub fn transition_matrix(
    policy: &StationaryPolicy,
    channel: &ChannelModel,
) -> Result<DMatrix<f64>, CmdpError> {
    let nq = channel.num_states();
    if policy.num_states() != nq {
        return Err(CmdpError::StateMismatch {
            policy: policy.num_states(),
            channel: nq,
        });
    }
    let x_max = policy.x_max();
    let idx = |x: usize, q: usize| (x - 1) * nq + q;
    let mut p = DMatrix::zeros(x_max * nq, x_max * nq);
    for x in 1..=x_max {
        let next = (x + 1).min(x_max);
        for q in 0..nq {
            let xi = policy.prob(x, q);
            for qn in 0..nq {
                let pq = channel.prob(q, qn);
                p[(idx(x, q), idx(1, qn))] += xi * pq;
                p[(idx(x, q), idx(next, qn))] += (1.0 - xi) * pq;
            }
        }
    }
    Ok(p)
}

/// Stationary occupancy measure of the induced chain, with `y = μ ξ`.
pub fn stationary_occupancy(
    policy: &StationaryPolicy,
    channel: &ChannelModel,
) -> Result<OccupancyMeasure, CmdpError> {
    let p = transition_matrix(policy, channel)?;
    let n = p.nrows();
    // Solve μ (P − I) = 0 with the last balance row replaced by Σμ = 1.
    let mut a = p.transpose() - DMatrix::identity(n, n);
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let sol = a.lu().solve(&b).ok_or(CmdpError::SingularChain)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(CmdpError::SingularChain);
    }

    let (x_max, nq) = (policy.x_max(), policy.num_states());
    let mut mu = StateTable::zeros(x_max, nq);
    let mut y = StateTable::zeros(x_max, nq);
    for x in 1..=x_max {
        for q in 0..nq {
            // Round-off can leave tiny negative masses on transient states.
            let m = sol[(x - 1) * nq + q].max(0.0);
            mu.set(x, q, m);
            y.set(x, q, m * policy.prob(x, q));
        }
    }
    Ok(OccupancyMeasure { mu, y })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_stochastic() {
        let ch = ChannelModel::four_state([1.0, 2.0, 3.0, 4.0]);
        let pol = StationaryPolicy::threshold(12, &[9, 6, 4, 2]);
        let p = transition_matrix(&pol, &ch).unwrap();
        for r in 0..p.nrows() {
            assert!((p.row(r).sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn period_three_cycle() {
        let ch = ChannelModel::constant(1.0).unwrap();
        let occ = stationary_occupancy(&StationaryPolicy::threshold(6, &[3]), &ch).unwrap();
        for x in 1..=3 {
            assert!((occ.mu.get(x, 0) - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(occ.mu.get(4, 0).abs() < 1e-12);
        assert!((occ.y.get(3, 0) - 1.0 / 3.0).abs() < 1e-12);
        assert!(occ.max_violation(&ch) < 1e-12);
    }

    #[test]
    fn randomized_policy_geometric_waits() {
        // Transmitting w.p. 1/2 each slot gives P(AoI = x) = 2^{-x}.
        let ch = ChannelModel::constant(1.0).unwrap();
        let mut pol = StationaryPolicy::always(40, 1);
        for x in 1..40 {
            pol.xi.set(x, 0, 0.5);
        }
        let occ = stationary_occupancy(&pol, &ch).unwrap();
        for x in 1..=10 {
            assert!((occ.mu.get(x, 0) - 0.5f64.powi(x as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn state_count_mismatch() {
        let ch = ChannelModel::constant(1.0).unwrap();
        assert!(matches!(
            transition_matrix(&StationaryPolicy::always(3, 2), &ch),
            Err(CmdpError::StateMismatch {
                policy: 2,
                channel: 1
            })
        ));
    }
}
