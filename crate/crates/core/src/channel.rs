//! Finite-state Markov fading channels.
//!
//! A [`ChannelModel`] couples a row-stochastic transition matrix with the
//! power `ω(q)` a transmission costs in each channel state. Models are
//! validated at construction and immutable afterwards.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Allowed deviation of a row sum from one.
pub const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("channel must have at least one state")]
    Empty,

    #[error("transition matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare {
        row: usize,
        len: usize,
        expected: usize,
    },

    #[error("power vector has {len} entries, expected {expected}")]
    PowerLength { len: usize, expected: usize },

    #[error("NotStochastic: row {row} sums to {sum}")]
    NotStochastic { row: usize, sum: f64 },

    #[error("NegativeEntry: transition[{row}][{col}] = {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("NegativeEntry: power[{state}] = {value}")]
    InvalidPower { state: usize, value: f64 },

    #[error("NotErgodic: state {to} is unreachable from state {from}")]
    NotErgodic { from: usize, to: usize },

    #[error("state index {index} out of range for a {states}-state channel")]
    IndexOutOfRange { index: usize, states: usize },

    #[error("singular balance system while computing the stationary distribution")]
    SingularSystem,
}

/// Validated Q-state Markov channel with per-state transmission power.
///
/// States are zero-based in the API (`0..num_states()`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChannel", into = "RawChannel")]
pub struct ChannelModel {
    transition: Vec<Vec<f64>>,
    power: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawChannel {
    transition: Vec<Vec<f64>>,
    power: Vec<f64>,
}

impl TryFrom<RawChannel> for ChannelModel {
    type Error = ChannelError;

    fn try_from(raw: RawChannel) -> Result<Self, Self::Error> {
        ChannelModel::new(raw.transition, raw.power)
    }
}

impl From<ChannelModel> for RawChannel {
    fn from(model: ChannelModel) -> Self {
        RawChannel {
            transition: model.transition,
            power: model.power,
        }
    }
}

impl ChannelModel {
    pub fn new(transition: Vec<Vec<f64>>, power: Vec<f64>) -> Result<Self, ChannelError> {
        validate(&transition, &power)?;
        Ok(Self { transition, power })
    }

    /// Channel with the default power profile `ω(q) = q` (one-based).
    pub fn with_default_power(transition: Vec<Vec<f64>>) -> Result<Self, ChannelError> {
        let power = (1..=transition.len()).map(|q| q as f64).collect();
        Self::new(transition, power)
    }

    /// Single-state channel with power `omega`.
    pub fn constant(omega: f64) -> Result<Self, ChannelError> {
        Self::new(vec![vec![1.0]], vec![omega])
    }

    /// The four-state channel used throughout the evaluation, with the
    /// given power profile.
    pub fn four_state(power: [f64; 4]) -> Self {
        Self::new(
            vec![
                vec![0.4, 0.3, 0.2, 0.1],
                vec![0.25, 0.3, 0.25, 0.2],
                vec![0.2, 0.25, 0.3, 0.25],
                vec![0.1, 0.2, 0.3, 0.4],
            ],
            power.to_vec(),
        )
        .expect("built-in channel is valid")
    }

    pub fn num_states(&self) -> usize {
        self.power.len()
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    /// `p_{from,to}`.
    #[inline]
    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.transition[from][to]
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    #[inline]
    pub fn omega(&self, q: usize) -> f64 {
        self.power[q]
    }

    /// Stationary distribution η with `ηP = η` and `Ση = 1`.
    ///
    /// Solved directly: the last balance equation of `(Pᵀ − I)η = 0` is
    /// replaced by the normalization row and the system is LU-factored.
    pub fn steady_state(&self) -> Result<Vec<f64>, ChannelError> {
        let q = self.num_states();
        let mut a = DMatrix::<f64>::zeros(q, q);
        for i in 0..q {
            for j in 0..q {
                a[(i, j)] = self.transition[j][i] - if i == j { 1.0 } else { 0.0 };
            }
        }
        for j in 0..q {
            a[(q - 1, j)] = 1.0;
        }
        let mut b = DVector::<f64>::zeros(q);
        b[q - 1] = 1.0;
        let eta = a.lu().solve(&b).ok_or(ChannelError::SingularSystem)?;
        if eta.iter().any(|v| !v.is_finite()) {
            return Err(ChannelError::SingularSystem);
        }
        Ok(eta.iter().map(|v| v.max(0.0)).collect())
    }

    /// Expected per-transmission power `Σ η_q ω(q)`.
    pub fn mean_power(&self) -> Result<f64, ChannelError> {
        Ok(self
            .steady_state()?
            .iter()
            .zip(&self.power)
            .map(|(e, w)| e * w)
            .sum())
    }

    /// Draws the successor of state `q`.
    pub fn sample_next<R: Rng + ?Sized>(
        &self,
        q: usize,
        rng: &mut R,
    ) -> Result<usize, ChannelError> {
        let row = self
            .transition
            .get(q)
            .ok_or(ChannelError::IndexOutOfRange {
                index: q,
                states: self.num_states(),
            })?;
        Ok(sample_index(row, rng))
    }
}

/// Inverse-CDF draw from a probability vector; the last state with positive
/// mass absorbs any rounding shortfall.
pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (j, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = j;
        if u < acc {
            return j;
        }
    }
    last
}

fn validate(transition: &[Vec<f64>], power: &[f64]) -> Result<(), ChannelError> {
    let q = transition.len();
    if q == 0 {
        return Err(ChannelError::Empty);
    }
    if power.len() != q {
        return Err(ChannelError::PowerLength {
            len: power.len(),
            expected: q,
        });
    }
    for (row, entries) in transition.iter().enumerate() {
        if entries.len() != q {
            return Err(ChannelError::NotSquare {
                row,
                len: entries.len(),
                expected: q,
            });
        }
        for (col, &value) in entries.iter().enumerate() {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(ChannelError::NegativeEntry { row, col, value });
            }
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(ChannelError::NotStochastic { row, sum });
        }
    }
    for (state, &value) in power.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(ChannelError::InvalidPower { state, value });
        }
    }
    check_irreducible(transition)
}

/// Every state must reach every other along positive-probability edges.
/// Checking reachability from state 0 in the graph and in its reverse is
/// enough.
fn check_irreducible(transition: &[Vec<f64>]) -> Result<(), ChannelError> {
    let q = transition.len();
    for reverse in [false, true] {
        let mut seen = vec![false; q];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..q {
                let p = if reverse {
                    transition[j][i]
                } else {
                    transition[i][j]
                };
                if p > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            let (from, to) = if reverse { (missing, 0) } else { (0, missing) };
            return Err(ChannelError::NotErgodic { from, to });
        }
    }
    Ok(())
}
