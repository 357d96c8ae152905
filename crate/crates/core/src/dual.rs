//! Network-level dual search over the bandwidth multiplier `W`.
//!
//! Relaxing the per-slot bandwidth limit to a time average and pricing it
//! with `W` decouples the network into single-sensor problems. The dual
//! function
//!
//! `g(W) = (1/N) Σ_n g_n(W) − W M / N`
//!
//! is concave; a projected subgradient search with diminishing steps
//! brackets the multiplier where total activation crosses `M`, a short
//! bisection tightens the bracket, and the two bracketing solutions are
//! mixed so the relaxed bandwidth constraint holds with equality. The
//! resulting average AoI lower-bounds every policy that respects the hard
//! per-slot limit.

use crate::cmdp::{
    extract_policy, policy_metrics, solve_decoupled_with, CmdpError, DecoupledOptions,
    OccupancyMeasure, PolicyMetrics, SensorSpec, StationaryPolicy, DEFAULT_X_MAX,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Total activation within this of `M` counts as hitting it exactly.
pub const BANDWIDTH_TOL: f64 = 1e-6;
/// Relative duality gap at which bracket refinement stops early.
pub const GAP_TOL: f64 = 1e-7;
/// Doublings of `W` tried when the subgradient phase never gets below `M`.
const MAX_BRACKET_DOUBLINGS: u32 = 60;
/// Smallest truncation a sensor restarts from.
const MIN_X_HINT: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DualError {
    #[error("network has no sensors")]
    NoSensors,

    #[error("bandwidth M = {bandwidth} must satisfy 1 <= M < N = {sensors}")]
    InvalidBandwidth { bandwidth: usize, sensors: usize },

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("sensor {index}: {source}")]
    Sensor {
        index: usize,
        #[source]
        source: CmdpError,
    },

    #[error("NoBracket: activation stayed above M for all {iterations} multipliers tried")]
    NoBracket { iterations: usize },
}

/// `N` sensors sharing `M` channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub sensors: Vec<SensorSpec>,
    pub bandwidth: usize,
}

impl NetworkSpec {
    pub fn new(sensors: Vec<SensorSpec>, bandwidth: usize) -> Result<Self, DualError> {
        let net = Self { sensors, bandwidth };
        net.validate()?;
        Ok(net)
    }

    pub fn num_sensors(&self) -> usize {
        self.sensors.len()
    }

    pub fn validate(&self) -> Result<(), DualError> {
        let n = self.sensors.len();
        if n == 0 {
            return Err(DualError::NoSensors);
        }
        if self.bandwidth == 0 || self.bandwidth >= n {
            return Err(DualError::InvalidBandwidth {
                bandwidth: self.bandwidth,
                sensors: n,
            });
        }
        for (index, s) in self.sensors.iter().enumerate() {
            s.validate()
                .map_err(|source| DualError::Sensor { index, source })?;
        }
        Ok(())
    }
}

/// Tuning for [`run_algorithm1`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualOptions {
    /// Initial AoI truncation for the per-sensor programs.
    pub x_max: usize,
    /// `γ₀`; `None` picks a step from the problem size.
    pub step0: Option<f64>,
    /// Stop once the multiplier moves less than this (and `ΣĀ ≤ M`).
    pub eps: f64,
    pub max_iter: usize,
    /// Bisection rounds between the final brackets.
    pub refine_rounds: usize,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            x_max: DEFAULT_X_MAX,
            step0: None,
            eps: 1e-3,
            max_iter: 20,
            refine_rounds: 20,
        }
    }
}

impl DualOptions {
    fn validate(&self) -> Result<(), DualError> {
        if self.x_max < 2 {
            return Err(DualError::InvalidOption(format!("x_max = {}", self.x_max)));
        }
        if let Some(s) = self.step0 {
            if !(s.is_finite() && s > 0.0) {
                return Err(DualError::InvalidOption(format!("step0 = {s}")));
            }
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(DualError::InvalidOption(format!("eps = {}", self.eps)));
        }
        Ok(())
    }
}

/// Dual function and per-sensor solutions at one multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualValue {
    pub w: f64,
    pub g: f64,
    pub sum_activation: f64,
    pub metrics: Vec<PolicyMetrics>,
    pub occupancies: Vec<OccupancyMeasure>,
}

/// One dual iterate: `(k, W, ΣĀ, g)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub k: usize,
    pub w: f64,
    pub sum_activation: f64,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualResult {
    pub w_trace: Vec<TracePoint>,
    /// Per-sensor `ν μ^l + (1 − ν) μ^u`.
    pub mixed_occupancy: Vec<OccupancyMeasure>,
    pub policies: Vec<StationaryPolicy>,
    pub aoi_lower_bound: f64,
    /// Weight of the lower bracket (activation at most `M`).
    pub nu: f64,
    pub w_lower: f64,
    pub w_upper: f64,
    /// Largest dual value seen; never exceeds the lower bound.
    pub best_dual: f64,
    /// Whether the subgradient stopping rule fired before `max_iter`.
    pub converged: bool,
}

impl DualResult {
    pub fn total_activation(&self) -> f64 {
        self.mixed_occupancy.iter().map(|o| o.y.sum()).sum()
    }
}

/// Solves sensor problems once per distinct sensor and remembers the
/// truncation each one needed.
struct Evaluator<'a> {
    net: &'a NetworkSpec,
    /// Index into `unique` for every sensor.
    group: Vec<usize>,
    /// First sensor index of each distinct spec.
    unique: Vec<usize>,
    x_hint: Vec<usize>,
}

impl<'a> Evaluator<'a> {
    fn new(net: &'a NetworkSpec, x_max: usize) -> Self {
        let mut unique: Vec<usize> = Vec::new();
        let mut group = Vec::with_capacity(net.sensors.len());
        for (n, s) in net.sensors.iter().enumerate() {
            match unique.iter().position(|&u| net.sensors[u] == *s) {
                Some(g) => group.push(g),
                None => {
                    group.push(unique.len());
                    unique.push(n);
                }
            }
        }
        let x_hint = vec![x_max; unique.len()];
        Self {
            net,
            group,
            unique,
            x_hint,
        }
    }

    fn eval(&mut self, w: f64) -> Result<DualValue, DualError> {
        let solved: Vec<Result<OccupancyMeasure, DualError>> = self
            .unique
            .par_iter()
            .zip(self.x_hint.par_iter())
            .map(|(&index, &x_max)| {
                let opts = DecoupledOptions {
                    x_max,
                    ..DecoupledOptions::default()
                };
                solve_decoupled_with(&self.net.sensors[index], w, &opts)
                    .map_err(|source| DualError::Sensor { index, source })
            })
            .collect();
        let solved: Vec<OccupancyMeasure> = solved.into_iter().collect::<Result<_, _>>()?;
        // Restart each sensor from a truncation just above its support; the
        // solver doubles it again if the next multiplier needs more.
        for (hint, occ) in self.x_hint.iter_mut().zip(&solved) {
            let support = occ.support_max(0.0) + 1;
            *hint = support
                .next_power_of_two()
                .clamp(MIN_X_HINT.min(occ.x_max()), occ.x_max());
        }
        let occupancies: Vec<OccupancyMeasure> =
            self.group.iter().map(|&g| solved[g].clone()).collect();
        Ok(aggregate(self.net, w, occupancies))
    }
}

fn aggregate(net: &NetworkSpec, w: f64, occupancies: Vec<OccupancyMeasure>) -> DualValue {
    let n = net.num_sensors() as f64;
    let metrics: Vec<PolicyMetrics> = occupancies
        .iter()
        .zip(&net.sensors)
        .map(|(o, s)| policy_metrics(o, s, w))
        .collect();
    let sum_g: f64 = metrics.iter().map(|m| m.g_value).sum();
    let sum_activation = metrics.iter().map(|m| m.avg_activation).sum();
    DualValue {
        w,
        g: sum_g / n - w * net.bandwidth as f64 / n,
        sum_activation,
        metrics,
        occupancies,
    }
}

/// Evaluates the dual function at `w`.
pub fn dual_value(net: &NetworkSpec, w: f64, x_max: usize) -> Result<DualValue, DualError> {
    net.validate()?;
    if !(w.is_finite() && w >= 0.0) {
        return Err(DualError::InvalidOption(format!("W = {w}")));
    }
    Evaluator::new(net, x_max).eval(w)
}

/// `(1/N) Σ_n Σ_{x,q} x μ_{x,q}` of a set of occupancy measures.
pub fn average_aoi(occupancies: &[OccupancyMeasure]) -> f64 {
    let total: f64 = occupancies
        .iter()
        .map(|o| {
            (1..=o.x_max())
                .map(|x| x as f64 * o.mu.row(x).iter().sum::<f64>())
                .sum::<f64>()
        })
        .sum();
    total / occupancies.len() as f64
}

/// Network AoI lower bound carried by a dual result.
pub fn lower_bound(result: &DualResult) -> f64 {
    average_aoi(&result.mixed_occupancy)
}

/// Mixing weight of the lower bracket: `(M_u − M) / (M_u − M_l)`.
pub fn mixing_weight(m_lower: f64, m_upper: f64, bandwidth: f64) -> f64 {
    if m_upper - m_lower <= 0.0 {
        return 1.0;
    }
    ((m_upper - bandwidth) / (m_upper - m_lower)).clamp(0.0, 1.0)
}

fn finish(
    net: &NetworkSpec,
    trace: Vec<TracePoint>,
    lower: DualValue,
    upper: &DualValue,
    converged: bool,
) -> DualResult {
    let m = net.bandwidth as f64;
    let best_dual = trace.iter().map(|t| t.g).fold(f64::NEG_INFINITY, f64::max);
    let (nu, mixed) = if (lower.sum_activation - m).abs() <= BANDWIDTH_TOL {
        (1.0, lower.occupancies.clone())
    } else if (upper.sum_activation - m).abs() <= BANDWIDTH_TOL {
        (0.0, upper.occupancies.clone())
    } else {
        let nu = mixing_weight(lower.sum_activation, upper.sum_activation, m);
        let mixed = lower
            .occupancies
            .iter()
            .zip(&upper.occupancies)
            .map(|(l, u)| OccupancyMeasure::mix(l, u, nu))
            .collect();
        (nu, mixed)
    };
    DualResult {
        w_trace: trace,
        policies: mixed.iter().map(extract_policy).collect(),
        aoi_lower_bound: average_aoi(&mixed),
        mixed_occupancy: mixed,
        nu,
        w_lower: lower.w,
        w_upper: upper.w,
        best_dual,
        converged,
    }
}

/// Dual subgradient search for the bandwidth multiplier, followed by
/// bracket refinement and mixing.
pub fn run_algorithm1(net: &NetworkSpec, opts: &DualOptions) -> Result<DualResult, DualError> {
    net.validate()?;
    opts.validate()?;
    let n = net.num_sensors() as f64;
    let m = net.bandwidth as f64;
    let mut eval = Evaluator::new(net, opts.x_max);
    let mut trace = Vec::new();
    let record = |trace: &mut Vec<TracePoint>, v: &DualValue| {
        trace.push(TracePoint {
            k: trace.len(),
            w: v.w,
            sum_activation: v.sum_activation,
            g: v.g,
        })
    };

    let v0 = eval.eval(0.0)?;
    record(&mut trace, &v0);
    if v0.sum_activation <= m + BANDWIDTH_TOL {
        // Bandwidth is slack: the unpriced solution is already feasible.
        let result = finish(net, trace, v0.clone(), &v0, true);
        return Ok(DualResult { nu: 1.0, ..result });
    }

    // The first step lands near the price at which a single-state sensor
    // would update once every N/M slots.
    let step0 = opts
        .step0
        .unwrap_or_else(|| (n / m).powi(2) / (2.0 * (v0.sum_activation - m)));
    let mut upper = v0.clone();
    let mut lower: Option<DualValue> = None;
    let mut prev = v0;
    let mut converged = false;
    let update = |v: DualValue, lower: &mut Option<DualValue>, upper: &mut DualValue| {
        if v.sum_activation <= m {
            if lower
                .as_ref()
                .is_none_or(|l| v.sum_activation > l.sum_activation)
            {
                *lower = Some(v);
            }
        } else if v.sum_activation < upper.sum_activation {
            *upper = v;
        }
    };

    for k in 1..=opts.max_iter {
        let w = (prev.w + step0 / k as f64 * (prev.sum_activation - m)).max(0.0);
        let v = eval.eval(w)?;
        record(&mut trace, &v);
        let done = (w - prev.w).abs() < opts.eps && v.sum_activation <= m;
        prev = v.clone();
        update(v, &mut lower, &mut upper);
        if done {
            converged = true;
            break;
        }
    }

    if lower.is_none() {
        let mut w = upper.w.max(1.0);
        for _ in 0..MAX_BRACKET_DOUBLINGS {
            w *= 2.0;
            let v = eval.eval(w)?;
            record(&mut trace, &v);
            let below = v.sum_activation <= m;
            update(v, &mut lower, &mut upper);
            if below {
                break;
            }
        }
    }
    let Some(mut lower) = lower else {
        return Err(DualError::NoBracket {
            iterations: trace.len(),
        });
    };

    for _ in 0..opts.refine_rounds {
        if (lower.sum_activation - m).abs() <= BANDWIDTH_TOL
            || (upper.sum_activation - m).abs() <= BANDWIDTH_TOL
        {
            break;
        }
        // The mixture is feasible for the relaxed problem and the best dual
        // value bounds it from below; once they meet the bracket is tight.
        let best = trace.iter().map(|t| t.g).fold(f64::NEG_INFINITY, f64::max);
        let nu = mixing_weight(lower.sum_activation, upper.sum_activation, m);
        let aoi = |v: &DualValue| v.metrics.iter().map(|x| x.avg_aoi).sum::<f64>() / n;
        let mixed = nu * aoi(&lower) + (1.0 - nu) * aoi(&upper);
        if mixed - best <= GAP_TOL * mixed.abs() {
            break;
        }
        let v = eval.eval(0.5 * (lower.w + upper.w))?;
        record(&mut trace, &v);
        if v.sum_activation <= m {
            lower = v;
        } else {
            upper = v;
        }
    }
    Ok(finish(net, trace, lower, &upper, converged))
}
