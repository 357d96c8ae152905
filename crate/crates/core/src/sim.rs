//! Slotted-time simulation of `N` sensors sharing `M` channels.
//!
//! Each slot every sensor sees its current AoI and channel state, the
//! scheduler picks at most `M` of them, and scheduled sensors deliver a
//! fresh update (AoI back to 1 at the next slot) at a power cost of
//! `ω(q)`. Three schedulers are provided: the truncated stationary policy,
//! a power-aware greedy baseline, and round-robin.
//!
//! Randomness comes from independent ChaCha streams derived from one seed:
//! one per sensor for its channel, one for policy draws. Runs with the same
//! seed therefore share channel sample paths across schedulers.

use crate::channel::{sample_index, ChannelError};
use crate::cmdp::StationaryPolicy;
use crate::dual::NetworkSpec;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("horizon must be at least one slot")]
    EmptyHorizon,

    #[error("network needs at least one sensor and one channel")]
    EmptyNetwork,

    #[error("expected {expected} policies, got {got}")]
    PolicyCount { expected: usize, got: usize },

    #[error("policy for sensor {sensor} is invalid: {reason}")]
    InvalidPolicy { sensor: usize, reason: String },

    #[error("scheduler mismatch: {0}")]
    WrongScheduler(&'static str),

    #[error("sensor {sensor}: {source}")]
    Channel {
        sensor: usize,
        #[source]
        source: ChannelError,
    },
}

/// Scheduling rule applied every slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SimPolicy {
    /// Per-sensor randomized decisions, thinned to `M` uniformly at random.
    Truncated(Vec<StationaryPolicy>),
    /// Up to `M` oldest sensors among those within their power budget.
    GreedyPowerAware,
    /// Consecutive blocks of `M` sensors in index order.
    RoundRobin,
}

impl SimPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            SimPolicy::Truncated(_) => "truncated",
            SimPolicy::GreedyPowerAware => "greedy",
            SimPolicy::RoundRobin => "round_robin",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Sensors and bandwidth. `M ≥ N` is allowed here (nothing is ever
    /// truncated then), unlike for the dual search.
    pub network: NetworkSpec,
    /// Number of slots averaged over.
    pub horizon: u64,
    pub seed: u64,
    /// Slots simulated before averaging starts.
    pub warmup: u64,
    pub policy: SimPolicy,
    /// Record the network mean AoI every this many averaged slots.
    pub trace_every: Option<u64>,
}

impl SimConfig {
    pub fn new(
        network: NetworkSpec,
        horizon: u64,
        seed: u64,
        policy: SimPolicy,
    ) -> Result<Self, SimError> {
        let cfg = Self {
            network,
            horizon,
            seed,
            warmup: 0,
            policy,
            trace_every: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_warmup(mut self, warmup: u64) -> Self {
        self.warmup = warmup;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.horizon == 0 {
            return Err(SimError::EmptyHorizon);
        }
        let n = self.network.sensors.len();
        if n == 0 || self.network.bandwidth == 0 {
            return Err(SimError::EmptyNetwork);
        }
        if let SimPolicy::Truncated(policies) = &self.policy {
            if policies.len() != n {
                return Err(SimError::PolicyCount {
                    expected: n,
                    got: policies.len(),
                });
            }
            for (sensor, (p, s)) in policies.iter().zip(&self.network.sensors).enumerate() {
                let bad = |reason: String| SimError::InvalidPolicy { sensor, reason };
                if p.num_states() != s.channel.num_states() {
                    return Err(bad(format!(
                        "{} channel states, channel has {}",
                        p.num_states(),
                        s.channel.num_states()
                    )));
                }
                if p.x_max() < 2 {
                    return Err(bad(format!("x_max = {}", p.x_max())));
                }
                if p.xi.as_slice().iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(bad("probability outside [0, 1]".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub network_avg_aoi: f64,
    pub per_sensor_avg_aoi: Vec<f64>,
    pub per_sensor_avg_power: Vec<f64>,
    pub per_sensor_activation: Vec<f64>,
    pub max_scheduled_per_slot: usize,
    pub per_slot_aoi_trace: Option<Vec<f64>>,
}

/// Keeps `candidates` if at most `m`, otherwise a uniformly random
/// `m`-subset (partial Fisher–Yates). The result is sorted.
pub fn truncate_decisions<R: Rng + ?Sized>(
    candidates: &[usize],
    m: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut set = candidates.to_vec();
    truncate_in_place(&mut set, m, rng);
    set.sort_unstable();
    set
}

fn truncate_in_place<R: Rng + ?Sized>(set: &mut Vec<usize>, m: usize, rng: &mut R) {
    if set.len() <= m {
        return;
    }
    for i in 0..m {
        let j = rng.random_range(i..set.len());
        set.swap(i, j);
    }
    set.truncate(m);
}

fn channel_rng(seed: u64, sensor: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sensor as u64 + 1);
    rng
}

fn policy_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

/// Simulates the configured scheduler.
pub fn run(config: &SimConfig) -> Result<SimulationResult, SimError> {
    config.validate()?;
    let net = &config.network;
    let n = net.sensors.len();
    let m = net.bandwidth;

    let mut chan_rng: Vec<ChaCha8Rng> = (0..n).map(|i| channel_rng(config.seed, i)).collect();
    let mut pol_rng = policy_rng(config.seed);
    let mut q = Vec::with_capacity(n);
    for (sensor, (s, rng)) in net.sensors.iter().zip(&mut chan_rng).enumerate() {
        let eta = s
            .channel
            .steady_state()
            .map_err(|source| SimError::Channel { sensor, source })?;
        q.push(sample_index(&eta, rng));
    }
    let mut x = vec![1u64; n];
    let mut spent = vec![0.0f64; n];

    let mut aoi_sum = vec![0u64; n];
    let mut sends = vec![0u64; n];
    let mut power = vec![0.0f64; n];
    let mut max_scheduled = 0usize;
    let mut trace = config.trace_every.map(|_| Vec::new());

    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    let mut scheduled = vec![false; n];
    let mut order: Vec<usize> = (0..n).collect();
    let total = config.warmup + config.horizon;

    for t in 0..total {
        let counted = t >= config.warmup;
        chosen.clear();
        match &config.policy {
            SimPolicy::Truncated(policies) => {
                for (i, p) in policies.iter().enumerate() {
                    let xi = p.prob(x[i].min(p.x_max() as u64) as usize, q[i]);
                    if xi >= 1.0 || (xi > 0.0 && pol_rng.random::<f64>() < xi) {
                        chosen.push(i);
                    }
                }
                truncate_in_place(&mut chosen, m, &mut pol_rng);
            }
            SimPolicy::GreedyPowerAware => {
                // Affordable sensors by AoI, oldest first, lowest index on ties.
                order.clear();
                order.extend(
                    (0..n).filter(|&i| net.sensors[i].power_budget * t as f64 - spent[i] >= 0.0),
                );
                order.sort_by(|&a, &b| x[b].cmp(&x[a]).then(a.cmp(&b)));
                chosen.extend(order.iter().take(m));
            }
            SimPolicy::RoundRobin => {
                let start = (t as u128 * m as u128 % n as u128) as usize;
                chosen.extend((0..m.min(n)).map(|j| (start + j) % n));
            }
        }
        max_scheduled = max_scheduled.max(chosen.len());
        for &i in &chosen {
            scheduled[i] = true;
        }

        for i in 0..n {
            let omega = net.sensors[i].channel.omega(q[i]);
            if counted {
                aoi_sum[i] += x[i];
            }
            if scheduled[i] {
                spent[i] += omega;
                if counted {
                    sends[i] += 1;
                    power[i] += omega;
                }
                x[i] = 1;
                scheduled[i] = false;
            } else {
                x[i] = x[i].saturating_add(1);
            }
            q[i] = sample_index(&net.sensors[i].channel.transition()[q[i]], &mut chan_rng[i]);
        }
        if let (Some(every), Some(tr)) = (config.trace_every, trace.as_mut()) {
            if counted && (t - config.warmup).is_multiple_of(every.max(1)) {
                // AoI sampled at the start of the next slot.
                tr.push(x.iter().sum::<u64>() as f64 / n as f64);
            }
        }
    }

    let horizon = config.horizon as f64;
    let per_sensor_avg_aoi: Vec<f64> = aoi_sum.iter().map(|&s| s as f64 / horizon).collect();
    Ok(SimulationResult {
        network_avg_aoi: per_sensor_avg_aoi.iter().sum::<f64>() / n as f64,
        per_sensor_avg_aoi,
        per_sensor_avg_power: power.iter().map(|&p| p / horizon).collect(),
        per_sensor_activation: sends.iter().map(|&s| s as f64 / horizon).collect(),
        max_scheduled_per_slot: max_scheduled,
        per_slot_aoi_trace: trace,
    })
}

/// Runs the greedy power-aware baseline.
pub fn run_greedy(config: &SimConfig) -> Result<SimulationResult, SimError> {
    if config.policy != SimPolicy::GreedyPowerAware {
        return Err(SimError::WrongScheduler(
            "run_greedy needs SimPolicy::GreedyPowerAware",
        ));
    }
    run(config)
}

/// Runs `config` once per seed, in parallel.
pub fn run_seeds(config: &SimConfig, seeds: &[u64]) -> Result<Vec<SimulationResult>, SimError> {
    seeds
        .par_iter()
        .map(|&seed| {
            run(&SimConfig {
                seed,
                ..config.clone()
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelModel;
    use crate::cmdp::SensorSpec;

    fn network(n: usize, m: usize, budget: f64) -> NetworkSpec {
        NetworkSpec {
            sensors: vec![
                SensorSpec::new(ChannelModel::four_state([1.0, 2.0, 3.0, 4.0]), budget)
                    .unwrap();
                n
            ],
            bandwidth: m,
        }
    }

    #[test]
    fn everyone_scheduled_every_slot() {
        let net = network(2, 2, 10.0);
        let pol = vec![StationaryPolicy::always(5, 4); 2];
        let r = run(&SimConfig::new(net, 1000, 1, SimPolicy::Truncated(pol)).unwrap()).unwrap();
        assert_eq!(r.network_avg_aoi, 1.0);
        assert_eq!(r.per_sensor_activation, vec![1.0, 1.0]);
        assert_eq!(r.max_scheduled_per_slot, 2);
    }

    #[test]
    fn round_robin_closed_form() {
        let cfg = SimConfig::new(network(4, 1, 10.0), 10_000, 3, SimPolicy::RoundRobin)
            .unwrap()
            .with_warmup(4);
        let r = run(&cfg).unwrap();
        assert_eq!(r.network_avg_aoi, 2.5);
        assert_eq!(r.max_scheduled_per_slot, 1);
    }

    #[test]
    fn greedy_alternates() {
        let cfg = SimConfig::new(network(2, 1, 10.0), 1000, 0, SimPolicy::GreedyPowerAware)
            .unwrap()
            .with_warmup(2);
        let r = run_greedy(&cfg).unwrap();
        assert_eq!(r.network_avg_aoi, 1.5);
    }

    #[test]
    fn greedy_single_sensor() {
        let cfg = SimConfig::new(network(1, 1, 10.0), 100, 0, SimPolicy::GreedyPowerAware).unwrap();
        assert_eq!(run_greedy(&cfg).unwrap().network_avg_aoi, 1.0);
    }

    #[test]
    fn greedy_zero_budget_sends_once() {
        // With nothing spent yet the test ℰt − C ≥ 0 passes, so each sensor
        // gets exactly one transmission (slots 0 and 1) and then ages.
        let cfg = SimConfig::new(network(2, 1, 0.0), 100, 0, SimPolicy::GreedyPowerAware).unwrap();
        let r = run(&cfg).unwrap();
        assert_eq!(r.per_sensor_activation, vec![0.01, 0.01]);
        assert_eq!(
            r.per_sensor_avg_aoi[0],
            (1 + (1..=99).sum::<u64>()) as f64 / 100.0
        );
        assert_eq!(
            r.per_sensor_avg_aoi[1],
            (1 + 2 + (1..=98).sum::<u64>()) as f64 / 100.0
        );
    }

    #[test]
    fn run_greedy_rejects_other_schedulers() {
        let cfg = SimConfig::new(network(2, 1, 1.0), 10, 0, SimPolicy::RoundRobin).unwrap();
        assert!(matches!(run_greedy(&cfg), Err(SimError::WrongScheduler(_))));
    }

    #[test]
    fn truncation_cases() {
        let mut rng = policy_rng(1);
        assert_eq!(truncate_decisions(&[3], 2, &mut rng), vec![3]);
        assert_eq!(truncate_decisions(&[1, 2, 3], 3, &mut rng), vec![1, 2, 3]);
        let picked = truncate_decisions(&[1, 2, 3, 4], 2, &mut rng);
        assert_eq!(picked.len(), 2);
        assert!(picked.iter().all(|p| (1..=4).contains(p)));
    }

    #[test]
    fn truncation_is_uniform() {
        let mut rng = policy_rng(7);
        let trials = 100_000;
        let mut hits = [0u32; 4];
        for _ in 0..trials {
            for s in truncate_decisions(&[0, 1, 2, 3], 2, &mut rng) {
                hits[s] += 1;
            }
        }
        let sigma = (0.25f64 * trials as f64).sqrt();
        for h in hits {
            assert!(
                (h as f64 - 0.5 * trials as f64).abs() < 3.0 * sigma,
                "{hits:?}"
            );
        }
    }

    #[test]
    fn config_errors() {
        assert_eq!(
            SimConfig::new(network(2, 1, 1.0), 0, 0, SimPolicy::RoundRobin).unwrap_err(),
            SimError::EmptyHorizon
        );
        assert!(matches!(
            SimConfig::new(network(2, 1, 1.0), 5, 0, SimPolicy::Truncated(vec![])),
            Err(SimError::PolicyCount {
                expected: 2,
                got: 0
            })
        ));
        let wrong = vec![StationaryPolicy::always(5, 3); 2];
        assert!(matches!(
            SimConfig::new(network(2, 1, 1.0), 5, 0, SimPolicy::Truncated(wrong)),
            Err(SimError::InvalidPolicy { sensor: 0, .. })
        ));
    }

    #[test]
    fn deterministic_per_seed() {
        let pol = vec![StationaryPolicy::threshold(10, &[2, 3, 4, 5]); 5];
        let cfg = SimConfig::new(network(5, 2, 1.0), 5000, 42, SimPolicy::Truncated(pol)).unwrap();
        let a = run(&cfg).unwrap();
        assert_eq!(a, run(&cfg).unwrap());
        let b = run(&SimConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn trace_is_downsampled() {
        let cfg = SimConfig {
            trace_every: Some(10),
            ..SimConfig::new(network(4, 1, 1.0), 100, 0, SimPolicy::RoundRobin).unwrap()
        };
        assert_eq!(run(&cfg).unwrap().per_slot_aoi_trace.unwrap().len(), 10);
    }
}
