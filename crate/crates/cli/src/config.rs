//! JSON experiment configuration.

use aoi_core::channel::ChannelError;
use aoi_core::cmdp::DEFAULT_X_MAX;
use aoi_core::dual::{DualOptions, NetworkSpec};
use aoi_core::{ChannelModel, SensorSpec};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("invalid channel: {0}")]
    Channel(#[from] ChannelError),

    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Power budgets of the sensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SensorBudgets {
    /// Explicit `ℰ_n`, one per sensor.
    Budgets(Vec<f64>),
    /// Explicit `ρ_n`; `ℰ_n = ρ_n ℰ^RR`.
    RhoList(Vec<f64>),
    /// `ρ_n` linear from `rho_min` (first sensor) to `rho_max` (last).
    RhoRule { rho_min: f64, rho_max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Truncated,
    Greedy,
    RoundRobin,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [
        PolicyKind::Truncated,
        PolicyKind::Greedy,
        PolicyKind::RoundRobin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Truncated => "truncated",
            PolicyKind::Greedy => "greedy",
            PolicyKind::RoundRobin => "round_robin",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Number of sensors, keeping `M/N` fixed.
    N,
    /// Bandwidth with `N` fixed.
    M,
    /// Common `ρ` of identical sensors.
    Rho,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

fn default_x_max() -> usize {
    DEFAULT_X_MAX
}
fn default_eps() -> f64 {
    1e-3
}
fn default_max_iter() -> usize {
    DualOptions::default().max_iter
}
fn default_horizon() -> u64 {
    100_000
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_policies() -> Vec<PolicyKind> {
    PolicyKind::ALL.to_vec()
}
fn default_w_grid() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 2.0, 5.0]
}
fn default_outputs() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub channel: ChannelModel,
    pub sensors: SensorBudgets,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: u64,
    #[serde(default)]
    pub warmup: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_x_max")]
    pub x_max: usize,
    #[serde(default)]
    pub gamma0: Option<f64>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicyKind>,
    #[serde(default = "default_w_grid")]
    pub w_grid: Vec<f64>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default = "default_outputs")]
    pub outputs: PathBuf,
}

/// `ρ_n` for sensor `n` (zero-based) of `count` under the linear rule.
pub fn rho_linear(rho_min: f64, rho_max: f64, n: usize, count: usize) -> f64 {
    if count <= 1 {
        return rho_min;
    }
    rho_min + (rho_max - rho_min) * n as f64 / (count - 1) as f64
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.n == 0 {
            return bad("N must be positive".into());
        }
        if self.m == 0 {
            return bad("M must be positive".into());
        }
        if self.horizon == 0 {
            return bad("T must be positive".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.x_max < 2 {
            return bad(format!("x_max = {} (need at least 2)", self.x_max));
        }
        if let Some(g) = self.gamma0 {
            if !(g.is_finite() && g > 0.0) {
                return bad(format!("gamma0 = {g}"));
            }
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return bad(format!("eps = {}", self.eps));
        }
        match &self.sensors {
            SensorBudgets::Budgets(v) | SensorBudgets::RhoList(v) => {
                if v.len() != self.n {
                    return bad(format!("{} sensor entries for N = {}", v.len(), self.n));
                }
                if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                    return bad(format!("sensor entry {x} must be finite and nonnegative"));
                }
            }
            SensorBudgets::RhoRule { rho_min, rho_max } => {
                if !(rho_min.is_finite()
                    && rho_max.is_finite()
                    && *rho_min >= 0.0
                    && *rho_max >= 0.0)
                {
                    return bad(format!("rho_rule [{rho_min}, {rho_max}]"));
                }
            }
        }
        if let Some(w) = self.w_grid.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return bad(format!("w_grid entry {w}"));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return bad("sweep.values must not be empty".into());
            }
            for &v in &s.values {
                match s.axis {
                    SweepAxis::N | SweepAxis::M if v.fract() != 0.0 || v < 1.0 => {
                        return bad(format!("sweep value {v} is not a positive integer"))
                    }
                    SweepAxis::Rho if !(v.is_finite() && v >= 0.0) => {
                        return bad(format!("sweep value {v} is not a valid rho"))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// `ℰ^RR = (M/N) Σ η_q ω(q)` for the configured `N` and `M`.
    pub fn round_robin_power(&self, n: usize, m: usize) -> Result<f64, ConfigError> {
        Ok(m as f64 / n as f64 * self.channel.mean_power()?)
    }

    /// Per-sensor budgets for `n` sensors and bandwidth `m`.
    pub fn budgets(&self, n: usize, m: usize) -> Result<Vec<f64>, ConfigError> {
        let rr = self.round_robin_power(n, m)?;
        Ok(match &self.sensors {
            SensorBudgets::Budgets(v) => {
                if v.len() != n {
                    return Err(ConfigError::Invalid(format!(
                        "explicit budgets cannot be resized from {} to {n} sensors",
                        v.len()
                    )));
                }
                v.clone()
            }
            SensorBudgets::RhoList(v) => {
                if v.len() != n {
                    return Err(ConfigError::Invalid(format!(
                        "rho_list cannot be resized from {} to {n} sensors",
                        v.len()
                    )));
                }
                v.iter().map(|r| r * rr).collect()
            }
            SensorBudgets::RhoRule { rho_min, rho_max } => (0..n)
                .map(|i| rho_linear(*rho_min, *rho_max, i, n) * rr)
                .collect(),
        })
    }

    /// Sensors with the configured channel. `M ≥ N` is allowed here.
    pub fn network(&self, n: usize, m: usize) -> Result<NetworkSpec, ConfigError> {
        let sensors = self
            .budgets(n, m)?
            .into_iter()
            .map(|b| SensorSpec::new(self.channel.clone(), b))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(NetworkSpec {
            sensors,
            bandwidth: m,
        })
    }

    pub fn dual_options(&self) -> DualOptions {
        DualOptions {
            x_max: self.x_max,
            step0: self.gamma0,
            eps: self.eps,
            max_iter: self.max_iter,
            ..DualOptions::default()
        }
    }
}
