//! Experiment drivers behind the subcommands.

use aoi_core::dual::{
    average_aoi, run_algorithm1, DualOptions, DualResult, NetworkSpec, TracePoint,
};
use aoi_core::oracle::solve_cmdp_by_bisection;
use aoi_core::sim::{run_seeds, SimConfig, SimPolicy, SimulationResult};
use aoi_core::{extract_policy, policy_metrics, solve_decoupled, OccupancyMeasure};
use rayon::prelude::*;
use std::path::PathBuf;

use crate::config::{ConfigError, ExperimentConfig, PolicyKind, SweepAxis};
use crate::output::{cell, CsvOut, Provenance};
use crate::CliError;

/// Largest LP-vs-oracle deviation `oracle-check` tolerates.
pub const ORACLE_TOL: f64 = 1e-3;

fn provenance(cfg: &ExperimentConfig) -> Provenance {
    Provenance {
        seeds: cfg.seeds.clone(),
        omega: cfg.channel.power().to_vec(),
    }
}

/// Per-sensor optimum of the relaxed problem at `W = 0`, optionally with a
/// cap on each sensor's activation. Used when the bandwidth does not bind
/// (`M ≥ N`) and for the identical-sensor bound.
pub fn relaxed_at_zero(
    net: &NetworkSpec,
    x_max: usize,
    cap: Option<f64>,
) -> Result<DualResult, CliError> {
    let occs: Vec<OccupancyMeasure> = net
        .sensors
        .par_iter()
        .map(|s| solve_decoupled(s, 0.0, x_max, cap))
        .collect::<Result<_, _>>()?;
    let n = net.num_sensors() as f64;
    let sum_activation: f64 = occs.iter().map(|o| o.y.sum()).sum();
    let g = net
        .sensors
        .iter()
        .zip(&occs)
        .map(|(s, o)| policy_metrics(o, s, 0.0).g_value)
        .sum::<f64>()
        / n;
    Ok(DualResult {
        w_trace: vec![TracePoint {
            k: 0,
            w: 0.0,
            sum_activation,
            g,
        }],
        policies: occs.iter().map(extract_policy).collect(),
        aoi_lower_bound: average_aoi(&occs),
        mixed_occupancy: occs,
        nu: 1.0,
        w_lower: 0.0,
        w_upper: 0.0,
        best_dual: g,
        converged: true,
    })
}

/// Lower bound and truncated-policy ingredients for a network.
pub fn solve_network(net: &NetworkSpec, opts: &DualOptions) -> Result<DualResult, CliError> {
    if net.sensors.is_empty() {
        return Err(ConfigError::Invalid("no sensors".into()).into());
    }
    if net.bandwidth >= net.num_sensors() {
        return relaxed_at_zero(net, opts.x_max, None);
    }
    Ok(run_algorithm1(net, opts)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundRow {
    pub n: usize,
    pub m: usize,
    pub aoi_lb: f64,
    pub w_star: f64,
    pub nu: f64,
    pub iterations: usize,
}

fn points(cfg: &ExperimentConfig) -> Result<Vec<(usize, usize)>, CliError> {
    match &cfg.sweep {
        Some(s) if s.axis != SweepAxis::Rho => s
            .values
            .iter()
            .map(|&v| sweep_point(cfg, s.axis, v))
            .collect(),
        _ => Ok(vec![(cfg.n, cfg.m)]),
    }
}

/// `(N, M)` at one sweep value. Sweeps require `M < N`.
fn sweep_point(
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    v: f64,
) -> Result<(usize, usize), CliError> {
    let (n, m) = match axis {
        SweepAxis::N => {
            let n = v as usize;
            let scaled = n * cfg.m;
            if !scaled.is_multiple_of(cfg.n) {
                return Err(ConfigError::Invalid(format!(
                    "N = {n} does not keep M/N = {}/{} integral",
                    cfg.m, cfg.n
                ))
                .into());
            }
            (n, scaled / cfg.n)
        }
        SweepAxis::M => (cfg.n, v as usize),
        SweepAxis::Rho => (cfg.n, cfg.m),
    };
    if m == 0 || m >= n {
        return Err(ConfigError::Invalid(format!(
            "sweep point needs 0 < M < N, got N = {n}, M = {m}"
        ))
        .into());
    }
    Ok((n, m))
}

pub fn lower_bound(cfg: &ExperimentConfig) -> Result<(Vec<LowerBoundRow>, PathBuf), CliError> {
    let rows: Vec<LowerBoundRow> = points(cfg)?
        .into_iter()
        .map(|(n, m)| {
            let net = cfg.network(n, m)?;
            let res = solve_network(&net, &cfg.dual_options())?;
            Ok(LowerBoundRow {
                n,
                m,
                aoi_lb: res.aoi_lower_bound,
                w_star: 0.5 * (res.w_lower + res.w_upper),
                nu: res.nu,
                iterations: res.w_trace.len(),
            })
        })
        .collect::<Result<_, CliError>>()?;
    let mut out = CsvOut::create(
        &cfg.outputs,
        "lower_bound.csv",
        &provenance(cfg),
        &["N", "M", "aoi_lb", "w_star", "nu", "iterations"],
    )?;
    for r in &rows {
        out.row([
            r.n.to_string(),
            r.m.to_string(),
            r.aoi_lb.to_string(),
            r.w_star.to_string(),
            r.nu.to_string(),
            r.iterations.to_string(),
        ])?;
    }
    let path = out.finish()?;
    Ok((rows, path))
}

/// Runs the dual search and writes the multiplier trace, the mixed
/// per-sensor solution and the recovered policies.
pub fn solve(cfg: &ExperimentConfig) -> Result<(DualResult, Vec<PathBuf>), CliError> {
    let net = cfg.network(cfg.n, cfg.m)?;
    let res = solve_network(&net, &cfg.dual_options())?;
    let prov = provenance(cfg);

    let mut trace = CsvOut::create(
        &cfg.outputs,
        "w_trace.csv",
        &prov,
        &["k", "W", "sum_activation", "g"],
    )?;
    for t in &res.w_trace {
        trace.row([
            t.k.to_string(),
            t.w.to_string(),
            t.sum_activation.to_string(),
            t.g.to_string(),
        ])?;
    }

    let mut sensors = CsvOut::create(
        &cfg.outputs,
        "sensors.csv",
        &prov,
        &[
            "sensor",
            "budget",
            "avg_aoi",
            "avg_activation",
            "avg_power",
            "x_max",
        ],
    )?;
    let mut policy = CsvOut::create(
        &cfg.outputs,
        "policy.csv",
        &prov,
        &["sensor", "x", "q", "xi", "mu", "y"],
    )?;
    for (k, ((s, occ), pol)) in net
        .sensors
        .iter()
        .zip(&res.mixed_occupancy)
        .zip(&res.policies)
        .enumerate()
    {
        let m = policy_metrics(occ, s, 0.0);
        sensors.row([
            k.to_string(),
            s.power_budget.to_string(),
            m.avg_aoi.to_string(),
            m.avg_activation.to_string(),
            m.avg_power.to_string(),
            occ.x_max().to_string(),
        ])?;
        for x in 1..=occ.x_max() {
            for q in 0..occ.num_states() {
                policy.row([
                    k.to_string(),
                    x.to_string(),
                    q.to_string(),
                    pol.prob(x, q).to_string(),
                    occ.mu.get(x, q).to_string(),
                    occ.y.get(x, q).to_string(),
                ])?;
            }
        }
    }
    let paths = vec![trace.finish()?, sensors.finish()?, policy.finish()?];
    Ok((res, paths))
}

/// Seed-level results of one scheduler.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRuns {
    pub kind: PolicyKind,
    pub runs: Vec<SimulationResult>,
}

impl PolicyRuns {
    pub fn mean_aoi(&self) -> f64 {
        mean(self.runs.iter().map(|r| r.network_avg_aoi))
    }

    /// Sample standard deviation of the network AoI across seeds.
    pub fn sd_aoi(&self) -> f64 {
        sample_sd(
            &self
                .runs
                .iter()
                .map(|r| r.network_avg_aoi)
                .collect::<Vec<_>>(),
        )
    }

    /// Seed-averaged per-sensor `(avg AoI, avg power, activation)`.
    pub fn per_sensor(&self) -> Vec<(f64, f64, f64)> {
        let n = self.runs.first().map_or(0, |r| r.per_sensor_avg_aoi.len());
        (0..n)
            .map(|k| {
                (
                    mean(self.runs.iter().map(|r| r.per_sensor_avg_aoi[k])),
                    mean(self.runs.iter().map(|r| r.per_sensor_avg_power[k])),
                    mean(self.runs.iter().map(|r| r.per_sensor_activation[k])),
                )
            })
            .collect()
    }

    pub fn max_scheduled(&self) -> usize {
        self.runs
            .iter()
            .map(|r| r.max_scheduled_per_slot)
            .max()
            .unwrap_or(0)
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = it.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if c == 0 {
        f64::NAN
    } else {
        s / c as f64
    }
}

pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs.iter().copied());
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Simulates every configured scheduler over the configured seeds.
pub fn simulate_policies(
    cfg: &ExperimentConfig,
    net: &NetworkSpec,
    solved: &DualResult,
) -> Result<Vec<PolicyRuns>, CliError> {
    cfg.policies
        .iter()
        .map(|&kind| {
            let policy = match kind {
                PolicyKind::Truncated => SimPolicy::Truncated(solved.policies.clone()),
                PolicyKind::Greedy => SimPolicy::GreedyPowerAware,
                PolicyKind::RoundRobin => SimPolicy::RoundRobin,
            };
            let sim = SimConfig::new(net.clone(), cfg.horizon, cfg.seeds[0], policy)?
                .with_warmup(cfg.warmup);
            Ok(PolicyRuns {
                kind,
                runs: run_seeds(&sim, &cfg.seeds)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateReport {
    pub aoi_lb: f64,
    /// Dual solution the truncated scheduler was built from.
    pub solved: DualResult,
    pub budgets: Vec<f64>,
    pub policies: Vec<PolicyRuns>,
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<(SimulateReport, Vec<PathBuf>), CliError> {
    let net = cfg.network(cfg.n, cfg.m)?;
    // The bound goes in every row, so it is computed even without the
    // truncated scheduler.
    let solved = solve_network(&net, &cfg.dual_options())?;
    let policies = simulate_policies(cfg, &net, &solved)?;
    let prov = provenance(cfg);

    let mut runs = CsvOut::create(
        &cfg.outputs,
        "simulate.csv",
        &prov,
        &["policy", "seed", "J", "aoi_lb", "max_scheduled"],
    )?;
    let mut per = CsvOut::create(
        &cfg.outputs,
        "simulate_sensors.csv",
        &prov,
        &[
            "policy",
            "sensor",
            "budget",
            "avg_aoi",
            "avg_power",
            "activation",
        ],
    )?;
    for p in &policies {
        for (seed, r) in cfg.seeds.iter().zip(&p.runs) {
            runs.row([
                p.kind.name().to_string(),
                seed.to_string(),
                r.network_avg_aoi.to_string(),
                solved.aoi_lower_bound.to_string(),
                r.max_scheduled_per_slot.to_string(),
            ])?;
        }
        for (k, (aoi, power, act)) in p.per_sensor().into_iter().enumerate() {
            per.row([
                p.kind.name().to_string(),
                k.to_string(),
                net.sensors[k].power_budget.to_string(),
                aoi.to_string(),
                power.to_string(),
                act.to_string(),
            ])?;
        }
    }
    let paths = vec![runs.finish()?, per.finish()?];
    Ok((
        SimulateReport {
            aoi_lb: solved.aoi_lower_bound,
            budgets: net.sensors.iter().map(|s| s.power_budget).collect(),
            policies,
            solved,
        },
        paths,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub n: usize,
    pub m: usize,
    pub aoi_lb: f64,
    /// `(mean J, sd J)` per scheduler, in `PolicyKind::ALL` order.
    pub j: [Option<(f64, f64)>; 3],
}

impl SweepRow {
    pub fn truncated(&self) -> Option<f64> {
        self.j[0].map(|(m, _)| m)
    }

    /// `(J(truncated) − LB) / LB`.
    pub fn rel_gap(&self) -> Option<f64> {
        self.truncated().map(|j| (j - self.aoi_lb) / self.aoi_lb)
    }
}

fn sweep_row(cfg: &ExperimentConfig, axis: SweepAxis, value: f64) -> Result<SweepRow, CliError> {
    let (n, m) = sweep_point(cfg, axis, value)?;
    let (net, solved) = if axis == SweepAxis::Rho {
        // Identical sensors: each one is held to its share M/N of the
        // bandwidth and the bound needs no multiplier.
        let mut net = cfg.network(n, m)?;
        let budget = value * cfg.round_robin_power(n, m)?;
        for s in &mut net.sensors {
            s.power_budget = budget;
        }
        let solved = relaxed_at_zero(&net, cfg.x_max, Some(m as f64 / n as f64))?;
        (net, solved)
    } else {
        let net = cfg.network(n, m)?;
        let solved = solve_network(&net, &cfg.dual_options())?;
        (net, solved)
    };
    let runs = simulate_policies(cfg, &net, &solved)?;
    let mut j = [None; 3];
    for r in &runs {
        let slot = PolicyKind::ALL
            .iter()
            .position(|k| *k == r.kind)
            .expect("known policy");
        j[slot] = Some((r.mean_aoi(), r.sd_aoi()));
    }
    Ok(SweepRow {
        value,
        n,
        m,
        aoi_lb: solved.aoi_lower_bound,
        j,
    })
}

pub fn sweep(
    cfg: &ExperimentConfig,
    axis: Option<SweepAxis>,
) -> Result<(Vec<SweepRow>, PathBuf), CliError> {
    let spec = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| ConfigError::Invalid("sweep needs a `sweep` section".into()))?;
    let axis = axis.unwrap_or(spec.axis);
    for &v in &spec.values {
        sweep_point(cfg, axis, v)?;
    }
    let rows: Vec<SweepRow> = spec
        .values
        .par_iter()
        .map(|&v| sweep_row(cfg, axis, v))
        .collect::<Result<_, _>>()?;

    let axis_name = match axis {
        SweepAxis::N => "N",
        SweepAxis::M => "M",
        SweepAxis::Rho => "rho",
    };
    let mut out = CsvOut::create(
        &cfg.outputs,
        "sweep.csv",
        &provenance(cfg),
        &[
            "axis",
            "value",
            "N",
            "M",
            "aoi_lb",
            "j_truncated",
            "sd_truncated",
            "rel_gap",
            "j_greedy",
            "sd_greedy",
            "j_round_robin",
            "sd_round_robin",
        ],
    )?;
    for r in &rows {
        let mut fields = vec![
            axis_name.to_string(),
            r.value.to_string(),
            r.n.to_string(),
            r.m.to_string(),
            r.aoi_lb.to_string(),
        ];
        for (i, j) in r.j.iter().enumerate() {
            fields.push(cell(j.map(|(m, _)| m)));
            fields.push(cell(j.map(|(_, s)| s)));
            if i == 0 {
                fields.push(cell(r.rel_gap()));
            }
        }
        out.row(fields)?;
    }
    let path = out.finish()?;
    Ok((rows, path))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub sensor: usize,
    pub budget: f64,
    pub w: f64,
    pub lp: f64,
    pub oracle: f64,
}

impl OracleRow {
    pub fn deviation(&self) -> f64 {
        (self.lp - self.oracle).abs()
    }
}

/// Compares the LP optimum with the λ-bisection oracle for every distinct
/// sensor over the configured `W` grid. Fails if any deviation exceeds
/// [`ORACLE_TOL`]; the CSV is written either way.
pub fn oracle_check(cfg: &ExperimentConfig) -> Result<(Vec<OracleRow>, PathBuf), CliError> {
    let net = cfg.network(cfg.n, cfg.m)?;
    let mut distinct: Vec<usize> = Vec::new();
    for (k, s) in net.sensors.iter().enumerate() {
        if !distinct.iter().any(|&d| net.sensors[d] == *s) {
            distinct.push(k);
        }
    }
    let jobs: Vec<(usize, f64)> = distinct
        .iter()
        .flat_map(|&k| cfg.w_grid.iter().map(move |&w| (k, w)))
        .collect();
    let rows: Vec<OracleRow> = jobs
        .par_iter()
        .map(|&(k, w)| {
            let s = &net.sensors[k];
            let occ = solve_decoupled(s, w, cfg.x_max, None)?;
            let lp = policy_metrics(&occ, s, w).g_value;
            let oracle = solve_cmdp_by_bisection(s, w, occ.x_max())?.mixed_cost;
            Ok(OracleRow {
                sensor: k,
                budget: s.power_budget,
                w,
                lp,
                oracle,
            })
        })
        .collect::<Result<_, CliError>>()?;
    let mut out = CsvOut::create(
        &cfg.outputs,
        "oracle_check.csv",
        &provenance(cfg),
        &["sensor", "budget", "W", "lp", "oracle", "deviation"],
    )?;
    for r in &rows {
        out.row([
            r.sensor.to_string(),
            r.budget.to_string(),
            r.w.to_string(),
            r.lp.to_string(),
            r.oracle.to_string(),
            r.deviation().to_string(),
        ])?;
    }
    let path = out.finish()?;
    let worst = rows.iter().map(OracleRow::deviation).fold(0.0, f64::max);
    if worst > ORACLE_TOL {
        return Err(CliError::OracleMismatch {
            max_deviation: worst,
        });
    }
    Ok((rows, path))
}
