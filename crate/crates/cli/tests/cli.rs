use aoi_cli::commands;
use aoi_cli::config::{ExperimentConfig, PolicyKind, SensorBudgets, SweepAxis, SweepConfig};
use aoi_core::ChannelModel;
use std::path::Path;
use std::process::Command;

const FOUR_STATE_P: &str =
    "[[0.4,0.3,0.2,0.1],[0.25,0.3,0.25,0.2],[0.2,0.25,0.3,0.25],[0.1,0.2,0.3,0.4]]";

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn aoi(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_aoi"))
        .args(args)
        .output()
        .unwrap()
}

fn base(dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        channel: ChannelModel::four_state([1.0, 2.0, 3.0, 4.0]),
        sensors: SensorBudgets::RhoRule {
            rho_min: 0.2,
            rho_max: 1.6,
        },
        n: 8,
        m: 2,
        horizon: 5_000,
        warmup: 0,
        seeds: vec![1, 2],
        x_max: 64,
        gamma0: None,
        eps: 1e-3,
        max_iter: 20,
        policies: PolicyKind::ALL.to_vec(),
        w_grid: vec![0.0, 0.5, 1.0, 2.0, 5.0],
        sweep: None,
        outputs: dir.to_path_buf(),
    }
}

/// Data rows of a CSV written by the tool, after checking its preamble.
fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let prov = lines.next().unwrap();
    assert!(prov.starts_with("# seed="), "{prov}");
    assert!(
        prov.contains(" git=") && prov.contains(" omega=["),
        "{prov}"
    );
    lines.next().unwrap();
    lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn config_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base(dir.path());
    cfg.gamma0 = Some(0.25);
    cfg.sweep = Some(SweepConfig {
        axis: SweepAxis::Rho,
        values: vec![0.2, 0.4],
    });
    let text = cfg.to_json();
    let back = ExperimentConfig::from_json(&text).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.to_json(), text);
}

#[test]
fn rho_rule_expands_against_round_robin_power() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = base(dir.path());
    let rr = 2.0 / 8.0 * 2.5;
    let b = cfg.budgets(8, 2).unwrap();
    assert_eq!(b.len(), 8);
    assert!((b[0] - 0.2 * rr).abs() < 1e-12);
    assert!((b[7] - 1.6 * rr).abs() < 1e-12);
    assert!((b[3] - 0.8 * rr).abs() < 1e-12);
}

#[test]
fn minimal_config_uses_defaults() {
    let cfg = ExperimentConfig::from_json(
        r#"{"channel": {"transition": [[1.0]], "power": [1.0]}, "sensors": {"budgets": [1.0, 1.0]}, "N": 2, "M": 1}"#,
    )
    .unwrap();
    assert_eq!(cfg.x_max, 200);
    assert_eq!(cfg.horizon, 100_000);
    assert_eq!(cfg.eps, 1e-3);
    assert_eq!(cfg.policies, PolicyKind::ALL.to_vec());
}

#[test]
fn malformed_row_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        r#"{"channel": {"transition": [[0.5, 0.4], [0.5, 0.5]], "power": [1, 2]},
            "sensors": {"budgets": [1, 1]}, "N": 2, "M": 1}"#,
    );
    let out = aoi(&["lower-bound", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("NotStochastic"));
}

#[test]
fn empty_sensor_list_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        r#"{"channel": {"transition": [[1.0]], "power": [1.0]}, "sensors": {"budgets": []}, "N": 0, "M": 1}"#,
    );
    let out = aoi(&["oracle-check", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn lower_bound_two_unconstrained_sensors() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        &format!(
            r#"{{"channel": {{"transition": [[1.0]], "power": [1.0]}}, "sensors": {{"budgets": [1, 1]}},
                "N": 2, "M": 1, "x_max": 16, "outputs": {:?}}}"#,
            dir.path().join("out")
        ),
    );
    let out = aoi(&["lower-bound", "--config", path.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = rows(&dir.path().join("out/lower_bound.csv"));
    assert_eq!(r.len(), 1);
    assert_eq!(r[0][0], "2");
    let lb: f64 = r[0][2].parse().unwrap();
    assert!((lb - 1.5).abs() < 1e-9);
}

#[test]
fn slack_bandwidth_gives_the_unpriced_bound() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base(dir.path());
    cfg.n = 3;
    cfg.m = 3;
    cfg.sensors = SensorBudgets::Budgets(vec![0.6, 1.0, 3.0]);
    let (rows, _) = commands::lower_bound(&cfg).unwrap();
    let net = cfg.network(3, 3).unwrap();
    let g0 = net
        .sensors
        .iter()
        .map(|s| {
            let occ = aoi_core::solve_decoupled(s, 0.0, 64, None).unwrap();
            aoi_core::policy_metrics(&occ, s, 0.0).g_value
        })
        .sum::<f64>()
        / 3.0;
    assert!((rows[0].aoi_lb - g0).abs() < 1e-12);
    assert_eq!(rows[0].iterations, 1);
}

#[test]
fn round_robin_with_ample_power() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base(dir.path());
    cfg.n = 4;
    cfg.m = 1;
    cfg.warmup = 4;
    cfg.horizon = 10_000;
    cfg.sensors = SensorBudgets::Budgets(vec![100.0; 4]);
    cfg.policies = vec![PolicyKind::RoundRobin];
    let (report, _) = commands::simulate(&cfg).unwrap();
    assert_eq!(report.policies[0].mean_aoi(), 2.5);
}

#[test]
fn simulate_is_byte_deterministic_and_reports_each_sensor() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base(&dir.path().join("a"));
    let (report, paths) = commands::simulate(&cfg).unwrap();
    cfg.outputs = dir.path().join("b");
    let (_, again) = commands::simulate(&cfg).unwrap();
    for (p, q) in paths.iter().zip(&again) {
        assert_eq!(std::fs::read(p).unwrap(), std::fs::read(q).unwrap());
    }
    let per = rows(&paths[1]);
    for kind in PolicyKind::ALL {
        assert_eq!(per.iter().filter(|r| r[0] == kind.name()).count(), 8);
    }
    let runs = rows(&paths[0]);
    assert_eq!(runs.len(), 3 * 2);
    for p in &report.policies {
        assert!(p.max_scheduled() <= 2);
    }
}

#[test]
fn solve_writes_trace_and_policies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = base(dir.path());
    let (res, paths) = commands::solve(&cfg).unwrap();
    let trace = rows(&paths[0]);
    assert_eq!(trace.len(), res.w_trace.len());
    assert!((res.total_activation() - 2.0).abs() < 1e-6);
    let sensors = rows(&paths[1]);
    assert_eq!(sensors.len(), 8);
    let policy = rows(&paths[2]);
    let expected: usize = res.mixed_occupancy.iter().map(|o| o.x_max() * 4).sum();
    assert_eq!(policy.len(), expected);
}

#[test]
fn sweep_over_bandwidth_rejects_m_at_least_n() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base(dir.path());
    cfg.sweep = Some(SweepConfig {
        axis: SweepAxis::M,
        values: vec![2.0, 8.0],
    });
    let path = write_config(dir.path(), &cfg.to_json());
    let out = aoi(&["sweep", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("M < N"));
}

#[test]
fn rho_sweep_bound_falls_with_power() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base(dir.path());
    cfg.n = 4;
    cfg.m = 1;
    cfg.seeds = vec![0];
    cfg.horizon = 2_000;
    cfg.policies = vec![PolicyKind::Truncated];
    cfg.sweep = Some(SweepConfig {
        axis: SweepAxis::Rho,
        values: vec![0.2, 0.6, 1.0, 1.6],
    });
    let (rows, path) = commands::sweep(&cfg, None).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].aoi_lb <= w[0].aoi_lb + 1e-9);
    }
    let csv = std::fs::read_to_string(path).unwrap();
    assert!(csv
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("axis,value,N,M,aoi_lb,j_truncated"));
    // Greedy and round robin were not requested.
    assert!(csv.lines().nth(2).unwrap().ends_with(",,,,"));
}

#[test]
fn oracle_check_on_the_four_state_channel() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        &format!(
            r#"{{"channel": {{"transition": {FOUR_STATE_P}, "power": [1, 2, 3, 4]}},
                "sensors": {{"rho_list": [0.3, 1.2]}}, "N": 2, "M": 1, "x_max": 64,
                "outputs": {:?}}}"#,
            dir.path().join("out")
        ),
    );
    let out = aoi(&["oracle-check", "--config", path.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = rows(&dir.path().join("out/oracle_check.csv"));
    assert_eq!(r.len(), 10);
    for row in r {
        let dev: f64 = row[5].parse().unwrap();
        assert!(dev <= 1e-3);
    }
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base(dir.path());
    cfg.policies = vec![PolicyKind::RoundRobin];
    let path = write_config(dir.path(), &cfg.to_json());
    let out_dir = dir.path().join("flags");
    let out = aoi(&[
        "simulate",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--seeds",
        "5,6,7",
        "--horizon",
        "300",
        "--threads",
        "1",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(out_dir.join("simulate.csv")).unwrap();
    assert!(text.starts_with("# seed=5,6,7 "));
    assert_eq!(rows(&out_dir.join("simulate.csv")).len(), 3);
}
