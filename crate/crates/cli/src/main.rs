use aoi_cli::commands;
use aoi_cli::config::SweepAxis;
use aoi_cli::{CliError, ConfigError, ExperimentConfig};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "aoi",
    version,
    about = "AoI scheduling experiments over Markov fading channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `outputs`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seeds (overrides `seeds`).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Simulated slots per run (overrides `T`).
    #[arg(long)]
    horizon: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Network AoI lower bound from the dual search.
    LowerBound(Common),
    /// Dual search plus per-sensor policies.
    Solve(Common),
    /// Simulate the configured schedulers.
    Simulate(Common),
    /// Lower bound and simulations along one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Axis to sweep (overrides `sweep.axis`).
        #[arg(long, value_enum)]
        axis: Option<SweepAxis>,
    },
    /// Cross-check the LP against value iteration.
    OracleCheck(Common),
}

fn load(c: &Common) -> Result<ExperimentConfig, CliError> {
    if let Some(t) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| ConfigError::Invalid(format!("threads: {e}")))?;
    }
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(out) = &c.out {
        cfg.outputs = out.clone();
    }
    if let Some(seeds) = &c.seeds {
        cfg.seeds = seeds.clone();
    }
    if let Some(h) = c.horizon {
        cfg.horizon = h;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::LowerBound(c) => {
            let (rows, path) = commands::lower_bound(&load(&c)?)?;
            for r in rows {
                println!(
                    "N={} M={} AoI_LB={:.6} W*={:.6} nu={:.4} iterations={}",
                    r.n, r.m, r.aoi_lb, r.w_star, r.nu, r.iterations
                );
            }
            println!("wrote {}", path.display());
        }
        Command::Solve(c) => {
            let (res, paths) = commands::solve(&load(&c)?)?;
            println!(
                "AoI_LB={:.6} W in [{:.6}, {:.6}] nu={:.4} total activation={:.6}",
                res.aoi_lower_bound,
                res.w_lower,
                res.w_upper,
                res.nu,
                res.total_activation()
            );
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Command::Simulate(c) => {
            let (report, paths) = commands::simulate(&load(&c)?)?;
            println!("AoI_LB={:.6}", report.aoi_lb);
            for p in &report.policies {
                println!(
                    "{:<12} J={:.6} sd={:.6} max_scheduled={}",
                    p.kind.name(),
                    p.mean_aoi(),
                    p.sd_aoi(),
                    p.max_scheduled()
                );
            }
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Command::Sweep { common, axis } => {
            let (rows, path) = commands::sweep(&load(&common)?, axis)?;
            for r in rows {
                let gap = r.rel_gap().map(|g| format!("{g:.4}")).unwrap_or_default();
                println!(
                    "value={} N={} M={} AoI_LB={:.6} gap={gap}",
                    r.value, r.n, r.m, r.aoi_lb
                );
            }
            println!("wrote {}", path.display());
        }
        Command::OracleCheck(c) => {
            let (rows, path) = commands::oracle_check(&load(&c)?)?;
            let worst = rows.iter().map(|r| r.deviation()).fold(0.0, f64::max);
            println!("{} checks, max deviation {worst:e}", rows.len());
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
