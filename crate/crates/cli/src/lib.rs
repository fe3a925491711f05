//! Command-line front end for `semsched-core`: experiment files, bounds,
//! single runs, parameter sweeps and oracle self-checks, all written as CSV.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{parse_policy, ExperimentConfig, GridFile};
pub use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "semsched", version, about = "Significance-aware channel access for remote estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// Experiment file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output` in the config (default `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-sensor lower and upper MSE bounds.
    Bounds(Common),
    /// One simulation run of a policy.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Policy spec, e.g. `max-trials:[1,inf]`; overrides the config.
        #[arg(long)]
        policy: Option<String>,
        /// Seed; defaults to the first seed of the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate parameter grids and extract frontiers.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Grid file (TOML).
        #[arg(long)]
        grid: PathBuf,
        /// Use this single seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check the closed forms against the independent oracles.
    Selfcheck {
        #[command(flatten)]
        common: Common,
    },
}

fn out_dir(common: &Common, cfg: &ExperimentConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn announce(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Bounds(common) => {
            let cfg = ExperimentConfig::load(&common.config)?;
            let rows = commands::bounds(&cfg)?;
            for r in &rows {
                println!(
                    "sensor {}: lower {} upper {}",
                    r.sensor,
                    output::num(r.lower),
                    output::num(r.upper)
                );
            }
            announce(&[output::write_bounds(&out_dir(common, &cfg), &rows)?]);
        }
        Command::Simulate { common, policy, seed } => {
            let cfg = ExperimentConfig::load(&common.config)?;
            let policy = match policy {
                Some(p) => parse_policy(p)?,
                None => cfg
                    .policy()?
                    .ok_or_else(|| CliError::Config("no policy in config or on the command line".into()))?,
            };
            let seed = seed.unwrap_or(cfg.seeds[0]);
            let res = commands::simulate(&cfg, &policy, seed)?;
            for g in 0..res.mse.len() {
                println!(
                    "sensor {}: mse {} (stderr {})",
                    g + 1,
                    output::num(res.mse[g]),
                    output::num(res.stderr[g])
                );
            }
            announce(&[output::write_result(&out_dir(common, &cfg), &res)?]);
        }
        Command::Sweep { common, grid, seed } => {
            let mut cfg = ExperimentConfig::load(&common.config)?;
            if let Some(s) = seed {
                cfg.seeds = vec![*s];
            }
            let grids = GridFile::load(grid)?;
            let outcomes = commands::sweep(&cfg, &grids)?;
            for o in &outcomes {
                println!(
                    "{}: {} points, {} on the frontier",
                    o.name,
                    o.points.len(),
                    o.frontier.points.len()
                );
            }
            announce(&output::write_sweep(&out_dir(common, &cfg), &outcomes)?);
        }
        Command::Selfcheck { common } => {
            let cfg = ExperimentConfig::load(&common.config)?;
            let checks = commands::selfcheck(&cfg)?;
            let mut ok = true;
            for c in &checks {
                let r = &c.report;
                println!(
                    "sensor {}: upsilon {:.1e} phi {:.1e} lyapunov {:.1e} quadrature {:.1e}{} {}",
                    c.sensor,
                    r.upsilon_residual,
                    r.phi_residual,
                    r.lyapunov_gap,
                    r.quadrature_gap,
                    c.bound_gap.map(|g| format!(" bound {g:.1e}")).unwrap_or_default(),
                    if c.passes() { "ok" } else { "FAILED" }
                );
                ok &= c.passes();
            }
            if !ok {
                return Err(CliError::Other("self-check failed".into()));
            }
        }
    }
    Ok(())
}

/// Writes `cfg` to `path` in the same format [`ExperimentConfig::load`] reads.
pub fn save_config(cfg: &ExperimentConfig, path: &Path) -> Result<(), CliError> {
    std::fs::write(path, cfg.to_toml()).map_err(|e| CliError::io(path, e))
}
