use rayon::prelude::*;
use semsched_core::oracle::{lyapunov_solve, triangle_check, TriangleReport};
use semsched_core::sim::{simulate as run_simulation, SimulationResult};
use semsched_core::sweep::{evaluate_policy, weighted_best, AchievablePoint, Frontier, SweepError};
use semsched_core::{GaussMarkovModel, Policy};

use crate::config::{ExperimentConfig, GridFile};
use crate::error::{oracle_error, CliError};

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsRow {
    /// Numbered from 1.
    pub sensor: usize,
    pub lower: f64,
    pub upper: f64,
}

fn models(cfg: &ExperimentConfig) -> Result<Vec<GaussMarkovModel>, CliError> {
    cfg.systems()?
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            GaussMarkovModel::new(s).map_err(|e| CliError::Numerical {
                sensor: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn bounds(cfg: &ExperimentConfig) -> Result<Vec<BoundsRow>, CliError> {
    models(cfg)?
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let lower = m
                .lower_bound(cfg.delta, cfg.epsilon)
                .map_err(|e| CliError::Numerical {
                    sensor: i + 1,
                    message: e.to_string(),
                })?;
            Ok(BoundsRow {
                sensor: i + 1,
                lower,
                upper: m.upper_bound(),
            })
        })
        .collect()
}

pub fn simulate(
    cfg: &ExperimentConfig,
    policy: &Policy,
    seed: u64,
) -> Result<SimulationResult, CliError> {
    Ok(run_simulation(&cfg.simulation(seed)?, policy)?)
}

/// Evaluated points of one grid section with their frontier and the best
/// point for each weight vector.
#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub name: String,
    pub points: Vec<AchievablePoint>,
    pub frontier: Frontier,
    pub weighted: Vec<(Vec<f64>, Option<AchievablePoint>)>,
}

/// `alpha_1 = 0.1, ..., 0.9` for two sensors, equal weights otherwise.
pub fn default_weights(sensors: usize) -> Vec<Vec<f64>> {
    if sensors == 2 {
        (1..=9)
            .map(|k| {
                let a = k as f64 / 10.0;
                vec![a, 1.0 - a]
            })
            .collect()
    } else {
        vec![vec![1.0 / sensors as f64; sensors]]
    }
}

pub fn sweep(cfg: &ExperimentConfig, grids: &GridFile) -> Result<Vec<GridOutcome>, CliError> {
    let base = cfg.simulation(cfg.seeds[0])?;
    let weights = if cfg.weights.is_empty() {
        default_weights(cfg.systems.len())
    } else {
        cfg.weights.clone()
    };
    let sections = grids.grids(&cfg.seeds)?;
    // Check every section before spending time on any of them.
    let policies = sections
        .iter()
        .map(|(_, grid)| grid.policies())
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::with_capacity(sections.len());
    for ((name, grid), policies) in sections.iter().zip(policies) {
        let points = policies
            .par_iter()
            .map(|p| evaluate_policy(&base, p, &grid.seeds))
            .collect::<Result<Vec<_>, SweepError>>()?;
        let frontier = Frontier::build(&points)?;
        let weighted = weights
            .iter()
            .map(|alpha| match weighted_best(&points, alpha) {
                Ok(p) => Ok((alpha.clone(), Some(p.clone()))),
                Err(SweepError::AllInfinite) => Ok((alpha.clone(), None)),
                Err(e) => Err(CliError::from(e)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push(GridOutcome {
            name: name.clone(),
            points,
            frontier,
            weighted,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SelfCheck {
    pub sensor: usize,
    pub report: TriangleReport,
    /// `|upper bound - tr S| / tr S` for stable systems.
    pub bound_gap: Option<f64>,
}

impl SelfCheck {
    pub fn passes(&self) -> bool {
        self.report.passes() && self.bound_gap.is_none_or(|g| g <= 1e-8)
    }
}

/// Cross-checks the closed forms of every configured system against the
/// independent oracles, on the packet interval `[delta, 2 delta]`.
pub fn selfcheck(cfg: &ExperimentConfig) -> Result<Vec<SelfCheck>, CliError> {
    let systems = cfg.systems()?;
    let models = models(cfg)?;
    systems
        .iter()
        .zip(&models)
        .enumerate()
        .map(|(i, (sys, model))| {
            let report = triangle_check(sys, cfg.delta, 2.0 * cfg.delta).map_err(|e| oracle_error(i, e))?;
            let bound_gap = if model.spectral().is_stable() {
                let trace = lyapunov_solve(sys).map_err(|e| oracle_error(i, e))?.trace();
                Some((model.upper_bound() - trace).abs() / trace.abs().max(f64::MIN_POSITIVE))
            } else {
                None
            };
            Ok(SelfCheck {
                sensor: i + 1,
                report,
                bound_gap,
            })
        })
        .collect()
}
