//! CSV writers. Numbers use Rust's shortest round-trip formatting, so every
//! value re-parses to the same `f64`; infinities are written as `inf`.

use std::fs;
use std::path::{Path, PathBuf};

use semsched_core::sim::SimulationResult;
use semsched_core::sweep::AchievablePoint;

use crate::commands::{BoundsRow, GridOutcome};
use crate::error::CliError;

pub fn num(x: f64) -> String {
    format!("{x}")
}

fn writer(dir: &Path, name: &str) -> Result<(csv::Writer<fs::File>, PathBuf), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    let w = csv::Writer::from_path(&path)?;
    Ok((w, path))
}

fn indexed(prefix: &str, g: usize) -> impl Iterator<Item = String> + '_ {
    (1..=g).map(move |i| format!("{prefix}_{i}"))
}

fn finish(mut w: csv::Writer<fs::File>, path: PathBuf) -> Result<PathBuf, CliError> {
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

pub fn write_bounds(dir: &Path, rows: &[BoundsRow]) -> Result<PathBuf, CliError> {
    let (mut w, path) = writer(dir, "bounds.csv")?;
    w.write_record(["sensor", "lower_bound", "upper_bound"])?;
    for r in rows {
        w.write_record([r.sensor.to_string(), num(r.lower), num(r.upper)])?;
    }
    finish(w, path)
}

pub fn write_result(dir: &Path, res: &SimulationResult) -> Result<PathBuf, CliError> {
    let (mut w, path) = writer(dir, "result.csv")?;
    w.write_record(["sensor", "mse", "aoi_mean", "stderr", "successes", "failures"])?;
    for g in 0..res.mse.len() {
        w.write_record([
            (g + 1).to_string(),
            num(res.mse[g]),
            num(res.aoi_mean[g]),
            num(res.stderr[g]),
            res.successes[g].to_string(),
            res.failures[g].to_string(),
        ])?;
    }
    finish(w, path)
}

fn point_fields(p: &AchievablePoint) -> impl Iterator<Item = String> + '_ {
    p.mse.iter().chain(&p.stderr).map(|x| num(*x))
}

/// `points.csv`, `frontier.csv` and `weighted.csv` for every grid section.
pub fn write_sweep(dir: &Path, outcomes: &[GridOutcome]) -> Result<Vec<PathBuf>, CliError> {
    let Some(g) = outcomes.first().and_then(|o| o.points.first()).map(|p| p.mse.len()) else {
        return Err(CliError::Other("sweep produced no points".into()));
    };

    let (mut w, points_path) = writer(dir, "points.csv")?;
    w.write_record(
        std::iter::once("params".to_string())
            .chain(indexed("mse", g))
            .chain(indexed("stderr", g)),
    )?;
    for p in outcomes.iter().flat_map(|o| &o.points) {
        w.write_record(std::iter::once(p.params()).chain(point_fields(p)))?;
    }
    let points_path = finish(w, points_path)?;

    let (mut w, frontier_path) = writer(dir, "frontier.csv")?;
    w.write_record(
        ["grid", "params"]
            .map(String::from)
            .into_iter()
            .chain(indexed("mse", g))
            .chain(indexed("stderr", g))
            .chain(std::iter::once("on_hull".to_string())),
    )?;
    for o in outcomes {
        for p in &o.frontier.points {
            w.write_record(
                [o.name.clone(), p.params()]
                    .into_iter()
                    .chain(point_fields(p))
                    .chain(std::iter::once(o.frontier.on_hull(p).to_string())),
            )?;
        }
    }
    let frontier_path = finish(w, frontier_path)?;

    let (mut w, weighted_path) = writer(dir, "weighted.csv")?;
    w.write_record(
        std::iter::once("grid".to_string())
            .chain(indexed("alpha", g))
            .chain(["params".to_string(), "objective".to_string()])
            .chain(indexed("mse", g)),
    )?;
    for o in outcomes {
        for (alpha, best) in &o.weighted {
            let tail: Vec<String> = match best {
                Some(p) => [p.params(), num(p.objective(alpha))]
                    .into_iter()
                    .chain(p.mse.iter().map(|x| num(*x)))
                    .collect(),
                None => [String::new(), num(f64::INFINITY)]
                    .into_iter()
                    .chain((0..g).map(|_| num(f64::INFINITY)))
                    .collect(),
            };
            w.write_record(
                std::iter::once(o.name.clone())
                    .chain(alpha.iter().map(|a| num(*a)))
                    .chain(tail),
            )?;
        }
    }
    let weighted_path = finish(w, weighted_path)?;
    Ok(vec![points_path, frontier_path, weighted_path])
}
