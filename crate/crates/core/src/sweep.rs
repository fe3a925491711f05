//! Parameter sweeps and the geometry of achievable MSE vectors.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use thiserror::Error;

use crate::sim::{simulate, SimError, SimulationConfig};
use crate::strategies::{AlohaPolicy, CoordinatedPolicy, Policy, TrialLimit};

pub const DEFAULT_MAX_POINTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("grid has {points} parameter tuples, more than the cap of {cap}")]
    GridTooLarge { points: usize, cap: usize },
    #[error("grid is empty: {0}")]
    EmptyGrid(&'static str),
    #[error("no points given")]
    NoPoints,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("time-sharing hull needs exactly two sensors, got {0}")]
    DimensionUnsupported(usize),
    #[error("every point has an infinite MSE")]
    AllInfinite,
    #[error("weights must be non-negative, one per sensor, and sum to 1")]
    InvalidWeights,
}

/// Candidate values of each parameter, one list per sensor.
#[derive(Debug, Clone, PartialEq)]
pub enum GridAxes {
    MaxTrials(Vec<Vec<TrialLimit>>),
    MultipleSuccess(Vec<Vec<u32>>),
    IndividualCap(Vec<Vec<f64>>),
    ThresholdAdra {
        cap: Vec<Vec<f64>>,
        threshold: Vec<Vec<f64>>,
    },
}

impl GridAxes {
    pub fn num_sensors(&self) -> usize {
        match self {
            GridAxes::MaxTrials(v) => v.len(),
            GridAxes::MultipleSuccess(v) => v.len(),
            GridAxes::IndividualCap(v) => v.len(),
            GridAxes::ThresholdAdra { cap, .. } => cap.len(),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            GridAxes::MaxTrials(_) => "max-trials",
            GridAxes::MultipleSuccess(_) => "multiple-success",
            GridAxes::IndividualCap(_) => "individual-cap",
            GridAxes::ThresholdAdra { .. } => "threshold-adra",
        }
    }

    fn lengths(&self) -> Vec<usize> {
        match self {
            GridAxes::MaxTrials(v) => v.iter().map(Vec::len).collect(),
            GridAxes::MultipleSuccess(v) => v.iter().map(Vec::len).collect(),
            GridAxes::IndividualCap(v) => v.iter().map(Vec::len).collect(),
            GridAxes::ThresholdAdra { cap, threshold } => {
                cap.iter().chain(threshold).map(Vec::len).collect()
            }
        }
    }

    /// Policy for one mixed-radix index (one entry per axis).
    fn policy_at(&self, idx: &[usize]) -> Policy {
        match self {
            GridAxes::MaxTrials(v) => Policy::Coordinated(CoordinatedPolicy::MaxTrials(
                v.iter().zip(idx).map(|(a, &i)| a[i]).collect(),
            )),
            GridAxes::MultipleSuccess(v) => Policy::Coordinated(CoordinatedPolicy::MultipleSuccess(
                v.iter().zip(idx).map(|(a, &i)| a[i]).collect(),
            )),
            GridAxes::IndividualCap(v) => Policy::Aloha(AlohaPolicy::IndividualCap {
                cap: v.iter().zip(idx).map(|(a, &i)| a[i]).collect(),
            }),
            GridAxes::ThresholdAdra { cap, threshold } => {
                let g = cap.len();
                Policy::Aloha(AlohaPolicy::ThresholdAdra {
                    cap: cap.iter().zip(&idx[..g]).map(|(a, &i)| a[i]).collect(),
                    threshold: threshold.iter().zip(&idx[g..]).map(|(a, &i)| a[i]).collect(),
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGrid {
    pub axes: GridAxes,
    pub seeds: Vec<u64>,
    pub max_points: usize,
}

impl ParameterGrid {
    pub fn new(axes: GridAxes, seeds: Vec<u64>) -> Self {
        Self {
            axes,
            seeds,
            max_points: DEFAULT_MAX_POINTS,
        }
    }

    /// Number of parameter tuples (seeds not counted).
    pub fn size(&self) -> usize {
        self.axes
            .lengths()
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .unwrap_or(usize::MAX)
    }

    /// Every parameter tuple in odometer order (last axis fastest).
    pub fn policies(&self) -> Result<Vec<Policy>, SweepError> {
        if self.seeds.is_empty() {
            return Err(SweepError::EmptyGrid("no seeds"));
        }
        if let GridAxes::ThresholdAdra { cap, threshold } = &self.axes {
            if cap.len() != threshold.len() {
                return Err(SweepError::EmptyGrid("threshold axes do not match the sensors"));
            }
        }
        let lengths = self.axes.lengths();
        if lengths.is_empty() || lengths.contains(&0) {
            return Err(SweepError::EmptyGrid("an axis has no values"));
        }
        let size = self.size();
        if size > self.max_points {
            return Err(SweepError::GridTooLarge {
                points: size,
                cap: self.max_points,
            });
        }
        let mut idx = alloc::vec![0usize; lengths.len()];
        let mut out = Vec::with_capacity(size);
        for _ in 0..size {
            let p = self.axes.policy_at(&idx);
            p.validate().map_err(SimError::from)?;
            out.push(p);
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < lengths[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(out)
    }
}

/// MSE vector of one policy, averaged over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct AchievablePoint {
    pub policy: Policy,
    pub mse: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Some sensor's MSE is unbounded (overflow or starvation).
    pub infinite: bool,
}

impl AchievablePoint {
    pub fn params(&self) -> String {
        self.policy.to_string()
    }

    /// `sum_g alpha_g MSE_g`, with zero weights ignoring their coordinate.
    pub fn objective(&self, alpha: &[f64]) -> f64 {
        self.mse
            .iter()
            .zip(alpha)
            .filter(|(_, &a)| a != 0.0)
            .map(|(m, a)| m * a)
            .sum()
    }
}

/// Runs `policy` once per seed and averages. The standard error is the
/// spread across seeds, or the run's own batch estimate for a single seed.
pub fn evaluate_policy(
    config: &SimulationConfig,
    policy: &Policy,
    seeds: &[u64],
) -> Result<AchievablePoint, SweepError> {
    if seeds.is_empty() {
        return Err(SweepError::EmptyGrid("no seeds"));
    }
    let runs = seeds
        .iter()
        .map(|&s| simulate(&config.with_seed(s), policy))
        .collect::<Result<Vec<_>, _>>()?;
    let g_count = config.systems.len();
    let n = runs.len() as f64;
    let mut mse = Vec::with_capacity(g_count);
    let mut stderr = Vec::with_capacity(g_count);
    for g in 0..g_count {
        let values: Vec<f64> = runs.iter().map(|r| r.mse[g]).collect();
        if values.iter().any(|v| !v.is_finite()) {
            mse.push(f64::INFINITY);
            stderr.push(f64::INFINITY);
            continue;
        }
        let mean = values.iter().sum::<f64>() / n;
        mse.push(mean);
        if runs.len() == 1 {
            stderr.push(runs[0].stderr[g]);
        } else {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            stderr.push(libm::sqrt(var / n));
        }
    }
    let infinite = mse.iter().any(|m| !m.is_finite());
    Ok(AchievablePoint {
        policy: policy.clone(),
        mse,
        stderr,
        infinite,
    })
}

/// Evaluates every tuple of the grid, in grid order.
pub fn evaluate_grid(
    grid: &ParameterGrid,
    config: &SimulationConfig,
) -> Result<Vec<AchievablePoint>, SweepError> {
    grid.policies()?
        .iter()
        .map(|p| evaluate_policy(config, p, &grid.seeds))
        .collect()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            ord => return ord,
        }
    }
    a.len().cmp(&b.len())
}

/// `a <= b` in every coordinate.
fn weakly_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

/// Pareto-minimal points in lexicographic MSE order. Of several identical
/// MSE vectors only the first (in input order) is kept.
pub fn pareto_filter(points: &[AchievablePoint]) -> Vec<AchievablePoint> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| lex_cmp(&points[i].mse, &points[j].mse));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        // Any point weakly dominating `i` sorts no later than it.
        if !kept
            .iter()
            .any(|&k| weakly_dominates(&points[k].mse, &points[i].mse))
        {
            kept.push(i);
        }
    }
    kept.into_iter().map(|i| points[i].clone()).collect()
}

/// Vertices of the lower-left convex hull of finite two-sensor points, in
/// increasing `MSE_1`. Collinear boundary points are kept.
pub fn time_sharing_hull(points: &[AchievablePoint]) -> Result<Vec<AchievablePoint>, SweepError> {
    if points.is_empty() {
        return Err(SweepError::NoPoints);
    }
    if let Some(p) = points.iter().find(|p| p.mse.len() != 2) {
        return Err(SweepError::DimensionUnsupported(p.mse.len()));
    }
    let finite: Vec<AchievablePoint> = points
        .iter()
        .filter(|p| p.mse.iter().all(|m| m.is_finite()))
        .cloned()
        .collect();
    let pareto = pareto_filter(&finite);
    let mut hull: Vec<AchievablePoint> = Vec::new();
    for p in pareto {
        while hull.len() >= 2 {
            let o = &hull[hull.len() - 2].mse;
            let a = &hull[hull.len() - 1].mse;
            let b = &p.mse;
            let (ax, ay) = (a[0] - o[0], a[1] - o[1]);
            let (bx, by) = (b[0] - o[0], b[1] - o[1]);
            let cross = ax * by - ay * bx;
            let tol = 1e-12 * libm::hypot(ax, ay) * libm::hypot(bx, by);
            if cross < -tol {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    Ok(hull)
}

fn valid_weights(alpha: &[f64], sensors: usize) -> bool {
    alpha.len() == sensors
        && alpha.iter().all(|&a| a >= 0.0 && a.is_finite())
        && (alpha.iter().sum::<f64>() - 1.0).abs() <= 1e-9
}

/// Point minimizing the weighted MSE. Ties go to the lexicographically
/// smaller MSE vector, then to the smaller parameter string. Points flagged
/// infinite are skipped.
pub fn weighted_best<'a>(
    points: &'a [AchievablePoint],
    alpha: &[f64],
) -> Result<&'a AchievablePoint, SweepError> {
    let first = points.first().ok_or(SweepError::NoPoints)?;
    if !valid_weights(alpha, first.mse.len()) {
        return Err(SweepError::InvalidWeights);
    }
    let mut best: Option<(&AchievablePoint, f64)> = None;
    for p in points.iter().filter(|p| !p.infinite) {
        let v = p.objective(alpha);
        let better = match best {
            None => true,
            Some((b, bv)) => match v.total_cmp(&bv) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => match lex_cmp(&p.mse, &b.mse) {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => p.params() < b.params(),
                },
            },
        };
        if better {
            best = Some((p, v));
        }
    }
    best.map(|(p, _)| p).ok_or(SweepError::AllInfinite)
}

/// Pareto points and, for two sensors, the time-sharing hull.
#[derive(Debug, Clone, PartialEq)]
pub struct Frontier {
    pub points: Vec<AchievablePoint>,
    pub hull: Option<Vec<AchievablePoint>>,
}

impl Frontier {
    pub fn build(points: &[AchievablePoint]) -> Result<Self, SweepError> {
        if points.is_empty() {
            return Err(SweepError::NoPoints);
        }
        let pareto = pareto_filter(points);
        let hull = if points[0].mse.len() == 2 {
            Some(time_sharing_hull(points)?)
        } else {
            None
        };
        Ok(Self {
            points: pareto,
            hull,
        })
    }

    pub fn on_hull(&self, point: &AchievablePoint) -> bool {
        self.hull
            .as_ref()
            .is_some_and(|h| h.iter().any(|v| v.mse == point.mse && v.policy == point.policy))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pt(m: &[f64]) -> AchievablePoint {
        AchievablePoint {
            policy: Policy::Coordinated(CoordinatedPolicy::round_robin(m.len())),
            mse: m.to_vec(),
            stderr: vec![0.0; m.len()],
            infinite: m.iter().any(|x| !x.is_finite()),
        }
    }

    fn mses(ps: &[AchievablePoint]) -> Vec<Vec<f64>> {
        ps.iter().map(|p| p.mse.clone()).collect()
    }

    #[test]
    fn pareto_examples() {
        let f = pareto_filter(&[pt(&[1.0, 2.0]), pt(&[2.0, 1.0]), pt(&[2.0, 2.0])]);
        assert_eq!(mses(&f), vec![vec![1.0, 2.0], vec![2.0, 1.0]]);
        let f = pareto_filter(&[pt(&[1.0, 1.0]), pt(&[1.0, 1.0])]);
        assert_eq!(f.len(), 1);
    }

    #[test]
    fn hull_examples() {
        let h = time_sharing_hull(&[pt(&[1.0, 3.0]), pt(&[2.0, 2.0]), pt(&[3.0, 1.0])]).unwrap();
        assert_eq!(h.len(), 3);
        let h = time_sharing_hull(&[pt(&[1.0, 3.0]), pt(&[3.0, 1.0]), pt(&[2.9, 2.9])]).unwrap();
        assert_eq!(mses(&h), vec![vec![1.0, 3.0], vec![3.0, 1.0]]);
        assert_eq!(
            time_sharing_hull(&[pt(&[1.0, 2.0, 3.0])]),
            Err(SweepError::DimensionUnsupported(3))
        );
    }

    #[test]
    fn weighted_examples() {
        let ps = [pt(&[1.0, 3.0]), pt(&[3.0, 1.0]), pt(&[2.9, 2.9])];
        assert_eq!(weighted_best(&ps, &[1.0, 0.0]).unwrap().mse, vec![1.0, 3.0]);
        assert_eq!(weighted_best(&ps, &[0.5, 0.5]).unwrap().mse, vec![1.0, 3.0]);
        assert_eq!(weighted_best(&ps, &[0.0, 1.0]).unwrap().mse, vec![3.0, 1.0]);
        assert_eq!(weighted_best(&ps, &[0.5, 0.6]), Err(SweepError::InvalidWeights));
        let inf = [pt(&[f64::INFINITY, 1.0])];
        assert_eq!(weighted_best(&inf, &[0.5, 0.5]), Err(SweepError::AllInfinite));
    }

    #[test]
    fn grid_enumeration_order_and_cap() {
        let mut grid = ParameterGrid::new(
            GridAxes::MultipleSuccess(vec![vec![1, 2], vec![1, 2, 3]]),
            vec![1],
        );
        let ps: Vec<String> = grid.policies().unwrap().iter().map(|p| p.to_string()).collect();
        assert_eq!(ps.len(), 6);
        assert_eq!(ps[0], "multiple-success:[1,1]");
        assert_eq!(ps[1], "multiple-success:[1,2]");
        assert_eq!(ps[5], "multiple-success:[2,3]");
        grid.max_points = 5;
        assert_eq!(
            grid.policies(),
            Err(SweepError::GridTooLarge { points: 6, cap: 5 })
        );
    }

    #[test]
    fn adra_grid_splits_axes() {
        let grid = ParameterGrid::new(
            GridAxes::ThresholdAdra {
                cap: vec![vec![0.5], vec![0.25, 1.0]],
                threshold: vec![vec![0.0, 2.0], vec![5.0]],
            },
            vec![1],
        );
        let ps: Vec<String> = grid.policies().unwrap().iter().map(|p| p.to_string()).collect();
        assert_eq!(
            ps,
            vec![
                "threshold-adra:[0.5,0.25]:[0,5]",
                "threshold-adra:[0.5,0.25]:[2,5]",
                "threshold-adra:[0.5,1]:[0,5]",
                "threshold-adra:[0.5,1]:[2,5]",
            ]
        );
    }
}
