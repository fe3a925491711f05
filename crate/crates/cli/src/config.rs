//! Experiment and grid files (TOML).
//!
//! An experiment file looks like
//!
//! ```toml
//! delta = 1.0
//! epsilon = 0.05
//! num_packets = 20000
//! seeds = [1, 2, 3, 4, 5]
//! policy = "max-trials:[1,inf]"
//! weights = [[0.1, 0.9], [0.5, 0.5]]
//! output = "out/stable"
//!
//! [[systems]]
//! drift = [[-0.02, 0.0], [0.0, -0.03]]
//! diffusion = [[0.7, 0.2], [0.2, 0.6]]
//! ```
//!
//! Matrices are lists of rows. `policy`, `weights`, `output` and
//! `warmup_fraction` are optional.

use std::fs;
use std::path::{Path, PathBuf};

use semsched_core::sim::SimulationConfig;
use semsched_core::sweep::{GridAxes, ParameterGrid, DEFAULT_MAX_POINTS};
use semsched_core::{LinearSystem, Policy, TrialLimit};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub drift: Vec<Vec<f64>>,
    pub diffusion: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub delta: f64,
    pub epsilon: f64,
    pub num_packets: u64,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weights: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub warmup_fraction: f64,
    pub systems: Vec<SystemSpec>,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

fn flatten(name: &str, m: &[Vec<f64>]) -> Result<(usize, Vec<f64>), String> {
    let n = m.len();
    if n == 0 || m.iter().any(|r| r.len() != n) {
        return Err(format!("{name} must be a non-empty square list of rows"));
    }
    Ok((n, m.concat()))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn check(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.systems.is_empty() {
            return bad("at least one system is required");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad("delta must be positive and finite");
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1)");
        }
        if self.num_packets == 0 {
            return bad("num_packets must be at least 1");
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return bad("warmup_fraction must lie in [0, 1)");
        }
        let g = self.systems.len();
        for (i, w) in self.weights.iter().enumerate() {
            let sum: f64 = w.iter().sum();
            if w.len() != g || w.iter().any(|x| !(*x >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(CliError::Config(format!(
                    "weights row {} must have {g} non-negative entries summing to 1",
                    i + 1
                )));
            }
        }
        if let Some(p) = &self.policy {
            parse_policy(p)?;
        }
        Ok(())
    }

    /// Validated systems. Structural problems (shape, symmetry) are config
    /// errors; spectral ones surface later as numerical errors.
    pub fn systems(&self) -> Result<Vec<LinearSystem>, CliError> {
        self.systems
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let ctx = |m: String| CliError::Config(format!("system {}: {m}", i + 1));
                let (n, a) = flatten("drift", &s.drift).map_err(ctx)?;
                let (m, d) = flatten("diffusion", &s.diffusion).map_err(ctx)?;
                if m != n {
                    return Err(ctx(format!("diffusion is {m}x{m} but drift is {n}x{n}")));
                }
                LinearSystem::from_rows(n, &a, &d).map_err(|e| ctx(e.to_string()))
            })
            .collect()
    }

    pub fn simulation(&self, seed: u64) -> Result<SimulationConfig, CliError> {
        let mut cfg = SimulationConfig::new(self.systems()?, self.delta, self.epsilon, self.num_packets, seed);
        cfg.warmup_fraction = self.warmup_fraction;
        Ok(cfg)
    }

    pub fn policy(&self) -> Result<Option<Policy>, CliError> {
        self.policy.as_deref().map(parse_policy).transpose()
    }
}

pub fn parse_policy(spec: &str) -> Result<Policy, CliError> {
    spec.parse::<Policy>()
        .map_err(|e| CliError::Config(format!("policy `{spec}`: {e}")))
}

/// One `P_g` grid value: a positive integer or `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrialValue {
    Count(u32),
    Text(String),
}

impl TrialValue {
    fn limit(&self) -> Result<TrialLimit, CliError> {
        match self {
            TrialValue::Count(n) => Ok(TrialLimit::Limited(*n)),
            TrialValue::Text(s) => s
                .parse()
                .map_err(|_| CliError::Config(format!("bad trial limit `{s}`"))),
        }
    }
}

/// One named grid section. Exactly the lists of its family must be given,
/// one list of candidate values per sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub name: Option<String>,
    pub family: String,
    #[serde(default)]
    pub trials: Vec<Vec<TrialValue>>,
    #[serde(default)]
    pub quota: Vec<Vec<u32>>,
    #[serde(default)]
    pub cap: Vec<Vec<f64>>,
    #[serde(default)]
    pub threshold: Vec<Vec<f64>>,
}

/// A grid file: one or more `[[grid]]` sections and an optional tuple cap.
///
/// ```toml
/// max_points = 10000
///
/// [[grid]]
/// family = "max-trials"
/// trials = [[1, 2, "inf"], [1, 2, "inf"]]
///
/// [[grid]]
/// family = "threshold-adra"
/// cap = [[0.5, 1.0], [0.5, 1.0]]
/// threshold = [[0, 5], [0, 5]]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub max_points: Option<usize>,
    pub grid: Vec<GridSpec>,
}

impl GridFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let f: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if f.grid.is_empty() {
            return Err(CliError::Config("grid file has no [[grid]] sections".into()));
        }
        Ok(f)
    }

    /// `(name, grid)` pairs, seeded from the experiment.
    pub fn grids(&self, seeds: &[u64]) -> Result<Vec<(String, ParameterGrid)>, CliError> {
        self.grid
            .iter()
            .map(|spec| {
                let axes = spec.axes()?;
                let mut grid = ParameterGrid::new(axes, seeds.to_vec());
                grid.max_points = self.max_points.unwrap_or(DEFAULT_MAX_POINTS);
                let name = spec.name.clone().unwrap_or_else(|| spec.family.clone());
                Ok((name, grid))
            })
            .collect()
    }
}

impl GridSpec {
    fn axes(&self) -> Result<GridAxes, CliError> {
        let given = [
            ("trials", !self.trials.is_empty()),
            ("quota", !self.quota.is_empty()),
            ("cap", !self.cap.is_empty()),
            ("threshold", !self.threshold.is_empty()),
        ];
        let wanted: &[&str] = match self.family.as_str() {
            "max-trials" => &["trials"],
            "multiple-success" => &["quota"],
            "individual-cap" => &["cap"],
            "threshold-adra" => &["cap", "threshold"],
            other => return Err(CliError::Config(format!("unknown grid family `{other}`"))),
        };
        for (key, present) in given {
            if present != wanted.contains(&key) {
                let verb = if present { "does not take" } else { "needs" };
                return Err(CliError::Config(format!("{} grid {verb} `{key}`", self.family)));
            }
        }
        Ok(match self.family.as_str() {
            "max-trials" => GridAxes::MaxTrials(
                self.trials
                    .iter()
                    .map(|v| v.iter().map(TrialValue::limit).collect())
                    .collect::<Result<_, _>>()?,
            ),
            "multiple-success" => GridAxes::MultipleSuccess(self.quota.clone()),
            "individual-cap" => GridAxes::IndividualCap(self.cap.clone()),
            _ => GridAxes::ThresholdAdra {
                cap: self.cap.clone(),
                threshold: self.threshold.clone(),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
delta = 1.0
epsilon = 0.05
num_packets = 100
seeds = [3]

[[systems]]
drift = [[-0.5]]
diffusion = [[1.0]]
"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.systems().unwrap().len(), 1);
        assert!(cfg.policy().unwrap().is_none());
        assert_eq!(ExperimentConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn bad_weights_are_rejected() {
        let text = MINIMAL.replace("seeds = [3]", "seeds = [3]\nweights = [[0.4]]");
        assert!(matches!(ExperimentConfig::parse(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("seeds = [3]", "seeds = [3]\nsed = 4");
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn ragged_matrix_is_a_config_error() {
        let text = MINIMAL.replace("[[-0.5]]", "[[-0.5, 0.0]]");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        assert!(matches!(cfg.systems(), Err(CliError::Config(_))));
    }

    #[test]
    fn grid_sections() {
        let f = GridFile::parse(
            r#"
max_points = 50
[[grid]]
family = "max-trials"
trials = [[1, "inf"], [2]]
[[grid]]
name = "adra"
family = "threshold-adra"
cap = [[0.5], [1.0]]
threshold = [[0, 2.5], [0]]
"#,
        )
        .unwrap();
        let grids = f.grids(&[1, 2]).unwrap();
        assert_eq!(grids[0].0, "max-trials");
        assert_eq!(grids[1].0, "adra");
        assert_eq!(grids[0].1.max_points, 50);
        let ps: Vec<String> = grids[0].1.policies().unwrap().iter().map(|p| p.to_string()).collect();
        assert_eq!(ps, ["max-trials:[1,2]", "max-trials:[inf,2]"]);
        assert_eq!(grids[1].1.size(), 2);
    }

    #[test]
    fn grid_family_keys_must_match() {
        let f = GridFile::parse("[[grid]]\nfamily = \"individual-cap\"\nquota = [[1]]\n").unwrap();
        assert!(f.grids(&[1]).is_err());
    }
}
