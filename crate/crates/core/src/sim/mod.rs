//! Seeded packet-level simulators.
//!
//! Both event loops integrate the packet-integrated MSE between consecutive
//! deliveries of each sensor and divide by the elapsed time. Channel noise
//! draws come from stream 0 of the master seed; ALOHA sensors use streams
//! `1..=G` (see [`crate::strategies::AlohaState`]).
//!
//! The run ends when the last simulated transmission ends; every sensor's
//! final estimate is integrated up to that instant.

mod aloha;
mod coordinated;

use alloc::vec::Vec;

use thiserror::Error;

use crate::gauss_markov::{GaussMarkovModel, LinearSystem, ModelError};
use crate::strategies::{Policy, PolicyError};

pub use aloha::{simulate_aloha, simulate_aloha_traced};
pub use coordinated::{simulate_coordinated, simulate_coordinated_traced};

/// Number of batches used for the batch-means standard error.
const BATCHES: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("sensor {sensor}: {source}")]
    Model { sensor: usize, source: ModelError },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("{systems} systems but the policy is for {policy} sensors")]
    SensorCountMismatch { systems: usize, policy: usize },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(&'static str),
    #[error("simulated time span is zero")]
    ZeroDuration,
}

/// Transmission duration model.
#[derive(Debug, Clone, Copy, PartialEq)]
#[non_exhaustive]
pub enum DeltaModel {
    Constant(f64),
}

impl DeltaModel {
    pub fn mean(&self) -> f64 {
        match *self {
            DeltaModel::Constant(d) => d,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub systems: Vec<LinearSystem>,
    pub delta: DeltaModel,
    pub epsilon: f64,
    pub num_packets: u64,
    pub seed: u64,
    /// Leading fraction of packets whose time span is excluded from the
    /// averages.
    pub warmup_fraction: f64,
}

impl SimulationConfig {
    pub fn new(
        systems: Vec<LinearSystem>,
        delta: f64,
        epsilon: f64,
        num_packets: u64,
        seed: u64,
    ) -> Self {
        Self {
            systems,
            delta: DeltaModel::Constant(delta),
            epsilon,
            num_packets,
            seed,
            warmup_fraction: 0.0,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.systems.is_empty() {
            return Err(SimError::InvalidConfig("no systems"));
        }
        if self.num_packets == 0 {
            return Err(SimError::InvalidConfig("num_packets must be at least 1"));
        }
        if !(self.epsilon >= 0.0 && self.epsilon < 1.0) {
            return Err(SimError::InvalidConfig("epsilon must lie in [0, 1)"));
        }
        let DeltaModel::Constant(d) = self.delta;
        if !(d > 0.0 && d.is_finite()) {
            return Err(SimError::InvalidConfig("delta must be positive and finite"));
        }
        if !(self.warmup_fraction >= 0.0 && self.warmup_fraction < 1.0) {
            return Err(SimError::InvalidConfig("warmup_fraction must lie in [0, 1)"));
        }
        Ok(())
    }

    fn models(&self) -> Result<Vec<GaussMarkovModel>, SimError> {
        self.systems
            .iter()
            .enumerate()
            .map(|(sensor, s)| {
                GaussMarkovModel::new(s.clone()).map_err(|source| SimError::Model { sensor, source })
            })
            .collect()
    }
}

/// Per-sensor averages of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub mse: Vec<f64>,
    pub aoi_mean: Vec<f64>,
    /// Batch-means standard error of `mse` (NaN with fewer than two batches).
    pub stderr: Vec<f64>,
    pub total_time: f64,
    pub integrated_loss: Vec<f64>,
    pub successes: Vec<u64>,
    pub failures: Vec<u64>,
}

impl SimulationResult {
    pub fn num_sensors(&self) -> usize {
        self.mse.len()
    }
}

/// One channel use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmission {
    pub sensor: usize,
    pub start: f64,
    pub duration: f64,
    pub success: bool,
}

/// A successfully received sample: generated when its transmission started,
/// usable from the end of the transmission on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delivery {
    pub sensor: usize,
    pub generation_time: f64,
    pub delivery_time: f64,
}

/// Successful transmissions of a trace, in order.
pub fn deliveries(trace: &[Transmission]) -> Vec<Delivery> {
    trace
        .iter()
        .filter(|t| t.success)
        .map(|t| Delivery {
            sensor: t.sensor,
            generation_time: t.start,
            delivery_time: t.start + t.duration,
        })
        .collect()
}

/// Dispatch on the policy family.
pub fn simulate(config: &SimulationConfig, policy: &Policy) -> Result<SimulationResult, SimError> {
    match policy {
        Policy::Coordinated(p) => simulate_coordinated(config, p),
        Policy::Aloha(p) => simulate_aloha(config, p),
    }
}

pub fn simulate_traced(
    config: &SimulationConfig,
    policy: &Policy,
) -> Result<(SimulationResult, Vec<Transmission>), SimError> {
    match policy {
        Policy::Coordinated(p) => simulate_coordinated_traced(config, p),
        Policy::Aloha(p) => simulate_aloha_traced(config, p),
    }
}

fn check_sensor_count(config: &SimulationConfig, policy_sensors: usize) -> Result<(), SimError> {
    if config.systems.len() != policy_sensors {
        return Err(SimError::SensorCountMismatch {
            systems: config.systems.len(),
            policy: policy_sensors,
        });
    }
    Ok(())
}

/// Cumulative integrals at an instant, including the still-open interval of
/// each sensor's current estimate.
#[derive(Debug, Clone)]
struct Snapshot {
    time: f64,
    loss: Vec<f64>,
    aoi: Vec<f64>,
}

/// Per-sensor integration state shared by both event loops.
struct Ledger {
    models: Vec<GaussMarkovModel>,
    /// Start of the latest successful transmission (generation time).
    last_tx: Vec<f64>,
    /// Duration of the latest successful transmission.
    stored_delay: Vec<f64>,
    loss: Vec<f64>,
    aoi: Vec<f64>,
    successes: Vec<u64>,
    failures: Vec<u64>,
    snapshots: Vec<Snapshot>,
    marks: Vec<u64>,
    next_mark: usize,
    delta: f64,
    /// `L(delta, m * delta)` by sensor and `m`, NaN until first use.
    cache: Vec<Vec<f64>>,
}

const CACHE_SLOTS: usize = 1 << 12;

impl Ledger {
    fn new(config: &SimulationConfig) -> Result<Self, SimError> {
        let models = config.models()?;
        let g = models.len();
        let k = config.num_packets;
        let warm = libm::floor(config.warmup_fraction * k as f64) as u64;
        let batches = (k - warm).min(BATCHES as u64);
        // Snapshot after these packet counts; the last batch closes at the end.
        let mut marks = Vec::new();
        if warm > 0 {
            marks.push(warm);
        }
        for i in 1..batches {
            marks.push(warm + (k - warm) * i / batches);
        }
        Ok(Self {
            models,
            last_tx: alloc::vec![0.0; g],
            stored_delay: alloc::vec![0.0; g],
            loss: alloc::vec![0.0; g],
            aoi: alloc::vec![0.0; g],
            successes: alloc::vec![0; g],
            failures: alloc::vec![0; g],
            snapshots: Vec::new(),
            marks,
            next_mark: 0,
            delta: config.delta.mean(),
            cache: alloc::vec![alloc::vec![f64::NAN; CACHE_SLOTS]; g],
        })
    }

    fn integrate(&self, g: usize, now: f64) -> Result<(f64, f64), SimError> {
        let lo = self.stored_delay[g];
        let hi = now - self.last_tx[g];
        let l = self.models[g]
            .packet_integrated_mse(lo, hi)
            .map_err(|source| SimError::Model { sensor: g, source })?;
        Ok((l, 0.5 * (hi * hi - lo * lo)))
    }

    /// [`Self::integrate`] with memoized slot-aligned intervals.
    fn integrate_cached(&mut self, g: usize, now: f64) -> Result<(f64, f64), SimError> {
        let lo = self.stored_delay[g];
        let hi = now - self.last_tx[g];
        let m = libm::round(hi / self.delta);
        if lo == self.delta && m >= 1.0 && m < CACHE_SLOTS as f64 && hi == m * self.delta {
            let slot = &mut self.cache[g][m as usize];
            if slot.is_nan() {
                *slot = self.models[g]
                    .packet_integrated_mse(lo, hi)
                    .map_err(|source| SimError::Model { sensor: g, source })?;
            }
            return Ok((*slot, 0.5 * (hi * hi - lo * lo)));
        }
        self.integrate(g, now)
    }

    fn deliver(&mut self, g: usize, start: f64, duration: f64) -> Result<(), SimError> {
        let (l, a) = self.integrate_cached(g, start + duration)?;
        self.loss[g] += l;
        self.aoi[g] += a;
        self.last_tx[g] = start;
        self.stored_delay[g] = duration;
        self.successes[g] += 1;
        Ok(())
    }

    fn fail(&mut self, g: usize) {
        self.failures[g] += 1;
    }

    fn snapshot(&self, now: f64) -> Result<Snapshot, SimError> {
        let mut loss = self.loss.clone();
        let mut aoi = self.aoi.clone();
        for g in 0..self.models.len() {
            let (l, a) = self.integrate(g, now)?;
            loss[g] += l;
            aoi[g] += a;
        }
        Ok(Snapshot {
            time: now,
            loss,
            aoi,
        })
    }

    /// Call after `packets` transmissions, `now` being the end of the latest.
    fn after_packet(&mut self, packets: u64, now: f64) -> Result<(), SimError> {
        if self.marks.get(self.next_mark) == Some(&packets) {
            let s = self.snapshot(now)?;
            self.snapshots.push(s);
            self.next_mark += 1;
        }
        Ok(())
    }

    fn finish(self, config: &SimulationConfig, end: f64) -> Result<SimulationResult, SimError> {
        if !(end > 0.0) {
            return Err(SimError::ZeroDuration);
        }
        let g_count = self.models.len();
        let last = self.snapshot(end)?;
        let mut points = self.snapshots;
        let has_warmup = config.warmup_fraction > 0.0
            && libm::floor(config.warmup_fraction * config.num_packets as f64) > 0.0;
        let origin = if has_warmup {
            points.remove(0)
        } else {
            Snapshot {
                time: 0.0,
                loss: alloc::vec![0.0; g_count],
                aoi: alloc::vec![0.0; g_count],
            }
        };
        let span = last.time - origin.time;
        if !(span > 0.0) {
            return Err(SimError::ZeroDuration);
        }
        let integrated_loss: Vec<f64> = (0..g_count).map(|g| last.loss[g] - origin.loss[g]).collect();
        let mse: Vec<f64> = integrated_loss
            .iter()
            .map(|&l| if l.is_finite() { l / span } else { f64::INFINITY })
            .collect();
        let aoi_mean = (0..g_count).map(|g| (last.aoi[g] - origin.aoi[g]) / span).collect();

        let mut bounds = Vec::with_capacity(points.len() + 2);
        bounds.push(origin);
        bounds.extend(points);
        bounds.push(last);
        let stderr = (0..g_count)
            .map(|g| {
                if !mse[g].is_finite() {
                    return f64::INFINITY;
                }
                let means: Vec<f64> = bounds
                    .windows(2)
                    .map(|w| (w[1].loss[g] - w[0].loss[g]) / (w[1].time - w[0].time))
                    .collect();
                batch_stderr(&means)
            })
            .collect();

        Ok(SimulationResult {
            mse,
            aoi_mean,
            stderr,
            total_time: span,
            integrated_loss,
            successes: self.successes,
            failures: self.failures,
        })
    }
}

fn batch_stderr(means: &[f64]) -> f64 {
    let n = means.len();
    if n < 2 {
        return f64::NAN;
    }
    let mean = means.iter().sum::<f64>() / n as f64;
    let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (n - 1) as f64;
    libm::sqrt(var / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn config_validation() {
        let sys = LinearSystem::scalar(-0.5, 1.0).unwrap();
        let ok = SimulationConfig::new(vec![sys.clone()], 1.0, 0.05, 10, 1);
        assert!(ok.validate().is_ok());
        let mut bad = ok.clone();
        bad.epsilon = 1.0;
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.num_packets = 0;
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.delta = DeltaModel::Constant(0.0);
        assert!(bad.validate().is_err());
        let mut bad = ok;
        bad.systems.clear();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn deliveries_keep_successes_only() {
        let trace = [
            Transmission { sensor: 0, start: 0.0, duration: 1.0, success: false },
            Transmission { sensor: 1, start: 1.0, duration: 1.0, success: true },
        ];
        assert_eq!(
            deliveries(&trace),
            vec![Delivery { sensor: 1, generation_time: 1.0, delivery_time: 2.0 }]
        );
    }

    #[test]
    fn batch_stderr_of_constant_is_zero() {
        assert_eq!(batch_stderr(&[2.0; 5]), 0.0);
        assert!(batch_stderr(&[1.0]).is_nan());
    }
}
