//! Slotted ALOHA with independent per-sensor strategies and collision
//! detection.

use alloc::vec::Vec;

use rand::Rng;

use super::{check_sensor_count, Ledger, SimError, SimulationConfig, SimulationResult, Transmission};
use crate::stream_rng;
use crate::strategies::{aloha_next_time, AlohaPolicy, AlohaState, Outcome};

/// Relative slack when comparing a start time against the end of another
/// transmission, so that adjacent slots never register as overlapping.
const OVERLAP_TOL: f64 = 1e-9;

pub fn simulate_aloha(
    config: &SimulationConfig,
    policy: &AlohaPolicy,
) -> Result<SimulationResult, SimError> {
    run(config, policy, None)
}

/// Like [`simulate_aloha`], also returning every transmission.
pub fn simulate_aloha_traced(
    config: &SimulationConfig,
    policy: &AlohaPolicy,
) -> Result<(SimulationResult, Vec<Transmission>), SimError> {
    let mut trace = Vec::new();
    let result = run(config, policy, Some(&mut trace))?;
    Ok((result, trace))
}

fn run(
    config: &SimulationConfig,
    policy: &AlohaPolicy,
    mut trace: Option<&mut Vec<Transmission>>,
) -> Result<SimulationResult, SimError> {
    config.validate()?;
    policy.validate()?;
    check_sensor_count(config, policy.num_sensors())?;

    let delta = config.delta.mean();
    let sensors = config.systems.len();
    let mut ledger = Ledger::new(config)?;
    let mut state = AlohaState::new(policy, config.seed);
    let mut noise = stream_rng(config.seed, 0);
    let mut next: Vec<f64> = (0..sensors)
        .map(|g| aloha_next_time(policy, g, &mut state, delta, None))
        .collect();
    // Whether the previous transmission was free of later starts overlapping it.
    let mut clear_before = true;
    let mut end = 0.0;

    for k in 0..config.num_packets {
        let mut g = 0;
        for (i, &t) in next.iter().enumerate().skip(1) {
            if t < next[g] {
                g = i;
            }
        }
        let start = next[g];
        let duration = delta;
        let limit = start + duration * (1.0 - OVERLAP_TOL);
        let clear = next
            .iter()
            .enumerate()
            .all(|(i, &t)| i == g || t >= limit);
        let noise_ok = noise.random::<f64>() < 1.0 - config.epsilon;
        let success = clear && clear_before && noise_ok;
        if success {
            ledger.deliver(g, start, duration)?;
        } else {
            ledger.fail(g);
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(Transmission {
                sensor: g,
                start,
                duration,
                success,
            });
        }
        clear_before = clear;
        let outcome = if success { Outcome::Success } else { Outcome::Failure };
        next[g] = aloha_next_time(policy, g, &mut state, delta, Some(outcome));
        end = start + duration;
        ledger.after_packet(k + 1, end)?;
    }
    ledger.finish(config, end)
}
