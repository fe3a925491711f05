//! Centralized scheduling: back-to-back transmissions, losses only from
//! channel noise.

use alloc::vec::Vec;

use rand::Rng;

use super::{check_sensor_count, Ledger, SimError, SimulationConfig, SimulationResult, Transmission};
use crate::stream_rng;
use crate::strategies::{coordinated_next, CoordinatedPolicy, CoordinatedState, Outcome};

pub fn simulate_coordinated(
    config: &SimulationConfig,
    policy: &CoordinatedPolicy,
) -> Result<SimulationResult, SimError> {
    run(config, policy, None)
}

/// Like [`simulate_coordinated`], also returning every transmission.
pub fn simulate_coordinated_traced(
    config: &SimulationConfig,
    policy: &CoordinatedPolicy,
) -> Result<(SimulationResult, Vec<Transmission>), SimError> {
    let mut trace = Vec::new();
    let result = run(config, policy, Some(&mut trace))?;
    Ok((result, trace))
}

fn run(
    config: &SimulationConfig,
    policy: &CoordinatedPolicy,
    mut trace: Option<&mut Vec<Transmission>>,
) -> Result<SimulationResult, SimError> {
    config.validate()?;
    policy.validate()?;
    check_sensor_count(config, policy.num_sensors())?;

    let delta = config.delta.mean();
    let mut ledger = Ledger::new(config)?;
    let mut state = CoordinatedState::new(policy);
    let mut noise = stream_rng(config.seed, 0);
    let mut last = None;
    let mut end = 0.0;

    for k in 0..config.num_packets {
        let g = coordinated_next(policy, &mut state, last);
        let start = k as f64 * delta;
        let success = noise.random::<f64>() < 1.0 - config.epsilon;
        if success {
            ledger.deliver(g, start, delta)?;
        } else {
            ledger.fail(g);
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(Transmission {
                sensor: g,
                start,
                duration: delta,
                success,
            });
        }
        last = Some(if success { Outcome::Success } else { Outcome::Failure });
        end = start + delta;
        ledger.after_packet(k + 1, end)?;
    }
    ledger.finish(config, end)
}
