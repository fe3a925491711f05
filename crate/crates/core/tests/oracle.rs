mod common;

use common::*;
use semsched_core::oracle::*;
use semsched_core::sim::{deliveries, simulate_traced, Delivery, SimulationConfig};
use semsched_core::{GaussMarkovModel, LinearSystem};

#[test]
fn steady_error_without_deliveries() {
    let cfg = TrajectoryConfig { step: 0.02, horizon: 2000.0, trials: 4, seed: 1 };
    let est = monte_carlo_mse(&[scalar()], &[], &cfg).unwrap()[0];
    assert!((est.mean - 1.0).abs() < 3.0 * est.stderr, "{est:?}");
}

#[test]
fn error_at_age_for_an_example_system() {
    let sys = stable_pair()[1].clone();
    let m = GaussMarkovModel::new(sys.clone()).unwrap();
    let est = monte_carlo_error_at_age(&sys, 5.0, 0.02, 20_000, 4).unwrap();
    let exact = m.instantaneous_mse(5.0).unwrap();
    assert!((est.mean - exact).abs() < 3.0 * est.stderr, "{est:?} vs {exact}");
}

#[test]
fn periodic_deliveries_match_closed_form() {
    // A fresh sample every 4 time units, received 1 unit after generation.
    let sys = scalar();
    let m = GaussMarkovModel::new(sys.clone()).unwrap();
    let trace: Vec<Delivery> = (0..250)
        .map(|k| Delivery { sensor: 0, generation_time: 4.0 * k as f64, delivery_time: 4.0 * k as f64 + 1.0 })
        .collect();
    let cfg = TrajectoryConfig { step: 0.02, horizon: 1001.0, trials: 4, seed: 5 };
    let est = monte_carlo_mse(&[sys], &trace, &cfg).unwrap()[0];
    let exact = (m.packet_integrated_mse(0.0, 1.0).unwrap() + 250.0 * m.packet_integrated_mse(1.0, 5.0).unwrap()) / 1001.0;
    assert!((est.mean - exact).abs() < 3.0 * est.stderr.max(1e-3 * exact), "{est:?} vs {exact}");
}

#[test]
fn round_robin_trace_agrees_with_simulator() {
    let cfg = SimulationConfig::new(stable_pair(), 1.0, 0.05, 5_000, 21);
    let (res, trace) = simulate_traced(&cfg, &"max-trials:[1,1]".parse().unwrap()).unwrap();
    let tc = TrajectoryConfig::for_delta(1.0, res.total_time, 4, 99);
    let est = monte_carlo_mse(&stable_pair(), &deliveries(&trace), &tc).unwrap();
    for g in 0..2 {
        let gap = (est[g].mean - res.mse[g]).abs();
        assert!(gap < 0.05 * res.mse[g] || gap < 3.0 * est[g].stderr, "sensor {g}: {:?} vs {}", est[g], res.mse[g]);
    }
}

#[test]
fn coarse_steps_are_detected() {
    let stiff = LinearSystem::scalar(-5.0, 1.0).unwrap();
    let cfg = TrajectoryConfig { step: 0.5, horizon: 200.0, trials: 2, seed: 3 };
    let r = monte_carlo_mse(&[stiff], &[], &cfg);
    assert!(matches!(r, Err(OracleError::StepTooCoarse { sensor: 0, .. })), "{r:?}");
}

#[test]
fn off_grid_deliveries_are_rejected() {
    let cfg = TrajectoryConfig { step: 0.02, horizon: 10.0, trials: 1, seed: 3 };
    let d = [Delivery { sensor: 0, generation_time: 0.013, delivery_time: 1.0 }];
    assert!(matches!(monte_carlo_mse(&[scalar()], &d, &cfg), Err(OracleError::InvalidInput(_))));
}

#[test]
fn triangle_holds_on_random_systems() {
    let mut r = rng(2024);
    for i in 0..50 {
        let sys = random_system(&mut r, 1 + i % 5);
        let report = triangle_check(&sys, 0.5, 6.0).unwrap();
        assert!(report.passes(), "{report:?}");
    }
}

#[test]
fn triangle_on_example_systems() {
    for sys in stable_pair().into_iter().chain(unstable_pair()) {
        let report = triangle_check(&sys, 1.0, 20.0).unwrap();
        assert!(report.passes(), "{report:?}");
    }
}
