//! Euler-Maruyama realization of the sensed processes and their remote
//! estimates.
//!
//! The simulation runs in error coordinates `e = x - x_hat`: between
//! deliveries `de = A e dt + dW`, and a delivery replaces `e` by the error a
//! fresh sample would have, which is tracked by a shadow copy started from
//! zero at the sample's generation time and driven by the same noise. This
//! is exact for linear dynamics and keeps unstable processes from
//! overflowing the state itself.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{psd_cholesky, OracleError};
use crate::gauss_markov::LinearSystem;
use crate::sim::Delivery;
use crate::stream_rng;

const TIME_BATCHES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    /// Coarse integration step; the estimate itself uses half of it.
    pub step: f64,
    pub horizon: f64,
    pub trials: u32,
    pub seed: u64,
}

impl TrajectoryConfig {
    /// Step `delta / 50` over `horizon`.
    pub fn for_delta(delta: f64, horizon: f64, trials: u32, seed: u64) -> Self {
        Self {
            step: delta / 50.0,
            horizon,
            trials,
            seed,
        }
    }

    fn validate(&self) -> Result<usize, OracleError> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(OracleError::InvalidInput("step must be positive"));
        }
        if !(self.horizon >= self.step && self.horizon.is_finite()) {
            return Err(OracleError::InvalidInput("horizon must cover at least one step"));
        }
        if self.trials == 0 {
            return Err(OracleError::InvalidInput("trials must be positive"));
        }
        grid_index(self.horizon, self.step)
            .ok_or(OracleError::InvalidInput("horizon must be a multiple of the step"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    /// Estimate at the fine step.
    pub mean: f64,
    pub stderr: f64,
    /// Estimate at the coarse step, on the same noise.
    pub coarse_mean: f64,
}

fn grid_index(t: f64, step: f64) -> Option<usize> {
    let x = t / step;
    let i = libm::round(x);
    if i >= 0.0 && (x - i).abs() <= 1e-6 {
        Some(i as usize)
    } else {
        None
    }
}

/// Dense row-major copies of `A` and `chol(D)` for the inner loop.
struct Dynamics {
    n: usize,
    a: Vec<f64>,
    l: Vec<f64>,
}

impl Dynamics {
    fn new(system: &LinearSystem) -> Self {
        let n = system.dim();
        let chol = psd_cholesky(system.diffusion());
        let mut a = Vec::with_capacity(n * n);
        let mut l = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                a.push(system.drift()[(i, j)]);
                l.push(chol[(i, j)]);
            }
        }
        Self { n, a, l }
    }

    /// Noise increment `L xi` scaled by `scale`.
    fn noise(&self, xi: &[f64], scale: f64, out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..(i + 1) * n];
            out[i] = scale * row.iter().zip(xi).map(|(l, x)| l * x).sum::<f64>();
        }
    }

    /// `e <- e + A e h + w`.
    fn advance(&self, e: &mut [f64], h: f64, w: &[f64], tmp: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.a[i * n..(i + 1) * n];
            tmp[i] = row.iter().zip(e.iter()).map(|(a, x)| a * x).sum::<f64>();
        }
        for i in 0..n {
            e[i] += tmp[i] * h + w[i];
        }
    }
}

fn norm_sqr(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn fill_normals(rng: &mut ChaCha8Rng, xi: &mut [f64]) {
    for x in xi.iter_mut() {
        *x = rng.sample(StandardNormal);
    }
}

struct Shadow {
    delivery: usize,
    fine: Vec<f64>,
    coarse: Vec<f64>,
}

/// Time integrals of the squared error at both steps for one trial, in
/// `TIME_BATCHES` consecutive pieces.
fn run_trial(
    dyn_: &Dynamics,
    events: &[(usize, usize)],
    steps: usize,
    h: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<f64>) {
    let n = dyn_.n;
    let half = 0.5 * h;
    let sq_half = libm::sqrt(half);
    let mut e_f = alloc::vec![0.0; n];
    let mut e_c = alloc::vec![0.0; n];
    let mut xi1 = alloc::vec![0.0; n];
    let mut xi2 = alloc::vec![0.0; n];
    let mut xic = alloc::vec![0.0; n];
    let mut w1 = alloc::vec![0.0; n];
    let mut w2 = alloc::vec![0.0; n];
    let mut wc = alloc::vec![0.0; n];
    let mut tmp = alloc::vec![0.0; n];
    let mut shadows: Vec<Shadow> = Vec::new();
    let mut next_event = 0;
    let mut fine = alloc::vec![0.0; TIME_BATCHES];
    let mut coarse = alloc::vec![0.0; TIME_BATCHES];

    for i in 0..steps {
        let mut k = 0;
        while k < shadows.len() {
            if shadows[k].delivery == i {
                let s = shadows.swap_remove(k);
                e_f = s.fine;
                e_c = s.coarse;
            } else {
                k += 1;
            }
        }
        while next_event < events.len() && events[next_event].0 == i {
            shadows.push(Shadow {
                delivery: events[next_event].1,
                fine: alloc::vec![0.0; n],
                coarse: alloc::vec![0.0; n],
            });
            next_event += 1;
        }

        let batch = i * TIME_BATCHES / steps;
        coarse[batch] += norm_sqr(&e_c) * h;
        fine[batch] += norm_sqr(&e_f) * half;

        fill_normals(rng, &mut xi1);
        fill_normals(rng, &mut xi2);
        for j in 0..n {
            xic[j] = xi1[j] + xi2[j];
        }
        // Coarse increment sqrt(h) L (xi1 + xi2) / sqrt(2).
        dyn_.noise(&xi1, sq_half, &mut w1);
        dyn_.noise(&xi2, sq_half, &mut w2);
        dyn_.noise(&xic, sq_half, &mut wc);

        dyn_.advance(&mut e_f, half, &w1, &mut tmp);
        for s in shadows.iter_mut() {
            dyn_.advance(&mut s.fine, half, &w1, &mut tmp);
        }
        fine[batch] += norm_sqr(&e_f) * half;
        dyn_.advance(&mut e_f, half, &w2, &mut tmp);
        for s in shadows.iter_mut() {
            dyn_.advance(&mut s.fine, half, &w2, &mut tmp);
        }
        dyn_.advance(&mut e_c, h, &wc, &mut tmp);
        for s in shadows.iter_mut() {
            dyn_.advance(&mut s.coarse, h, &wc, &mut tmp);
        }
    }
    (fine, coarse)
}

const SPREAD_RATIO: f64 = 10.0;

fn mean_and_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var / n))
}

/// Time-average squared estimation error per sensor along a delivery trace.
///
/// Each sensor starts with a perfect estimate at time 0. Delivery times must
/// lie on the step grid. Standard errors come from the spread across trials,
/// or from time batches when there is a single trial.
pub fn monte_carlo_mse(
    systems: &[LinearSystem],
    deliveries: &[Delivery],
    config: &TrajectoryConfig,
) -> Result<Vec<MonteCarloEstimate>, OracleError> {
    let steps = config.validate()?;
    let h = config.step;
    let mut out = Vec::with_capacity(systems.len());
    for (g, system) in systems.iter().enumerate() {
        let mut events = Vec::new();
        for d in deliveries.iter().filter(|d| d.sensor == g) {
            let gen = grid_index(d.generation_time, h)
                .ok_or(OracleError::InvalidInput("generation times must lie on the step grid"))?;
            let del = grid_index(d.delivery_time, h)
                .ok_or(OracleError::InvalidInput("delivery times must lie on the step grid"))?;
            if del <= gen {
                return Err(OracleError::InvalidInput("deliveries must follow generation"));
            }
            events.push((gen, del));
        }
        events.sort_unstable();
        let dynamics = Dynamics::new(system);

        let mut fine_trials = Vec::new();
        let mut coarse_trials = Vec::new();
        let mut fine_batches = Vec::new();
        let mut coarse_batches = Vec::new();
        for trial in 0..config.trials {
            let mut rng = stream_rng(config.seed, ((g as u64) << 32) | trial as u64);
            let (f, c) = run_trial(&dynamics, &events, steps, h, &mut rng);
            fine_trials.push(f.iter().sum::<f64>() / config.horizon);
            coarse_trials.push(c.iter().sum::<f64>() / config.horizon);
            if config.trials == 1 {
                let width = |b: usize| {
                    let lo = (b * steps).div_ceil(TIME_BATCHES);
                    let hi = ((b + 1) * steps).div_ceil(TIME_BATCHES);
                    (hi - lo) as f64 * h
                };
                fine_batches = f.iter().enumerate().map(|(b, x)| x / width(b)).collect();
                coarse_batches = c.iter().enumerate().map(|(b, x)| x / width(b)).collect();
            }
        }
        let (mean, stderr, coarse_mean, coarse_se) = if config.trials >= 2 {
            let (m, s) = mean_and_stderr(&fine_trials);
            let (mc, sc) = mean_and_stderr(&coarse_trials);
            (m, s, mc, sc)
        } else {
            let (_, s) = mean_and_stderr(&fine_batches);
            let (_, sc) = mean_and_stderr(&coarse_batches);
            (fine_trials[0], s, coarse_trials[0], sc)
        };
        let allowed = 2.0 * libm::sqrt(stderr * stderr + coarse_se * coarse_se);
        // An unstable coarse scheme blows up its own spread, which would
        // otherwise widen the allowance enough to hide the disagreement.
        let diverged = !(mean.is_finite() && coarse_mean.is_finite())
            || coarse_se > SPREAD_RATIO * stderr.max(f64::MIN_POSITIVE);
        if diverged || !((mean - coarse_mean).abs() <= allowed) {
            return Err(OracleError::StepTooCoarse {
                sensor: g,
                coarse: coarse_mean,
                fine: mean,
                allowed,
            });
        }
        out.push(MonteCarloEstimate {
            mean,
            stderr,
            coarse_mean,
        });
    }
    Ok(out)
}

/// Squared estimation error at age `age` after a perfect sample, averaged
/// over `trials` independent paths.
pub fn monte_carlo_error_at_age(
    system: &LinearSystem,
    age: f64,
    step: f64,
    trials: u32,
    seed: u64,
) -> Result<MonteCarloEstimate, OracleError> {
    let config = TrajectoryConfig {
        step,
        horizon: age,
        trials,
        seed,
    };
    let steps = config.validate()?;
    let dynamics = Dynamics::new(system);
    let n = system.dim();
    let sq = libm::sqrt(step);
    let mut rng = stream_rng(seed, 0);
    let mut xi = alloc::vec![0.0; n];
    let mut w = alloc::vec![0.0; n];
    let mut tmp = alloc::vec![0.0; n];
    let mut samples = Vec::with_capacity(trials as usize);
    for _ in 0..trials {
        let mut e = alloc::vec![0.0; n];
        for _ in 0..steps {
            fill_normals(&mut rng, &mut xi);
            dynamics.noise(&xi, sq, &mut w);
            dynamics.advance(&mut e, step, &w, &mut tmp);
        }
        samples.push(norm_sqr(&e));
    }
    let (mean, stderr) = mean_and_stderr(&samples);
    Ok(MonteCarloEstimate {
        mean,
        stderr,
        coarse_mean: mean,
    })
}
