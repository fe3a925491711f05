//! Significance-aware channel access for remote estimation of Gauss-Markov
//! processes.
//!
//! The crate is `no_std` (with `alloc`) and contains the numerical core:
//!
//! * [`gauss_markov`]: closed-form estimation error, packet-integrated MSE and
//!   the MSE bounds.
//! * [`strategies`]: coordinated (max-trials, multiple-success) and slotted
//!   ALOHA (individual-CAP, threshold-ADRA) channel access policies.
//! * [`sim`]: seeded event loops for coordinated scheduling and slotted
//!   ALOHA.
//! * [`oracle`]: independent validators (dense Lyapunov solve, adaptive
//!   quadrature, Euler-Maruyama trajectories).
//! * [`sweep`]: parameter grids, Pareto filtering, time-sharing hulls and the
//!   weighted-MSE objective.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod gauss_markov;
pub mod linalg;
pub mod oracle;
pub mod sim;
pub mod strategies;
pub mod sweep;

pub use gauss_markov::{GaussMarkovModel, LinearSystem, ModelError};
pub use strategies::{AlohaPolicy, CoordinatedPolicy, Outcome, Policy, TrialLimit};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random stream `stream` derived from a master seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
