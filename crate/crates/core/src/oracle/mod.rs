//! Independent validators for the closed forms.
//!
//! Nothing here touches the eigen-decomposition used by
//! [`crate::gauss_markov`]: steady states come from a dense Kronecker solve,
//! matrix exponentials from scaling and squaring, and the packet-integrated
//! MSE from adaptive quadrature. The trajectory engine realizes the process
//! and its estimator sample by sample.

mod quadrature;
mod trajectory;

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::gauss_markov::{GaussMarkovModel, LinearSystem, ModelError};
use crate::linalg::{max_abs, to_complex, RMatrix};

pub use quadrature::{gauss_kronrod, quadrature_l};
pub use trajectory::{
    monte_carlo_error_at_age, monte_carlo_mse, MonteCarloEstimate, TrajectoryConfig,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("Lyapunov equation is singular (resonant eigenvalues)")]
    SingularSystem,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(
        "sensor {sensor}: halving the step moved the estimate from {coarse} to {fine} \
         (allowed {allowed})"
    )]
    StepTooCoarse {
        sensor: usize,
        coarse: f64,
        fine: f64,
        allowed: f64,
    },
    #[error("invalid oracle input: {0}")]
    InvalidInput(&'static str),
    #[error("quadrature did not converge")]
    QuadratureDiverged,
}

/// Solves `A S + S A^T + D = 0` through the vectorized `n^2 x n^2` system.
///
/// For stable `A` the result is the stationary covariance; in general it is
/// the unique symmetric solution when no two eigenvalues sum to zero.
pub fn lyapunov_solve(system: &LinearSystem) -> Result<RMatrix, OracleError> {
    let a = system.drift();
    let n = system.dim();
    let id = DMatrix::<f64>::identity(n, n);
    // vec(A S) = (I kron A) vec S, vec(S A^T) = (A kron I) vec S.
    let k = id.kronecker(a) + a.kronecker(&id);
    let rhs = DVector::from_iterator(n * n, system.diffusion().iter().map(|x| -x));
    let lu = k.clone().lu();
    let u = lu.u();
    let pivots: Vec<f64> = (0..n * n).map(|i| u[(i, i)].abs()).collect();
    let largest = pivots.iter().cloned().fold(0.0, f64::max);
    let smallest = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(smallest > 1e-13 * largest.max(f64::MIN_POSITIVE)) {
        return Err(OracleError::SingularSystem);
    }
    let x = lu.solve(&rhs).ok_or(OracleError::SingularSystem)?;
    let s = DMatrix::from_column_slice(n, n, x.as_slice());
    Ok((&s + s.transpose()) * 0.5)
}

/// `e^M` by scaling and squaring with a truncated Taylor series.
pub fn matrix_exp(m: &RMatrix) -> RMatrix {
    let n = m.nrows();
    let norm = m
        .column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if !norm.is_finite() {
        return RMatrix::from_element(n, n, f64::NAN);
    }
    let mut squarings = 0u32;
    let mut scaled = norm;
    while scaled > 0.5 {
        scaled *= 0.5;
        squarings += 1;
    }
    let x = m * libm::ldexp(1.0, -(squarings as i32));
    let mut term = RMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=24 {
        term = &term * &x / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Lower-triangular `L` with `L L^T = D + jitter I`, tolerating singular `D`.
///
/// Pivots that collapse to round-off zero out their column instead of
/// failing, so rank-deficient diffusions keep their exact range.
pub fn psd_cholesky(d: &RMatrix) -> RMatrix {
    const JITTER: f64 = 1e-12;
    let n = d.nrows();
    let scale = d.iter().fold(0.0_f64, |acc, x| acc.max(x.abs())).max(1.0);
    let mut l = RMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = d[(j, j)] + JITTER;
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if diag <= 1e-10 * scale {
            continue;
        }
        let pivot = libm::sqrt(diag);
        l[(j, j)] = pivot;
        for i in (j + 1)..n {
            let mut v = d[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / pivot;
        }
    }
    l
}

/// Mutual consistency of the closed-form kernels, the dense steady-state
/// solve and quadrature for one system.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleReport {
    /// `max |A Y + Y A^H - D| / max(1, max |D|)`.
    pub upsilon_residual: f64,
    /// `max |A F + F A^H - Y| / max(1, max |Y|)`.
    pub phi_residual: f64,
    /// `max |S + Y|` with `S` from [`lyapunov_solve`], relative to `max |S|`.
    pub lyapunov_gap: f64,
    /// Relative gap between the closed form and quadrature of `L(lo, hi)`.
    pub quadrature_gap: f64,
}

impl TriangleReport {
    pub fn passes(&self) -> bool {
        self.upsilon_residual <= 1e-8
            && self.phi_residual <= 1e-8
            && self.lyapunov_gap <= 1e-8
            && self.quadrature_gap <= 1e-6
    }
}

pub fn triangle_check(
    system: &LinearSystem,
    tau_lo: f64,
    tau_hi: f64,
) -> Result<TriangleReport, OracleError> {
    let model = GaussMarkovModel::new(system.clone())?;
    let a = to_complex(system.drift());
    let d = to_complex(system.diffusion());
    let y = model.kernels().upsilon();
    let f = model.kernels().phi();
    let upsilon_residual = max_abs(&(&a * y + y * a.adjoint() - &d)) / max_abs(&d).max(1.0);
    let phi_residual = max_abs(&(&a * f + f * a.adjoint() - y)) / max_abs(y).max(1.0);
    let s = to_complex(&lyapunov_solve(system)?);
    let lyapunov_gap = max_abs(&(&s + y)) / max_abs(&s).max(f64::MIN_POSITIVE);
    let closed = model.packet_integrated_mse(tau_lo, tau_hi)?;
    let quad = quadrature_l(system, tau_lo, tau_hi)?;
    let quadrature_gap = if closed == quad {
        0.0
    } else {
        (closed - quad).abs() / closed.abs().max(quad.abs())
    };
    Ok(TriangleReport {
        upsilon_residual,
        phi_residual,
        lyapunov_gap,
        quadrature_gap,
    })
}
