//! Closed-form estimation error of a sampled Gauss-Markov process.
//!
//! A sensor observes `dx = A x dt + noise` with diffusion `D`. The receiver
//! holds the last delivered sample and propagates it with `e^{A t}`, so the
//! error covariance at age `tau` is `P(tau) = e^{A tau} Y e^{A^H tau} - Y`,
//! where `Y` (upsilon) solves `A Y + Y A^H = D`. Integrating once more gives
//! `Phi` with `A Phi + Phi A^H = Y`, and the packet-integrated MSE over an age
//! interval `[lo, hi)` is
//!
//! ```text
//! L(lo, hi) = tr{ e^{A hi} Phi e^{A^H hi} - e^{A lo} Phi e^{A^H lo} - Y (hi - lo) }.
//! ```
//!
//! Everything is evaluated in the eigenbasis `A = U diag(lambda) U^{-1}`, where
//! conjugation by `e^{A tau}` becomes element-wise scaling by
//! `e^{(lambda_m + conj(lambda_n)) tau}`.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use thiserror::Error;

use crate::linalg::{self, cabs, cexp, CMatrix, RMatrix};

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const MAX_CONDITION: f64 = 1e10;
const RESONANCE_TOL: f64 = 1e-10;
const IMAG_TOL: f64 = 1e-8;
const CLAMP_TOL: f64 = 1e-10;
const DENOMINATOR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("drift must be a non-empty square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("diffusion is {rows}x{cols} but drift is {dim}x{dim}")]
    DimensionMismatch { dim: usize, rows: usize, cols: usize },
    #[error("system matrices contain non-finite entries")]
    NonFinite,
    #[error("diffusion matrix is not symmetric")]
    AsymmetricDiffusion,
    #[error("diffusion matrix is not positive semidefinite (eigenvalue {eigenvalue})")]
    IndefiniteDiffusion { eigenvalue: f64 },
    #[error("drift is not diagonalizable (eigenvector condition number {condition:e})")]
    NonDiagonalizable { condition: f64 },
    #[error("eigenvalues {m} and {n} resonate: lambda_m + conj(lambda_n) = 0")]
    Resonance { m: usize, n: usize },
    #[error("invalid age interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("packet-integrated MSE is negative ({value})")]
    NegativeResult { value: f64 },
    #[error("trace has a non-negligible imaginary residue ({residue:e})")]
    ImaginaryResidue { residue: f64 },
    #[error("expected MSE over geometric retransmissions diverges")]
    DegenerateGeometricSum,
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

/// Continuous-time dynamics of one sensed process.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    drift: RMatrix,
    diffusion: RMatrix,
}

impl LinearSystem {
    pub fn new(drift: RMatrix, diffusion: RMatrix) -> Result<Self, ModelError> {
        let (rows, cols) = drift.shape();
        if rows == 0 || rows != cols {
            return Err(ModelError::NotSquare { rows, cols });
        }
        if diffusion.shape() != (rows, rows) {
            let (r, c) = diffusion.shape();
            return Err(ModelError::DimensionMismatch {
                dim: rows,
                rows: r,
                cols: c,
            });
        }
        if drift.iter().chain(diffusion.iter()).any(|x| !x.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        let dnorm = diffusion.amax();
        let asym = (&diffusion - diffusion.transpose()).amax();
        if asym > SYMMETRY_TOL * dnorm.max(1.0) {
            return Err(ModelError::AsymmetricDiffusion);
        }
        let min_eig = diffusion
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOL * dnorm {
            return Err(ModelError::IndefiniteDiffusion {
                eigenvalue: min_eig,
            });
        }
        Ok(Self { drift, diffusion })
    }

    /// Build from row-major slices of length `dim * dim`.
    pub fn from_rows(dim: usize, drift: &[f64], diffusion: &[f64]) -> Result<Self, ModelError> {
        if dim == 0 || drift.len() != dim * dim {
            return Err(ModelError::NotSquare {
                rows: dim,
                cols: drift.len().checked_div(dim).unwrap_or(0),
            });
        }
        if diffusion.len() != dim * dim {
            return Err(ModelError::DimensionMismatch {
                dim,
                rows: dim,
                cols: diffusion.len() / dim,
            });
        }
        Self::new(
            DMatrix::from_row_slice(dim, dim, drift),
            DMatrix::from_row_slice(dim, dim, diffusion),
        )
    }

    /// Scalar system `dx = a x dt + sqrt(d) dW`.
    pub fn scalar(a: f64, d: f64) -> Result<Self, ModelError> {
        Self::from_rows(1, &[a], &[d])
    }

    /// Same diffusion, negated drift: turns a stable process into an unstable
    /// one and vice versa.
    pub fn with_negated_drift(&self) -> Self {
        Self {
            drift: -&self.drift,
            diffusion: self.diffusion.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    pub fn drift(&self) -> &RMatrix {
        &self.drift
    }

    pub fn diffusion(&self) -> &RMatrix {
        &self.diffusion
    }
}

/// Eigendecomposition `A = U diag(lambda) U^{-1}`.
#[derive(Debug, Clone)]
pub struct SpectralData {
    eigvecs: CMatrix,
    eigvals: Vec<Complex64>,
    inv_eigvecs: CMatrix,
    condition: f64,
}

impl SpectralData {
    pub fn eigvecs(&self) -> &CMatrix {
        &self.eigvecs
    }

    pub fn eigvals(&self) -> &[Complex64] {
        &self.eigvals
    }

    pub fn inv_eigvecs(&self) -> &CMatrix {
        &self.inv_eigvecs
    }

    /// 1-norm condition number of the eigenvector matrix.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn dim(&self) -> usize {
        self.eigvals.len()
    }

    /// True when every eigenvalue has a strictly negative real part.
    pub fn is_stable(&self) -> bool {
        self.eigvals.iter().all(|l| l.re < -1e-12)
    }

    /// `U X U^H`
    fn to_standard(&self, x: &CMatrix) -> CMatrix {
        &self.eigvecs * x * self.eigvecs.adjoint()
    }

    /// `U^{-1} X U^{-H}`
    fn to_eigen(&self, x: &CMatrix) -> CMatrix {
        &self.inv_eigvecs * x * self.inv_eigvecs.adjoint()
    }
}

pub fn spectral_decompose(system: &LinearSystem) -> Result<SpectralData, ModelError> {
    let n = system.dim();
    let a = linalg::to_complex(system.drift());
    let nondiag = |condition: f64| ModelError::NonDiagonalizable { condition };

    let (q, t) = linalg::complex_schur(&a).ok_or(nondiag(f64::INFINITY))?;
    let mut vecs = &q * linalg::triangular_eigenvectors(&t);
    linalg::normalize_columns(&mut vecs);

    // Deterministic order: real part descending, then imaginary part
    // descending, then original position.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let (li, lj) = (t[(i, i)], t[(j, j)]);
        lj.re
            .total_cmp(&li.re)
            .then(lj.im.total_cmp(&li.im))
            .then(i.cmp(&j))
    });
    let eigvals: Vec<Complex64> = order.iter().map(|&i| t[(i, i)]).collect();
    let eigvecs = CMatrix::from_fn(n, n, |r, c| vecs[(r, order[c])]);

    let inv = eigvecs
        .clone()
        .try_inverse()
        .ok_or(nondiag(f64::INFINITY))?;
    let condition = linalg::norm1(&eigvecs) * linalg::norm1(&inv);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(nondiag(condition));
    }
    let lambda = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(eigvals.clone()));
    let recon = &eigvecs * lambda * &inv;
    let anorm = linalg::max_abs(&a).max(f64::MIN_POSITIVE);
    if linalg::max_abs(&(recon - &a)) > 1e-8 * anorm {
        return Err(nondiag(condition));
    }
    if linalg::max_abs(&(&eigvecs * &inv - CMatrix::identity(n, n))) > 1e-10 {
        return Err(nondiag(condition));
    }

    for m in 0..n {
        for k in 0..n {
            let sum = eigvals[m] + eigvals[k].conj();
            let scale = (cabs(eigvals[m]) + cabs(eigvals[k])).max(1.0);
            if cabs(sum) < RESONANCE_TOL * scale {
                return Err(ModelError::Resonance { m, n: k });
            }
        }
    }

    Ok(SpectralData {
        eigvecs,
        eigvals,
        inv_eigvecs: inv,
        condition,
    })
}

/// The kernels `Upsilon`, `Phi` and `B` of the packet-integrated MSE, plus
/// their eigen-coordinate trace weights.
#[derive(Debug, Clone)]
pub struct MseKernels {
    upsilon: CMatrix,
    phi: CMatrix,
    b: CMatrix,
    /// `(U^{-1} Phi U^{-H})_{mn} (U^H U)_{nm}`
    phi_weights: CMatrix,
    /// `(U^{-1} Upsilon U^{-H})_{mn} (U^H U)_{nm}`
    upsilon_weights: CMatrix,
    trace_upsilon: f64,
}

impl MseKernels {
    pub fn upsilon(&self) -> &CMatrix {
        &self.upsilon
    }

    pub fn phi(&self) -> &CMatrix {
        &self.phi
    }

    pub fn b(&self) -> &CMatrix {
        &self.b
    }

    pub fn trace_upsilon(&self) -> f64 {
        self.trace_upsilon
    }
}

pub fn compute_kernels(
    spec: &SpectralData,
    system: &LinearSystem,
) -> Result<MseKernels, ModelError> {
    let n = spec.dim();
    if system.dim() != n {
        return Err(ModelError::DimensionMismatch {
            dim: n,
            rows: system.dim(),
            cols: system.dim(),
        });
    }
    let lam = spec.eigvals();
    let mut b = CMatrix::zeros(n, n);
    for m in 0..n {
        for k in 0..n {
            let sum = lam[m] + lam[k].conj();
            let scale = (cabs(lam[m]) + cabs(lam[k])).max(1.0);
            if cabs(sum) < RESONANCE_TOL * scale {
                return Err(ModelError::Resonance { m, n: k });
            }
            b[(m, k)] = sum.inv();
        }
    }

    let d = linalg::to_complex(system.diffusion());
    let upsilon = linalg::hermitian_part(&spec.to_standard(&spec.to_eigen(&d).component_mul(&b)));
    let phi = linalg::hermitian_part(&spec.to_standard(&spec.to_eigen(&upsilon).component_mul(&b)));

    let gram = spec.eigvecs().adjoint() * spec.eigvecs();
    let weights = |x: &CMatrix| {
        let xe = spec.to_eigen(x);
        CMatrix::from_fn(n, n, |m, k| xe[(m, k)] * gram[(k, m)])
    };
    let phi_weights = weights(&phi);
    let upsilon_weights = weights(&upsilon);
    let trace_upsilon = upsilon.trace().re;

    Ok(MseKernels {
        upsilon,
        phi,
        b,
        phi_weights,
        upsilon_weights,
        trace_upsilon,
    })
}

/// `sum_{mn} w_{mn} e^{(lambda_m + conj(lambda_n)) tau}` and the sum of term
/// magnitudes (used as the round-off scale).
fn scaled_trace(weights: &CMatrix, lam: &[Complex64], tau: f64) -> (Complex64, f64) {
    let n = lam.len();
    let mut exps = [Complex64::new(0.0, 0.0); 8];
    let heap: Vec<Complex64>;
    let e: &[Complex64] = if n <= exps.len() {
        for (slot, l) in exps.iter_mut().zip(lam) {
            *slot = cexp(l * tau);
        }
        &exps[..n]
    } else {
        heap = lam.iter().map(|l| cexp(l * tau)).collect();
        &heap
    };
    let mut acc = Complex64::new(0.0, 0.0);
    let mut mag = 0.0;
    for m in 0..n {
        for k in 0..n {
            let term = weights[(m, k)] * e[m] * e[k].conj();
            acc += term;
            mag += cabs(term);
        }
    }
    (acc, mag)
}

/// Discard the imaginary residue of a trace and clamp round-off negativity.
fn settle(value: Complex64, scale: f64) -> Result<f64, ModelError> {
    if !value.re.is_finite() || !scale.is_finite() {
        // exp overflow on unstable dynamics: the error is unbounded.
        return Ok(f64::INFINITY);
    }
    if value.im.abs() > IMAG_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(ModelError::ImaginaryResidue {
            residue: value.im / scale,
        });
    }
    let re = value.re;
    if re >= 0.0 {
        Ok(re)
    } else if re >= -CLAMP_TOL * scale.max(1.0) {
        Ok(0.0)
    } else {
        Err(ModelError::NegativeResult { value: re })
    }
}

/// Integral of the estimation MSE over the age interval `[tau_lo, tau_hi)`.
pub fn packet_integrated_mse(
    kernels: &MseKernels,
    spec: &SpectralData,
    tau_lo: f64,
    tau_hi: f64,
) -> Result<f64, ModelError> {
    if !(tau_lo >= 0.0 && tau_lo <= tau_hi) {
        return Err(ModelError::InvalidInterval {
            lo: tau_lo,
            hi: tau_hi,
        });
    }
    if tau_lo == tau_hi {
        return Ok(0.0);
    }
    let lam = spec.eigvals();
    let (f_hi, s_hi) = scaled_trace(&kernels.phi_weights, lam, tau_hi);
    let (f_lo, s_lo) = scaled_trace(&kernels.phi_weights, lam, tau_lo);
    let span = tau_hi - tau_lo;
    let value = f_hi - f_lo - kernels.trace_upsilon * span;
    settle(value, s_hi + s_lo + kernels.trace_upsilon.abs() * span)
}

/// `E ||x_hat - x||^2` at age `tau`: `tr{ e^{A tau} Y e^{A^H tau} - Y }`.
pub fn instantaneous_mse(
    kernels: &MseKernels,
    spec: &SpectralData,
    tau: f64,
) -> Result<f64, ModelError> {
    if !(tau >= 0.0) {
        return Err(ModelError::InvalidInterval { lo: 0.0, hi: tau });
    }
    let (g, s) = scaled_trace(&kernels.upsilon_weights, spec.eigvals(), tau);
    settle(
        g - kernels.trace_upsilon,
        s + kernels.trace_upsilon.abs(),
    )
}

/// MSE when every packet collides: the stationary error `-tr{Y}` for stable
/// dynamics, unbounded otherwise.
pub fn mse_upper_bound(kernels: &MseKernels, spec: &SpectralData) -> f64 {
    if spec.is_stable() {
        -kernels.trace_upsilon
    } else {
        f64::INFINITY
    }
}

/// `Psi` and `C` for back-to-back transmissions of constant duration with
/// i.i.d. decoding failures.
#[derive(Debug, Clone)]
pub struct BoundData {
    psi: CMatrix,
    c: CMatrix,
    delta: f64,
    epsilon: f64,
}

impl BoundData {
    pub fn psi(&self) -> &CMatrix {
        &self.psi
    }

    pub fn c(&self) -> &CMatrix {
        &self.c
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

fn check_channel(delta: f64, epsilon: f64) -> Result<(), ModelError> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(ModelError::InvalidParameter("delta must be positive"));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(ModelError::InvalidParameter("epsilon must lie in [0, 1)"));
    }
    Ok(())
}

/// `C_{mn} = (1 - eps) / (1 - eps e^{(lambda_m + conj(lambda_n)) delta})`,
/// i.e. the generating function of the geometric retry count.
fn geometric_factors(
    spec: &SpectralData,
    delta: f64,
    epsilon: f64,
) -> Result<CMatrix, ModelError> {
    let lam = spec.eigvals();
    let n = lam.len();
    let mut c = CMatrix::zeros(n, n);
    for m in 0..n {
        for k in 0..n {
            let z = cexp((lam[m] + lam[k].conj()) * delta);
            let denom = Complex64::new(1.0, 0.0) - z * epsilon;
            if cabs(denom) <= DENOMINATOR_TOL || epsilon * cabs(z) >= 1.0 {
                return Err(ModelError::DegenerateGeometricSum);
            }
            c[(m, k)] = Complex64::new(1.0 - epsilon, 0.0) / denom;
        }
    }
    Ok(c)
}

pub fn bound_data(
    kernels: &MseKernels,
    spec: &SpectralData,
    delta: f64,
    epsilon: f64,
) -> Result<BoundData, ModelError> {
    check_channel(delta, epsilon)?;
    let c = geometric_factors(spec, delta, epsilon)?;
    let psi = linalg::hermitian_part(&spec.to_standard(&spec.to_eigen(&kernels.phi).component_mul(&c)));
    Ok(BoundData {
        psi,
        c,
        delta,
        epsilon,
    })
}

/// Lower bound on the MSE for constant transmit duration `delta`: one sensor
/// transmitting back-to-back with failure probability `epsilon`.
pub fn mse_lower_bound_constant(
    kernels: &MseKernels,
    spec: &SpectralData,
    delta: f64,
    epsilon: f64,
) -> Result<f64, ModelError> {
    check_channel(delta, epsilon)?;
    let c = geometric_factors(spec, delta, epsilon)?;
    // tr{e^{2A delta} Psi e^{2A^H delta}} evaluated with Psi in eigen
    // coordinates (Phi~ o C); with epsilon = 0 this is exactly the L(delta,
    // 2 delta) numerator.
    let lam = spec.eigvals();
    let n = lam.len();
    let weighted = CMatrix::from_fn(n, n, |m, k| kernels.phi_weights[(m, k)] * c[(m, k)]);
    let (f2, s2) = scaled_trace(&weighted, lam, 2.0 * delta);
    let (f1, s1) = scaled_trace(&kernels.phi_weights, lam, delta);
    let mean_span = delta / (1.0 - epsilon);
    let value = f2 - f1 - kernels.trace_upsilon * mean_span;
    let numerator = settle(value, s2 + s1 + kernels.trace_upsilon.abs() * mean_span)?;
    Ok(numerator / mean_span)
}

/// Monte-Carlo form of the lower bound for arbitrary transmit-duration
/// distributions: `E[L(D_1, D_1 + ... + D_{N+2})] / E[D_2 + ... + D_{N+2}]`
/// with `N ~ Geometric(1 - epsilon)` failures between successes.
pub fn mse_lower_bound_general<S: Distribution<f64>>(
    kernels: &MseKernels,
    spec: &SpectralData,
    delta_sampler: &S,
    epsilon: f64,
    num_samples: usize,
    seed: u64,
) -> Result<f64, ModelError> {
    if num_samples == 0 {
        return Err(ModelError::InvalidParameter("num_samples must be positive"));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(ModelError::InvalidParameter("epsilon must lie in [0, 1)"));
    }
    let retries = Geometric::new(1.0 - epsilon)
        .map_err(|_| ModelError::InvalidParameter("epsilon must lie in [0, 1)"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Result<f64, ModelError> {
        let d = delta_sampler.sample(rng);
        if d > 0.0 && d.is_finite() {
            Ok(d)
        } else {
            Err(ModelError::InvalidParameter("transmit durations must be positive"))
        }
    };
    let mut num = 0.0;
    let mut den = 0.0;
    for _ in 0..num_samples {
        let failures = rng.sample(retries);
        let first = draw(&mut rng)?;
        let mut rest = 0.0;
        for _ in 0..failures + 1 {
            rest += draw(&mut rng)?;
        }
        num += packet_integrated_mse(kernels, spec, first, first + rest)?;
        den += rest;
    }
    Ok(num / den)
}

/// A sensor model with its decomposition and kernels precomputed.
#[derive(Debug, Clone)]
pub struct GaussMarkovModel {
    system: LinearSystem,
    spectral: SpectralData,
    kernels: MseKernels,
}

impl GaussMarkovModel {
    pub fn new(system: LinearSystem) -> Result<Self, ModelError> {
        let spectral = spectral_decompose(&system)?;
        let kernels = compute_kernels(&spectral, &system)?;
        Ok(Self {
            system,
            spectral,
            kernels,
        })
    }

    pub fn system(&self) -> &LinearSystem {
        &self.system
    }

    pub fn spectral(&self) -> &SpectralData {
        &self.spectral
    }

    pub fn kernels(&self) -> &MseKernels {
        &self.kernels
    }

    pub fn packet_integrated_mse(&self, tau_lo: f64, tau_hi: f64) -> Result<f64, ModelError> {
        packet_integrated_mse(&self.kernels, &self.spectral, tau_lo, tau_hi)
    }

    pub fn instantaneous_mse(&self, tau: f64) -> Result<f64, ModelError> {
        instantaneous_mse(&self.kernels, &self.spectral, tau)
    }

    pub fn upper_bound(&self) -> f64 {
        mse_upper_bound(&self.kernels, &self.spectral)
    }

    pub fn lower_bound(&self, delta: f64, epsilon: f64) -> Result<f64, ModelError> {
        mse_lower_bound_constant(&self.kernels, &self.spectral, delta, epsilon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    fn system2() -> LinearSystem {
        LinearSystem::from_rows(2, &[-0.02, 0.0, 0.0, -0.03], &[0.7, 0.2, 0.2, 0.6]).unwrap()
    }

    #[test]
    fn diagonal_drift_keeps_identity_eigenbasis() {
        let spec = spectral_decompose(&system2()).unwrap();
        assert_eq!(spec.eigvals()[0], Complex64::new(-0.02, 0.0));
        assert_eq!(spec.eigvals()[1], Complex64::new(-0.03, 0.0));
        let id = CMatrix::identity(2, 2);
        assert!(linalg::max_abs(&(spec.eigvecs() - id)) < 1e-15);
    }

    #[test]
    fn jordan_block_is_rejected() {
        let sys = LinearSystem::from_rows(2, &[0.0, 1.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            spectral_decompose(&sys),
            Err(ModelError::NonDiagonalizable { .. })
        ));
    }

    #[test]
    fn opposite_eigenvalues_resonate() {
        let sys = LinearSystem::from_rows(2, &[1.0, 0.0, 0.0, -1.0], &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            spectral_decompose(&sys),
            Err(ModelError::Resonance { .. })
        ));
    }

    #[test]
    fn invalid_systems_are_rejected() {
        assert!(matches!(
            LinearSystem::from_rows(2, &[0.0; 4], &[1.0, 0.5, 0.4, 1.0]),
            Err(ModelError::AsymmetricDiffusion)
        ));
        assert!(matches!(
            LinearSystem::from_rows(2, &[0.0; 4], &[1.0, 2.0, 2.0, 1.0]),
            Err(ModelError::IndefiniteDiffusion { .. })
        ));
        assert!(matches!(
            LinearSystem::new(RMatrix::zeros(2, 3), RMatrix::zeros(2, 2)),
            Err(ModelError::NotSquare { .. })
        ));
        assert!(matches!(
            LinearSystem::new(RMatrix::zeros(2, 2), RMatrix::zeros(3, 3)),
            Err(ModelError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            LinearSystem::scalar(f64::NAN, 1.0),
            Err(ModelError::NonFinite)
        ));
    }

    #[test]
    fn scalar_kernels() {
        let m = GaussMarkovModel::new(LinearSystem::scalar(-0.5, 1.0).unwrap()).unwrap();
        assert!(approx(m.kernels().upsilon()[(0, 0)].re, -1.0, 1e-14));
        assert!(approx(m.kernels().phi()[(0, 0)].re, 1.0, 1e-14));

        let u = GaussMarkovModel::new(LinearSystem::scalar(0.5, 1.0).unwrap()).unwrap();
        assert!(approx(u.kernels().upsilon()[(0, 0)].re, 1.0, 1e-14));
        assert!(approx(u.kernels().phi()[(0, 0)].re, 1.0, 1e-14));
    }

    #[test]
    fn scalar_closed_forms() {
        let m = GaussMarkovModel::new(LinearSystem::scalar(-0.5, 1.0).unwrap()).unwrap();
        let e1 = libm::exp(-1.0);
        assert!(approx(m.packet_integrated_mse(0.0, 1.0).unwrap(), e1, 1e-13));
        assert!(approx(m.instantaneous_mse(1.0).unwrap(), 1.0 - e1, 1e-13));
        assert_eq!(m.instantaneous_mse(0.0).unwrap(), 0.0);
        assert_eq!(m.packet_integrated_mse(3.0, 3.0).unwrap(), 0.0);
        assert!(approx(m.upper_bound(), 1.0, 1e-14));
    }

    #[test]
    fn reversed_interval_is_an_error() {
        let m = GaussMarkovModel::new(system2()).unwrap();
        assert!(matches!(
            m.packet_integrated_mse(2.0, 1.0),
            Err(ModelError::InvalidInterval { .. })
        ));
        assert!(matches!(
            m.packet_integrated_mse(-1.0, 1.0),
            Err(ModelError::InvalidInterval { .. })
        ));
    }

    #[test]
    fn upper_bound_of_diagonal_system() {
        let m = GaussMarkovModel::new(system2()).unwrap();
        assert!(approx(m.upper_bound(), 27.5, 1e-12));
        let u = GaussMarkovModel::new(system2().with_negated_drift()).unwrap();
        assert_eq!(u.upper_bound(), f64::INFINITY);
    }

    #[test]
    fn scalar_lower_bound() {
        // C = 0.95 / (1 - 0.05 e^{-1}), Psi = Phi C = C,
        // LB = (e^{-2} C - e^{-1} + 1/0.95) * 0.95
        let m = GaussMarkovModel::new(LinearSystem::scalar(-0.5, 1.0).unwrap()).unwrap();
        let e1 = libm::exp(-1.0);
        let c = 0.95 / (1.0 - 0.05 * e1);
        let expected = (libm::exp(-2.0) * c - e1 + 1.0 / 0.95) * 0.95;
        let lb = m.lower_bound(1.0, 0.05).unwrap();
        assert!(approx(lb, expected, 1e-13));
        assert!((lb - 0.7749).abs() < 1e-4);
    }

    #[test]
    fn lower_bound_with_zero_epsilon_is_back_to_back_packet() {
        let m = GaussMarkovModel::new(system2()).unwrap();
        let lb = m.lower_bound(1.0, 0.0).unwrap();
        assert_eq!(lb, m.packet_integrated_mse(1.0, 2.0).unwrap() / 1.0);
    }

    #[test]
    fn divergent_retransmission_series() {
        let u = GaussMarkovModel::new(LinearSystem::scalar(0.5, 1.0).unwrap()).unwrap();
        assert!(matches!(
            u.lower_bound(1.0, 0.4),
            Err(ModelError::DegenerateGeometricSum)
        ));
        assert!(u.lower_bound(1.0, 0.05).is_ok());
    }

    #[test]
    fn bound_data_reduces_to_phi_without_errors() {
        let m = GaussMarkovModel::new(system2()).unwrap();
        let bd = bound_data(m.kernels(), m.spectral(), 1.0, 0.0).unwrap();
        assert!(bd.c().iter().all(|z| *z == Complex64::new(1.0, 0.0)));
        assert!(linalg::max_abs(&(bd.psi() - m.kernels().phi())) < 1e-10);
    }

    #[test]
    fn general_bound_without_errors_is_exact() {
        let m = GaussMarkovModel::new(LinearSystem::scalar(-0.5, 1.0).unwrap()).unwrap();
        let constant = rand_distr::Uniform::new_inclusive(1.0, 1.0).unwrap();
        let g = mse_lower_bound_general(m.kernels(), m.spectral(), &constant, 0.0, 1000, 3).unwrap();
        let exact = m.packet_integrated_mse(1.0, 2.0).unwrap();
        assert!(approx(g, exact, 1e-12));
    }
}
