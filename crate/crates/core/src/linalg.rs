//! Small dense complex linear algebra: Schur form and eigenvectors.
//!
//! The matrices handled here are tiny (state dimensions of a handful), so the
//! routines favour clarity over blocking. The eigen-solver is the classic
//! pipeline: Householder reduction to Hessenberg form, single-shift complex QR
//! with Wilkinson shifts and deflation, then back-substitution on the
//! triangular factor.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

// Complex elementary functions through `libm` directly. The `num-complex`
// methods go through `num-traits`, whose backend flips to the platform libm
// whenever any crate in the build enables `num-traits/std`, which changes
// results in the last bit.

pub fn cabs(z: Complex64) -> f64 {
    libm::hypot(z.re, z.im)
}

pub fn cexp(z: Complex64) -> Complex64 {
    let r = libm::exp(z.re);
    Complex64::new(r * libm::cos(z.im), r * libm::sin(z.im))
}

/// Principal square root.
pub fn csqrt(z: Complex64) -> Complex64 {
    if z.re == 0.0 && z.im == 0.0 {
        return ZERO;
    }
    let t = libm::sqrt(0.5 * (libm::fabs(z.re) + cabs(z)));
    if z.re >= 0.0 {
        Complex64::new(t, z.im / (2.0 * t))
    } else {
        Complex64::new(libm::fabs(z.im) / (2.0 * t), libm::copysign(t, z.im))
    }
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(cabs(*z)))
}

/// Induced 1-norm (maximum absolute column sum).
pub fn norm1(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| cabs(*z)).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `(X + X^H) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).map(|z| z * 0.5)
}

/// Complex Schur decomposition `A = Q T Q^H` with `T` upper triangular.
///
/// Returns `None` if the QR iteration fails to converge.
pub fn complex_schur(a: &CMatrix) -> Option<(CMatrix, CMatrix)> {
    let n = a.nrows();
    let mut h = a.clone();
    let mut q = CMatrix::identity(n, n);
    if n <= 1 {
        return Some((q, h));
    }

    hessenberg_reduce(&mut h, &mut q);

    let scale = max_abs(&h).max(f64::MIN_POSITIVE);
    let eps = f64::EPSILON;
    let max_iter = 100 * n;
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;

    while hi > 0 {
        // Locate the start of the active unreduced block.
        let mut lo = hi;
        while lo > 0 {
            let sub = cabs(h[(lo, lo - 1)]);
            let diag = cabs(h[(lo, lo)]) + cabs(h[(lo - 1, lo - 1)]);
            let tol = if diag == 0.0 { eps * scale } else { eps * diag };
            if sub <= tol {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            iter = 0;
            continue;
        }

        iter += 1;
        total += 1;
        if total > max_iter {
            return None;
        }

        let shift = if iter.is_multiple_of(11) {
            // Exceptional shift to break cycles.
            h[(hi, hi)] + Complex64::new(cabs(h[(hi, hi - 1)]) * 0.75, 0.0)
        } else {
            wilkinson_shift(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };

        // Implicit single-shift QR sweep over rows/cols lo..=hi.
        let mut x = h[(lo, lo)] - shift;
        let mut y = h[(lo + 1, lo)];
        for k in lo..hi {
            let (c, s) = givens(x, y);
            // Rows k, k+1 (columns from k-1 or lo to the end).
            let col_start = if k > lo { k - 1 } else { lo };
            for j in col_start..n {
                let a0 = h[(k, j)];
                let a1 = h[(k + 1, j)];
                h[(k, j)] = a0 * c + s * a1;
                h[(k + 1, j)] = -s.conj() * a0 + a1 * c;
            }
            // Columns k, k+1 (rows 0..=min(k+2, hi)).
            let row_end = (k + 2).min(hi);
            for i in 0..=row_end {
                let a0 = h[(i, k)];
                let a1 = h[(i, k + 1)];
                h[(i, k)] = a0 * c + a1 * s.conj();
                h[(i, k + 1)] = -a0 * s + a1 * c;
            }
            for i in 0..n {
                let a0 = q[(i, k)];
                let a1 = q[(i, k + 1)];
                q[(i, k)] = a0 * c + a1 * s.conj();
                q[(i, k + 1)] = -a0 * s + a1 * c;
            }
            if k + 1 < hi {
                x = h[(k + 1, k)];
                y = h[(k + 2, k)];
            }
        }
    }

    // Clear round-off below the diagonal.
    for j in 0..n {
        for i in (j + 1)..n {
            h[(i, j)] = ZERO;
        }
    }
    Some((q, h))
}

/// Eigenvectors of an upper-triangular matrix, one per column, by
/// back-substitution. Near-zero pivots are perturbed to `eps * ||T||`,
/// which lets defective inputs surface as an ill-conditioned basis.
pub fn triangular_eigenvectors(t: &CMatrix) -> CMatrix {
    let n = t.nrows();
    let small = (f64::EPSILON * max_abs(t)).max(f64::MIN_POSITIVE);
    let mut v = CMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        v[(k, k)] = ONE;
        for i in (0..k).rev() {
            let mut acc = ZERO;
            for j in (i + 1)..=k {
                acc += t[(i, j)] * v[(j, k)];
            }
            let mut denom = t[(i, i)] - lambda;
            if cabs(denom) < small {
                denom = Complex64::new(small, 0.0);
            }
            v[(i, k)] = -acc / denom;
        }
    }
    v
}

/// Scale each column to unit 2-norm and rotate its phase so the largest
/// component is real and positive.
pub fn normalize_columns(m: &mut CMatrix) {
    for mut col in m.column_iter_mut() {
        let norm = libm::sqrt(col.iter().map(|z| z.norm_sqr()).sum::<f64>());
        if norm == 0.0 {
            continue;
        }
        let mut pivot = ZERO;
        let mut best = -1.0;
        for z in col.iter() {
            let a = cabs(*z);
            if a > best * (1.0 + 1e-12) {
                best = a;
                pivot = *z;
            }
        }
        let phase = pivot.conj() / cabs(pivot);
        for z in col.iter_mut() {
            *z = *z * phase / norm;
        }
    }
}

fn hessenberg_reduce(h: &mut CMatrix, q: &mut CMatrix) {
    let n = h.nrows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let mut v: Vec<Complex64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let alpha = libm::sqrt(v.iter().map(|z| z.norm_sqr()).sum::<f64>());
        if alpha == 0.0 {
            continue;
        }
        let x0 = v[0];
        let phase = if cabs(x0) == 0.0 { ONE } else { x0 / cabs(x0) };
        // v = x + phase * alpha * e1
        v[0] = x0 + phase * alpha;
        let vnorm = libm::sqrt(v.iter().map(|z| z.norm_sqr()).sum::<f64>());
        if vnorm == 0.0 {
            continue;
        }
        for z in v.iter_mut() {
            *z /= vnorm;
        }
        // H <- P H with P = I - 2 v v^H acting on rows k+1..n
        for j in 0..n {
            let mut dot = ZERO;
            for (r, vi) in v.iter().enumerate() {
                dot += vi.conj() * h[(k + 1 + r, j)];
            }
            for (r, vi) in v.iter().enumerate() {
                h[(k + 1 + r, j)] -= *vi * dot * 2.0;
            }
        }
        // H <- H P, Q <- Q P acting on columns k+1..n
        for mat in [&mut *h, &mut *q] {
            for i in 0..n {
                let mut dot = ZERO;
                for (r, vi) in v.iter().enumerate() {
                    dot += mat[(i, k + 1 + r)] * *vi;
                }
                for (r, vi) in v.iter().enumerate() {
                    mat[(i, k + 1 + r)] -= dot * vi.conj() * 2.0;
                }
            }
        }
        for i in (k + 2)..n {
            h[(i, k)] = ZERO;
        }
    }
}

/// Eigenvalue of the trailing 2x2 block `[[a, b], [c, d]]` closest to `d`.
fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half = (a - d) * 0.5;
    let disc = csqrt(half * half + b * c);
    let mu1 = (a + d) * 0.5 + disc;
    let mu2 = (a + d) * 0.5 - disc;
    if cabs(mu1 - d) <= cabs(mu2 - d) {
        mu1
    } else {
        mu2
    }
}

/// Rotation `G = [[c, s], [-conj(s), c]]` (real `c`) with `G [x; y] = [r; 0]`.
fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    let ax = cabs(x);
    let ay = cabs(y);
    if ay == 0.0 {
        return (1.0, ZERO);
    }
    if ax == 0.0 {
        return (0.0, y.conj() / ay);
    }
    let r = libm::hypot(ax, ay);
    let c = ax / r;
    let s = (x / ax) * y.conj() / r;
    (c, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(q: &CMatrix, t: &CMatrix) -> CMatrix {
        q * t * q.adjoint()
    }

    #[test]
    fn schur_reconstructs_rotation_matrix() {
        // Eigenvalues +-i: needs complex arithmetic throughout.
        let a = to_complex(&RMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
        let (q, t) = complex_schur(&a).unwrap();
        assert!(max_abs(&(reconstruct(&q, &t) - &a)) < 1e-12);
        assert!(t[(1, 0)].norm() == 0.0);
    }

    #[test]
    fn schur_on_dense_4x4() {
        let a = to_complex(&RMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 2.0, -1.0, 0.5, //
                0.3, -0.7, 2.0, 1.0, //
                -1.2, 0.4, 0.1, 0.0, //
                0.0, 1.5, -0.3, -2.0,
            ],
        ));
        let (q, t) = complex_schur(&a).unwrap();
        assert!(max_abs(&(reconstruct(&q, &t) - &a)) < 1e-12);
        let qq = q.adjoint() * &q;
        assert!(max_abs(&(qq - CMatrix::identity(4, 4))) < 1e-13);
        for j in 0..4 {
            for i in (j + 1)..4 {
                assert_eq!(t[(i, j)], ZERO);
            }
        }
    }

    #[test]
    fn triangular_eigenvectors_satisfy_eigen_equation() {
        let t = CMatrix::from_row_slice(
            3,
            3,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(2.0, 1.0),
                Complex64::new(-1.0, 0.0),
                ZERO,
                Complex64::new(-0.5, 0.2),
                Complex64::new(0.3, 0.0),
                ZERO,
                ZERO,
                Complex64::new(0.25, 0.0),
            ],
        );
        let v = triangular_eigenvectors(&t);
        for k in 0..3 {
            let col = v.column(k).into_owned();
            let lhs = &t * &col;
            let rhs = col.map(|z| z * t[(k, k)]);
            assert!((lhs - rhs).iter().all(|z| z.norm() < 1e-13));
        }
    }
}
