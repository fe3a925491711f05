use alloc::vec::Vec;

use super::{lyapunov_solve, matrix_exp, OracleError};
use crate::gauss_markov::{LinearSystem, ModelError};

const ABS_TOL: f64 = 1e-9;
const REL_TOL: f64 = 1e-11;
const MAX_INTERVALS: usize = 20_000;

// Kronrod nodes on [0, 1] (the rule is symmetric); odd indices are the
// 7-point Gauss nodes.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One 7/15-point Gauss-Kronrod panel: `(kronrod estimate, |kronrod - gauss|)`.
fn panel<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]`.
///
/// Panels are bisected until each error estimate is below its share of
/// `max(abs_tol, rel_tol * |integral|)`.
pub fn gauss_kronrod<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64, OracleError> {
    if a == b {
        return Ok(0.0);
    }
    let (whole, _) = panel(&mut f, a, b);
    if !whole.is_finite() {
        return Ok(whole);
    }
    let tol = abs_tol.max(rel_tol * whole.abs());
    let width = b - a;
    let mut total = 0.0;
    let mut stack: Vec<(f64, f64)> = alloc::vec![(a, b)];
    let mut panels = 0usize;
    while let Some((lo, hi)) = stack.pop() {
        panels += 1;
        if panels > MAX_INTERVALS {
            return Err(OracleError::QuadratureDiverged);
        }
        let (est, err) = panel(&mut f, lo, hi);
        let share = tol * (hi - lo) / width;
        if err <= share || hi - lo <= 1e-12 * width {
            total += est;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi));
            stack.push((lo, mid));
        }
    }
    Ok(total)
}

/// `L(tau_lo, tau_hi)` by quadrature of the instantaneous error
/// `tr{S - e^{A t} S e^{A^T t}}`, with `S` from the dense steady-state solve.
pub fn quadrature_l(system: &LinearSystem, tau_lo: f64, tau_hi: f64) -> Result<f64, OracleError> {
    if !(tau_lo >= 0.0 && tau_lo <= tau_hi) {
        return Err(ModelError::InvalidInterval {
            lo: tau_lo,
            hi: tau_hi,
        }
        .into());
    }
    if tau_lo == tau_hi {
        return Ok(0.0);
    }
    let s = lyapunov_solve(system)?;
    let a = system.drift();
    let trace_s = s.trace();
    let integrand = |t: f64| {
        let e = matrix_exp(&(a * t));
        trace_s - (&e * &s * e.transpose()).trace()
    };
    gauss_kronrod(integrand, tau_lo, tau_hi, ABS_TOL, REL_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_weights_integrate_constants() {
        let k: f64 = WGK[7] + 2.0 * WGK[..7].iter().sum::<f64>();
        let g: f64 = WG[3] + 2.0 * WG[..3].iter().sum::<f64>();
        assert!((k - 2.0).abs() < 1e-15);
        assert!((g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn panel_is_exact_for_high_degree_polynomials() {
        // Gauss-7 is exact to degree 13, Kronrod-15 to degree 22.
        let (k, err) = panel(&mut |x: f64| libm::pow(x, 12.0), -1.0, 1.0);
        assert!((k - 2.0 / 13.0).abs() < 1e-15);
        assert!(err < 1e-15);
        let (k, _) = panel(&mut |x: f64| libm::pow(x, 22.0), 0.0, 1.0);
        assert!((k - 1.0 / 23.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_sharp_features() {
        let v = gauss_kronrod(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12, 1e-13).unwrap();
        let exact = 2.0 * libm::atan(1.0 / 1e-2) / 1e-2;
        assert!((v - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn scalar_closed_form() {
        let sys = LinearSystem::scalar(-0.5, 1.0).unwrap();
        let v = quadrature_l(&sys, 0.0, 1.0).unwrap();
        assert!((v - libm::exp(-1.0)).abs() < 1e-12);
        assert_eq!(quadrature_l(&sys, 2.0, 2.0).unwrap(), 0.0);
    }
}
