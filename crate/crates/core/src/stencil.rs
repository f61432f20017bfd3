//! Finite-difference stencils used for sampled data and cross-checks.
//!
//! Uniform-grid work uses the classical 4th-order central stencils with
//! 2nd-order one-sided fallbacks next to corners. Scalar and vector
//! derivatives of analytic quantities use a 5-point central stencil with a
//! step chosen to balance truncation against roundoff.

use nalgebra::Vector3;

pub type Vec3 = Vector3<f64>;

/// 4th-order central first derivative on a uniform grid.
pub fn central4_first(fm2: f64, fm1: f64, fp1: f64, fp2: f64, h: f64) -> f64 {
    (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h)
}

/// 4th-order central second derivative on a uniform grid.
pub fn central4_second(fm2: f64, fm1: f64, f0: f64, fp1: f64, fp2: f64, h: f64) -> f64 {
    (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h)
}

/// 2nd-order one-sided first derivative (forward; negate `h` for backward).
pub fn onesided2_first(f0: f64, f1: f64, f2: f64, h: f64) -> f64 {
    (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h)
}

/// 1st-order one-sided second derivative (forward; h may be negative).
pub fn onesided_second(f0: f64, f1: f64, f2: f64, h: f64) -> f64 {
    (f0 - 2.0 * f1 + f2) / (h * h)
}

/// Step for 5-point differentiation of an analytic function of arclength.
///
/// Balances the O(h^4) truncation of the stencil against f64 roundoff;
/// `scale` should be a characteristic arclength of the problem.
pub fn analytic_step(scale: f64) -> f64 {
    1e-3 * scale.max(1e-6)
}

/// 5-point 4th-order first derivative of a scalar function.
pub fn deriv_scalar<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    central4_first(f(x - 2.0 * h), f(x - h), f(x + h), f(x + 2.0 * h), h)
}

/// 5-point 4th-order first derivative of a vector function.
pub fn deriv_vec3<F: Fn(f64) -> Vec3>(f: F, x: f64, h: f64) -> Vec3 {
    (f(x - 2.0 * h) - f(x - h) * 8.0 + f(x + h) * 8.0 - f(x + 2.0 * h)) / (12.0 * h)
}

/// Central first derivative with a one-sided fallback when probes on one
/// side are undefined (non-finite). Returns NaN only if both sides fail.
pub fn deriv_scalar_robust<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    let probes = [f(x - 2.0 * h), f(x - h), f(x + h), f(x + 2.0 * h)];
    if probes.iter().all(|p| p.is_finite()) {
        return central4_first(probes[0], probes[1], probes[2], probes[3], h);
    }
    let f0 = f(x);
    if probes[2].is_finite() && probes[3].is_finite() {
        return onesided2_first(f0, probes[2], probes[3], h);
    }
    if probes[1].is_finite() && probes[0].is_finite() {
        return onesided2_first(f0, probes[1], probes[0], -h);
    }
    f64::NAN
}

/// Vector version of [`deriv_scalar_robust`].
pub fn deriv_vec3_robust<F: Fn(f64) -> Vec3>(f: F, x: f64, h: f64) -> Vec3 {
    let probes = [f(x - 2.0 * h), f(x - h), f(x + h), f(x + 2.0 * h)];
    let finite = |v: &Vec3| v.iter().all(|c| c.is_finite());
    if probes.iter().all(finite) {
        return (probes[0] - probes[1] * 8.0 + probes[2] * 8.0 - probes[3]) / (12.0 * h);
    }
    let f0 = f(x);
    if finite(&probes[2]) && finite(&probes[3]) {
        return (f0 * -3.0 + probes[2] * 4.0 - probes[3]) / (2.0 * h);
    }
    if finite(&probes[1]) && finite(&probes[0]) {
        return (f0 * -3.0 + probes[1] * 4.0 - probes[0]) / (-2.0 * h);
    }
    Vec3::from_element(f64::NAN)
}

/// Quadratic Richardson extrapolation of `f` to `x0` from one side.
///
/// Samples at `x0 + s*h`, `x0 + 2*s*h`, `x0 + 3*s*h` (s = +1 approaches from
/// above, s = -1 from below) and fits the unique quadratic through them.
pub fn extrapolate_vec3<F: Fn(f64) -> Vec3>(f: F, x0: f64, h: f64, side: f64) -> Vec3 {
    let f1 = f(x0 + side * h);
    let f2 = f(x0 + 2.0 * side * h);
    let f3 = f(x0 + 3.0 * side * h);
    f1 * 3.0 - f2 * 3.0 + f3
}

/// Scalar version of [`extrapolate_vec3`].
pub fn extrapolate_scalar<F: Fn(f64) -> f64>(f: F, x0: f64, h: f64, side: f64) -> f64 {
    3.0 * f(x0 + side * h) - 3.0 * f(x0 + 2.0 * side * h) + f(x0 + 3.0 * side * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_first_is_fourth_order() {
        let f = |x: f64| x.sin();
        for &h in &[1e-1, 5e-2] {
            let d = deriv_scalar(f, 0.7, h);
            let err = (d - 0.7f64.cos()).abs();
            assert!(err < 0.5 * h.powi(4), "h={h} err={err}");
        }
    }

    #[test]
    fn onesided_first_is_second_order() {
        let f = |x: f64| x.exp();
        let h = 1e-3;
        let d = onesided2_first(f(1.0), f(1.0 + h), f(1.0 + 2.0 * h), h);
        assert!((d - 1.0f64.exp()).abs() < 5.0 * h * h);
    }

    #[test]
    fn extrapolation_recovers_smooth_limit() {
        let f = |x: f64| (2.0 * x).cos();
        let lim = extrapolate_scalar(f, 0.3, 1e-3, 1.0);
        assert!((lim - (0.6f64).cos()).abs() < 1e-8);
    }
}
