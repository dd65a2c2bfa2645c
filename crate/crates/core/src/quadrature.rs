//! Double-exponential (tanh-sinh) quadrature on a finite interval.
//!
//! Robust to integrable endpoint singularities such as `(1 - b t)^{-1/2}`
//! or `s^{r}` with fractional `r`, which is what the weight and potential
//! integrals need.

use std::f64::consts::FRAC_PI_2;

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    /// Difference between the last two refinement levels.
    pub error_estimate: f64,
    pub evaluations: usize,
}

const MAX_LEVEL: u32 = 14;
const T_MAX: f64 = 4.5;

/// Integrates `f` over `[a, b]`, refining until two successive levels agree
/// to `tol` (absolute).
pub fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Quadrature {
    tanh_sinh_with_distance(|x, _, _| f(x), a, b, tol)
}

/// Like [`tanh_sinh`], but `f(x, x - a, b - x)` also receives the distances
/// to both endpoints, computed without cancellation. Integrands singular at
/// an endpoint should be written in terms of those distances.
pub fn tanh_sinh_with_distance(
    f: impl Fn(f64, f64, f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
) -> Quadrature {
    if a == b {
        return Quadrature {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 0,
        };
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut evaluations = 0;

    // contribution of the symmetric pair of nodes at parameter t
    let pair = |t: f64, evals: &mut usize| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let cu = u.cosh();
        // 1 - tanh(u), accurate for large u
        let delta = 1.0 / (u.exp() * cu);
        let w = half * FRAC_PI_2 * t.cosh() / (cu * cu);
        if !(w.is_finite()) || w == 0.0 {
            return 0.0;
        }
        let d = half * delta;
        if d == 0.0 {
            return 0.0;
        }
        let width = b - a;
        *evals += 2;
        w * (f(b - d, width - d, d) + f(a + d, d, width - d))
    };

    let mut h = 1.0;
    let mut sum = half * FRAC_PI_2 * f(mid, half, half);
    evaluations += 1;
    let mut j = 1;
    while j as f64 * h <= T_MAX {
        sum += pair(j as f64 * h, &mut evaluations);
        j += 1;
    }
    let mut prev = sum * h;
    let mut err = f64::INFINITY;
    for level in 1..=MAX_LEVEL {
        h *= 0.5;
        let mut j = 1;
        while j as f64 * h <= T_MAX {
            sum += pair(j as f64 * h, &mut evaluations);
            j += 2;
        }
        let cur = sum * h;
        err = (cur - prev).abs();
        prev = cur;
        if level >= 3 && err <= tol {
            break;
        }
    }
    Quadrature {
        value: prev,
        error_estimate: err,
        evaluations,
    }
}
