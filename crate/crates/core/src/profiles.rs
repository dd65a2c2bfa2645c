//! Initial-data families and weighted-space diagnostics.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid};

/// Parameters of the weighted space: weight power `n`, number of weighted
/// derivatives `r`, Sobolev order `M`, and the scattering regularity `s_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XNormParams {
    pub n: f64,
    pub r: u32,
    pub m: f64,
    pub s_n: f64,
}

impl XNormParams {
    /// Validates `n > 1/2`, `r >= 3`, `M >= n + r` and picks the default
    /// `s_n` (1 for `n > 3/2`, otherwise the midpoint of `(0, n - 1/2)`).
    pub fn new(n: f64, r: u32, m: f64) -> Result<Self> {
        if !(n > 0.5 && n.is_finite()) {
            return Err(Error::InvalidArgument(format!("weight power n must exceed 1/2, got {n}")));
        }
        if r < 3 {
            return Err(Error::InvalidArgument(format!("r must be at least 3, got {r}")));
        }
        if !(m >= n + r as f64) {
            return Err(Error::InvalidArgument(format!("M must be at least n + r = {}, got {m}", n + r as f64)));
        }
        Ok(Self {
            n,
            r,
            m,
            s_n: default_s_n(n),
        })
    }

    /// Overrides `s_n`; must lie in `(0, n - 1/2)` when `n <= 3/2`.
    pub fn with_s_n(mut self, s_n: f64) -> Result<Self> {
        let ok = if self.n > 1.5 {
            s_n == 1.0
        } else {
            s_n > 0.0 && s_n < self.n - 0.5
        };
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "s_n = {s_n} is not allowed for n = {}",
                self.n
            )));
        }
        self.s_n = s_n;
        Ok(self)
    }
}

/// Scattering regularity attached to the weight power `n`.
pub fn default_s_n(n: f64) -> f64 {
    if n > 1.5 {
        1.0
    } else {
        0.5 * (n - 0.5)
    }
}

/// `<x>^n = (1 + x^2)^{n/2}`.
#[inline]
pub fn japanese(x: f64, n: f64) -> f64 {
    (1.0 + x * x).powf(0.5 * n)
}

/// `A / (1 + x^2)^{n/2}`.
pub fn polynomial_decay(amplitude: f64, n: f64, grid: &Grid) -> Result<ComplexField> {
    if amplitude == 0.0 || !amplitude.is_finite() {
        return Err(Error::InvalidArgument(format!("amplitude must be non-zero, got {amplitude}")));
    }
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::InvalidArgument(format!("decay power must be positive, got {n}")));
    }
    Ok(ComplexField::from_real_fn(grid, |x| amplitude / japanese(x, n)))
}

/// Explicit ground state of `-Q + Q'' + eps Q^{alpha+1} = 0`:
/// `eps^{-1/alpha} ((alpha+2)/2)^{1/alpha} sech^{2/alpha}(alpha x / 2)`.
pub fn sech_ground_state(alpha: f64, eps: f64, grid: &Grid) -> Result<ComplexField> {
    if !(alpha > 0.0 && eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need alpha > 0 and eps > 0, got alpha = {alpha}, eps = {eps}"
        )));
    }
    let amp = eps.powf(-1.0 / alpha) * (0.5 * (alpha + 2.0)).powf(1.0 / alpha);
    Ok(ComplexField::from_real_fn(grid, |x| {
        amp * sech(0.5 * alpha * x).powf(2.0 / alpha)
    }))
}

/// Upper end of the admissible frequency interval for the double ground
/// state: `eps1^2/|eps2| (alpha1+1)/(alpha1+2)^2`.
pub fn double_omega_max(alpha1: f64, eps1: f64, eps2: f64) -> f64 {
    eps1 * eps1 / eps2.abs() * (alpha1 + 1.0) / ((alpha1 + 2.0) * (alpha1 + 2.0))
}

/// Explicit ground state of
/// `-omega Q + Q'' + eps1 Q^{alpha1+1} + eps2 Q^{2 alpha1+1} = 0` with `eps2 < 0`.
pub fn double_ground_state(
    alpha1: f64,
    eps1: f64,
    eps2: f64,
    omega: f64,
    grid: &Grid,
) -> Result<ComplexField> {
    if !(alpha1 > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha1 must be positive, got {alpha1}")));
    }
    if !(eps2 < 0.0) {
        return Err(Error::InvalidArgument(format!("eps2 must be negative, got {eps2}")));
    }
    if !(eps1 > 0.0) {
        return Err(Error::InvalidArgument(format!("eps1 must be positive, got {eps1}")));
    }
    let upper = double_omega_max(alpha1, eps1, eps2);
    if !(omega > 0.0 && omega < upper) {
        return Err(Error::InadmissibleOmega { omega, upper });
    }
    let a = eps1 / (alpha1 + 2.0);
    let b = eps2 / (alpha1 + 1.0);
    let root = (a * a + b * omega).sqrt();
    let k = alpha1 * omega.sqrt();
    Ok(ComplexField::from_real_fn(grid, |x| {
        (omega / (a + root * (k * x).cosh())).powf(1.0 / alpha1)
    }))
}

/// Multiplies by `e^{i b x^2 / 4}`.
pub fn quadratic_phase(u: &ComplexField, b: f64) -> ComplexField {
    if b == 0.0 {
        return u.clone();
    }
    let values = u
        .values()
        .iter()
        .zip(u.grid().x())
        .map(|(v, &x)| v * C64::from_polar(1.0, 0.25 * b * x * x))
        .collect();
    u.with_values(values)
}

/// `||<x>^n u||_inf + sum_{k=1}^r ||<x>^n d^k u||_2 + ||J^M u||_2`.
pub fn x_norm(u: &ComplexField, p: &XNormParams) -> f64 {
    let grid = u.grid();
    let weighted_sup = u
        .values()
        .iter()
        .zip(grid.x())
        .map(|(v, &x)| japanese(x, p.n) * v.norm())
        .fold(0.0, f64::max);
    let derivatives: f64 = (1..=p.r)
        .map(|k| {
            let d = u.derivative(k);
            let weighted: Vec<C64> = d
                .values()
                .iter()
                .zip(grid.x())
                .map(|(v, &x)| v * japanese(x, p.n))
                .collect();
            grid.l2_norm(&weighted)
        })
        .sum();
    weighted_sup + derivatives + u.bessel(p.m).l2_norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfimumCertificate {
    pub n: f64,
    /// Grid minimum of `<x>^n |u|`.
    pub lambda: f64,
    /// Node where the minimum is attained.
    pub argmin: f64,
    /// Smaller of the two boundary values, a proxy for the limit at infinity.
    pub asymptotic: f64,
    pub passes: bool,
}

/// Grid infimum of `<x>^n |u|`, checked against `lambda0`.
pub fn infimum_certificate(u: &ComplexField, n: f64, lambda0: f64) -> InfimumCertificate {
    let x = u.grid().x();
    let weighted: Vec<f64> = u
        .values()
        .iter()
        .zip(x)
        .map(|(v, &x)| japanese(x, n) * v.norm())
        .collect();
    let (idx, lambda) = weighted
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, w)| if w < acc.1 { (i, w) } else { acc });
    let asymptotic = weighted[0].min(weighted[weighted.len() - 1]);
    InfimumCertificate {
        n,
        lambda,
        argmin: x[idx],
        asymptotic,
        passes: lambda >= lambda0 && asymptotic >= lambda0,
    }
}

/// Centered Gaussian `h e^{-x^2}`, the default ground-state seed.
pub fn gaussian(height: f64, grid: &Grid) -> ComplexField {
    ComplexField::from_real_fn(grid, |x| height * (-x * x).exp())
}

fn sech(x: f64) -> f64 {
    // 1/cosh overflows gracefully to 0
    1.0 / x.cosh()
}
