//! Uniform periodic grid, its Fourier dual and Fourier-multiplier operators.
//!
//! Nodes are `x_j = -L + j dx`, `j = 0..N`, with `dx = 2L/N`. Transforms are
//! unnormalized forward / `1/N`-scaled inverse, so applying a symbol `m(xi)`
//! to a field is `ifft(m * fft(f))`. Frequencies are stored internally in
//! FFT order; [`Grid::xi_sorted`] exposes them ascending.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Spatial discretization of `d^2/dx^2` used by the time steppers.
///
/// Both are diagonal in the Fourier basis of the periodic grid, so the
/// steppers only ever need the symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Spectral,
    /// Second-order centered difference `(u_{j+1} - 2u_j + u_{j-1}) / dx^2`.
    FiniteDifference,
}

impl Backend {
    /// Symbol of `d^2/dx^2` at frequency `xi`.
    pub fn laplacian_symbol(self, xi: f64, dx: f64) -> f64 {
        match self {
            Backend::Spectral => -xi * xi,
            Backend::FiniteDifference => {
                let s = (0.5 * xi * dx).sin();
                -4.0 * s * s / (dx * dx)
            }
        }
    }
}

struct GridInner {
    half_width: f64,
    n: usize,
    dx: f64,
    x: Vec<f64>,
    xi: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

/// `sum |u_j|^2` with Neumaier compensation.
pub fn norm_sqr_sum(u: &[C64]) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in u {
        for x in [v.re * v.re, v.im * v.im] {
            let t = sum + x;
            comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
            sum = t;
        }
    }
    sum + comp
}

/// Immutable periodic grid on `[-L, L)`; cheap to clone and share.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("L", &self.inner.half_width)
            .field("N", &self.inner.n)
            .field("dx", &self.inner.dx)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.n == other.inner.n && self.inner.half_width == other.inner.half_width)
    }
}

impl Grid {
    /// Builds the grid with half-width `half_width` (`L`) and `n` nodes.
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!("L must be positive, got {half_width}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "N must be a power of two >= 8, got {n}"
            )));
        }
        let dx = 2.0 * half_width / n as f64;
        let x = (0..n).map(|j| -half_width + j as f64 * dx).collect();
        let k0 = PI / half_width;
        let xi = (0..n)
            .map(|m| {
                let m = if m < n / 2 { m as i64 } else { m as i64 - n as i64 };
                k0 * m as f64
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(Self {
            inner: Arc::new(GridInner {
                half_width,
                n,
                dx,
                x,
                xi,
                fwd,
                inv,
            }),
        })
    }

    pub fn half_width(&self) -> f64 {
        self.inner.half_width
    }

    pub fn len(&self) -> usize {
        self.inner.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.inner.dx
    }

    pub fn x(&self) -> &[f64] {
        &self.inner.x
    }

    /// Dual frequencies in FFT order (`0, 1, ..., N/2-1, -N/2, ..., -1`) times `pi/L`.
    pub fn xi(&self) -> &[f64] {
        &self.inner.xi
    }

    /// Dual frequencies in ascending order, `-N/2 .. N/2-1` times `pi/L`.
    pub fn xi_sorted(&self) -> Vec<f64> {
        let n = self.len();
        let mut out = Vec::with_capacity(n);
        out.extend_from_slice(&self.inner.xi[n / 2..]);
        out.extend_from_slice(&self.inner.xi[..n / 2]);
        out
    }

    /// Largest resolved frequency magnitude, `pi/dx`.
    pub fn xi_max(&self) -> f64 {
        PI / self.dx()
    }

    pub fn forward_in_place(&self, values: &mut [C64]) {
        self.inner.fwd.process(values);
    }

    pub fn inverse_in_place(&self, values: &mut [C64]) {
        self.inner.inv.process(values);
        let scale = 1.0 / self.len() as f64;
        values.iter_mut().for_each(|v| *v *= scale);
    }

    pub fn forward(&self, values: &[C64]) -> Vec<C64> {
        let mut out = values.to_vec();
        self.forward_in_place(&mut out);
        out
    }

    pub fn inverse(&self, spectrum: &[C64]) -> Vec<C64> {
        let mut out = spectrum.to_vec();
        self.inverse_in_place(&mut out);
        out
    }

    /// Samples a symbol `xi -> m(xi)` in FFT order.
    pub fn symbol(&self, m: impl Fn(f64) -> C64) -> Vec<C64> {
        self.inner.xi.iter().map(|&xi| m(xi)).collect()
    }

    /// In-place `ifft(symbol * fft(values))`.
    pub fn apply_symbol_in_place(&self, values: &mut [C64], symbol: &[C64]) {
        debug_assert_eq!(symbol.len(), self.len());
        self.forward_in_place(values);
        values.iter_mut().zip(symbol).for_each(|(v, s)| *v *= s);
        self.inverse_in_place(values);
    }

    /// Rectangle-rule `L^2` norm, `sqrt(dx * sum |u_j|^2)`.
    pub fn l2_norm(&self, values: &[C64]) -> f64 {
        (self.dx() * norm_sqr_sum(values)).sqrt()
    }

    /// The same norm evaluated from the spectrum through Parseval.
    pub fn l2_norm_spectral(&self, values: &[C64]) -> f64 {
        let spec = self.forward(values);
        let n = self.len() as f64;
        (self.dx() / n * spec.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Periodic second-order centered difference Laplacian.
    pub fn fd_laplacian(&self, values: &[C64]) -> Vec<C64> {
        let n = values.len();
        let h2 = 1.0 / (self.dx() * self.dx());
        (0..n)
            .map(|j| {
                let l = values[(j + n - 1) % n];
                let r = values[(j + 1) % n];
                (l - 2.0 * values[j] + r) * h2
            })
            .collect()
    }

    /// Evaluates the band-limited (trigonometric) interpolant of `values` at
    /// arbitrary `points`. The Nyquist mode is split symmetrically so the
    /// interpolant of real data is real. Cost is `O(N * points.len())`.
    pub fn interpolate(&self, values: &[C64], points: &[f64]) -> Vec<C64> {
        let n = self.len();
        let spec = self.forward(values);
        let half = n / 2;
        let l = self.half_width();
        let inv_n = 1.0 / n as f64;
        points
            .par_iter()
            .map(|&y| {
                let theta = PI * (y + l) / l;
                let step = C64::from_polar(1.0, theta);
                let mut acc = spec[0];
                let mut ph = C64::new(1.0, 0.0);
                for m in 1..half {
                    if m % 64 == 0 {
                        ph = C64::from_polar(1.0, theta * m as f64);
                    } else {
                        ph *= step;
                    }
                    acc += spec[m] * ph + spec[n - m] * ph.conj();
                }
                acc += spec[half] * (theta * half as f64).cos();
                acc * inv_n
            })
            .collect()
    }
}

/// Complex samples of `u(., t)` on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<C64>,
    time: f64,
}

impl ComplexField {
    /// Wraps `values`; rejects a length mismatch or any non-finite sample.
    pub fn new(grid: Grid, values: Vec<C64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} samples, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        let field = Self { grid, values, time };
        field.check_finite()?;
        Ok(field)
    }

    /// Wraps `values` without the finiteness check (blow-up records keep
    /// their last state even if it overflowed).
    pub(crate) fn new_unchecked(grid: Grid, values: Vec<C64>, time: f64) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values, time }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> C64) -> Self {
        let values = grid.x().iter().map(|&x| f(x)).collect();
        Self {
            grid: grid.clone(),
            values,
            time: 0.0,
        }
    }

    pub fn from_real_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| C64::new(f(x), 0.0))
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::from_fn(grid, |_| C64::new(0.0, 0.0))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn with_values(&self, values: Vec<C64>) -> Self {
        Self::new_unchecked(self.grid.clone(), values, self.time)
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.check_finite().is_ok()
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        self.grid.l2_norm(&self.values)
    }

    pub fn modulus(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn scale(&self, c: C64) -> Self {
        self.with_values(self.values.iter().map(|v| v * c).collect())
    }

    pub fn conj(&self) -> Self {
        self.with_values(self.values.iter().map(|v| v.conj()).collect())
    }

    /// `self - other` sample by sample.
    pub fn sub(&self, other: &ComplexField) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self.with_values(
            self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        ))
    }

    /// Maximum pointwise distance to `other`.
    pub fn sup_distance(&self, other: &ComplexField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `ifft(m(xi) * fft(f))`.
    pub fn apply_multiplier(&self, m: impl Fn(f64) -> C64) -> Self {
        let symbol = self.grid.symbol(m);
        let mut values = self.values.clone();
        self.grid.apply_symbol_in_place(&mut values, &symbol);
        self.with_values(values)
    }

    /// Spectral `d^k/dx^k`, symbol `(i xi)^k`.
    pub fn derivative(&self, k: u32) -> Self {
        self.apply_multiplier(|xi| C64::new(0.0, xi).powu(k))
    }

    /// Bessel potential `J^s`, symbol `<xi>^s`.
    pub fn bessel(&self, s: f64) -> Self {
        self.apply_multiplier(|xi| C64::new((1.0 + xi * xi).powf(0.5 * s), 0.0))
    }

    /// Riesz potential `D^s`, symbol `|xi|^s`.
    pub fn riesz(&self, s: f64) -> Self {
        self.apply_multiplier(|xi| C64::new(if xi == 0.0 { 0.0 } else { xi.abs().powf(s) }, 0.0))
    }

    /// Free Schrödinger group `e^{it d_x^2}`, symbol `e^{-i t xi^2}`.
    pub fn free_propagate(&self, t: f64) -> Self {
        if t == 0.0 {
            return self.clone();
        }
        self.apply_multiplier(|xi| C64::from_polar(1.0, -t * xi * xi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(grid: &Grid) -> ComplexField {
        ComplexField::from_real_fn(grid, |x| (-x * x).exp())
    }

    #[test]
    fn preset_grid_spacings() {
        let cases = [
            (10.0 * PI, 1 << 12, 0.0153),
            (150.0 * PI, 1 << 16, 0.0144),
            (100.0 * PI, 1 << 14, 0.0383),
        ];
        for (l, n, dx) in cases {
            let g = Grid::new(l, n).unwrap();
            assert!((g.dx() - dx).abs() < 5e-5, "dx = {}", g.dx());
            assert!((g.dx() * n as f64 - 2.0 * l).abs() <= 2.0 * l * f64::EPSILON);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(1.0, 100).is_err());
        assert!(Grid::new(1.0, 4).is_err());
        assert!(Grid::new(0.0, 64).is_err());
        assert!(Grid::new(-1.0, 64).is_err());
    }

    #[test]
    fn nodes_and_frequencies() {
        let g = Grid::new(5.0, 64).unwrap();
        assert!(g.x().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(g.x()[0], -5.0);
        let sorted = g.xi_sorted();
        assert!(sorted.windows(2).all(|w| w[1] > w[0]));
        assert!((sorted[0] + g.xi_max()).abs() < 1e-12);
        assert!((sorted[63] - (g.xi_max() - PI / 5.0)).abs() < 1e-12);
    }

    #[test]
    fn identity_symbol() {
        let g = Grid::new(10.0 * PI, 1 << 10).unwrap();
        let f = gaussian(&g);
        let h = f.apply_multiplier(|_| C64::new(1.0, 0.0));
        assert!(f.sup_distance(&h) < 1e-14);
    }

    #[test]
    fn plane_wave_is_eigenfunction() {
        let g = Grid::new(10.0, 256).unwrap();
        let xi0 = 7.0 * PI / 10.0;
        let f = ComplexField::from_fn(&g, |x| C64::from_polar(1.0, xi0 * x));
        let s = 1.7;
        let h = f.bessel(s);
        let scale = (1.0 + xi0 * xi0).powf(0.5 * s);
        assert!(h.sup_distance(&f.scale(C64::new(scale, 0.0))) < 1e-11);
    }

    #[test]
    fn spectral_derivative_of_gaussian() {
        let g = Grid::new(10.0 * PI, 1 << 12).unwrap();
        let d = gaussian(&g).derivative(1);
        let err = g
            .x()
            .iter()
            .zip(d.values())
            .map(|(&x, v)| (v - C64::new(-2.0 * x * (-x * x).exp(), 0.0)).norm())
            .fold(0.0, f64::max);
        assert!(err <= 1e-10, "err = {err:e}");
    }

    #[test]
    fn free_propagation_matches_closed_form_gaussian() {
        let g = Grid::new(10.0 * PI, 1 << 12).unwrap();
        let t = 0.5;
        let u = gaussian(&g).free_propagate(t);
        let denom = C64::new(1.0, 4.0 * t);
        let err = g
            .x()
            .iter()
            .zip(u.values())
            .map(|(&x, v)| {
                let exact = denom.powf(-0.5) * (-x * x / denom).exp();
                (v - exact).norm()
            })
            .fold(0.0, f64::max);
        assert!(err <= 1e-9, "err = {err:e}");
    }

    #[test]
    fn free_propagation_is_unitary_and_identity_at_zero() {
        let g = Grid::new(10.0 * PI, 1 << 10).unwrap();
        let f = gaussian(&g);
        assert_eq!(f.free_propagate(0.0), f);
        let u = f.free_propagate(1.7);
        assert!((u.l2_norm() - f.l2_norm()).abs() / f.l2_norm() < 1e-12);
    }

    #[test]
    fn fd_symbol_matches_stencil() {
        let g = Grid::new(3.0, 128).unwrap();
        let f = ComplexField::from_fn(&g, |x| C64::new((-x * x).exp(), (x / 3.0).sin() * 0.2));
        let direct = g.fd_laplacian(f.values());
        let dx = g.dx();
        let via_symbol = f.apply_multiplier(|xi| C64::new(Backend::FiniteDifference.laplacian_symbol(xi, dx), 0.0));
        let err = direct
            .iter()
            .zip(via_symbol.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "err = {err:e}");
    }

    #[test]
    fn interpolation_reproduces_nodes_and_smooth_functions() {
        let g = Grid::new(10.0, 256).unwrap();
        let f = ComplexField::from_fn(&g, |x| C64::new((-x * x).exp(), 0.5 * (-(x - 1.0).powi(2)).exp()));
        let at_nodes = g.interpolate(f.values(), g.x());
        let err = at_nodes
            .iter()
            .zip(f.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "node err = {err:e}");
        let pts: Vec<f64> = (0..97).map(|k| -7.3 + 0.151 * k as f64).collect();
        let vals = g.interpolate(f.values(), &pts);
        for (y, v) in pts.iter().zip(vals) {
            let exact = C64::new((-y * y).exp(), 0.5 * (-(y - 1.0).powi(2)).exp());
            assert!((v - exact).norm() < 1e-12);
        }
    }

    #[test]
    fn non_finite_fields_are_rejected() {
        let g = Grid::new(1.0, 8).unwrap();
        let mut v = vec![C64::new(0.0, 0.0); 8];
        v[3] = C64::new(f64::NAN, 0.0);
        assert!(matches!(ComplexField::new(g, v, 0.0), Err(Error::NonFinite { index: 3 })));
    }
}
