//! Time integration of `i u_t + u_xx + N(|u|) u = 0` and of its
//! pseudo-conformally transformed, non-autonomous form
//! `i v_t + v_xx + N_1(t, |v|) v = 0` with
//! `N_1(t, s) = sum_k d_k (1 - b t)^{alpha_k/2 - 2} s^{alpha_k}
//!            = (1 - b t)^{-2} N((1 - b t)^{1/2} s)`.

use std::fmt;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::grid::{Backend, ComplexField, Grid};
use crate::nonlinearity::{Family, SeriesNonlinearity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stepper {
    /// Two-stage Gauss-Legendre implicit Runge-Kutta (order 4).
    Irk4,
    /// Strang splitting: half linear flow, nonlinear phase, half linear flow.
    SplitStep,
}

impl fmt::Display for Stepper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stepper::Irk4 => "irk4",
            Stepper::SplitStep => "split_step",
        })
    }
}

/// The transformed equation is integrated up to `(1 - ENDPOINT_GAP) / b`.
pub const ENDPOINT_GAP: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub stepper: Stepper,
    pub series: SeriesNonlinearity,
    pub backend: Backend,
    /// Switches on the `(1 - bt)` weights of the transformed equation.
    pub nonautonomous_b: Option<f64>,
    /// Steps between trajectory records.
    pub diagnostics_stride: usize,
    /// Blow-up when `||u||_inf >= blowup_factor * ||u_0||_inf`.
    pub blowup_factor: f64,
    /// Consecutive step halvings allowed after a rejected implicit step.
    pub max_halvings: u32,
    /// Relative tolerance for the implicit stage equations.
    pub stage_tol: f64,
    pub track_energy: bool,
    /// Weight power for `||<x>^n u||_inf` in the records.
    pub weight_n: Option<f64>,
    /// Keep a copy of the field every this many steps.
    pub snapshot_stride: Option<usize>,
    /// Blow-up when the fraction of spectral mass above `2/3` of the
    /// largest wavenumber exceeds this (or ten times its initial value,
    /// if larger): the solution has collapsed below the grid scale.
    pub resolution_tol: Option<f64>,
}

impl SimConfig {
    pub fn new(series: SeriesNonlinearity, stepper: Stepper, dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            stepper,
            series,
            backend: Backend::Spectral,
            nonautonomous_b: None,
            diagnostics_stride: 10,
            blowup_factor: 50.0,
            max_halvings: 6,
            stage_tol: 1e-14,
            track_energy: true,
            weight_n: None,
            snapshot_stride: None,
            resolution_tol: Some(1e-8),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.diagnostics_stride == 0 {
            return bad("diagnostics_stride must be at least 1".into());
        }
        if self.snapshot_stride == Some(0) {
            return bad("snapshot_stride must be at least 1".into());
        }
        if !(self.blowup_factor > 1.0) {
            return bad(format!("blowup_factor must exceed 1, got {}", self.blowup_factor));
        }
        if self.resolution_tol.is_some_and(|r| !(r > 0.0 && r < 1.0)) {
            return bad("resolution_tol must lie in (0, 1)".into());
        }
        if !(self.stage_tol > 0.0) {
            return bad(format!("stage_tol must be positive, got {}", self.stage_tol));
        }
        if let Some(b) = self.nonautonomous_b {
            if b == 0.0 || !b.is_finite() {
                return bad(format!("nonautonomous b must be non-zero, got {b}"));
            }
            if b > 0.0 && self.t_end > 1.0 / b {
                return bad(format!(
                    "t_end = {} exceeds 1/b = {} for the transformed equation",
                    self.t_end,
                    1.0 / b
                ));
            }
        }
        Ok(())
    }

    /// `t_end`, pulled back from the singular endpoint `1/b` if needed.
    pub fn effective_t_end(&self) -> f64 {
        match self.nonautonomous_b {
            Some(b) if b > 0.0 => self.t_end.min((1.0 - ENDPOINT_GAP) / b),
            _ => self.t_end,
        }
    }

    /// Energy is only conserved for the autonomous equation with real
    /// coefficients.
    pub fn energy_is_tracked(&self) -> bool {
        self.track_energy && self.nonautonomous_b.is_none() && self.series.has_real_coefficients()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowupCause {
    /// `||u||_inf` crossed the configured multiple of `||u_0||_inf`.
    Amplitude,
    NonFinite,
    /// Implicit stages kept failing through every step halving.
    StepRejection,
    /// Spectral mass reached the top of the resolved band.
    Unresolved,
}

impl fmt::Display for BlowupCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlowupCause::Amplitude => "amplitude threshold",
            BlowupCause::NonFinite => "non-finite field",
            BlowupCause::StepRejection => "step rejection",
            BlowupCause::Unresolved => "collapse below grid scale",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Blowup {
    pub t: f64,
    pub cause: BlowupCause,
    /// `||u||_inf` of the last finite field.
    pub linf: f64,
}

impl From<Blowup> for Error {
    fn from(b: Blowup) -> Self {
        Error::BlowupDetected {
            t: b.t,
            cause: b.cause.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Final field, or the last finite one on blow-up.
    pub field: ComplexField,
    pub records: Vec<TrajectoryRecord>,
    pub blowup: Option<Blowup>,
    pub snapshots: Vec<ComplexField>,
    pub steps: usize,
}

impl Trajectory {
    pub fn t_reached(&self) -> f64 {
        self.field.time()
    }
}

// ---------------------------------------------------------------------------
// Nonlinear rate with optional (1 - bt) weights
// ---------------------------------------------------------------------------

const GL3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_3, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

const GL5: [(f64, f64); 5] = [
    (0.046_910_077_030_668_0, 0.118_463_442_528_094_5),
    (0.230_765_344_947_158_5, 0.239_314_335_249_683_2),
    (0.5, 0.284_444_444_444_444_4),
    (0.769_234_655_052_841_5, 0.239_314_335_249_683_2),
    (0.953_089_922_969_332_0, 0.118_463_442_528_094_5),
];

/// `int (1 - b tau)^p d tau` over `[t0, t1]`.
pub fn weight_integral(p: f64, b: f64, t0: f64, t1: f64) -> f64 {
    let a0 = 1.0 - b * t0;
    let a1 = 1.0 - b * t1;
    if p == -1.0 {
        (a0 / a1).ln() / b
    } else {
        (a0.powf(p + 1.0) - a1.powf(p + 1.0)) / (b * (p + 1.0))
    }
}

/// How to integrate the nonlinear phase over one split step.
enum PhaseRule {
    /// `sum_k c_k s^{alpha_k} + c_0` with pre-integrated coefficients.
    Exact { terms: Vec<(C64, f64)>, constant: C64 },
    /// `sum_i w_i N(a_i s)`: quadrature in time of `tau^{-2} N(tau^{1/2} s)`.
    Nodes(Vec<(f64, f64)>),
}

#[derive(Debug, Clone)]
struct Rate {
    series: SeriesNonlinearity,
    b: Option<f64>,
}

impl Rate {
    /// `N_1(t, s)`.
    #[inline]
    fn value(&self, t: f64, s: f64) -> C64 {
        match self.b {
            None => self.series.eval(s),
            Some(b) => {
                let tau = 1.0 - b * t;
                self.series.eval(tau.sqrt() * s) / (tau * tau)
            }
        }
    }

    fn phase_rule(&self, t0: f64, t1: f64) -> PhaseRule {
        let dt = t1 - t0;
        let Some(b) = self.b else {
            return PhaseRule::Nodes(vec![(dt, 1.0)]);
        };
        if let Family::FiniteSum(terms) = self.series.family() {
            return PhaseRule::Exact {
                terms: terms
                    .iter()
                    .map(|t| (t.coeff * weight_integral(0.5 * t.alpha - 2.0, b, t0, t1), t.alpha))
                    .collect(),
                constant: C64::new(self.series.constant() * weight_integral(-2.0, b, t0, t1), 0.0),
            };
        }
        let node = |t: f64, w: f64| {
            let tau = 1.0 - b * t;
            (w / (tau * tau), tau.sqrt())
        };
        let near = 1.0 - b * t1;
        let span = b * dt;
        if b < 0.0 || near >= span {
            return PhaseRule::Nodes(GL3.iter().map(|&(c, w)| node(t0 + c * dt, w * dt)).collect());
        }
        // geometric grading towards the singular endpoint tau = 0
        let mut nodes = Vec::new();
        let mut lo = near;
        let top = near + span;
        while lo < top {
            let hi = (1.5 * lo).min(top);
            // tau in [lo, hi] corresponds to t in [(1-hi)/b, (1-lo)/b]
            let (ta, tb) = ((1.0 - hi) / b, (1.0 - lo) / b);
            for &(c, w) in &GL5 {
                nodes.push(node(ta + c * (tb - ta), w * (tb - ta)));
            }
            lo = hi;
        }
        PhaseRule::Nodes(nodes)
    }
}

fn apply_phase(rule: &PhaseRule, series: &SeriesNonlinearity, u: &mut [C64]) {
    let i = C64::new(0.0, 1.0);
    match rule {
        PhaseRule::Exact { terms, constant } => {
            u.par_iter_mut().for_each(|v| {
                let s = v.norm();
                let theta: C64 = terms
                    .iter()
                    .map(|(c, a)| c * crate::nonlinearity::pow_pos(s, *a))
                    .sum::<C64>()
                    + constant;
                *v *= (i * theta).exp();
            });
        }
        PhaseRule::Nodes(nodes) => {
            u.par_iter_mut().for_each(|v| {
                let s = v.norm();
                let theta: C64 = nodes.iter().map(|&(w, a)| w * series.eval(a * s)).sum();
                *v *= (i * theta).exp();
            });
        }
    }
}

// ---------------------------------------------------------------------------
// Steppers
// ---------------------------------------------------------------------------

const SQRT3: f64 = 1.732_050_807_568_877_2;
const GAUSS_A: [[f64; 2]; 2] = [
    [0.25, 0.25 - SQRT3 / 6.0],
    [0.25 + SQRT3 / 6.0, 0.25],
];
const GAUSS_C: [f64; 2] = [0.5 - SQRT3 / 6.0, 0.5 + SQRT3 / 6.0];

/// `b^T A^{-1}` for the Gauss tableau: `u_{n+1} = u_n + sum_j d_j (Y_j - u_n)`.
fn gauss_update_weights() -> [f64; 2] {
    let a = GAUSS_A;
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let inv = [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]];
    [
        0.5 * (inv[0][0] + inv[1][0]),
        0.5 * (inv[0][1] + inv[1][1]),
    ]
}

/// Reason an implicit step was rejected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Rejected;

const MAX_SWEEPS: usize = 50;

/// Reusable stepping machinery for one grid and nonlinearity.
#[derive(Debug)]
pub struct Integrator {
    grid: Grid,
    rate: Rate,
    /// `lap(xi)`, the Laplacian symbol of the chosen backend.
    lap: Vec<f64>,
    stage_tol: f64,
    split_cache: Vec<(f64, Vec<C64>)>,
    /// Log of the norm correction not yet applied by `linear_flow`.
    norm_debt: f64,
    irk_cache: Vec<(f64, Vec<[C64; 4]>)>,
    update: [f64; 2],
    /// Sweeps and Newton iterations of the last implicit step.
    pub last_sweeps: usize,
    pub last_newton: usize,
}

impl Integrator {
    pub fn new(grid: &Grid, series: &SeriesNonlinearity, backend: Backend, b: Option<f64>) -> Self {
        let dx = grid.dx();
        Self {
            grid: grid.clone(),
            rate: Rate {
                series: series.clone(),
                b,
            },
            lap: grid.xi().iter().map(|&xi| backend.laplacian_symbol(xi, dx)).collect(),
            stage_tol: 1e-14,
            split_cache: Vec::new(),
            norm_debt: 0.0,
            irk_cache: Vec::new(),
            update: gauss_update_weights(),
            last_sweeps: 0,
            last_newton: 0,
        }
    }

    pub fn with_stage_tol(mut self, tol: f64) -> Self {
        self.stage_tol = tol;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Linear flow `e^{i h lap}` in place.
    fn linear_flow(&mut self, u: &mut [C64], h: f64) {
        let idx = match self.split_cache.iter().position(|(c, _)| *c == h) {
            Some(i) => i,
            None => {
                if self.split_cache.len() >= 3 {
                    self.split_cache.remove(0);
                }
                self.split_cache.push((h, self.lap.iter().map(|&l| C64::from_polar(1.0, h * l)).collect()));
                self.split_cache.len() - 1
            }
        };
        let before = crate::grid::norm_sqr_sum(u);
        self.grid.forward_in_place(u);
        for (v, m) in u.iter_mut().zip(&self.split_cache[idx].1) {
            *v *= m;
        }
        self.grid.inverse_in_place(u);
        self.settle_norm(before, u);
    }

    /// Both split substeps preserve `sum |u|^2` exactly; rounding does not,
    /// and its bias accumulates over many steps. The correction is banked
    /// and applied once it exceeds what scaling by a factor within a few
    /// ulps of 1 could apply without a bias of its own.
    fn settle_norm(&mut self, before: f64, u: &mut [C64]) {
        let after = crate::grid::norm_sqr_sum(u);
        if after > 0.0 {
            let d = 0.5 * (before / after).ln();
            if d.abs() < 1e-10 {
                self.norm_debt += d;
                if self.norm_debt.abs() > 1e-14 {
                    let f = self.norm_debt.exp();
                    u.iter_mut().for_each(|v| *v *= f);
                    self.norm_debt = 0.0;
                }
            }
        }
    }

    /// Fraction of `sum |u_hat|^2` carried by `|xi| > 2/3 xi_max`.
    pub fn spectral_tail(&self, u: &[C64]) -> f64 {
        let spec = self.grid.forward(u);
        let cut = 2.0 / 3.0 * self.grid.xi_max();
        let (mut top, mut all) = (0.0, 0.0);
        for (v, xi) in spec.iter().zip(self.grid.xi()) {
            let e = v.norm_sqr();
            all += e;
            if xi.abs() > cut {
                top += e;
            }
        }
        if all > 0.0 {
            top / all
        } else {
            0.0
        }
    }

    fn nonlinear_phase(&mut self, u: &mut [C64], t: f64, dt: f64) {
        let rule = self.rate.phase_rule(t, t + dt);
        if self.rate.series.has_real_coefficients() {
            let before = crate::grid::norm_sqr_sum(u);
            apply_phase(&rule, &self.rate.series, u);
            self.settle_norm(before, u);
        } else {
            apply_phase(&rule, &self.rate.series, u);
        }
    }

    /// One Strang step from `t` to `t + dt`.
    pub fn step_split(&mut self, u: &mut [C64], t: f64, dt: f64) {
        self.linear_flow(u, 0.5 * dt);
        self.nonlinear_phase(u, t, dt);
        self.linear_flow(u, 0.5 * dt);
    }

    fn irk_operator(&mut self, dt: f64) -> usize {
        if let Some(i) = self.irk_cache.iter().position(|(h, _)| *h == dt) {
            return i;
        }
        let a = GAUSS_A;
        let ops: Vec<[C64; 4]> = self
            .lap
            .iter()
            .map(|&l| {
                let hl = C64::new(0.0, dt * l);
                let m11 = 1.0 - hl * a[0][0];
                let m12 = -hl * a[0][1];
                let m21 = -hl * a[1][0];
                let m22 = 1.0 - hl * a[1][1];
                let det = m11 * m22 - m12 * m21;
                [m22 / det, -m12 / det, -m21 / det, m11 / det]
            })
            .collect();
        if self.irk_cache.len() >= 8 {
            self.irk_cache.remove(0);
        }
        self.irk_cache.push((dt, ops));
        self.irk_cache.len() - 1
    }

    /// The stage map `Y -> (I - h lambda A)^{-1}(u + h A G(Y))`, with
    /// `y` and the result stacked as `[Y_1; Y_2]`.
    fn stage_map(&self, op: usize, u_hat: &[C64], t: f64, dt: f64, y: &[C64], out: &mut [C64]) {
        let n = u_hat.len();
        let i = C64::new(0.0, 1.0);
        let mut g = [vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n]];
        for (s, gs) in g.iter_mut().enumerate() {
            let ts = t + GAUSS_C[s] * dt;
            let ys = &y[s * n..(s + 1) * n];
            gs.par_iter_mut()
                .zip(ys.par_iter())
                .for_each(|(gv, yv)| *gv = i * self.rate.value(ts, yv.norm()) * yv);
            self.grid.forward_in_place(gs);
        }
        let ops = &self.irk_cache[op].1;
        let a = GAUSS_A;
        let (o1, o2) = out.split_at_mut(n);
        for j in 0..n {
            let r1 = u_hat[j] + dt * (a[0][0] * g[0][j] + a[0][1] * g[1][j]);
            let r2 = u_hat[j] + dt * (a[1][0] * g[0][j] + a[1][1] * g[1][j]);
            let m = &ops[j];
            o1[j] = m[0] * r1 + m[1] * r2;
            o2[j] = m[2] * r1 + m[3] * r2;
        }
        self.grid.inverse_in_place(o1);
        self.grid.inverse_in_place(o2);
    }

    /// One Gauss-Legendre step from `t` to `t + dt`; `u` is untouched on
    /// rejection.
    pub(crate) fn try_step_irk4(&mut self, u: &mut [C64], t: f64, dt: f64) -> std::result::Result<(), Rejected> {
        let n = u.len();
        let op = self.irk_operator(dt);
        let u_hat = self.grid.forward(u);
        let mut y: Vec<C64> = u.iter().chain(u.iter()).copied().collect();
        let mut next = vec![C64::new(0.0, 0.0); 2 * n];
        let mut prev_change = f64::INFINITY;
        let mut converged = false;
        self.last_newton = 0;
        let mut sweeps = 0;
        while sweeps < MAX_SWEEPS {
            sweeps += 1;
            self.stage_map(op, &u_hat, t, dt, &y, &mut next);
            let (change, scale) = max_diff(&next, &y);
            std::mem::swap(&mut y, &mut next);
            if !change.is_finite() {
                break;
            }
            if change <= self.stage_tol * scale {
                converged = true;
                break;
            }
            // round-off floor: no longer contracting but already tiny
            if sweeps > 3 && change > 0.5 * prev_change && change <= 1e-12 * scale {
                converged = true;
                break;
            }
            prev_change = change;
        }
        self.last_sweeps = sweeps;
        if !converged {
            let start = if y.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
                y.clone()
            } else {
                u.iter().chain(u.iter()).copied().collect()
            };
            match self.newton(op, &u_hat, t, dt, start) {
                Some(sol) => y = sol,
                None => return Err(Rejected),
            }
        }
        let d = self.update;
        for j in 0..n {
            u[j] += d[0] * (y[j] - u[j]) + d[1] * (y[n + j] - u[j]);
        }
        Ok(())
    }

    /// Jacobian-free Newton-GMRES on `F(Y) = Y - Phi(Y)`. The map is only
    /// real-linear (it involves `|Y|`), so GMRES runs over the reals.
    fn newton(&mut self, op: usize, u_hat: &[C64], t: f64, dt: f64, mut y: Vec<C64>) -> Option<Vec<C64>> {
        let m = y.len();
        let mut phi = vec![C64::new(0.0, 0.0); m];
        let residual = |this: &Self, y: &[C64], phi: &mut [C64]| -> Vec<C64> {
            this.stage_map(op, u_hat, t, dt, y, phi);
            y.iter().zip(phi.iter()).map(|(a, b)| a - b).collect()
        };
        let mut f = residual(self, &y, &mut phi);
        for it in 0..12 {
            self.last_newton = it + 1;
            let scale = y.iter().map(|v| v.norm()).fold(1e-300, f64::max);
            let fnorm = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
            if !fnorm.is_finite() {
                return None;
            }
            if fnorm <= 1e-13 * scale {
                return Some(y);
            }
            let ynorm = dot(&y, &y).sqrt();
            let jv = |v: &[C64]| -> Vec<C64> {
                let vn = dot(v, v).sqrt();
                if vn == 0.0 {
                    return vec![C64::new(0.0, 0.0); m];
                }
                let eps = 1e-7 * (1.0 + ynorm) / vn;
                let yp: Vec<C64> = y.iter().zip(v).map(|(a, b)| a + eps * b).collect();
                let mut tmp = vec![C64::new(0.0, 0.0); m];
                let fp = residual(self, &yp, &mut tmp);
                fp.iter().zip(&f).map(|(a, b)| (a - b) / eps).collect()
            };
            let rhs: Vec<C64> = f.iter().map(|v| -v).collect();
            let delta = gmres(&jv, &rhs, 1e-4, 40, 3)?;
            for (a, d) in y.iter_mut().zip(&delta) {
                *a += d;
            }
            f = residual(self, &y, &mut phi);
        }
        let scale = y.iter().map(|v| v.norm()).fold(1e-300, f64::max);
        let fnorm = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
        (fnorm <= 1e-12 * scale).then_some(y)
    }
}

fn max_diff(a: &[C64], b: &[C64]) -> (f64, f64) {
    let mut change: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = (x - y).norm();
        change = if d.is_nan() { f64::NAN } else { change.max(d) };
        scale = scale.max(x.norm());
    }
    (change, scale.max(1e-300))
}

/// Real inner product `Re <a, b>`.
fn dot(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Restarted GMRES for a real-linear operator on complex vectors.
fn gmres(
    op: &dyn Fn(&[C64]) -> Vec<C64>,
    rhs: &[C64],
    rtol: f64,
    restart: usize,
    cycles: usize,
) -> Option<Vec<C64>> {
    let m = rhs.len();
    let mut x = vec![C64::new(0.0, 0.0); m];
    let bnorm = dot(rhs, rhs).sqrt();
    if bnorm == 0.0 {
        return Some(x);
    }
    for _ in 0..cycles {
        let ax = op(&x);
        let r: Vec<C64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = dot(&r, &r).sqrt();
        if !beta.is_finite() {
            return None;
        }
        if beta <= rtol * bnorm {
            return Some(x);
        }
        let mut basis: Vec<Vec<C64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let mut cs = vec![0.0; restart];
        let mut sn = vec![0.0; restart];
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..restart {
            let mut w = op(&basis[k]);
            for (i, v) in basis.iter().enumerate() {
                let hik = dot(v, &w);
                h[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(v) {
                    *wj -= hik * vj;
                }
            }
            let wn = dot(&w, &w).sqrt();
            h[k + 1][k] = wn;
            for i in 0..k {
                let tmp = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = tmp;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 || !denom.is_finite() {
                return None;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= rtol * bnorm || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // back substitution
        let mut coef = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * coef[j];
            }
            coef[i] = s / h[i][i];
        }
        for (i, c) in coef.iter().enumerate() {
            for (xj, vj) in x.iter_mut().zip(&basis[i]) {
                *xj += c * vj;
            }
        }
        if g[k_used].abs() <= rtol * bnorm {
            return Some(x);
        }
    }
    Some(x)
}

/// One split step of `u` from `t_now` to `t_now + dt`.
pub fn step_split(
    u: &ComplexField,
    dt: f64,
    series: &SeriesNonlinearity,
    t_now: f64,
    b: Option<f64>,
) -> Result<ComplexField> {
    u.check_finite()?;
    let mut integ = Integrator::new(u.grid(), series, Backend::Spectral, b);
    let mut v = u.values().to_vec();
    integ.step_split(&mut v, t_now, dt);
    ComplexField::new(u.grid().clone(), v, t_now + dt)
}

/// One Gauss-Legendre step of `u` from `t_now` to `t_now + dt`.
pub fn step_irk4(
    u: &ComplexField,
    dt: f64,
    series: &SeriesNonlinearity,
    t_now: f64,
    b: Option<f64>,
) -> Result<ComplexField> {
    u.check_finite()?;
    let mut integ = Integrator::new(u.grid(), series, Backend::Spectral, b);
    let mut v = u.values().to_vec();
    integ
        .try_step_irk4(&mut v, t_now, dt)
        .map_err(|_| Error::StepRejected { t: t_now })?;
    ComplexField::new(u.grid().clone(), v, t_now + dt)
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

/// Allowed growth of the spectral tail over its initial value.
const TAIL_GROWTH: f64 = 10.0;

/// Marches a field in time with blow-up detection and step halving.
#[derive(Debug)]
pub struct Evolver {
    integ: Integrator,
    stepper: Stepper,
    dt: f64,
    max_halvings: u32,
    threshold: f64,
    resolution_tol: Option<f64>,
    u: Vec<C64>,
    t: f64,
    t0: f64,
    steps: usize,
    /// Split-step only: half linear step still owed to `u`. Consecutive
    /// Strang half steps are fused and only completed when observed.
    pending: f64,
}

impl Evolver {
    pub fn new(config: &SimConfig, u0: &ComplexField) -> Result<Self> {
        config.validate()?;
        u0.check_finite()?;
        let integ = Integrator::new(u0.grid(), &config.series, config.backend, config.nonautonomous_b)
            .with_stage_tol(config.stage_tol);
        Ok(Self {
            stepper: config.stepper,
            dt: config.dt,
            max_halvings: config.max_halvings,
            threshold: config.blowup_factor * u0.linf(),
            resolution_tol: config
                .resolution_tol
                .map(|tol| tol.max(TAIL_GROWTH * integ.spectral_tail(u0.values()))),
            u: u0.values().to_vec(),
            t: u0.time(),
            t0: u0.time(),
            steps: 0,
            pending: 0.0,
            integ,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Current field, after completing any deferred linear flow.
    pub fn field(&mut self) -> ComplexField {
        self.sync();
        ComplexField::new_unchecked(self.integ.grid().clone(), self.u.clone(), self.t)
    }

    fn sync(&mut self) {
        if self.pending > 0.0 {
            let h = self.pending;
            self.integ.linear_flow(&mut self.u, h);
            self.pending = 0.0;
        }
    }

    pub fn integrator(&self) -> &Integrator {
        &self.integ
    }

    fn attempt(&mut self, u: &mut Vec<C64>, t: f64, dt: f64, depth: u32) -> std::result::Result<(), Rejected> {
        match self.stepper {
            Stepper::SplitStep => {
                self.integ.linear_flow(u, self.pending + 0.5 * dt);
                self.integ.nonlinear_phase(u, t, dt);
                Ok(())
            }
            Stepper::Irk4 => match self.integ.try_step_irk4(u, t, dt) {
                Ok(()) => Ok(()),
                Err(Rejected) if depth < self.max_halvings => {
                    let mut w = u.clone();
                    self.attempt(&mut w, t, 0.5 * dt, depth + 1)?;
                    self.attempt(&mut w, t + 0.5 * dt, 0.5 * dt, depth + 1)?;
                    *u = w;
                    Ok(())
                }
                Err(r) => Err(r),
            },
        }
    }

    /// Advances by `dt` (or less, to land on `t_stop`).
    pub fn step_towards(&mut self, t_stop: f64) -> std::result::Result<(), Blowup> {
        let k = self.steps + 1;
        // nominal grid of step times, clipped at t_stop
        let mut t_next = self.t0 + k as f64 * self.dt;
        if t_next > t_stop || t_stop - t_next < 1e-9 * self.dt {
            t_next = t_stop;
        }
        let h = t_next - self.t;
        if h <= 0.0 {
            return Ok(());
        }
        let mut w = self.u.clone();
        let linf_prev = self.u.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if self.attempt(&mut w, self.t, h, 0).is_err() {
            return Err(Blowup {
                t: self.t,
                cause: BlowupCause::StepRejection,
                linf: linf_prev,
            });
        }
        let mut linf: f64 = 0.0;
        let mut finite = true;
        for v in &w {
            let a = v.norm();
            if !a.is_finite() {
                finite = false;
                break;
            }
            linf = linf.max(a);
        }
        if !finite {
            return Err(Blowup {
                t: t_next,
                cause: BlowupCause::NonFinite,
                linf: linf_prev,
            });
        }
        self.u = w;
        self.t = t_next;
        self.steps += 1;
        if self.stepper == Stepper::SplitStep {
            self.pending = 0.5 * h;
        }
        if linf >= self.threshold {
            return Err(Blowup {
                t: t_next,
                cause: BlowupCause::Amplitude,
                linf,
            });
        }
        // the deferred split-step flow is a pure phase in Fourier space, so
        // the tail can be read off the stored field
        if let Some(tol) = self.resolution_tol {
            if self.integ.spectral_tail(&self.u) > tol {
                return Err(Blowup {
                    t: t_next,
                    cause: BlowupCause::Unresolved,
                    linf,
                });
            }
        }
        Ok(())
    }

    /// Steps until `t_target` is reached exactly.
    pub fn advance_to(&mut self, t_target: f64) -> std::result::Result<(), Blowup> {
        while self.t < t_target {
            self.step_towards(t_target)?;
        }
        Ok(())
    }
}

/// Integrates `u0` to `config.t_end` (or blow-up), recording diagnostics.
pub fn integrate(config: &SimConfig, u0: &ComplexField) -> Result<Trajectory> {
    let mut ev = Evolver::new(config, u0)?;
    let t_end = config.effective_t_end();
    let track = config.energy_is_tracked();
    let sample = |u: &ComplexField, t: f64| {
        TrajectoryRecord::sample(u, t, &config.series, config.backend, track, config.weight_n)
    };
    let mut records = vec![sample(u0, u0.time())];
    let mut snapshots = Vec::new();
    if config.snapshot_stride.is_some() {
        snapshots.push(u0.clone());
    }
    let mut blowup = None;
    while ev.time() < t_end {
        match ev.step_towards(t_end) {
            Ok(()) => {
                let k = ev.steps();
                let done = ev.time() >= t_end;
                if k % config.diagnostics_stride == 0 || done {
                    records.push(sample(&ev.field(), ev.time()));
                }
                if let Some(s) = config.snapshot_stride {
                    if k % s == 0 || done {
                        snapshots.push(ev.field());
                    }
                }
            }
            Err(b) => {
                let field = ev.field();
                if records.last().map(|r| r.t) != Some(field.time()) {
                    records.push(sample(&field, field.time()));
                }
                let mut flagged = sample(&field, b.t);
                flagged.blowup_flag = true;
                if records.last().map(|r| r.t) == Some(b.t) {
                    records.pop();
                }
                records.push(flagged);
                blowup = Some(b);
                break;
            }
        }
    }
    Ok(Trajectory {
        field: ev.field(),
        records,
        blowup,
        snapshots,
        steps: ev.steps(),
    })
}

/// `int_0^{1/b} (1 - b tau)^{alpha/2 - 2} d tau` by quadrature, for
/// checking the closed form `2 / (b (alpha - 2))`.
pub fn weight_integral_quadrature(alpha: f64, b: f64) -> f64 {
    let p = 0.5 * alpha - 2.0;
    // write the integrand through the distance to 1/b, where it is singular
    crate::quadrature::tanh_sinh_with_distance(|_, _, d| (b * d).powf(p), 0.0, 1.0 / b, 1e-15).value
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use crate::diagnostics::{energy, mass};
    use crate::profiles::{gaussian, sech_ground_state};

    fn cubic() -> SeriesNonlinearity {
        SeriesNonlinearity::power(1.0, 2.0).unwrap()
    }

    #[test]
    fn gauss_update_weights_are_pm_sqrt3() {
        let d = gauss_update_weights();
        assert!((d[0] + SQRT3).abs() < 1e-14 && (d[1] - SQRT3).abs() < 1e-14);
    }

    #[test]
    fn free_steps_match_free_propagation() {
        let g = Grid::new(20.0, 256).unwrap();
        let u = gaussian(1.0, &g);
        let zero = SeriesNonlinearity::zero();
        let exact = u.free_propagate(0.3);
        let s = step_split(&u, 0.3, &zero, 0.0, None).unwrap();
        assert!(s.sup_distance(&exact) <= 1e-13);
    }

    #[test]
    fn irk_on_a_single_mode_has_gauss_amplification() {
        // y' = i lambda y, Gauss-2 amplification is the (2,2) Pade approximant
        let g = Grid::new(PI, 32).unwrap();
        let k = g.xi()[3];
        let u = ComplexField::from_fn(&g, |x| C64::from_polar(1.0, k * x));
        let zero = SeriesNonlinearity::zero();
        for dt in [0.1, 0.05] {
            let z = C64::new(0.0, -k * k * dt);
            let pade = (1.0 + z / 2.0 + z * z / 12.0) / (1.0 - z / 2.0 + z * z / 12.0);
            let v = step_irk4(&u, dt, &zero, 0.0, None).unwrap();
            let expect = u.scale(pade);
            assert!(v.sup_distance(&expect) <= 1e-13);
            let local = (pade - z.exp()).norm();
            assert!(local <= (k * k * dt).powi(5) / 100.0);
        }
    }

    #[test]
    fn constant_field_phase_rotation() {
        let g = Grid::new(PI, 32).unwrap();
        let a = 0.8;
        let eps = 1.5;
        let u = ComplexField::from_real_fn(&g, |_| a);
        let n = SeriesNonlinearity::power(eps, 2.0).unwrap();
        let mut errs = Vec::new();
        for dt in [0.1, 0.05] {
            let exact = C64::from_polar(a, eps * a * a * dt);
            let s = step_split(&u, dt, &n, 0.0, None).unwrap();
            let r = step_irk4(&u, dt, &n, 0.0, None).unwrap();
            let es = (s.values()[0] - exact).norm();
            let er = (r.values()[0] - exact).norm();
            assert!(es <= 1e-15, "split is exact here: {es}");
            errs.push(er);
        }
        // local error O(dt^5)
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 4.5, "{order}");
    }

    #[test]
    fn split_step_preserves_mass() {
        let g = Grid::new(10.0 * PI, 1 << 10).unwrap();
        let u = ComplexField::from_real_fn(&g, |x| 2.0 / x.cosh());
        let n = cubic();
        let m0 = mass(&u);
        let v = step_split(&u, 0.01, &n, 0.0, None).unwrap();
        assert!((mass(&v) - m0).abs() <= 1e-13 * m0);
    }

    #[test]
    fn newton_rescues_a_stiff_step() {
        let g = Grid::new(10.0 * PI, 512).unwrap();
        let u = ComplexField::from_real_fn(&g, |x| 3.0 / x.cosh());
        let n = cubic();
        let mut integ = Integrator::new(&g, &n, Backend::Spectral, None);
        let mut v = u.values().to_vec();
        integ.try_step_irk4(&mut v, 0.0, 0.15).unwrap();
        assert!(integ.last_newton > 0, "fixed point should not have sufficed");
        let w = ComplexField::new(g.clone(), v, 0.15).unwrap();
        // Gauss methods conserve the quadratic invariant
        assert!((mass(&w) - mass(&u)).abs() <= 1e-10 * mass(&u));
    }

    #[test]
    fn weight_integral_closed_form() {
        for (alpha, b) in [(3.0, 1.0), (4.0, 2.0), (6.0, 5.0)] {
            let q = weight_integral_quadrature(alpha, b);
            let exact = 2.0 / (b * (alpha - 2.0));
            assert!((q - exact).abs() <= 1e-10, "{alpha} {b}: {q} vs {exact}");
            let w = weight_integral(0.5 * alpha - 2.0, b, 0.0, 1.0 / b);
            assert!((w - exact).abs() <= 1e-14);
        }
    }

    #[test]
    fn graded_phase_rule_matches_exact_weights() {
        // a finite sum written as a closed form through the generic path
        let b = 4.0;
        let t0 = 0.2499;
        let t1 = (1.0 - ENDPOINT_GAP) / b;
        let rate = Rate {
            series: SeriesNonlinearity::exp_tail(1.0, 1.0).unwrap(),
            b: Some(b),
        };
        let PhaseRule::Nodes(nodes) = rate.phase_rule(t0, t1) else { panic!() };
        let s = 0.7;
        let got: f64 = nodes.iter().map(|&(w, a)| w * rate.series.eval(a * s).re).sum();
        // sum_k d_k s^{alpha_k} W(alpha_k) with exact weights
        let mut expect = 0.0;
        for idx in 0..40 {
            let t = rate.series.term(idx).unwrap();
            expect += t.coeff.re * s.powf(t.alpha) * weight_integral(0.5 * t.alpha - 2.0, b, t0, t1);
        }
        assert!((got - expect).abs() <= 1e-9 * expect.abs(), "{got} vs {expect}");
    }

    #[test]
    fn soliton_holds_its_modulus() {
        let g = Grid::new(10.0 * PI, 1 << 10).unwrap();
        let q = sech_ground_state(2.0, 1.0, &g).unwrap();
        let mut cfg = SimConfig::new(cubic(), Stepper::Irk4, 0.01, 2.0);
        cfg.diagnostics_stride = 50;
        let tr = integrate(&cfg, &q).unwrap();
        assert!(tr.blowup.is_none());
        let dev = tr
            .field
            .values()
            .iter()
            .zip(q.values())
            .map(|(a, b)| (a.norm() - b.re).abs())
            .fold(0.0, f64::max);
        assert!(dev <= 1e-8, "{dev}");
        let e0 = energy(&q, &cubic()).total;
        let e1 = energy(&tr.field, &cubic()).total;
        assert!((e1 - e0).abs() <= 1e-10 * e0.abs());
        assert!((tr.t_reached() - 2.0).abs() < 1e-12);
        assert_eq!(tr.records.len(), 5);
    }

    #[test]
    fn config_validation() {
        let mut c = SimConfig::new(cubic(), Stepper::Irk4, 0.01, 1.0);
        c.nonautonomous_b = Some(2.0);
        assert!(c.validate().is_err());
        c.t_end = 0.5;
        assert!(c.validate().is_ok());
        assert!((c.effective_t_end() - (1.0 - ENDPOINT_GAP) / 2.0).abs() < 1e-15);
        c.dt = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn focusing_collapse_is_flagged() {
        // quintic, mass far above the ground state: finite-time collapse
        let g = Grid::new(8.0, 1 << 11).unwrap();
        let u = ComplexField::from_real_fn(&g, |x| 3.0 * (-x * x).exp());
        let n = SeriesNonlinearity::power(1.0, 4.0).unwrap();
        for stepper in [Stepper::Irk4, Stepper::SplitStep] {
            let mut cfg = SimConfig::new(n.clone(), stepper, 1e-4, 0.5);
            cfg.blowup_factor = 3.0;
            let tr = integrate(&cfg, &u).unwrap();
            let b = tr.blowup.expect("collapse");
            assert!(b.t < 0.5);
            assert!(tr.records.last().unwrap().blowup_flag);
            assert!(tr.field.is_finite());
        }
    }
}
