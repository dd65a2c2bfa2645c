//! Petviashvili iteration for ground states of
//! `-omega Q + Q'' + N(Q) Q = 0`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid};
use crate::nonlinearity::SeriesNonlinearity;
use crate::profiles::gaussian;

/// Stabilizer used to control the amplitude mode of the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gamma {
    /// Rescale the iterate by the amplitude `c` solving
    /// `<L q, q> = <N(c|q|) q, q>` (smallest root on the increasing branch),
    /// then take the plain step `L^{-1}[N(cq) cq]`. For a single power this
    /// is the classical stabilizer with `gamma = (alpha + 1)/alpha`, and it
    /// stays well defined when competing terms nearly cancel.
    Auto,
    /// Classical `Q <- S^gamma L^{-1}[N(Q) Q]`.
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct PetviashviliOptions {
    /// Initial iterate; a unit-height Gaussian when `None`.
    pub seed: Option<ComplexField>,
    pub gamma: Gamma,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PetviashviliOptions {
    fn default() -> Self {
        Self {
            seed: None,
            gamma: Gamma::Auto,
            tol: 1e-11,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroundStateResult {
    pub q: ComplexField,
    pub omega: f64,
    pub residual_inf: f64,
    pub iterations: usize,
    pub stabilizer_history: Vec<f64>,
}

impl GroundStateResult {
    pub fn final_stabilizer(&self) -> f64 {
        self.stabilizer_history.last().copied().unwrap_or(f64::NAN)
    }
}

const MIN_OMEGA: f64 = 1e-6;
const RECENTER_EVERY: usize = 25;
const GROWTH_LIMIT: usize = 20;

/// `||-omega Q + Q'' + N(|Q|) Q||_inf` with a spectral second derivative.
pub fn ground_state_residual(series: &SeriesNonlinearity, omega: f64, q: &ComplexField) -> f64 {
    let q2 = q.derivative(2);
    q.values()
        .iter()
        .zip(q2.values())
        .map(|(v, d)| (-omega * v + d + series.eval(v.norm()) * v).norm())
        .fold(0.0, f64::max)
}

pub fn solve_ground_state(
    series: &SeriesNonlinearity,
    omega: f64,
    grid: &Grid,
    opts: &PetviashviliOptions,
) -> Result<GroundStateResult> {
    if !series.has_real_coefficients() {
        return Err(Error::InvalidArgument(
            "ground states need real coefficients".into(),
        ));
    }
    // the constant coefficient shifts the frequency
    let omega_eff = omega - series.constant();
    if !(omega_eff >= MIN_OMEGA) {
        return Err(Error::InvalidArgument(format!(
            "effective frequency {omega_eff} must be at least {MIN_OMEGA}"
        )));
    }
    if let Gamma::Fixed(g) = opts.gamma {
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::InvalidArgument(format!("stabilizer exponent must be positive, got {g}")));
        }
    }
    let seed = match &opts.seed {
        Some(s) => {
            if s.grid() != grid {
                return Err(Error::GridMismatch);
            }
            s.check_finite()?;
            s.clone()
        }
        None => gaussian(1.0, grid),
    };

    let n = grid.len();
    let dx = grid.dx();
    let inv_l: Vec<f64> = grid.xi().iter().map(|xi| 1.0 / (omega_eff + xi * xi)).collect();
    let l_sym: Vec<f64> = inv_l.iter().map(|v| 1.0 / v).collect();
    let series_only = series.clone().with_constant(0.0);

    let mut q: Vec<f64> = seed.values().iter().map(|v| v.re).collect();
    let seed_height = seed.linf();
    let mut history = Vec::new();
    let mut spec = vec![C64::new(0.0, 0.0); n];
    let mut prev_residual = f64::INFINITY;
    let mut growth = 0;

    for it in 1..=opts.max_iter {
        if it % RECENTER_EVERY == 0 {
            recenter(grid, &mut q);
        }
        // <L q, q> via Parseval
        for (s, &v) in spec.iter_mut().zip(&q) {
            *s = C64::new(v, 0.0);
        }
        grid.forward_in_place(&mut spec);
        let lqq: f64 = spec
            .iter()
            .zip(&l_sym)
            .map(|(s, l)| l * s.norm_sqr())
            .sum::<f64>()
            * dx
            / n as f64;

        let nq_q: f64 = q
            .iter()
            .map(|&v| series_only.eval_real(v.abs()) * v * v)
            .sum::<f64>()
            * dx;
        let stab = lqq / nq_q;
        history.push(stab);
        if !(stab.is_finite() && (1e-6..=1e6).contains(&stab)) && opts.gamma != Gamma::Auto {
            return Err(Error::Diverged {
                iterations: it,
                reason: format!("stabilizer left [1e-6, 1e6]: {stab:e}"),
            });
        }
        // amplitude c applied to q before the Picard step, and the factor
        // multiplying the result
        let (amp, factor) = match opts.gamma {
            Gamma::Fixed(g) => (1.0, stab.powf(g)),
            Gamma::Auto => match amplitude(&series_only, &q, lqq / dx) {
                Some(c) => (c, 1.0),
                None => {
                    return Err(Error::Diverged {
                        iterations: it,
                        reason: "no amplitude balances the quadratic form".into(),
                    })
                }
            },
        };
        let nq: Vec<f64> = q
            .iter()
            .map(|&v| amp * v * series_only.eval_real(amp * v.abs()))
            .collect();

        for (s, v) in spec.iter_mut().zip(&nq) {
            *s = C64::new(*v, 0.0);
        }
        grid.forward_in_place(&mut spec);
        for (s, w) in spec.iter_mut().zip(&inv_l) {
            *s *= w * factor;
        }
        grid.inverse_in_place(&mut spec);

        let mut diff: f64 = 0.0;
        for (old, s) in q.iter_mut().zip(&spec) {
            diff = diff.max((s.re - *old).abs());
            *old = s.re;
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                iterations: it,
                reason: "non-finite iterate".into(),
            });
        }
        if q.iter().all(|v| v.abs() < 1e-12 * seed_height) {
            return Err(Error::Diverged {
                iterations: it,
                reason: "collapsed to the zero solution".into(),
            });
        }

        if diff <= 10.0 * opts.tol {
            let field = ComplexField::new_unchecked(grid.clone(), real_to_complex(&q), 0.0);
            let residual = ground_state_residual(series, omega, &field);
            if diff <= opts.tol && residual <= 10.0 * opts.tol {
                return Ok(GroundStateResult {
                    q: field,
                    omega,
                    residual_inf: residual,
                    iterations: it,
                    stabilizer_history: history,
                });
            }
        }
        // cheap divergence watch on the update size
        if diff > prev_residual {
            growth += 1;
            if growth >= GROWTH_LIMIT {
                return Err(Error::Diverged {
                    iterations: it,
                    reason: format!("update grew for {GROWTH_LIMIT} consecutive steps"),
                });
            }
        } else {
            growth = 0;
        }
        prev_residual = diff;
    }
    let field = ComplexField::new_unchecked(grid.clone(), real_to_complex(&q), 0.0);
    Err(Error::MaxIter {
        iterations: opts.max_iter,
        residual: ground_state_residual(series, omega, &field),
    })
}

/// Smallest positive `c` with `h(c) = sum N(c|q|) q^2 - target = 0`,
/// where `h(0) < 0`. When `h` never becomes positive the maximizer of `h`
/// is used instead.
fn amplitude(series: &SeriesNonlinearity, q: &[f64], target: f64) -> Option<f64> {
    let h = |c: f64| -> f64 {
        q.iter().map(|&v| series.eval_real(c * v.abs()) * v * v).sum::<f64>() - target
    };
    // Newton from c = 1 is the common case once the iteration settles.
    let dh = |c: f64| -> f64 {
        q.iter().map(|&v| series.s_dn_ds(c * v.abs()).re * v * v).sum::<f64>() / c
    };
    let mut c = 1.0;
    for _ in 0..8 {
        let (hv, dv) = (h(c), dh(c));
        if !(dv > 0.0) {
            break;
        }
        let next = c - hv / dv;
        if !(next > 0.5 * c && next < 2.0 * c) {
            break;
        }
        if (next - c).abs() <= 4.0 * f64::EPSILON * c {
            return Some(next);
        }
        c = next;
    }
    // bracket from below by geometric growth, then bisect; if h stays
    // negative, fall back to its maximizer on the scan
    let mut lo = 0.0;
    let mut hi = 1e-3;
    let mut best = (f64::NEG_INFINITY, hi);
    loop {
        let hv = h(hi);
        if hv >= 0.0 {
            break;
        }
        if hv > best.0 {
            best = (hv, hi);
        }
        lo = hi;
        hi *= 1.1;
        if hi > 1e4 {
            return best.0.is_finite().then_some(best.1);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

fn real_to_complex(q: &[f64]) -> Vec<C64> {
    q.iter().map(|&v| C64::new(v, 0.0)).collect()
}

/// Moves the maximum of `|q|` to `x = 0` by a spectral shift.
fn recenter(grid: &Grid, q: &mut [f64]) {
    let (imax, _) = q
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
    let shift = grid.x()[imax];
    if shift.abs() < 0.5 * grid.dx() {
        return;
    }
    let mut spec: Vec<C64> = real_to_complex(q);
    grid.forward_in_place(&mut spec);
    for (s, &xi) in spec.iter_mut().zip(grid.xi()) {
        *s *= C64::from_polar(1.0, xi * shift);
    }
    grid.inverse_in_place(&mut spec);
    for (v, s) in q.iter_mut().zip(&spec) {
        *v = s.re;
    }
}
