//! Pseudo-conformal transform between `u` and the weighted solution `v`,
//! scattering profiles and global-behaviour classification.
//!
//! `u(x, t) = (1 + bt)^{-1/2} e^{i b x^2 / (4(1 + bt))} v(x / (1 + bt), t / (1 + bt))`.

use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{hs_norm, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::evolve::{Blowup, Evolver, SimConfig, Stepper};
use crate::grid::{Backend, ComplexField};
use crate::nonlinearity::SeriesNonlinearity;
use crate::profiles::quadratic_phase;

/// `t / (1 + bt)`.
pub fn transformed_time(b: f64, t: f64) -> f64 {
    t / (1.0 + b * t)
}

/// Maps `v(., s)` with `s = t / (1 + bt)` to `u(., t)` on the same grid.
pub fn pseudo_conformal_map(v: &ComplexField, b: f64, t: f64) -> Result<ComplexField> {
    let stretch = 1.0 + b * t;
    if !(stretch > 0.0) {
        return Err(Error::InvalidArgument(format!("1 + b t = {stretch} must be positive")));
    }
    let s = transformed_time(b, t);
    if (v.time() - s).abs() > 1e-9 * s.abs().max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "v is at time {}, the map to t = {t} needs s = {s}",
            v.time()
        )));
    }
    let grid = v.grid();
    let values = if t == 0.0 {
        v.values().to_vec()
    } else {
        let points: Vec<f64> = grid.x().iter().map(|x| x / stretch).collect();
        grid.interpolate(v.values(), &points)
    };
    let pre = stretch.powf(-0.5);
    let values = values
        .into_iter()
        .zip(grid.x())
        .map(|(w, &x)| w * C64::from_polar(pre, b * x * x / (4.0 * stretch)))
        .collect();
    ComplexField::new(grid.clone(), values, t)
}

/// `u_+ = e^{i b x^2 / 4} e^{-i (1/b) d_xx} v(., 1/b)`.
pub fn scattering_profile(v_end: &ComplexField, b: f64) -> Result<ComplexField> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidArgument(format!("scattering profile needs b > 0, got {b}")));
    }
    Ok(quadratic_phase(&v_end.free_propagate(-1.0 / b), b))
}

/// `||e^{-i t d_xx} u(t) - u_+||_{H^s}`.
pub fn scattering_distance(u: &ComplexField, u_plus: &ComplexField, s: f64) -> Result<f64> {
    let back = u.free_propagate(-u.time());
    Ok(hs_norm(&back.sub(u_plus)?, s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Scattering,
    Blowup,
    Oscillating,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Scattering => "SCATTERING",
            Verdict::Blowup => "BLOWUP",
            Verdict::Oscillating => "OSCILLATING",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// Thresholds for [`classify_global`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyParams {
    pub min_records: usize,
    /// Fraction of the horizon used for the trend fit.
    pub tail_fraction: f64,
    /// Largest least-squares slope (per unit time) of the scatter indicator
    /// over the tail that still counts as non-increasing.
    pub slope_tol: f64,
    /// The running maximum of the indicator must stay below this multiple
    /// of its initial value.
    pub bound_factor: f64,
    /// For OSCILLATING, `||u||_inf` over the tail must stay above this
    /// fraction of `||u_0||_inf`.
    pub floor_fraction: f64,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        Self {
            min_records: 20,
            tail_fraction: 0.25,
            slope_tol: 1e-3,
            bound_factor: 10.0,
            floor_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Classification {
    pub verdict: Verdict,
    /// Blow-up time, or the last recorded time.
    pub t_blowup_or_horizon: f64,
    pub max_scatter_indicator: f64,
    /// Tail slope of the scatter indicator (NaN when not computed).
    pub tail_slope: f64,
}

fn ls_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mt, my) = points.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t / n, b + y / n));
    let (num, den) = points.iter().fold((0.0, 0.0), |(a, b), (t, y)| {
        (a + (t - mt) * (y - my), b + (t - mt) * (t - mt))
    });
    if den > 0.0 {
        num / den
    } else {
        f64::NAN
    }
}

/// Reads a global-behaviour verdict off a trajectory.
pub fn classify_global(records: &[TrajectoryRecord], params: &ClassifyParams) -> Classification {
    let horizon = records.last().map_or(0.0, |r| r.t);
    let max_ind = records.iter().map(|r| r.scatter_indicator).fold(0.0, f64::max);
    let mut out = Classification {
        verdict: Verdict::Inconclusive,
        t_blowup_or_horizon: horizon,
        max_scatter_indicator: max_ind,
        tail_slope: f64::NAN,
    };
    if let Some(r) = records.iter().find(|r| r.blowup_flag) {
        out.verdict = Verdict::Blowup;
        out.t_blowup_or_horizon = r.t;
        return out;
    }
    if records.len() < params.min_records.max(2) {
        return out;
    }
    let t0 = records[0].t;
    let cut = horizon - params.tail_fraction * (horizon - t0);
    let tail: Vec<&TrajectoryRecord> = records.iter().filter(|r| r.t >= cut).collect();
    let slope = ls_slope(&tail.iter().map(|r| (r.t, r.scatter_indicator)).collect::<Vec<_>>());
    out.tail_slope = slope;
    let ind0 = records[0].scatter_indicator;
    if max_ind <= params.bound_factor * ind0 && slope <= params.slope_tol {
        out.verdict = Verdict::Scattering;
        return out;
    }
    let linf0 = records[0].linf;
    let max_linf = records.iter().map(|r| r.linf).fold(0.0, f64::max);
    let tail_min = tail.iter().map(|r| r.linf).fold(f64::INFINITY, f64::min);
    if max_linf <= params.bound_factor * linf0 && tail_min >= params.floor_fraction * linf0 {
        out.verdict = Verdict::Oscillating;
    }
    out
}

/// Integration settings shared by both branches of an equivalence check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceOptions {
    pub stepper: Stepper,
    pub dt: f64,
    pub backend: Backend,
}

impl Default for EquivalenceOptions {
    fn default() -> Self {
        Self {
            stepper: Stepper::Irk4,
            dt: 1e-3,
            backend: Backend::Spectral,
        }
    }
}

/// `v` sampled at the transformed times and the `u` it maps to.
#[derive(Debug, Clone)]
pub struct ConformalPair {
    pub b: f64,
    pub v_traj: Vec<ComplexField>,
    pub u_samples: Vec<ComplexField>,
}

#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub pair: ConformalPair,
    /// `u(t)` integrated directly from `e^{i b x^2/4} v_0`.
    pub direct: Vec<ComplexField>,
    /// `(t, ||u(t) - map(v)(t)||_2 / ||u(t)||_2)`.
    pub deviations: Vec<(f64, f64)>,
    pub max_deviation: f64,
}

fn run_to(config: &SimConfig, u0: &ComplexField, times: &[f64]) -> std::result::Result<Vec<ComplexField>, Blowup> {
    let mut ev = Evolver::new(config, u0).expect("validated by the caller");
    times
        .iter()
        .map(|&t| {
            ev.advance_to(t)?;
            Ok(ev.field())
        })
        .collect()
}

/// Integrates `u` and `v` independently and compares `u(t)` with the
/// transformed `v` at each requested time.
pub fn conformal_equivalence_check(
    v0: &ComplexField,
    b: f64,
    series: &SeriesNonlinearity,
    t_list: &[f64],
    opts: &EquivalenceOptions,
) -> Result<EquivalenceReport> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidArgument(format!("b must be positive, got {b}")));
    }
    if !series.is_zero() && (series.constant() != 0.0 || series.min_alpha().is_some_and(|a| a <= 2.0)) {
        return Err(Error::InvalidArgument(format!(
            "every power must exceed 2, got {series}"
        )));
    }
    let mut times: Vec<f64> = t_list.to_vec();
    if times.is_empty() || times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidArgument("times must be positive and finite".into()));
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    let t_max = *times.last().unwrap();
    let s_list: Vec<f64> = times.iter().map(|&t| transformed_time(b, t)).collect();

    let mut u_cfg = SimConfig::new(series.clone(), opts.stepper, opts.dt, t_max);
    u_cfg.backend = opts.backend;
    u_cfg.track_energy = false;
    let mut v_cfg = u_cfg.clone();
    v_cfg.nonautonomous_b = Some(b);
    v_cfg.t_end = *s_list.last().unwrap();
    u_cfg.validate()?;
    v_cfg.validate()?;

    let v_start = v0.clone().with_time(0.0);
    let u0 = quadratic_phase(&v_start, b);
    let (direct, v_traj) = rayon::join(|| run_to(&u_cfg, &u0, &times), || run_to(&v_cfg, &v_start, &s_list));
    let as_error = |e: Blowup, branch: &str| Error::BlowupDetected {
        t: e.t,
        cause: format!("{branch} branch, {}", e.cause),
    };
    let direct = direct.map_err(|e| as_error(e, "direct"))?;
    let v_traj = v_traj.map_err(|e| as_error(e, "transformed"))?;

    let mut u_samples = Vec::with_capacity(times.len());
    let mut deviations = Vec::with_capacity(times.len());
    for ((t, v), u) in times.iter().zip(&v_traj).zip(&direct) {
        let mapped = pseudo_conformal_map(v, b, *t)?;
        let dev = u.sub(&mapped)?.l2_norm() / u.l2_norm().max(f64::MIN_POSITIVE);
        deviations.push((*t, dev));
        u_samples.push(mapped);
    }
    let max_deviation = deviations.iter().map(|d| d.1).fold(0.0, f64::max);
    Ok(EquivalenceReport {
        pair: ConformalPair { b, v_traj, u_samples },
        direct,
        deviations,
        max_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::EnergyBreakdown;
    use crate::grid::Grid;
    use crate::profiles::gaussian;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::new(8.0 * PI, 512).unwrap()
    }

    #[test]
    fn map_at_time_zero_is_the_quadratic_phase() {
        let g = grid();
        let v = gaussian(1.0, &g);
        let u = pseudo_conformal_map(&v, 3.0, 0.0).unwrap();
        assert_eq!(u, quadratic_phase(&v, 3.0));
    }

    #[test]
    fn map_is_an_l2_isometry() {
        let g = grid();
        let b = 2.0;
        let t = 0.3;
        let v = gaussian(1.5, &g).with_time(transformed_time(b, t));
        let u = pseudo_conformal_map(&v, b, t).unwrap();
        assert!((u.l2_norm() - v.l2_norm()).abs() <= 1e-8 * v.l2_norm());
        let expect = v.linf() / (1.0 + b * t).sqrt();
        assert!((u.linf() - expect).abs() <= 1e-8);
    }

    #[test]
    fn map_rejects_bad_inputs() {
        let g = grid();
        let v = gaussian(1.0, &g).with_time(0.5);
        assert!(pseudo_conformal_map(&v, -1.0, 1.0).is_err());
        assert!(pseudo_conformal_map(&v, 1.0, 0.3).is_err());
    }

    #[test]
    fn profile_of_zero_and_isometry() {
        let g = grid();
        let z = ComplexField::zeros(&g);
        assert!(scattering_profile(&z, 2.0).unwrap().linf() == 0.0);
        let v = gaussian(1.0, &g);
        let p = scattering_profile(&v, 4.0).unwrap();
        assert!((p.l2_norm() - v.l2_norm()).abs() <= 1e-12 * v.l2_norm());
        assert!(scattering_profile(&v, -1.0).is_err());
    }

    fn rec(t: f64, linf: f64, flag: bool) -> TrajectoryRecord {
        TrajectoryRecord {
            t,
            mass: 1.0,
            energy: EnergyBreakdown::untracked(),
            linf,
            weighted_linf: None,
            scatter_indicator: (1.0 + t).sqrt() * linf,
            blowup_flag: flag,
        }
    }

    #[test]
    fn classifier_rules() {
        let p = ClassifyParams::default();
        let steady: Vec<_> = (0..40).map(|k| rec(k as f64 * 0.5, 1.0, false)).collect();
        assert_eq!(classify_global(&steady, &p).verdict, Verdict::Oscillating);
        let decay: Vec<_> = (0..40)
            .map(|k| {
                let t = k as f64 * 0.5;
                rec(t, 1.0 / (1.0 + t).sqrt(), false)
            })
            .collect();
        assert_eq!(classify_global(&decay, &p).verdict, Verdict::Scattering);
        let mut blow = steady.clone();
        blow[30].blowup_flag = true;
        let c = classify_global(&blow, &p);
        assert_eq!(c.verdict, Verdict::Blowup);
        assert_eq!(c.t_blowup_or_horizon, 15.0);
        assert_eq!(classify_global(&steady[..10], &p).verdict, Verdict::Inconclusive);
    }

    #[test]
    fn free_equivalence() {
        let g = Grid::new(10.0 * PI, 512).unwrap();
        let v0 = gaussian(1.0, &g);
        let rep = conformal_equivalence_check(
            &v0,
            2.0,
            &SeriesNonlinearity::zero(),
            &[0.1, 0.2, 0.4],
            &EquivalenceOptions {
                stepper: Stepper::SplitStep,
                dt: 0.01,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(rep.max_deviation <= 1e-8, "{}", rep.max_deviation);
    }
}
