//! Conserved quantities, norms, and on-disk trajectory records.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Backend, ComplexField};
use crate::nonlinearity::{Family, SeriesNonlinearity};
use crate::profiles::japanese;

/// `int |u|^2`.
pub fn mass(u: &ComplexField) -> f64 {
    crate::grid::norm_sqr_sum(u.values()) * u.grid().dx()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `1/2 int |u_x|^2`.
    pub kinetic: f64,
    /// `int G(|u|)`.
    pub potential: f64,
    pub total: f64,
    /// False when a coefficient is complex; the other fields are then NaN.
    pub tracked: bool,
}

impl EnergyBreakdown {
    pub fn untracked() -> Self {
        Self {
            kinetic: f64::NAN,
            potential: f64::NAN,
            total: f64::NAN,
            tracked: false,
        }
    }

    fn new(kinetic: f64, potential: f64) -> Self {
        Self {
            kinetic,
            potential,
            total: kinetic - potential,
            tracked: true,
        }
    }
}

/// `E[u] = 1/2 int |u_x|^2 - int G(|u|)` with a spectral derivative.
pub fn energy(u: &ComplexField, series: &SeriesNonlinearity) -> EnergyBreakdown {
    energy_with(u, series, Backend::Spectral)
}

/// Energy whose kinetic part uses the Laplacian of `backend`, so that it is
/// the quantity conserved by the semi-discrete flow on that backend.
pub fn energy_with(u: &ComplexField, series: &SeriesNonlinearity, backend: Backend) -> EnergyBreakdown {
    if !series.has_real_coefficients() {
        return EnergyBreakdown::untracked();
    }
    let grid = u.grid();
    let spec = grid.forward(u.values());
    let dx = grid.dx();
    let kinetic = 0.5
        * spec
            .iter()
            .zip(grid.xi())
            .map(|(s, &xi)| -backend.laplacian_symbol(xi, dx) * s.norm_sqr())
            .sum::<f64>()
        * dx
        / grid.len() as f64;
    let g = |v: &num_complex::Complex64| series.potential_density(v.norm()).unwrap_or(f64::NAN);
    let potential = match series.family() {
        Family::FiniteSum(_) => u.values().iter().map(g).sum::<f64>(),
        // quadrature per node; worth spreading over threads
        _ => u.values().par_iter().map(g).collect::<Vec<f64>>().iter().sum::<f64>(),
    } * dx;
    EnergyBreakdown::new(kinetic, potential)
}

/// `||J^s u||_2`, i.e. the `H^s` norm.
pub fn hs_norm(u: &ComplexField, s: f64) -> f64 {
    let grid = u.grid();
    let spec = grid.forward(u.values());
    (spec
        .iter()
        .zip(grid.xi())
        .map(|(v, &xi)| (1.0 + xi * xi).powf(s) * v.norm_sqr())
        .sum::<f64>()
        * grid.dx()
        / grid.len() as f64)
        .sqrt()
}

/// `||<x>^n u||_inf`.
pub fn weighted_linf(u: &ComplexField, n: f64) -> f64 {
    u.values()
        .iter()
        .zip(u.grid().x())
        .map(|(v, &x)| japanese(x, n) * v.norm())
        .fold(0.0, f64::max)
}

/// One row of a trajectory.
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub mass: f64,
    pub energy: EnergyBreakdown,
    pub linf: f64,
    /// `||<x>^n u||_inf` when a weight power was requested.
    pub weighted_linf: Option<f64>,
    /// `(1 + t)^{1/2} ||u||_inf`.
    pub scatter_indicator: f64,
    pub blowup_flag: bool,
}

impl TrajectoryRecord {
    /// Samples every diagnostic of `u` at time `t` (the field's own time is
    /// ignored so callers can report physical time for transformed runs).
    pub fn sample(
        u: &ComplexField,
        t: f64,
        series: &SeriesNonlinearity,
        backend: Backend,
        track_energy: bool,
        weight: Option<f64>,
    ) -> Self {
        let linf = u.linf();
        Self {
            t,
            mass: mass(u),
            energy: if track_energy {
                energy_with(u, series, backend)
            } else {
                EnergyBreakdown::untracked()
            },
            linf,
            weighted_linf: weight.map(|n| weighted_linf(u, n)),
            scatter_indicator: (1.0 + t).sqrt() * linf,
            blowup_flag: false,
        }
    }

    /// Bitwise comparison that treats NaN fields as equal.
    pub fn same_as(&self, other: &Self) -> bool {
        let eq = |a: f64, b: f64| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan());
        eq(self.t, other.t)
            && eq(self.mass, other.mass)
            && eq(self.energy.total, other.energy.total)
            && eq(self.energy.kinetic, other.energy.kinetic)
            && eq(self.energy.potential, other.energy.potential)
            && self.energy.tracked == other.energy.tracked
            && eq(self.linf, other.linf)
            && eq(
                self.weighted_linf.unwrap_or(f64::NAN),
                other.weighted_linf.unwrap_or(f64::NAN),
            )
            && eq(self.scatter_indicator, other.scatter_indicator)
            && self.blowup_flag == other.blowup_flag
    }
}

/// Largest `|M(t) - M(0)| / M(0)` over the records.
pub fn mass_drift(records: &[TrajectoryRecord]) -> f64 {
    relative_drift(records.iter().map(|r| r.mass))
}

/// Largest `|E(t) - E(0)| / |E(0)|`, or `None` if energy is untracked.
pub fn energy_drift(records: &[TrajectoryRecord]) -> Option<f64> {
    let first = records.first()?;
    if !first.energy.tracked {
        return None;
    }
    Some(relative_drift(records.iter().map(|r| r.energy.total)))
}

fn relative_drift(mut values: impl Iterator<Item = f64>) -> f64 {
    let Some(v0) = values.next() else { return 0.0 };
    let scale = if v0 == 0.0 { 1.0 } else { v0.abs() };
    values.map(|v| (v - v0).abs() / scale).fold(0.0, f64::max)
}

pub const TRAJECTORY_HEADER: &str =
    "t,mass,energy_total,energy_kinetic,energy_potential,linf,weighted_linf,scatter_indicator,blowup_flag";

fn fmt_num(out: &mut String, v: f64) {
    if v.is_nan() {
        out.push_str("NaN");
    } else {
        let _ = write!(out, "{v:.16e}");
    }
}

fn record_row(r: &TrajectoryRecord, out: &mut String) {
    let fields = [
        r.t,
        r.mass,
        r.energy.total,
        r.energy.kinetic,
        r.energy.potential,
        r.linf,
        r.weighted_linf.unwrap_or(f64::NAN),
        r.scatter_indicator,
    ];
    for (i, v) in fields.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        fmt_num(out, v);
    }
    out.push_str(if r.blowup_flag { ",1\n" } else { ",0\n" });
}

/// Serializes records, header included.
pub fn trajectory_csv(records: &[TrajectoryRecord]) -> String {
    let mut out = String::with_capacity(64 + records.len() * 200);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for r in records {
        record_row(r, &mut out);
    }
    out
}

/// Writes `contents` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(contents).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_trajectory(path: &Path, records: &[TrajectoryRecord]) -> Result<()> {
    write_atomic(path, trajectory_csv(records).as_bytes())
}

/// Appends rows to an existing trajectory file (header written if the file
/// is new), in a single write so a restart never leaves half a row.
pub fn append_trajectory(path: &Path, records: &[TrajectoryRecord]) -> Result<()> {
    let exists = path.exists();
    let mut out = String::new();
    if !exists {
        out.push_str(TRAJECTORY_HEADER);
        out.push('\n');
    }
    for r in records {
        record_row(r, &mut out);
    }
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory(&text, path)
}

pub fn parse_trajectory(text: &str, path: &Path) -> Result<Vec<TrajectoryRecord>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRAJECTORY_HEADER => {}
        _ => return Err(parse_err(1, "missing trajectory header".into())),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 9 {
            return Err(parse_err(i + 1, format!("expected 9 columns, found {}", cols.len())));
        }
        let mut nums = [0.0; 8];
        for (k, c) in cols[..8].iter().enumerate() {
            nums[k] = c
                .trim()
                .parse::<f64>()
                .map_err(|e| parse_err(i + 1, format!("column {}: {e}", k + 1)))?;
        }
        let blowup_flag = match cols[8].trim() {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(i + 1, format!("bad blowup flag `{other}`"))),
        };
        let tracked = !nums[2].is_nan();
        out.push(TrajectoryRecord {
            t: nums[0],
            mass: nums[1],
            energy: EnergyBreakdown {
                total: nums[2],
                kinetic: nums[3],
                potential: nums[4],
                tracked,
            },
            linf: nums[5],
            weighted_linf: (!nums[6].is_nan()).then_some(nums[6]),
            scatter_indicator: nums[7],
            blowup_flag,
        });
    }
    Ok(out)
}

/// Final run summary written next to the trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub verdict: String,
    pub t_end_reached: f64,
    pub mass_drift_rel: f64,
    pub energy_drift_rel: Option<f64>,
    pub blowup_time: Option<f64>,
    pub config_echo: serde_json::Value,
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<()> {
    let text = serde_json::to_string_pretty(summary).expect("summary serializes");
    write_atomic(path, text.as_bytes())
}

/// Writes `trajectory.csv` and `summary.json` under `dir`.
pub fn persist(dir: &Path, records: &[TrajectoryRecord], summary: &Summary) -> Result<()> {
    write_trajectory(&dir.join("trajectory.csv"), records)?;
    write_summary(&dir.join("summary.json"), summary)
}

/// Field snapshot with columns `x, re, im, abs`.
pub fn snapshot_csv(u: &ComplexField) -> String {
    let mut out = String::with_capacity(u.values().len() * 100);
    out.push_str("x,re,im,abs\n");
    for (v, &x) in u.values().iter().zip(u.grid().x()) {
        for (i, w) in [x, v.re, v.im, v.norm()].into_iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            fmt_num(&mut out, w);
        }
        out.push('\n');
    }
    out
}

pub fn write_snapshot(path: &Path, u: &ComplexField) -> Result<()> {
    write_atomic(path, snapshot_csv(u).as_bytes())
}

/// File name used for the snapshot at time `t`.
pub fn snapshot_name(t: f64) -> String {
    format!("snap_{t:.6}.csv")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::profiles::{gaussian, quadratic_phase};
    use num_complex::Complex64 as C64;
    use std::f64::consts::PI;

    #[test]
    fn mass_of_sech() {
        let g = Grid::new(10.0 * PI, 1 << 12).unwrap();
        let u = ComplexField::from_real_fn(&g, |x| 2f64.sqrt() / x.cosh());
        assert!((mass(&u) - 4.0).abs() <= 1e-12);
        assert_eq!(mass(&ComplexField::zeros(&g)), 0.0);
        let w = quadratic_phase(&u, 3.0);
        assert!((mass(&w) - mass(&u)).abs() <= 1e-13);
    }

    #[test]
    fn soliton_energy_closed_form() {
        // Q = sqrt2 sech: 1/2 int Q'^2 = 2/3, int Q^4/4 = 4/3
        let g = Grid::new(10.0 * PI, 1 << 12).unwrap();
        let u = ComplexField::from_real_fn(&g, |x| 2f64.sqrt() / x.cosh());
        let n = SeriesNonlinearity::power(1.0, 2.0).unwrap();
        let e = energy(&u, &n);
        assert!((e.kinetic - 2.0 / 3.0).abs() <= 1e-12);
        assert!((e.potential - 4.0 / 3.0).abs() <= 1e-12);
        assert_eq!(e.total, e.kinetic - e.potential);
        let z = energy(&ComplexField::zeros(&g), &n);
        assert_eq!((z.kinetic, z.potential, z.total), (0.0, 0.0, 0.0));
    }

    #[test]
    fn complex_coefficients_are_untracked() {
        let g = Grid::new(10.0, 64).unwrap();
        let n = SeriesNonlinearity::finite_sum(vec![crate::Term::complex(C64::new(1.0, 1.0), 2.0)]).unwrap();
        assert!(!energy(&gaussian(1.0, &g), &n).tracked);
    }

    #[test]
    fn energy_directional_derivative() {
        let g = Grid::new(10.0 * PI, 1 << 10).unwrap();
        let n = SeriesNonlinearity::exp(1.0, 1.0).unwrap().with_scale(0.3);
        let u = ComplexField::from_fn(&g, |x| C64::new((-x * x).exp(), 0.3 * (-0.5 * x * x).exp()));
        // smoothing direction: one gradient-flow step of the heat equation
        let du = u.derivative(2);
        let uxx = u.derivative(2);
        let grad: Vec<C64> = u
            .values()
            .iter()
            .zip(uxx.values())
            .map(|(v, d)| -d - n.eval(v.norm()) * v)
            .collect();
        let predicted: f64 = grad
            .iter()
            .zip(du.values())
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<f64>()
            * g.dx();
        let h = 1e-6;
        let plus = u.with_values(u.values().iter().zip(du.values()).map(|(a, b)| a + h * b).collect());
        let minus = u.with_values(u.values().iter().zip(du.values()).map(|(a, b)| a - h * b).collect());
        let fd = (energy(&plus, &n).total - energy(&minus, &n).total) / (2.0 * h);
        assert!((fd - predicted).abs() <= 1e-4 * predicted.abs(), "{fd} vs {predicted}");
    }

    #[test]
    fn hs_norm_cases() {
        let g = Grid::new(20.0, 512).unwrap();
        let u = gaussian(1.0, &g);
        assert!((hs_norm(&u, 0.0) - u.l2_norm()).abs() <= 1e-13);
        let k = g.xi()[5];
        let wave = ComplexField::from_fn(&g, |x| C64::from_polar(1.0, k * x));
        let ratio = hs_norm(&wave, 1.5) / wave.l2_norm();
        assert!((ratio - (1.0 + k * k).powf(0.75)).abs() <= 1e-12);
        // int <xi>^2 pi e^{-xi^2/2} d xi / 2pi = sqrt(pi/2) (1 + 1) ... closed form:
        // ||g||^2 = sqrt(pi/2), ||g'||^2 = sqrt(pi/2)
        let exact = (2.0 * (PI / 2.0).sqrt()).sqrt();
        assert!((hs_norm(&u, 1.0) - exact).abs() <= 1e-8);
        assert!(hs_norm(&u, 2.0) >= hs_norm(&u, 1.0));
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid::new(10.0, 64).unwrap();
        let n = SeriesNonlinearity::power(1.0, 2.0).unwrap();
        let u = gaussian(1.3, &g);
        let mut recs = vec![
            TrajectoryRecord::sample(&u, 0.0, &n, Backend::Spectral, true, Some(1.0)),
            TrajectoryRecord::sample(&u, 0.1, &n, Backend::Spectral, false, None),
        ];
        recs[1].blowup_flag = true;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trajectory.csv");
        write_trajectory(&p, &recs).unwrap();
        let back = read_trajectory(&p).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in recs.iter().zip(&back) {
            assert!(a.same_as(b), "{a:?} vs {b:?}");
        }
        append_trajectory(&p, &recs[..1]).unwrap();
        assert_eq!(read_trajectory(&p).unwrap().len(), 3);
        write_trajectory(&p, &[]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), format!("{TRAJECTORY_HEADER}\n"));
    }

    #[test]
    fn io_errors_carry_the_path() {
        let err = read_trajectory(Path::new("/nonexistent/dir/t.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/t.csv"));
    }
}
