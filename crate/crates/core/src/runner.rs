//! Pipelines behind the command-line subcommands. Every run writes into its
//! own directory, so concurrent runs never share a file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::conformal::{classify_global, conformal_equivalence_check, Classification, EquivalenceReport};
use crate::config::{Case, RunConfig};
use crate::diagnostics::{self, energy_drift, mass_drift, Summary};
use crate::error::{Error, Result};
use crate::evolve::{integrate, Blowup, Trajectory};
use crate::grid::{ComplexField, Grid};
use crate::nonlinearity::{check_condition, ConditionReport, Family, SeriesNonlinearity};
use crate::petviashvili::{ground_state_residual, solve_ground_state, GroundStateResult};
use crate::profiles;

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    diagnostics::write_atomic(path, text.as_bytes())
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.16e}")
    }
}

/// Writes the explicit config next to the results.
pub fn echo_config(cfg: &RunConfig, out: &Path) -> Result<()> {
    diagnostics::write_atomic(&out.join("config.json"), cfg.to_json().as_bytes())
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub case: Case,
    pub dir: PathBuf,
    pub classification: Classification,
    pub blowup: Option<Blowup>,
    pub summary: Summary,
}

fn summarize(cfg: &RunConfig, traj: &Trajectory, cl: &Classification) -> Summary {
    let verdict = match traj.blowup {
        Some(b) => format!("{}({})", cl.verdict, b.t),
        None => cl.verdict.to_string(),
    };
    Summary {
        verdict,
        t_end_reached: traj.t_reached(),
        mass_drift_rel: mass_drift(&traj.records),
        energy_drift_rel: energy_drift(&traj.records),
        blowup_time: traj.blowup.map(|b| b.t),
        config_echo: cfg.echo(),
    }
}

fn run_case(cfg: &RunConfig, series: SeriesNonlinearity, profile: &ComplexField, case: Case, dir: &Path) -> Result<RunOutcome> {
    let sim = cfg.sim_config(series)?;
    let u0 = cfg.initial_field(profile, &case);
    let traj = integrate(&sim, &u0)?;
    let cl = classify_global(&traj.records, &cfg.classify);
    let summary = summarize(cfg, &traj, &cl);
    diagnostics::persist(dir, &traj.records, &summary)?;
    for snap in &traj.snapshots {
        diagnostics::write_snapshot(&dir.join(diagnostics::snapshot_name(snap.time())), snap)?;
    }
    Ok(RunOutcome {
        case,
        dir: dir.to_path_buf(),
        classification: cl,
        blowup: traj.blowup,
        summary,
    })
}

/// Single evolution from the configured initial data.
pub fn run_evolve(cfg: &RunConfig, out: &Path) -> Result<RunOutcome> {
    let grid = cfg.grid_build()?;
    let series = cfg.series()?;
    let (profile, _) = cfg.profile(&grid, &series)?;
    let init = cfg.require_initial()?;
    let case = Case {
        amplitude: init.scale,
        b: init.phase_b,
        eps: None,
    };
    echo_config(cfg, out)?;
    run_case(cfg, series, &profile, case, out)
}

pub const VERDICTS_HEADER: &str = "b,A,verdict,t_blowup_or_horizon,max_scatter_indicator,eps";

pub fn verdicts_csv(rows: &[RunOutcome]) -> String {
    let mut out = String::from(VERDICTS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_num(r.case.b),
            fmt_num(r.case.amplitude),
            r.classification.verdict,
            fmt_num(r.classification.t_blowup_or_horizon),
            fmt_num(r.classification.max_scatter_indicator),
            r.case.eps.map_or(String::new(), fmt_num)
        );
    }
    out
}

fn case_dir(out: &Path, i: usize, case: &Case) -> PathBuf {
    let mut name = format!("case_{i:03}_A{}_b{}", case.amplitude, case.b);
    if let Some(e) = case.eps {
        let _ = write!(name, "_eps{e}");
    }
    out.join(name)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))
}

/// Cartesian sweep over amplitude, phase and strength; rows of
/// `verdicts.csv` follow the case order whatever the worker count.
pub fn run_sweep(cfg: &RunConfig, out: &Path, workers: usize) -> Result<Vec<RunOutcome>> {
    let grid = cfg.grid_build()?;
    let cases = cfg.cases();
    echo_config(cfg, out)?;
    let mut eps_values: Vec<Option<f64>> = Vec::new();
    for c in &cases {
        if !eps_values.contains(&c.eps) {
            eps_values.push(c.eps);
        }
    }
    let pool = pool(workers)?;
    let rows = pool.install(|| -> Result<Vec<RunOutcome>> {
        let profiles: Vec<(Option<f64>, SeriesNonlinearity, ComplexField)> = eps_values
            .par_iter()
            .map(|&eps| {
                let case = Case {
                    amplitude: 1.0,
                    b: 0.0,
                    eps,
                };
                let series = cfg.series_for(&case)?;
                let (p, _) = cfg.profile(&grid, &series)?;
                Ok((eps, series, p))
            })
            .collect::<Result<_>>()?;
        cases
            .par_iter()
            .enumerate()
            .map(|(i, case)| {
                let (_, series, p) = profiles.iter().find(|(e, _, _)| *e == case.eps).expect("profile per eps");
                run_case(cfg, series.clone(), p, *case, &case_dir(out, i, case))
            })
            .collect()
    })?;
    diagnostics::write_atomic(&out.join("verdicts.csv"), verdicts_csv(&rows).as_bytes())?;
    Ok(rows)
}

/// Closed-form ground state when the nonlinearity has one: a single
/// focusing power, or two powers `alpha`, `2 alpha` with `omega` admissible.
pub fn explicit_ground_state(series: &SeriesNonlinearity, omega: f64, grid: &Grid) -> Option<ComplexField> {
    if series.constant() != 0.0 || !series.has_real_coefficients() {
        return None;
    }
    let Family::FiniteSum(terms) = series.family() else {
        return None;
    };
    let live: Vec<_> = terms.iter().filter(|t| t.coeff.re != 0.0).collect();
    match live.as_slice() {
        [t] if t.coeff.re > 0.0 => {
            let (a, eps) = (t.alpha, t.coeff.re);
            let amp = ((a + 2.0) * omega / (2.0 * eps)).powf(1.0 / a);
            let k = 0.5 * a * omega.sqrt();
            Some(ComplexField::from_real_fn(grid, |x| amp * (1.0 / (k * x).cosh()).powf(2.0 / a)))
        }
        [t1, t2] if (t2.alpha - 2.0 * t1.alpha).abs() < 1e-12 => {
            profiles::double_ground_state(t1.alpha, t1.coeff.re, t2.coeff.re, omega, grid).ok()
        }
        _ => None,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GroundStateReport {
    pub eps: Option<f64>,
    pub omega: f64,
    pub iterations: usize,
    pub residual_inf: f64,
    pub final_stabilizer: f64,
    pub mass: f64,
    /// Sup distance to the closed form, when there is one.
    pub sup_diff_vs_exact: Option<f64>,
    pub file: String,
}

fn groundstate_csv(res: &GroundStateResult, exact: Option<&ComplexField>) -> String {
    let mut out = String::from(if exact.is_some() { "x,q_num,q_exact,diff\n" } else { "x,q_num\n" });
    for (i, (&x, q)) in res.q.grid().x().iter().zip(res.q.values()).enumerate() {
        match exact {
            Some(e) => {
                let qe = e.values()[i].re;
                let _ = writeln!(out, "{},{},{},{}", fmt_num(x), fmt_num(q.re), fmt_num(qe), fmt_num(q.re - qe));
            }
            None => {
                let _ = writeln!(out, "{},{}", fmt_num(x), fmt_num(q.re));
            }
        }
    }
    out
}

/// Ground states for the configured nonlinearity, one per swept strength.
pub fn run_groundstate(cfg: &RunConfig, out: &Path) -> Result<Vec<GroundStateReport>> {
    let grid = cfg.grid_build()?;
    let spec = cfg.require_groundstate()?;
    echo_config(cfg, out)?;
    let eps_list: Vec<Option<f64>> = match &cfg.sweep {
        Some(sw) if !sw.eps.is_empty() => sw.eps.iter().copied().map(Some).collect(),
        _ => vec![None],
    };
    let mut reports = Vec::new();
    for eps in eps_list {
        let case = Case {
            amplitude: 1.0,
            b: 0.0,
            eps,
        };
        let series = cfg.series_for(&case)?;
        let res = solve_ground_state(&series, spec.omega, &grid, &spec.options())?;
        let exact = explicit_ground_state(&series, spec.omega, &grid);
        let file = match eps {
            Some(e) => format!("groundstate_eps{e}.csv"),
            None => "groundstate.csv".to_string(),
        };
        diagnostics::write_atomic(&out.join(&file), groundstate_csv(&res, exact.as_ref()).as_bytes())?;
        reports.push(GroundStateReport {
            eps,
            omega: spec.omega,
            iterations: res.iterations,
            residual_inf: ground_state_residual(&series, spec.omega, &res.q),
            final_stabilizer: res.final_stabilizer(),
            mass: diagnostics::mass(&res.q),
            sup_diff_vs_exact: exact.as_ref().map(|e| res.q.sup_distance(e)),
            file,
        });
    }
    write_json(
        &out.join("summary.json"),
        &serde_json::json!({ "ground_states": reports, "config_echo": cfg.echo() }),
    )?;
    Ok(reports)
}

/// Integrates `u` and the transformed `v` and writes the deviations.
pub fn run_conformal_check(cfg: &RunConfig, out: &Path) -> Result<EquivalenceReport> {
    let grid = cfg.grid_build()?;
    let series = cfg.series()?;
    let (profile, _) = cfg.profile(&grid, &series)?;
    let init = cfg.require_initial()?;
    let cf = cfg.conformal.as_ref().ok_or_else(|| Error::config("conformal", "required"))?;
    let v0 = profile.scale(C64::new(init.scale, 0.0));
    echo_config(cfg, out)?;
    let rep = conformal_equivalence_check(&v0, cf.b, &series, &cf.times, &cfg.equivalence_options()?)?;
    let mut csv = String::from("t,s,deviation\n");
    for &(t, d) in &rep.deviations {
        let _ = writeln!(
            csv,
            "{},{},{}",
            fmt_num(t),
            fmt_num(crate::conformal::transformed_time(cf.b, t)),
            fmt_num(d)
        );
    }
    diagnostics::write_atomic(&out.join("conformal.csv"), csv.as_bytes())?;
    write_json(
        &out.join("summary.json"),
        &serde_json::json!({
            "b": cf.b,
            "max_deviation": rep.max_deviation,
            "config_echo": cfg.echo(),
        }),
    )?;
    Ok(rep)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionOutcome {
    pub condition: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ConditionReport>,
    /// Why the condition does not apply to this family.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub not_applicable: Option<String>,
}

pub fn run_check_conditions(cfg: &RunConfig, out: &Path) -> Result<Vec<ConditionOutcome>> {
    let series = cfg.series()?;
    let spec = cfg.conditions.clone().unwrap_or_default();
    let mut rows = Vec::new();
    for cond in &spec.conditions {
        let row = match check_condition(&series, *cond, spec.r0, spec.m, spec.tol) {
            Ok(report) => ConditionOutcome {
                condition: cond.to_string(),
                report: Some(report),
                not_applicable: None,
            },
            Err(e @ Error::TermPrecondition { .. }) => ConditionOutcome {
                condition: cond.to_string(),
                report: None,
                not_applicable: Some(e.to_string()),
            },
            Err(e) => return Err(e),
        };
        rows.push(row);
    }
    echo_config(cfg, out)?;
    write_json(
        &out.join("conditions.json"),
        &serde_json::json!({
            "nonlinearity": series.to_string(),
            "conditions": rows,
        }),
    )?;
    Ok(rows)
}

/// Classifies a stored trajectory.
pub fn classify_file(path: &Path, params: &crate::conformal::ClassifyParams) -> Result<Classification> {
    let records = diagnostics::read_trajectory(path)?;
    Ok(classify_global(&records, params))
}
