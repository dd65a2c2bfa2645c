//! Acceptance report: one PASS/FAIL line per criterion, with the measured
//! values. A failing criterion is reported, not turned into a panic; the
//! closing line counts the passes.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nlslab::conformal::{
    classify_global, conformal_equivalence_check, scattering_distance, scattering_profile,
    ClassifyParams, EquivalenceOptions, Verdict,
};
use nlslab::diagnostics::{energy_drift, mass_drift};
use nlslab::evolve::{integrate, weight_integral_quadrature, Evolver, SimConfig, Stepper};
use nlslab::nonlinearity::{check_condition, GenericSeries, Verdict as Cv};
use nlslab::num_complex::Complex64 as C64;
use nlslab::petviashvili::{solve_ground_state, PetviashviliOptions};
use nlslab::profiles::{double_ground_state, gaussian, polynomial_decay, quadratic_phase, sech_ground_state};
use nlslab::{Condition, ComplexField, Grid, SeriesNonlinearity};

type Check = Result<(bool, String), String>;

struct Report {
    passed: usize,
    total: usize,
}

impl Report {
    fn run(&mut self, name: &str, f: impl FnOnce() -> Check) {
        let clock = Instant::now();
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        self.total += 1;
        if ok {
            self.passed += 1;
        }
        println!(
            "{} {name}: {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            clock.elapsed().as_secs_f64()
        );
    }
}

fn info(name: &str, detail: String) {
    println!("INFO {name}: {detail}");
}

fn e<T>(r: nlslab::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mx, my) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let (num, den) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    num / den
}

fn ground_state_oracle() -> Check {
    let g = e(Grid::new(40.0 * PI, 1 << 14))?;
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    let mut parts = Vec::new();
    let cases = [
        ("cubic", e(SeriesNonlinearity::power(1.0, 2.0))?, 1.0, e(sech_ground_state(2.0, 1.0, &g))?),
        (
            "cubic-quintic",
            e(SeriesNonlinearity::double(1.0, 2.0, -1.0, 4.0))?,
            0.15,
            e(double_ground_state(2.0, 1.0, -1.0, 0.15, &g))?,
        ),
    ];
    for (name, series, omega, exact) in cases {
        let clock = Instant::now();
        let res = e(solve_ground_state(&series, omega, &g, &PetviashviliOptions::default()))?;
        slowest = slowest.max(clock.elapsed());
        let d = res.q.sup_distance(&exact);
        worst = worst.max(d);
        parts.push(format!("{name} sup diff {d:.2e}"));
    }
    Ok((
        worst <= 1e-9 && slowest.as_secs_f64() <= 30.0,
        format!("{} (bar 1e-9, slowest solve {:.2}s of 30s)", parts.join(", "), slowest.as_secs_f64()),
    ))
}

fn admissibility() -> Check {
    let g = e(Grid::new(40.0 * PI, 1 << 12))?;
    let accept = double_ground_state(2.0, 1.0, -1.0, 0.15, &g).is_ok();
    let reject = double_ground_state(2.0, 1.0, -1.0, 0.1875, &g).is_err();
    Ok((accept && reject, format!("omega 0.15 accepted: {accept}, omega 3/16 rejected: {reject}")))
}

fn fig1_desk() -> Result<(SeriesNonlinearity, ComplexField), String> {
    let g = e(Grid::new(50.0 * PI, 1 << 13))?;
    Ok((e(SeriesNonlinearity::power(0.5, 0.5))?, e(polynomial_decay(3.0, 1.0, &g))?))
}

fn conservation() -> Check {
    let (n, u0) = fig1_desk()?;
    let clock = Instant::now();
    let irk = e(integrate(&SimConfig::new(n.clone(), Stepper::Irk4, 0.01, 20.0), &u0))?;
    let split = e(integrate(&SimConfig::new(n, Stepper::SplitStep, 0.01, 20.0), &u0))?;
    let secs = clock.elapsed().as_secs_f64();
    let (m, en, ms) = (
        mass_drift(&irk.records),
        energy_drift(&irk.records).unwrap_or(f64::INFINITY),
        mass_drift(&split.records),
    );
    let ok = irk.blowup.is_none() && split.blowup.is_none() && m <= 1e-10 && en <= 1e-8 && ms <= 1e-13 && secs <= 120.0;
    Ok((
        ok,
        format!("IRK4 mass {m:.2e} (1e-10), energy {en:.2e} (1e-8); split-step mass {ms:.2e} (1e-13); {secs:.1}s of 120s"),
    ))
}

fn soliton_case() -> Result<(SeriesNonlinearity, ComplexField), String> {
    let g = e(Grid::new(20.0 * PI, 1 << 11))?;
    Ok((e(SeriesNonlinearity::power(1.0, 2.0))?, e(sech_ground_state(2.0, 1.0, &g))?))
}

fn soliton_hold() -> Check {
    let (n, q) = soliton_case()?;
    let mut cfg = SimConfig::new(n, Stepper::Irk4, 0.01, 50.0);
    cfg.snapshot_stride = Some(100);
    let tr = e(integrate(&cfg, &q))?;
    let dev = tr
        .snapshots
        .iter()
        .chain(std::iter::once(&tr.field))
        .flat_map(|u| u.values().iter().zip(q.values()).map(|(a, b)| (a.norm() - b.re).abs()))
        .fold(0.0, f64::max);
    Ok((tr.blowup.is_none() && dev <= 1e-6, format!("max | |u(t)| - Q | = {dev:.2e} over t <= 50 (bar 1e-6)")))
}

fn irk4_energy_drifts(n: &SeriesNonlinearity, u0: &ComplexField, dts: &[f64], t_end: f64) -> Result<Vec<f64>, String> {
    dts.iter()
        .map(|&dt| {
            let mut cfg = SimConfig::new(n.clone(), Stepper::Irk4, dt, t_end);
            cfg.diagnostics_stride = 1;
            let tr = e(integrate(&cfg, u0))?;
            energy_drift(&tr.records).ok_or_else(|| "energy not tracked".to_string())
        })
        .collect()
}

fn order(dts: &[f64], drifts: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = dts.iter().zip(drifts).map(|(d, e)| (d.ln(), e.ln())).collect();
    slope(&pts)
}

fn energy_order() -> Check {
    let (n, q) = soliton_case()?;
    let dts = [0.02, 0.01, 0.005];
    let drifts = irk4_energy_drifts(&n, &q, &dts, 50.0)?;
    let p = order(&dts, &drifts);
    Ok((
        p >= 3.7,
        format!(
            "soliton drifts {:.2e} / {:.2e} / {:.2e} at dt 0.02 / 0.01 / 0.005, fitted order {p:.2} (bar 3.7)",
            drifts[0], drifts[1], drifts[2]
        ),
    ))
}

fn energy_order_decaying_data() -> Result<String, String> {
    let (n, u0) = fig1_desk()?;
    let dts = [0.04, 0.02, 0.01, 0.005];
    let drifts = irk4_energy_drifts(&n, &u0, &dts, 2.0)?;
    Ok(format!(
        "IRK4 energy drift on 3/<x> data to t = 2: {} at dt {:?}, fitted order {:.2}",
        drifts.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>().join(" / "),
        dts,
        order(&dts, &drifts)
    ))
}

fn threshold_breakdown() -> Check {
    let g = e(Grid::new(40.0 * PI, 1 << 13))?;
    let n = e(SeriesNonlinearity::double(0.1, 0.5, 0.9, 4.0))?;
    let q = e(solve_ground_state(&n, 0.1, &g, &PetviashviliOptions::default()))?.q;
    let run = |a: f64| {
        let mut cfg = SimConfig::new(n.clone(), Stepper::Irk4, 0.005, 20.0);
        cfg.track_energy = false;
        e(integrate(&cfg, &q.scale(a.into())))
    };
    let low = run(1.05)?;
    let high = run(1.2)?;
    let peak = low.records.iter().map(|r| r.linf).fold(0.0, f64::max);
    let ok = low.blowup.is_none() && low.t_reached() >= 20.0 && high.blowup.is_some_and(|b| b.t < 20.0);
    Ok((
        ok,
        format!(
            "A = 1.05 reached t = {} (peak |u| {peak:.3}); A = 1.2: {}",
            low.t_reached(),
            match high.blowup {
                Some(b) => format!("blow-up ({}) at t = {:.3}", b.cause, b.t),
                None => "no blow-up".into(),
            }
        ),
    ))
}

fn quadratic_phase_sweep() -> Check {
    let g = e(Grid::new(10.0 * PI, 1 << 13))?;
    let p = e(polynomial_decay(2.5, 4.0, &g))?;
    let n = e(SeriesNonlinearity::exp_full(1.0, 1.0))?;
    let clock = Instant::now();
    let mut verdicts = Vec::new();
    for (b, t_end) in [(-4.0, 2.0), (4.0, 10.0)] {
        let mut cfg = SimConfig::new(n.clone(), Stepper::SplitStep, 1e-4, t_end);
        cfg.diagnostics_stride = 100;
        cfg.track_energy = false;
        let tr = e(integrate(&cfg, &quadratic_phase(&p, b)))?;
        let cl = classify_global(&tr.records, &ClassifyParams::default());
        verdicts.push((b, cl.verdict, cl.t_blowup_or_horizon, cl.tail_slope));
    }
    let secs = clock.elapsed().as_secs_f64();
    let ok = verdicts[0].1 == Verdict::Blowup && verdicts[1].1 == Verdict::Scattering && secs <= 300.0;
    let text: Vec<String> = verdicts
        .iter()
        .map(|(b, v, t, s)| format!("b = {b:+}: {v} at t = {t:.4} (tail slope {s:.2e})"))
        .collect();
    Ok((ok, format!("{}; {secs:.0}s of 300s", text.join("; "))))
}

fn conformal_equivalence() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    let cases = [
        ("free", SeriesNonlinearity::zero(), 2.0, vec![0.1, 0.2, 0.4], 10.0, 1024, 1e-8),
        ("|u|^4", e(SeriesNonlinearity::power(1.0, 4.0))?, 2.0, vec![0.1, 0.2, 0.4], 10.0, 1024, 1e-6),
        (
            "|u|^3 + |u|^6",
            e(SeriesNonlinearity::double(1.0, 3.0, 1.0, 6.0))?,
            8.0,
            vec![0.025, 0.05, 0.1],
            8.0,
            2048,
            1e-5,
        ),
    ];
    for (name, series, b, times, lw, nn, bar) in cases {
        let g = e(Grid::new(lw * PI, nn))?;
        let rep = e(conformal_equivalence_check(&gaussian(1.0, &g), b, &series, &times, &EquivalenceOptions::default()))?;
        ok &= rep.max_deviation <= bar;
        parts.push(format!("{name} b = {b}: {:.2e} ({bar:.0e})", rep.max_deviation));
    }
    Ok((ok, parts.join(", ")))
}

fn scattering_monotonicity() -> Check {
    let b = 4.0;
    let g = e(Grid::new(64.0 * PI, 1 << 15))?;
    let p = e(polynomial_decay(2.5, 4.0, &g))?;
    let n = e(SeriesNonlinearity::exp_tail(1.0, 1.0))?;

    let mut vcfg = SimConfig::new(n.clone(), Stepper::SplitStep, 2.5e-5, 1.0 / b);
    vcfg.nonautonomous_b = Some(b);
    vcfg.track_energy = false;
    let mut ev = e(Evolver::new(&vcfg, &p))?;
    ev.advance_to(vcfg.effective_t_end()).map_err(|b| format!("{b:?}"))?;
    let u_plus = e(scattering_profile(&ev.field(), b))?;

    let times = [1.0, 2.0, 5.0, 10.0, 20.0];
    let mut ucfg = SimConfig::new(n, Stepper::SplitStep, 1e-3, 20.0);
    ucfg.track_energy = false;
    ucfg.diagnostics_stride = 100;
    let mut eu = e(Evolver::new(&ucfg, &quadratic_phase(&p, b)))?;
    let mut dist = Vec::new();
    for &t in &times {
        eu.advance_to(t).map_err(|b| format!("{b:?}"))?;
        dist.push(e(scattering_distance(&eu.field(), &u_plus, 1.0))?);
    }
    let ok = dist.windows(2).all(|w| w[1] < w[0]);
    let text: Vec<String> = times.iter().zip(&dist).map(|(t, d)| format!("t={t}: {d:.4e}")).collect();
    info(
        "scattering-monotonicity",
        format!("u_+ from the transformed equation up to s = {:.6} of 1/b = {}", ev.time(), 1.0 / b),
    );
    Ok((ok, format!("H^1 distance {}", text.join(", "))))
}

fn condition_checker() -> Check {
    let finite = e(SeriesNonlinearity::double(1.0, 3.0, -1.0, 6.0))?;
    let exp = e(SeriesNonlinearity::exp_tail(1.0, 1.0))?;
    let divergent = GenericSeries {
        coeff: |_| C64::new(1.0, 0.0),
        alpha: |k| (k + 1) as f64,
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for cond in Condition::ALL {
        let f = e(check_condition(&finite, cond, 2.0, 2, 1e-12))?;
        let exact = matches!(f.verdict, Cv::Converged { tail_bound, .. } if tail_bound == 0.0);
        let x = e(check_condition(&exp, cond, 2.0, 2, 1e-12))?;
        let tail = match x.verdict {
            Cv::Converged { tail_bound, .. } => Some(tail_bound),
            _ => None,
        };
        ok &= exact && tail.is_some_and(|t| t <= 1e-12);
        parts.push(format!(
            "{cond}: finite sum {}, exp tail bound {}",
            if exact { "exact" } else { "not exact" },
            tail.map_or("none".into(), |t| format!("{t:.1e}"))
        ));
    }
    for cond in [Condition::Weighted, Condition::Energy] {
        let d = e(check_condition(&divergent, cond, 2.0, 2, 1e-10))?;
        ok &= d.verdict == Cv::Diverged;
        parts.push(format!("unit series under {cond}: {:?}", d.verdict));
    }
    Ok((ok, parts.join("; ")))
}

fn weight_integral() -> Check {
    let mut worst: f64 = 0.0;
    for (alpha, b) in [(3.0, 1.0), (4.0, 2.0), (6.0, 5.0)] {
        let exact = 2.0 / (b * (alpha - 2.0));
        worst = worst.max((weight_integral_quadrature(alpha, b) - exact).abs());
    }
    Ok((worst <= 1e-10, format!("largest error {worst:.2e} over (3,1), (4,2), (6,5) (bar 1e-10)")))
}

fn main() {
    // cargo passes harness flags such as --test-threads; none apply here
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected = |name: &str| filter.is_empty() || filter.iter().any(|f| name.contains(f.as_str()));
    let mut report = Report { passed: 0, total: 0 };
    let checks: [(&str, fn() -> Check); 11] = [
        ("ground-state-oracle", ground_state_oracle),
        ("admissibility-interval", admissibility),
        ("conservation", conservation),
        ("soliton-hold", soliton_hold),
        ("energy-order", energy_order),
        ("threshold-breakdown", threshold_breakdown),
        ("quadratic-phase-sweep", quadratic_phase_sweep),
        ("conformal-equivalence", conformal_equivalence),
        ("scattering-monotonicity", scattering_monotonicity),
        ("condition-checker", condition_checker),
        ("weight-integral", weight_integral),
    ];
    for (name, f) in checks {
        if selected(name) {
            report.run(name, f);
        }
        if name == "energy-order" && selected(name) {
            match energy_order_decaying_data() {
                Ok(s) => info("energy-order", s),
                Err(err) => info("energy-order", err),
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", report.passed, report.total);
}
