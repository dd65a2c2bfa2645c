//! Building power-series nonlinearities, evaluating them, and checking the
//! coefficient conditions that make the local theory work.

use nlslab::nonlinearity::{check_condition, GenericSeries, Verdict};
use nlslab::num_complex::Complex64 as C64;
use nlslab::{Condition, SeriesNonlinearity};

fn describe(v: &Verdict) -> String {
    match v {
        Verdict::Converged { bound, tail_bound } => format!("converged, bound {bound:.6e} (tail {tail_bound:.1e})"),
        Verdict::Diverged => "diverged".into(),
        Verdict::Inconclusive { tail_estimate } => format!("inconclusive, last term {tail_estimate:.1e}"),
    }
}

fn main() -> nlslab::Result<()> {
    let cubic_quintic = SeriesNonlinearity::double(1.0, 2.0, -1.0, 4.0)?;
    let exp = SeriesNonlinearity::exp_full(1.0, 1.0)?;
    let tail = SeriesNonlinearity::exp_tail(1.0, 1.0)?;
    let sin = SeriesNonlinearity::sin(2.0)?;

    println!("{tail}");
    for s in [0.1, 0.5, 1.0] {
        println!(
            "|u| = {s}: cubic-quintic {:.6}, exp {:.6}, exp tail {:.6}, sin {:.6}",
            cubic_quintic.eval_real(s),
            exp.eval_real(s),
            tail.eval_real(s),
            sin.eval_real(s),
        );
    }
    // the closed form of e^{|u|} - 1 - |u| - |u|^2/2 against its partial sums
    let s: f64 = 0.8;
    println!(
        "tail closed form {:.15} vs 40 terms {:.15}",
        tail.eval_real(s),
        tail.eval_series(s, 40).re
    );

    println!();
    for (name, series) in [("cubic-quintic", &cubic_quintic), ("exp tail", &tail), ("sin", &sin)] {
        for cond in Condition::ALL {
            match check_condition(series, cond, 1.0, 1, 1e-12) {
                Ok(rep) => println!("{name:<14}{:<14}{}", cond.to_string(), describe(&rep.verdict)),
                Err(e) => println!("{name:<14}{:<14}not applicable: {e}", cond.to_string()),
            }
        }
    }

    // unit coefficients on integer powers: every condition fails at R0 = 2
    let divergent = GenericSeries {
        coeff: |_| C64::new(1.0, 0.0),
        alpha: |k| (k + 3) as f64,
    };
    let rep = check_condition(&divergent, Condition::Energy, 2.0, 3, 1e-10)?;
    println!("\nunit coefficients at R0 = 2: {}", describe(&rep.verdict));
    Ok(())
}
