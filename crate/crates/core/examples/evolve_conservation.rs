//! Slowly decaying data under a sublinear power: both time steppers, with
//! mass and energy drift.

use std::f64::consts::PI;
use std::time::Instant;

use nlslab::diagnostics::{energy_drift, mass_drift};
use nlslab::evolve::{integrate, SimConfig, Stepper};
use nlslab::profiles::polynomial_decay;
use nlslab::{Grid, SeriesNonlinearity};

fn main() -> nlslab::Result<()> {
    let grid = Grid::new(50.0 * PI, 1 << 13)?;
    let u0 = polynomial_decay(3.0, 1.0, &grid)?;
    let series = SeriesNonlinearity::power(0.5, 0.5)?;

    for stepper in [Stepper::Irk4, Stepper::SplitStep] {
        let clock = Instant::now();
        let cfg = SimConfig::new(series.clone(), stepper, 0.01, 5.0);
        let tr = integrate(&cfg, &u0)?;
        println!(
            "{stepper}: {} steps in {:.1?}, mass drift {:.2e}, energy drift {:.2e}, |u|_inf {:.6}",
            tr.steps,
            clock.elapsed(),
            mass_drift(&tr.records),
            energy_drift(&tr.records).unwrap_or(f64::NAN),
            tr.field.linf()
        );
    }
    Ok(())
}
