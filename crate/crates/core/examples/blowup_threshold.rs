//! Amplitude threshold above a ground state: `A Q` with `A` slightly above
//! one persists, a larger `A` concentrates until the grid cannot resolve it.

use std::f64::consts::PI;

use nlslab::evolve::{integrate, SimConfig, Stepper};
use nlslab::petviashvili::{solve_ground_state, PetviashviliOptions};
use nlslab::{Grid, SeriesNonlinearity};

fn main() -> nlslab::Result<()> {
    let grid = Grid::new(40.0 * PI, 1 << 13)?;
    let series = SeriesNonlinearity::double(0.1, 0.5, 0.9, 4.0)?;
    let q = solve_ground_state(&series, 0.1, &grid, &PetviashviliOptions::default())?.q;
    println!("ground state peak {:.6}", q.linf());

    for a in [1.05, 1.2] {
        let mut cfg = SimConfig::new(series.clone(), Stepper::SplitStep, 0.005, 20.0);
        cfg.track_energy = false;
        let tr = integrate(&cfg, &q.scale(a.into()))?;
        let peak = tr.records.iter().map(|r| r.linf).fold(0.0, f64::max);
        match tr.blowup {
            Some(b) => println!("A = {a}: blow-up ({:?}) at t = {:.3}, |u|_inf = {:.3}", b.cause, b.t, b.linf),
            None => println!("A = {a}: reached t = {}, largest |u|_inf {:.4}", tr.t_reached(), peak),
        }
    }
    Ok(())
}
