//! Recovers the scattering state `u_+` from the transformed equation, then
//! watches the direct solution approach `e^{it d_xx} u_+`.

use std::f64::consts::PI;

use nlslab::conformal::{scattering_distance, scattering_profile, transformed_time};
use nlslab::evolve::{Evolver, SimConfig, Stepper};
use nlslab::profiles::{polynomial_decay, quadratic_phase};
use nlslab::{Grid, SeriesNonlinearity};

fn main() -> nlslab::Result<()> {
    let b = 4.0;
    let grid = Grid::new(32.0 * PI, 1 << 13)?;
    let p = polynomial_decay(1.0, 4.0, &grid)?;
    let series = SeriesNonlinearity::exp_tail(1.0, 1.0)?;

    // v lives on [0, 1/b) and needs no data at the endpoint
    let mut vcfg = SimConfig::new(series.clone(), Stepper::SplitStep, 1e-4, 1.0 / b);
    vcfg.nonautonomous_b = Some(b);
    vcfg.track_energy = false;
    let mut ev = Evolver::new(&vcfg, &p)?;
    ev.advance_to(vcfg.effective_t_end())?;
    let u_plus = scattering_profile(&ev.field(), b)?;
    println!("s reached {:.6} of 1/b = {}", ev.time(), 1.0 / b);

    let mut ucfg = SimConfig::new(series, Stepper::SplitStep, 2e-3, 10.0);
    ucfg.track_energy = false;
    let mut eu = Evolver::new(&ucfg, &quadratic_phase(&p, b))?;
    for t in [0.5, 1.0, 2.0, 5.0, 10.0] {
        eu.advance_to(t)?;
        let d = scattering_distance(&eu.field(), &u_plus, 1.0)?;
        println!("t = {t:>4}: ||u(t) - e^(it d_xx) u_+||_H1 = {d:.4e}  (s = {:.5})", transformed_time(b, t));
    }
    Ok(())
}
