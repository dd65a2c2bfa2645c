//! Petviashvili ground states, checked against the explicit cubic-quintic
//! profile, and the admissible frequency range for a defocusing top power.

use std::f64::consts::PI;

use nlslab::petviashvili::{ground_state_residual, solve_ground_state, PetviashviliOptions};
use nlslab::profiles::{double_ground_state, double_omega_max};
use nlslab::{Grid, SeriesNonlinearity};

fn main() -> nlslab::Result<()> {
    let grid = Grid::new(40.0 * PI, 1 << 13)?;
    let series = SeriesNonlinearity::double(1.0, 2.0, -1.0, 4.0)?;
    let omega_max = double_omega_max(2.0, 1.0, -1.0);
    println!("admissible omega < {omega_max}");

    let omega = 0.15;
    let res = solve_ground_state(&series, omega, &grid, &PetviashviliOptions::default())?;
    let exact = double_ground_state(2.0, 1.0, -1.0, omega, &grid)?;
    println!(
        "omega = {omega}: {} iterations, residual {:.2e}, stabilizer {:.12}",
        res.iterations,
        res.residual_inf,
        res.final_stabilizer()
    );
    println!("peak {:.12}, sup distance to the explicit profile {:.2e}", res.q.linf(), res.q.sup_distance(&exact));
    println!("residual of the explicit profile {:.2e}", ground_state_residual(&series, omega, &exact));

    match double_ground_state(2.0, 1.0, -1.0, 3.0 / 16.0, &grid) {
        Ok(_) => println!("omega = 3/16 unexpectedly accepted"),
        Err(e) => println!("omega = 3/16 rejected: {e}"),
    }

    // a nonlinearity with no closed-form ground state
    let exp = SeriesNonlinearity::exp_full(0.025, 1.0)?;
    let res = solve_ground_state(&exp, 0.1, &grid, &PetviashviliOptions::default())?;
    println!("exp nonlinearity, omega = 0.1: peak {:.8}, {} iterations", res.q.linf(), res.iterations);
    Ok(())
}
