//! Spectral derivatives, Bessel norms and exact free propagation on the
//! periodic grid.

use std::f64::consts::PI;

use nlslab::diagnostics::hs_norm;
use nlslab::num_complex::Complex64 as C64;
use nlslab::{ComplexField, Grid};

fn main() -> nlslab::Result<()> {
    let grid = Grid::new(20.0 * PI, 1 << 12)?;
    let u = ComplexField::from_real_fn(&grid, |x| (-x * x).exp());

    let du = u.derivative(1);
    let exact = ComplexField::from_real_fn(&grid, |x| -2.0 * x * (-x * x).exp());
    println!("d/dx error (sup): {:e}", du.sup_distance(&exact));

    for s in [0.0, 1.0, 2.0] {
        println!("||u||_H^{s} = {:.12}", hs_norm(&u, s));
    }

    // e^{it d_xx} e^{-x^2} = (1 + 4it)^{-1/2} e^{-x^2 / (1 + 4it)}
    let t = 1.5;
    let z = C64::new(1.0, 4.0 * t);
    let closed = ComplexField::from_fn(&grid, |x| (-x * x / z).exp() / z.sqrt());
    let moved = u.free_propagate(t);
    println!("free flow error at t = {t}: {:e}", moved.sup_distance(&closed));
    println!("mass before {:.15} after {:.15}", u.l2_norm(), moved.l2_norm());
    Ok(())
}
