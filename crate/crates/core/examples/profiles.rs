//! Initial-data profiles, the weighted norm and its infimum certificate.

use std::f64::consts::PI;

use nlslab::profiles::{infimum_certificate, polynomial_decay, quadratic_phase, sech_ground_state, x_norm, XNormParams};
use nlslab::Grid;

fn main() -> nlslab::Result<()> {
    let grid = Grid::new(40.0 * PI, 1 << 13)?;
    let p = polynomial_decay(2.5, 4.0, &grid)?;
    let params = XNormParams::new(4.0, 3, 7.0)?;
    println!("X-norm of 2.5 <x>^-4: {:.6}", x_norm(&p, &params));

    // a quadratic phase leaves |u| and hence the certificate alone
    let chirped = quadratic_phase(&p, 4.0);
    for (name, u) in [("P", &p), ("e^{i x^2} P", &chirped)] {
        let cert = infimum_certificate(u, 4.0, 1.0);
        println!("{name}: inf <x>^4 |u| = {:.6} at x = {:.2}, passes {}", cert.lambda, cert.argmin, cert.passes);
    }

    // exponential decay cannot satisfy a polynomial lower bound
    let sech = sech_ground_state(2.0, 1.0, &grid)?;
    let cert = infimum_certificate(&sech, 4.0, 1e-3);
    println!("sech: inf {:.3e}, passes {}", cert.lambda, cert.passes);
    Ok(())
}
