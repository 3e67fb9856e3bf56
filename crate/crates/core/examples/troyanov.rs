//! With a vortex of order `α` the effective constant of the `h̃`-weighted
//! inequality is `1/(4π)` at regular points and `1/(4π(1+α))` at the vortex.
//!
//! Run with `cargo run --release --example troyanov`.

use std::f64::consts::PI;
use std::sync::Arc;

use liouville_lab::bubbles::{bubble_from_distances, lambda_max};
use liouville_lab::functional::{mt_deficit, MtVariant};
use liouville_lab::greens::{tilde_h, SingularSet};
use liouville_lab::numeric::{geometric_grid, least_squares};
use liouville_lab::stats::{stabilization, Bound};
use liouville_lab::{Result, Surface};

fn main() -> Result<()> {
    let alpha = 0.5;
    let s = Arc::new(Surface::torus(512)?);
    let (sing, snapped) = SingularSet::from_chart(&s, &[([0.5, 0.5], alpha)])?;
    let th = tilde_h(&s, &sing)?;
    let p = snapped[0].node;

    let x = s.snap([0.0, 0.0])?.0;
    let lambdas = geometric_grid(1.0, lambda_max(&s, x), 25);
    let d = s.distances_from(x);
    let v = lambdas
        .iter()
        .map(|&l| Ok(mt_deficit(&s, &bubble_from_distances(&d, 0.0, l), MtVariant::Closed, 1.0 / (4.0 * PI), Some(&th))?.deficit))
        .collect::<Result<Vec<_>>>()?;
    println!("regular point, A = 1/(4 pi): bounded {}", stabilization(&lambdas, &v, Bound::Above).stabilized);

    let lambdas = geometric_grid(10.0, lambda_max(&s, p), 25);
    let d = s.distances_from(p);
    let (mut energy, mut growth) = (Vec::new(), Vec::new());
    for &l in &lambdas {
        let r = mt_deficit(&s, &bubble_from_distances(&d, alpha, l), MtVariant::Closed, 0.0, Some(&th))?;
        energy.push(r.dirichlet);
        growth.push(r.log_integral - 2.0 * r.mean);
    }
    let (slope, _) = least_squares(&energy, &growth);
    let target = 1.0 / (4.0 * PI * (1.0 + alpha));
    println!("at the vortex: d(log mass)/d(energy) = {slope:.6}, 1/(4 pi (1 + alpha)) = {target:.6} ({:.2}% off)", 100.0 * (slope / target - 1.0).abs());
    Ok(())
}
