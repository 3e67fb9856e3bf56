//! Dirichlet energy and mean of bubbles grow like `8π(1+α)² log λ` and
//! `-(1+α) log λ`. Fits both slopes on a 256² torus.
//!
//! Run with `cargo run --release --example bubble_energy`.

use liouville_lab::bubbles::{bubble_asymptotics, lambda_max};
use liouville_lab::numeric::geometric_grid;
use liouville_lab::{Result, Surface};

fn main() -> Result<()> {
    let torus = Surface::torus(256)?;
    let center = torus.snap([0.5, 0.5])?.0;
    let top = lambda_max(&torus, center);
    let lambdas = geometric_grid(10.0, top, 12);
    println!("lambda range [10, {top}] on a 256^2 torus");
    for alpha in [0.0, 0.5, 1.0] {
        let r = bubble_asymptotics(&torus, alpha, center, &lambdas)?;
        println!(
            "alpha = {alpha:3.1}: energy slope {:8.4} (target {:8.4}, dev {:5.2}%), mean slope {:7.4} (target {:5.2}, dev {:5.2}%)",
            r.dirichlet_slope,
            r.dirichlet_target,
            100.0 * r.dirichlet_deviation,
            r.mean_slope,
            r.mean_target,
            100.0 * r.mean_deviation
        );
    }
    Ok(())
}
