//! Sharpness of the Moser-Trudinger constant along bubble families.
//!
//! On the closed torus the deficit `log ∫e^{2(u-ū)} - A ∫|∇u|²` stays
//! bounded at `A = 1/4π` and creeps up like `0.2 log λ` at `0.9/4π`. On the
//! disk with weight `|x|^{2α}` the threshold moves to `1/(4π(1+α))`.
//!
//! Run with `cargo run --release --example mt_sharpness`.

use std::f64::consts::PI;

use liouville_lab::bubbles::{bubble_from_distances, lambda_max};
use liouville_lab::functional::{mt_deficit, MtVariant};
use liouville_lab::numeric::geometric_grid;
use liouville_lab::stats::{stabilization, Bound};
use liouville_lab::{Node, Result, Surface};

fn main() -> Result<()> {
    let torus = Surface::torus(512)?;
    let c = torus.snap([0.5, 0.5])?.0;
    let lambdas = geometric_grid(1.0, lambda_max(&torus, c), 25);
    let d = torus.distances_from(c);
    for scale in [1.0, 0.9] {
        let coeff = scale / (4.0 * PI);
        let v = lambdas
            .iter()
            .map(|&l| Ok(mt_deficit(&torus, &bubble_from_distances(&d, 0.0, l), MtVariant::Closed, coeff, None)?.deficit))
            .collect::<Result<Vec<_>>>()?;
        let st = stabilization(&lambdas, &v, Bound::Above);
        println!("torus 512^2, A = {scale}/(4 pi): deficit {:.4} .. {:.4}, bounded: {}", v[0], v[v.len() - 1], st.stabilized);
    }

    let disk = Surface::disk(64, 128)?;
    let alpha = 0.5;
    let d = disk.distances_from(Node(0));
    let weight: Vec<f64> = d.iter().map(|r| r.powf(2.0 * alpha)).collect();
    let lambdas = geometric_grid(1.0, 1e4, 25);
    for scale in [1.0, 0.9] {
        let coeff = scale / (4.0 * PI * (1.0 + alpha));
        let v = lambdas
            .iter()
            .map(|&l| Ok(mt_deficit(&disk, &bubble_from_distances(&d, alpha, l), MtVariant::BoundaryFull, coeff, Some(&weight))?.deficit))
            .collect::<Result<Vec<_>>>()?;
        let st = stabilization(&lambdas, &v, Bound::Above);
        println!("disk, weight |x|^(2 alpha), A = {scale}/(4 pi (1 + alpha)): deficit {:.4} .. {:.4}, bounded: {}", v[0], v[v.len() - 1], st.stabilized);
    }
    Ok(())
}
