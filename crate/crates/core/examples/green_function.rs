//! Zero-mean Green's functions and the singular weight `h̃`.
//!
//! Prints the discrete residual of `-Δ_h G = δ_p - 1/|Σ|` in the dual norm,
//! the constant of the regular part and the power-law vanishing of `h̃`
//! near a vortex.
//!
//! Run with `cargo run --release --example green_function`.

use liouville_lab::greens::{dual_norm_residual, green_function, tilde_h, SingularSet};
use liouville_lab::{Node, Result, Surface};

fn main() -> Result<()> {
    for s in [Surface::torus(64)?, Surface::sphere(45, 90)?] {
        let p = Node(0);
        let g = green_function(&s, p)?;
        println!(
            "{:?} {}: dual-norm residual {:.2e}, mean {:.1e}, log coefficient {:.5}, constant {:.5}",
            s.kind(),
            s.resolution(),
            dual_norm_residual(&s, &g)?,
            s.mean(&g.values),
            g.log_coefficient,
            g.constant
        );
    }

    // h̃ ~ d^{2α} near a vortex of order α
    let s = Surface::torus(256)?;
    let alpha = 0.5;
    let p = s.snap([0.5, 0.5])?.0;
    let h = tilde_h(&s, &SingularSet::single(p, alpha)?)?;
    println!("torus 256^2, alpha = {alpha}: h~(x) / d(x, p)^(2 alpha) along a ray");
    for k in [1, 2, 4, 8, 16, 32] {
        let x = s.torus_shift(p, k, 0).expect("torus");
        let d = s.geodesic_distance(p, x);
        println!("  d = {d:.5}  h~ = {:.6e}  ratio {:.5}", h[x.0], h[x.0] / d.powf(2.0 * alpha));
    }
    Ok(())
}
