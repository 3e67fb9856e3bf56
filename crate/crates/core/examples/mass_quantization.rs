//! Onset of blow-up and mass quantization on the round sphere.
//!
//! Regular point: one vortex of order 0.5 at the north pole. As `ρ ↗ 4π`
//! the minimizers concentrate at the south pole (no solution exists at
//! `ρ = 4π` for a weight monotone in the height) and the local mass tends
//! to `4π`.
//!
//! Singular point: orders 0.5 at the north pole and 1 at the south pole.
//! As `ρ ↗ 6π = 4π(1 + 0.5)` the minimizers concentrate at the north pole
//! with local mass `6π`.
//!
//! Run with `cargo run --release --example mass_quantization`.

use std::f64::consts::PI;
use std::sync::Arc;

use liouville_lab::functional::Problem;
use liouville_lab::greens::SingularSet;
use liouville_lab::solver::{rho_continuation, ContinuationOptions, SolverConfig};
use liouville_lab::{Resolution, Result, Surface, SurfaceKind};

/// `ball` selects the local mass: 0 around the running maximum, `j + 1`
/// around the `j`-th vortex.
fn run(name: &str, s: &Arc<Surface>, specs: &[([f64; 2], f64)], target: f64, ball: usize) -> Result<()> {
    let (sing, _) = SingularSet::from_chart(s, specs)?;
    let p = Problem::new(s.clone(), sing, 0.5 * target)?;
    let rhos: Vec<f64> = (0..40).map(|k| target * (1.0 - 0.5 * 0.75f64.powi(k))).collect();
    let cfg = SolverConfig { tol: 1e-9, max_iter: 80, ..SolverConfig::newton() };
    let opts = ContinuationOptions { refinements: 6, ..ContinuationOptions::default() };
    let (trace, _) = rho_continuation(&p, &rhos, &cfg, &vec![0.0; s.n_nodes()], &opts)?;
    println!("{name}: target mass {:.4}", target);
    for r in &trace.records {
        let c = s.chart(r.peak);
        let m = r.local_masses[ball];
        println!(
            "  rho {:9.6}  converged {:5}  length {:.4}  peak colatitude {:.3}  max(2u - log Z) {:6.3}  mass {:8.4} in r = {:.3}",
            r.rho, r.converged, r.concentration_length, c[0], r.max_normalized, m.mass, m.radius
        );
    }
    if let Some(last) = trace.last_resolved() {
        let m = last.local_masses[ball].mass;
        println!("  last resolved rho {:.6}: local mass {:.4} = {:.4} x target", last.rho, m, m / target);
    }
    Ok(())
}

fn main() -> Result<()> {
    let s = Arc::new(Surface::build(SurfaceKind::RoundSphere, Resolution::sphere_with_nodes(128 * 128))?);
    println!("sphere grid {} ({} nodes, h = {:.4})", s.resolution(), s.n_nodes(), s.spacing());
    run("regular point", &s, &[([0.0, 0.0], 0.5)], 4.0 * PI, 0)?;
    run("singular point", &s, &[([0.0, 0.0], 0.5), ([PI, 0.0], 1.0)], 6.0 * PI, 1)?;
    Ok(())
}
