//! Qualitative check on the sphere with a single vortex of order 0.5 at the
//! north pole: for `ρ ∈ (4π, 6π)` there is no solution. Newton from bubble
//! seeds at several latitudes and scales, with two damping floors, and the
//! gradient flow from zero should all fail to converge.
//!
//! Run with `cargo run --release --example sphere_nonexistence`.

use std::f64::consts::PI;
use std::sync::Arc;

use liouville_lab::bubbles::{make_bubble, BubbleParams};
use liouville_lab::functional::Problem;
use liouville_lab::greens::SingularSet;
use liouville_lab::solver::{solve, SolverConfig};
use liouville_lab::{LabError, Resolution, Result, Surface, SurfaceKind};

fn main() -> Result<()> {
    let s = Arc::new(Surface::build(SurfaceKind::RoundSphere, Resolution::sphere_with_nodes(64 * 64))?);
    let (sing, _) = SingularSet::from_chart(&s, &[([0.0, 0.0], 0.5)])?;
    let mut converged = 0;
    let mut attempts = 0;
    for rho in [4.5 * PI, 5.0 * PI, 5.5 * PI] {
        let p = Problem::new(s.clone(), sing.clone(), rho)?;
        let flow = solve(&p, &SolverConfig { max_iter: 2000, ..SolverConfig::gradient_flow() }, &vec![0.0; s.n_nodes()])?;
        println!("rho = {:.2} pi, gradient flow from 0: {:?} after {} steps", rho / PI, flow.stop, flow.iterations);
        attempts += 1;
        converged += flow.converged as usize;
        for theta in [0.5 * PI, 0.75 * PI, PI] {
            let center = s.snap([theta, 0.0])?.0;
            for lambda in [2.0, 5.0, 10.0] {
                for min_damping in [1.0 / 64.0, 1.0 / 4096.0] {
                    let seed = make_bubble(&s, BubbleParams::new(0.0, lambda, center)?)?;
                    let cfg = SolverConfig { min_damping, max_iter: 100, ..SolverConfig::newton() };
                    let outcome = match solve(&p, &cfg, &seed) {
                        Ok(r) => format!("{:?}, residual {:.2e}", r.stop, r.residual),
                        Err(LabError::NumericalBlowup { iteration }) => format!("non-finite iterate at step {iteration}"),
                        Err(e) => return Err(e),
                    };
                    attempts += 1;
                    converged += outcome.starts_with("Converged") as usize;
                    println!("  Newton seed colatitude {theta:.2}, lambda {lambda:4}, damping floor {min_damping:.1e}: {outcome}");
                }
            }
        }
    }
    println!("{converged} of {attempts} attempts converged; consistent with nonexistence: {}", converged == 0);
    Ok(())
}
