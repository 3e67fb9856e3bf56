//! Bounded-below probe of `I_ρ` on the disk with a vortex of order 0.5 at the
//! origin. Radial singular bubbles keep their barycenter at the vortex and
//! stay bounded below for `ρ < 4π(1+α)`; a family concentrating elsewhere
//! with `ρ > 4π(1+α)` drives `I_ρ` to `-∞`.
//!
//! Run with `cargo run --release --example improved_inequality`.

use std::f64::consts::PI;
use std::sync::Arc;

use liouville_lab::bubbles::{bubble_from_distances, lambda_max};
use liouville_lab::concentration::{covering_number, default_covering_samples};
use liouville_lab::functional::{improved_inequality_probe, Problem, ProbeOptions};
use liouville_lab::greens::SingularSet;
use liouville_lab::numeric::geometric_grid;
use liouville_lab::{Field, Node, Result, Surface};

fn main() -> Result<()> {
    let alpha = 0.5;
    let disk = Arc::new(Surface::disk(64, 128)?);
    let o = Node(0);
    let sing = SingularSet::single(o, alpha)?;
    let cover = covering_number(&disk, 4.0, &default_covering_samples(&disk, 4.0))?;
    let opts = ProbeOptions { c1: 4.0, tau: cover.tau(), require_barycenter: true };
    println!("covering number k = {}, tau = {:.6}", cover.k, cover.tau());

    let critical = 4.0 * PI * (1.0 + alpha);
    let p = Problem::new(disk.clone(), sing.clone(), critical - 0.5)?;
    let d = disk.distances_from(o);
    let family: Vec<(f64, Field)> = geometric_grid(1.0, 1e4, 25).into_iter().map(|l| (l, bubble_from_distances(&d, alpha, l))).collect();
    let r = improved_inequality_probe(&p, "radial", family, o, opts)?;
    println!("radial, rho = 4 pi (1 + alpha) - 0.5: min I = {:.4}, skipped {}, bounded below: {}", r.minimum, r.skipped, r.bounded_below);

    let p = Problem::new(disk.clone(), sing, critical + 0.5)?;
    let x = disk.snap([0.3, 0.0])?.0;
    let d = disk.distances_from(x);
    let family: Vec<(f64, Field)> =
        geometric_grid(1.0, lambda_max(&disk, x), 25).into_iter().map(|l| (l, bubble_from_distances(&d, 0.0, l))).collect();
    let r = improved_inequality_probe(&p, "control", family, o, ProbeOptions { require_barycenter: false, ..opts })?;
    println!("off-center control, rho = 4 pi (1 + alpha) + 0.5: min I = {:.4}, bounded below: {}", r.minimum, r.bounded_below);
    Ok(())
}
