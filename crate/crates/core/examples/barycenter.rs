//! The barycenter `β` follows concentrating bubbles, commutes with torus
//! translations and sits at the center of radial densities.
//!
//! Run with `cargo run --release --example barycenter`.

use liouville_lab::bubbles::bubble_from_distances;
use liouville_lab::concentration::{concentration_report, covering_number, default_covering_samples, Density, TauSource};
use liouville_lab::{Node, Result, Surface};

fn main() -> Result<()> {
    let c1 = 4.0;
    let s = Surface::torus(96)?;
    let k = covering_number(&s, c1, &default_covering_samples(&s, c1))?.k;
    let tau = 1.0 / (2.0 * (k as f64 + 2.0));
    let one = vec![1.0; s.n_nodes()];
    let x0 = s.snap([0.4, 0.55])?.0;
    let d = s.distances_from(x0);
    for lambda in [3.0, 10.0, 100.0, 1000.0] {
        let f = Density::from_potential(&s, &one, &bubble_from_distances(&d, 0.0, lambda))?;
        let r = concentration_report(&s, &f, c1, tau, TauSource::Covering { k })?;
        let dist = r.beta.map(|b| s.geodesic_distance(b, x0));
        println!("lambda {lambda:7.1}: dist(beta, x0) = {dist:?} (h = {:.4})", s.spacing());
    }

    let f = Density::from_potential(&s, &one, &bubble_from_distances(&d, 0.0, 20.0))?;
    let moved = Density::normalize(&s, &s.torus_translate(f.values(), 17, 40).expect("torus"))?;
    let a = concentration_report(&s, &f, c1, tau, TauSource::User)?.beta.expect("beta");
    let b = concentration_report(&s, &moved, c1, tau, TauSource::User)?.beta.expect("beta");
    println!("shift by (17, 40): beta moves from {:?} to {:?}, expected {:?}", s.chart(a), s.chart(b), s.torus_shift(a, 17, 40).map(|x| s.chart(x)));

    let disk = Surface::disk(48, 96)?;
    let kd = covering_number(&disk, c1, &default_covering_samples(&disk, c1))?.k;
    let phi = bubble_from_distances(&disk.distances_from(Node(0)), 0.0, 10.0);
    let f = Density::from_potential(&disk, &vec![1.0; disk.n_nodes()], &phi)?;
    let r = concentration_report(&disk, &f, c1, 1.0 / (2.0 * (kd as f64 + 2.0)), TauSource::Covering { k: kd })?;
    println!("radial disk density: |eta| = {:.2e}, beta = {:?}", r.eta.norm(), r.beta);
    Ok(())
}
