//! Concentration radius `σ(x, f)`, thresholded mass `T(x, f)`, the set
//! `S(f)` and the barycenter for a bubble density on the torus, and the
//! closed-form uniform-sphere case `σ = π/5`.
//!
//! Run with `cargo run --release --example concentration_map`.

use std::f64::consts::PI;

use liouville_lab::bubbles::bubble_from_distances;
use liouville_lab::concentration::{concentration_report, covering_number, default_covering_samples, sigma_t, Density, TauSource};
use liouville_lab::{Result, Surface};

fn main() -> Result<()> {
    let c1 = 4.0;
    let s = Surface::torus(96)?;
    let cover = covering_number(&s, c1, &default_covering_samples(&s, c1))?;
    let tau = cover.tau();
    println!("torus 96^2: covering number k = {}, tau = 1/(2(k+2)) = {tau:.6}", cover.k);

    let x0 = s.snap([0.3, 0.7])?.0;
    let phi = bubble_from_distances(&s.distances_from(x0), 0.0, 40.0);
    let f = Density::from_potential(&s, &vec![1.0; s.n_nodes()], &phi)?;
    let r = concentration_report(&s, &f, c1, tau, TauSource::Covering { k: cover.k })?;
    let st = sigma_t(&s, &f, x0, c1);
    println!("bubble at {:?}, lambda = 40: sigma = {:.5}, T = {:.4} at the center", s.chart(x0), st.sigma, st.t);
    println!(
        "max T = {:.4} (> 2 tau: {}), |S(f)| = {}, sigma_bar = {:.5}, beta at {:?}",
        r.max_t,
        r.max_t > 2.0 * tau,
        r.s_set.len(),
        r.sigma_bar,
        r.beta.map(|b| s.chart(b))
    );

    let sphere = Surface::sphere(63, 126)?;
    let f = Density::uniform(&sphere);
    let st = sigma_t(&sphere, &f, sphere.snap([1.0, 0.0])?.0, c1);
    println!(
        "uniform sphere: sigma = {:.4} (pi/5 = {:.4}), T = {:.5} ((1 - cos(pi/5))/2 = {:.5})",
        st.sigma,
        PI / 5.0,
        st.t,
        (1.0 - (PI / 5.0).cos()) / 2.0
    );
    Ok(())
}
