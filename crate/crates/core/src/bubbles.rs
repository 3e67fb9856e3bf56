//! Bubble families
//!
//! ```text
//! φ_{α,λ,x}(y) = log( λ^{1+α} / (1 + (λ d(y,x))^{2(1+α)}) )
//! ```
//!
//! and the diagnostics built on them: energy and mean asymptotics, mass lower
//! bounds near singular points, and weak concentration.
//!
//! Every λ is checked against a resolution guard: the core `λ d ≤ 1` must
//! contain at least [`MIN_CORE_NODES`] nodes, so the largest admissible λ
//! depends on the grid.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::Field;
use crate::functional::{eval_i_rho_detailed, log_exp_integral, Problem};
use crate::greens::SingularSet;
use crate::numeric::{compensated_sum, least_squares};
use crate::stats::relative_deviation;
use crate::surface::{Node, Surface};

pub const MIN_CORE_NODES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BubbleParams {
    pub alpha: f64,
    pub lambda: f64,
    pub center: Node,
}

impl BubbleParams {
    pub fn new(alpha: f64, lambda: f64, center: Node) -> Result<Self> {
        let p = BubbleParams { alpha, lambda, center };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.alpha) {
            return Err(LabError::config(format!("bubble alpha = {} outside [0, 2]", self.alpha)));
        }
        if !(1.0..=1e4).contains(&self.lambda) {
            return Err(LabError::config(format!("bubble lambda = {} outside [1, 1e4]", self.lambda)));
        }
        Ok(())
    }
}

/// Bubble profile from precomputed distances to the center.
pub fn bubble_from_distances(dist: &[f64], alpha: f64, lambda: f64) -> Field {
    let beta = 1.0 + alpha;
    let peak = beta * lambda.ln();
    dist.iter().map(|&d| peak - (lambda * d).powf(2.0 * beta).ln_1p()).collect()
}

pub fn make_bubble(s: &Surface, p: BubbleParams) -> Result<Field> {
    p.validate()?;
    if p.center.0 >= s.n_nodes() {
        return Err(LabError::config("bubble center is not a node"));
    }
    Ok(bubble_from_distances(&s.distances_from(p.center), p.alpha, p.lambda))
}

/// Largest λ whose core `λ d ≤ 1` still holds [`MIN_CORE_NODES`] nodes.
pub fn lambda_max(s: &Surface, center: Node) -> f64 {
    let mut d = s.distances_from(center);
    d.sort_by(f64::total_cmp);
    (1.0 / d[MIN_CORE_NODES - 1]).min(1e4)
}

pub fn core_nodes(s: &Surface, center: Node, lambda: f64) -> usize {
    s.distances_from(center).iter().filter(|&&d| lambda * d <= 1.0).count()
}

pub fn resolution_guard(s: &Surface, center: Node, lambda: f64) -> Result<()> {
    let nodes = core_nodes(s, center, lambda);
    if nodes < MIN_CORE_NODES {
        return Err(LabError::Resolution { lambda, nodes, required: MIN_CORE_NODES });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticSample {
    pub lambda: f64,
    pub dirichlet: f64,
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub alpha: f64,
    pub center: Node,
    pub samples: Vec<AsymptoticSample>,
    pub dirichlet_slope: f64,
    pub dirichlet_target: f64,
    pub dirichlet_deviation: f64,
    pub mean_slope: f64,
    pub mean_target: f64,
    pub mean_deviation: f64,
}

/// Least-squares slopes of `∫|∇φ|²` and `⨍φ` against `log λ`.
pub fn bubble_asymptotics(s: &Surface, alpha: f64, center: Node, lambdas: &[f64]) -> Result<AsymptoticsReport> {
    if lambdas.len() < 2 {
        return Err(LabError::config("need at least two lambdas"));
    }
    for &l in lambdas {
        BubbleParams::new(alpha, l, center)?;
        resolution_guard(s, center, l)?;
    }
    let dist = s.distances_from(center);
    let samples: Vec<AsymptoticSample> = lambdas
        .par_iter()
        .map(|&lambda| {
            let phi = bubble_from_distances(&dist, alpha, lambda);
            AsymptoticSample { lambda, dirichlet: s.dirichlet(&phi), mean: s.mean(&phi) }
        })
        .collect();
    let logs: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    let (ds, _) = least_squares(&logs, &samples.iter().map(|x| x.dirichlet).collect::<Vec<_>>());
    let (ms, _) = least_squares(&logs, &samples.iter().map(|x| x.mean).collect::<Vec<_>>());
    let dt = 8.0 * PI * (1.0 + alpha).powi(2);
    let mt = -(1.0 + alpha);
    Ok(AsymptoticsReport {
        alpha,
        center,
        samples,
        dirichlet_slope: ds,
        dirichlet_target: dt,
        dirichlet_deviation: relative_deviation(ds, dt),
        mean_slope: ms,
        mean_target: mt,
        mean_deviation: relative_deviation(ms, mt),
    })
}

/// Admissible bubble exponents `(α̃, ρ/4π - 1)`, `α̃` the largest weight of
/// a singular point outside `J_ρ` (zero if there is none).
pub fn alpha_window(p: &Problem) -> (f64, f64) {
    let j = p.j_rho();
    let lo = (0..p.sing().len())
        .filter(|i| !j.contains(i))
        .map(|i| p.sing().alphas[i])
        .fold(0.0, f64::max);
    (lo, p.rho() / (4.0 * PI) - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassSample {
    pub lambda: f64,
    pub integral: f64,
    /// `∫ h̃ e^{2φ} / λ^{2(α - α_i)}`.
    pub ratio: f64,
    /// Masses in the three regions around `p_i`.
    pub regions: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassBoundReport {
    pub alpha: f64,
    pub alpha_i: f64,
    pub point: Option<Node>,
    pub delta: f64,
    pub samples: Vec<MassSample>,
    /// Slope of `log ∫ h̃ e^{2φ}` against `log λ`.
    pub log_slope: f64,
    pub expected_slope: f64,
    pub min_ratio: f64,
}

/// `∫ h̃ e^{2φ_{α,λ,x}}` for `x` within `δ²` of a singular point `p_i`
/// (or anywhere when the set is empty, with `α_i = 0`), and its `λ^{2(α-α_i)}` scaling.
pub fn singular_mass_lower_bound(
    s: &Surface,
    sing: &SingularSet,
    tilde_h: &[f64],
    alpha: f64,
    center: Node,
    lambdas: &[f64],
    delta: Option<f64>,
) -> Result<MassBoundReport> {
    let delta = delta.unwrap_or(0.2 * s.injectivity_scale());
    let nearest = sing
        .points
        .iter()
        .enumerate()
        .min_by(|a, b| s.geodesic_distance(*a.1, center).total_cmp(&s.geodesic_distance(*b.1, center)));
    let (point, alpha_i, gap) = match nearest {
        Some((i, &p)) => (Some(p), sing.alphas[i], s.geodesic_distance(p, center)),
        None => (None, 0.0, 0.0),
    };
    if point.is_some() && gap > delta * delta {
        return Err(LabError::precondition(format!(
            "center is {gap} away from the nearest singular point, more than delta^2 = {}",
            delta * delta
        )));
    }
    let dist = s.distances_from(center);
    let from_p = point.map(|p| s.distances_from(p));
    let b1 = delta.sqrt() * gap;
    let b2 = gap / delta.sqrt();
    let samples: Vec<MassSample> = lambdas
        .par_iter()
        .map(|&lambda| {
            let phi = bubble_from_distances(&dist, alpha, lambda);
            let dens: Vec<f64> = (0..s.n_nodes()).map(|y| s.weights()[y] * tilde_h[y] * (2.0 * phi[y]).exp()).collect();
            let integral = compensated_sum(dens.iter().copied());
            let mut regions = [0.0; 3];
            if let Some(dp) = &from_p {
                for (y, m) in dens.iter().enumerate() {
                    let r = dp[y];
                    if r <= b1 {
                        regions[0] += m;
                    } else if r <= b2 {
                        regions[1] += m;
                    } else if r <= delta {
                        regions[2] += m;
                    }
                }
            }
            MassSample { lambda, integral, ratio: integral / lambda.powf(2.0 * (alpha - alpha_i)), regions }
        })
        .collect();
    let logs: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    let logm: Vec<f64> = samples.iter().map(|x| x.integral.ln()).collect();
    let log_slope = if lambdas.len() >= 2 { least_squares(&logs, &logm).0 } else { f64::NAN };
    let min_ratio = samples.iter().map(|x| x.ratio).fold(f64::INFINITY, f64::min);
    Ok(MassBoundReport {
        alpha,
        alpha_i,
        point,
        delta,
        samples,
        log_slope,
        expected_slope: 2.0 * (alpha - alpha_i),
        min_ratio,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationScan {
    pub eps: f64,
    pub samples: Vec<(f64, f64)>,
    pub monotone: bool,
    pub pass: bool,
}

/// Fraction of `h̃ e^{2φ}` outside `B_x(ε)` along the λ grid.
pub fn measure_concentration(
    s: &Surface,
    tilde_h: &[f64],
    alpha: f64,
    center: Node,
    lambdas: &[f64],
    eps: f64,
) -> Result<ConcentrationScan> {
    if eps < 3.0 * s.spacing() {
        return Err(LabError::precondition(format!("eps = {eps} is below three grid cells")));
    }
    let dist = s.distances_from(center);
    let samples: Vec<(f64, f64)> = lambdas
        .par_iter()
        .map(|&lambda| {
            let phi = bubble_from_distances(&dist, alpha, lambda);
            let m = phi.max();
            let dens: Vec<f64> = (0..s.n_nodes()).map(|y| s.weights()[y] * tilde_h[y] * (2.0 * (phi[y] - m)).exp()).collect();
            let total = compensated_sum(dens.iter().copied());
            let outside = compensated_sum((0..s.n_nodes()).filter(|&y| dist[y] > eps).map(|y| dens[y]));
            (lambda, outside / total)
        })
        .collect();
    let monotone = samples.windows(2).all(|w| w[1].1 <= w[0].1);
    let pass = samples.last().is_some_and(|x| x.1 < 1e-2);
    Ok(ConcentrationScan { eps, samples, monotone, pass })
}

/// One row of a bubble scan table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BubbleScanRow {
    pub alpha: f64,
    pub lambda: f64,
    pub x_id: usize,
    pub dirichlet: f64,
    pub mean: f64,
    pub log_mass: f64,
    pub i_rho: f64,
    pub outside_mass: f64,
}

/// `I_ρ` and its ingredients along bubbles centered at each of `centers`.
pub fn energy_along_bubbles(p: &Problem, alpha: f64, centers: &[Node], lambdas: &[f64], eps: f64) -> Result<Vec<BubbleScanRow>> {
    let s = p.surface();
    let jobs: Vec<(Node, f64)> = centers.iter().flat_map(|&c| lambdas.iter().map(move |&l| (c, l))).collect();
    jobs.par_iter()
        .map(|&(c, lambda)| {
            let dist = s.distances_from(c);
            let phi = bubble_from_distances(&dist, alpha, lambda);
            let ev = eval_i_rho_detailed(p, &phi)?;
            let (log_out, _) = {
                let outside: Vec<f64> =
                    (0..s.n_nodes()).map(|y| if dist[y] > eps { p.tilde_h()[y] } else { 0.0 }).collect();
                if outside.iter().any(|v| *v > 0.0) {
                    log_exp_integral(s, Some(&outside), &phi)?
                } else {
                    (f64::NEG_INFINITY, 0.0)
                }
            };
            Ok(BubbleScanRow {
                alpha,
                lambda,
                x_id: c.0,
                dirichlet: ev.dirichlet,
                mean: s.mean(&phi),
                log_mass: ev.log_integral,
                i_rho: ev.value,
                outside_mass: (log_out - ev.log_integral).exp(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greens::tilde_h;
    use std::sync::Arc;

    #[test]
    fn bubble_point_values() {
        let s = Surface::torus(32).unwrap();
        let phi = make_bubble(&s, BubbleParams::new(0.5, 10.0, Node(0)).unwrap()).unwrap();
        assert!((phi[0] - 1.5 * 10f64.ln()).abs() < 1e-14);
        let one = bubble_from_distances(&[1.0], 0.0, 1.0);
        assert!((one[0] + 2f64.ln()).abs() < 1e-15);
        let radial = bubble_from_distances(&[0.0, 0.1, 0.2, 0.3], 0.7, 20.0);
        assert!(radial.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn params_are_validated() {
        assert!(BubbleParams::new(2.5, 10.0, Node(0)).is_err());
        assert!(BubbleParams::new(0.5, 0.5, Node(0)).is_err());
        assert!(BubbleParams::new(0.5, 2e4, Node(0)).is_err());
    }

    #[test]
    fn guard_matches_grid() {
        let s = Surface::torus(64).unwrap();
        assert!((lambda_max(&s, Node(5)) - 64.0).abs() < 1e-9);
        assert!(resolution_guard(&s, Node(5), 64.0).is_ok());
        assert!(matches!(resolution_guard(&s, Node(5), 65.0), Err(LabError::Resolution { .. })));
    }

    #[test]
    fn concentration_improves_with_lambda() {
        let s = Surface::torus(128).unwrap();
        let h = vec![1.0; s.n_nodes()];
        let lambdas = crate::numeric::geometric_grid(1.0, 128.0, 8);
        let scan = measure_concentration(&s, &h, 0.0, Node(300), &lambdas, 0.1).unwrap();
        assert!(scan.monotone);
        assert!(scan.samples[0].1 > 0.3);
        assert!(scan.pass, "{:?}", scan.samples.last());
    }

    #[test]
    fn regular_mass_bounded_below() {
        let s = Surface::torus(64).unwrap();
        let h = vec![1.0; s.n_nodes()];
        let lambdas = crate::numeric::geometric_grid(1.0, 64.0, 7);
        let r = singular_mass_lower_bound(&s, &SingularSet::empty(), &h, 0.0, Node(0), &lambdas, None).unwrap();
        assert!(r.min_ratio > 0.1);
        let phi1 = make_bubble(&s, BubbleParams::new(0.0, 1.0, Node(0)).unwrap()).unwrap();
        let direct = s.integrate(&phi1.map(|v| (2.0 * v).exp()));
        assert!((r.samples[0].integral - direct).abs() < 1e-14);
    }

    #[test]
    fn singular_slope_at_the_point() {
        let s = Surface::torus(128).unwrap();
        let p = s.snap([0.5, 0.5]).unwrap().0;
        let sing = SingularSet::single(p, 0.5).unwrap();
        let h = tilde_h(&s, &sing).unwrap();
        let lambdas = crate::numeric::geometric_grid(4.0, 128.0, 6);
        let r = singular_mass_lower_bound(&s, &sing, &h, 0.8, p, &lambdas, None).unwrap();
        assert!(r.log_slope >= r.expected_slope - 0.05, "slope {} vs {}", r.log_slope, r.expected_slope);
        assert!(singular_mass_lower_bound(&s, &sing, &h, 0.8, Node(0), &lambdas, None).is_err());
    }

    #[test]
    fn alpha_window_uses_points_outside_j_rho() {
        let s = Arc::new(Surface::torus(16).unwrap());
        let sing = SingularSet::new(vec![Node(0), Node(9)], vec![0.2, 0.9]).unwrap();
        let p = Problem::new(s, sing, 6.0 * PI).unwrap();
        let (lo, hi) = alpha_window(&p);
        assert_eq!(lo, 0.2);
        assert!((hi - 0.5).abs() < 1e-15);
    }
}
