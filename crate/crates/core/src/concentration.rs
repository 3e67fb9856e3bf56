//! Concentration radius, thresholded mass and barycenters of unit measures.
//!
//! For a unit density `f` and `C1 > 2`, the concentration radius `σ(x, f)`
//! balances the mass inside `B_x(σ)` against the mass outside `B_x(C1 σ)`,
//! and `T(x, f)` is the mass inside. Nodes with `T ≥ τ` form `S(f)`; the
//! `[T - τ]⁺`-weighted ambient average `η` projects to the barycenter `β`.
//!
//! On a grid both ball masses are step functions of the radius, so the
//! balance equation has a sign-change interval rather than a root; `σ` is its
//! midpoint.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::Field;
use crate::functional::{eval_i_rho, Problem};
use crate::numeric::compensated_sum;
use crate::surface::{Node, Point, Surface, SurfaceKind};

pub const DEFAULT_C1: f64 = 4.0;

/// A nonnegative density with unit integral.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Density {
    values: Field,
}

impl Density {
    /// Normalizes a nonnegative field to unit mass.
    pub fn normalize(s: &Surface, f: &[f64]) -> Result<Density> {
        if f.len() != s.n_nodes() {
            return Err(LabError::config("density has the wrong length"));
        }
        if f.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(LabError::precondition("density must be finite and nonnegative"));
        }
        let mass = s.integrate(f);
        if !(mass > 0.0) {
            return Err(LabError::precondition("density has zero mass"));
        }
        Ok(Density { values: f.iter().map(|v| v / mass).collect() })
    }

    /// `f = h̃ e^{2u} / ∫ h̃ e^{2u}`, evaluated with a max shift.
    pub fn from_potential(s: &Surface, tilde_h: &[f64], u: &[f64]) -> Result<Density> {
        let m = u
            .iter()
            .zip(tilde_h)
            .filter(|(_, h)| **h > 0.0)
            .map(|(u, _)| *u)
            .fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = u.iter().zip(tilde_h).map(|(u, h)| h * (2.0 * (u - m)).exp()).collect();
        Self::normalize(s, &raw)
    }

    pub fn uniform(s: &Surface) -> Density {
        Density { values: Field::constant(s.n_nodes(), 1.0 / s.total_area()) }
    }

    pub fn values(&self) -> &Field {
        &self.values
    }
}

/// σ and T at one node, with the discretization record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaT {
    pub sigma: f64,
    pub t: f64,
    /// `in(σ) - (1 - in(C1 σ))`, nonpositive by construction.
    pub residual: f64,
    /// Ends of the sign-change interval of the balance function.
    pub lower: f64,
    pub upper: f64,
}

/// Computes σ(x, f) and T(x, f) from the sorted distance profile of `x`.
pub fn sigma_t(s: &Surface, f: &Density, x: Node, c1: f64) -> SigmaT {
    assert!(c1 > 2.0, "C1 must exceed 2");
    let prof = s.profile(s.class_of(x));
    let w = s.weights();
    let fv = f.values();
    let mut cum = Vec::with_capacity(prof.entries.len());
    let mut acc = 0.0;
    for e in &prof.entries {
        let y = s.resolve(x, e);
        acc += w[y] * fv[y];
        cum.push(acc);
    }
    let dist: Vec<f64> = prof.entries.iter().map(|e| e.dist).collect();
    let total = acc;
    let inside = |r: f64| -> f64 {
        let k = dist.partition_point(|&d| d <= r);
        if k == 0 {
            0.0
        } else {
            cum[k - 1]
        }
    };
    // compare d / C1 <= r rather than d <= C1 r so that the breakpoints d / C1
    // below are exact
    let inside_big = |r: f64| -> f64 {
        let k = dist.partition_point(|&d| d / c1 <= r);
        if k == 0 {
            0.0
        } else {
            cum[k - 1]
        }
    };
    let balance = |r: f64| inside(r) + inside_big(r) - total;

    let smallest_positive = dist.iter().copied().find(|&d| d > 0.0).unwrap_or(s.diameter());
    let (lower, upper) = if balance(0.0) >= 0.0 {
        (0.0, smallest_positive / c1)
    } else {
        let ka = dist.partition_point(|&d| balance(d) < 0.0);
        let kb = dist.partition_point(|&d| balance(d / c1) < 0.0);
        let ba = dist.get(ka).copied().unwrap_or(f64::INFINITY);
        let bb = dist.get(kb).map_or(f64::INFINITY, |d| d / c1);
        let b = ba.min(bb);
        // largest breakpoint strictly below b, from either family
        let ia = dist.partition_point(|&d| d < b);
        let ib = dist.partition_point(|&d| d / c1 < b);
        let aa = if ia > 0 { dist[ia - 1] } else { 0.0 };
        let ab = if ib > 0 { dist[ib - 1] / c1 } else { 0.0 };
        (aa.max(ab), b)
    };
    let sigma = 0.5 * (lower + upper);
    let t = inside(sigma);
    SigmaT { sigma, t, residual: balance(sigma), lower, upper }
}

/// σ and T at every node (parallel map, deterministic output order).
pub fn sigma_t_all(s: &Surface, f: &Density, c1: f64) -> Vec<SigmaT> {
    s.warm_profiles();
    (0..s.n_nodes()).into_par_iter().map(|x| sigma_t(s, f, Node(x), c1)).collect()
}

pub fn sigma(s: &Surface, f: &Density, x: Node, c1: f64) -> f64 {
    sigma_t(s, f, x, c1).sigma
}

pub fn t_mass(s: &Surface, f: &Density, x: Node, c1: f64) -> f64 {
    sigma_t(s, f, x, c1).t
}

/// Where the threshold τ came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TauSource {
    /// `τ = 1/(2(k+2))` with the measured covering number `k`.
    Covering { k: usize },
    User,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub c1: f64,
    pub tau: f64,
    pub tau_source: TauSource,
    pub sigma_of: Vec<f64>,
    pub t_of: Vec<f64>,
    pub s_set: Vec<Node>,
    pub sigma_bar: f64,
    pub y_bar: Node,
    pub eta: Point,
    /// `None` when η falls outside the tubular neighborhood.
    pub beta: Option<Node>,
    /// η at the ambient center of a symmetric density (sphere).
    pub degenerate: bool,
    pub max_t: f64,
}

impl ConcentrationReport {
    pub fn beta(&self) -> Result<Node> {
        self.beta.ok_or(LabError::ProjectionDomain {
            kind: SurfaceKind::RoundSphere,
            point: self.eta.as_slice().to_vec(),
        })
    }
}

pub fn concentration_report(s: &Surface, f: &Density, c1: f64, tau: f64, tau_source: TauSource) -> Result<ConcentrationReport> {
    if !(c1 > 2.0) {
        return Err(LabError::config(format!("C1 = {c1} must exceed 2")));
    }
    let st = sigma_t_all(s, f, c1);
    report_from(s, &st, c1, tau, tau_source)
}

fn report_from(s: &Surface, st: &[SigmaT], c1: f64, tau: f64, tau_source: TauSource) -> Result<ConcentrationReport> {
    let sigma_of: Vec<f64> = st.iter().map(|v| v.sigma).collect();
    let t_of: Vec<f64> = st.iter().map(|v| v.t).collect();
    let max_t = t_of.iter().copied().fold(0.0, f64::max);
    let s_set: Vec<Node> = (0..s.n_nodes()).filter(|&x| t_of[x] >= tau).map(Node).collect();
    if s_set.is_empty() {
        return Err(LabError::Threshold { tau, max_t });
    }
    let mut y_bar = s_set[0];
    for &x in &s_set {
        if sigma_of[x.0] > sigma_of[y_bar.0] {
            y_bar = x;
        }
    }
    let w = s.weights();
    let weight: Vec<f64> = (0..s.n_nodes()).map(|x| w[x] * (t_of[x] - tau).max(0.0)).collect();
    let denom = compensated_sum(weight.iter().copied());
    let dim = s.embedding_dim();
    let embeds: Vec<Point> = (0..s.n_nodes()).map(|x| s.embed(Node(x))).collect();
    let coords: Vec<f64> = (0..dim)
        .map(|k| compensated_sum(weight.iter().zip(&embeds).map(|(a, p)| a * p.as_slice()[k])) / denom)
        .collect();
    let eta = Point::new(&coords);
    let (beta, degenerate) = match s.nearest_point_projection(&eta) {
        Ok(b) => (Some(b), false),
        Err(LabError::ProjectionDomain { .. }) => (None, true),
        Err(e) => return Err(e),
    };
    let sigma_bar = sigma_of[y_bar.0];
    Ok(ConcentrationReport {
        c1,
        tau,
        tau_source,
        sigma_of,
        t_of,
        s_set,
        sigma_bar,
        y_bar,
        eta,
        beta,
        degenerate,
        max_t,
    })
}

/// Greedy covers of annuli `A_y(σ, C1 σ)` by balls of radius `σ/4` centered
/// in the annulus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringReport {
    pub c1: f64,
    pub k: usize,
    pub samples: Vec<CoveringSample>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringSample {
    pub y: Node,
    pub sigma: f64,
    pub annulus_nodes: usize,
    pub balls: usize,
}

impl CoveringReport {
    pub fn tau(&self) -> f64 {
        1.0 / (2.0 * (self.k as f64 + 2.0))
    }
}

/// Largest greedy-cover size over the `(y, σ)` samples.
pub fn covering_number(s: &Surface, c1: f64, samples: &[(Node, f64)]) -> Result<CoveringReport> {
    if !(c1 > 2.0) {
        return Err(LabError::config(format!("C1 = {c1} must exceed 2")));
    }
    if samples.is_empty() {
        return Err(LabError::config("covering number needs at least one sample"));
    }
    let out: Vec<CoveringSample> = samples
        .par_iter()
        .map(|&(y, sigma)| {
            let (annulus_nodes, balls) = greedy_cover(s, y, sigma, c1);
            CoveringSample { y, sigma, annulus_nodes, balls }
        })
        .collect();
    let k = out.iter().map(|c| c.balls).max().unwrap_or(0);
    Ok(CoveringReport { c1, k, samples: out })
}

/// Default sample: a few centers with `σ = 0.4 · injectivity / C1`.
pub fn default_covering_samples(s: &Surface, c1: f64) -> Vec<(Node, f64)> {
    let sigma = 0.4 * s.injectivity_scale() / c1;
    let sigma = sigma.max(4.0 * s.spacing());
    match s.kind() {
        SurfaceKind::FlatTorus => vec![(Node(0), sigma)],
        SurfaceKind::RoundSphere => {
            let eq = s.snap([std::f64::consts::FRAC_PI_2, 0.0]).map(|p| p.0).unwrap_or(Node(0));
            vec![(Node(0), sigma), (eq, sigma)]
        }
        SurfaceKind::UnitDisk => vec![(Node(0), sigma.min(0.2))],
    }
}

fn greedy_cover(s: &Surface, y: Node, sigma: f64, c1: f64) -> (usize, usize) {
    let dist = s.distances_from(y);
    let members: Vec<usize> = (0..s.n_nodes()).filter(|&x| dist[x] >= sigma && dist[x] <= c1 * sigma).collect();
    if members.is_empty() {
        return (0, 0);
    }
    let local: std::collections::HashMap<usize, usize> = members.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let r = 0.25 * sigma;
    // ball membership inside the annulus, per candidate center
    let balls: Vec<Vec<usize>> = members
        .iter()
        .map(|&c| {
            let prof = s.profile(s.class_of(Node(c)));
            prof.entries
                .iter()
                .take_while(|e| e.dist <= r)
                .filter_map(|e| local.get(&s.resolve(Node(c), e)).copied())
                .collect()
        })
        .collect();
    let mut covered = vec![false; members.len()];
    let mut gain: Vec<usize> = balls.iter().map(|b| b.len()).collect();
    let mut remaining = members.len();
    let mut count = 0;
    // inverse index: which balls contain member j
    let mut containing: Vec<Vec<usize>> = vec![Vec::new(); members.len()];
    for (c, b) in balls.iter().enumerate() {
        for &j in b {
            containing[j].push(c);
        }
    }
    while remaining > 0 {
        let mut best = 0;
        for c in 1..gain.len() {
            if gain[c] > gain[best] {
                best = c;
            }
        }
        count += 1;
        for &j in &balls[best] {
            if !covered[j] {
                covered[j] = true;
                remaining -= 1;
                for &c in &containing[j] {
                    gain[c] -= 1;
                }
            }
        }
    }
    (members.len(), count)
}

/// Outcome of the retraction onto `Θ_ρ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiOutcome {
    pub node: Node,
    pub beta: Node,
    /// Singular point whose θ-ball contained β, if β was moved.
    pub moved_from: Option<Node>,
    /// β coincided with a singular point: the direction was chosen arbitrarily.
    pub ambiguous: bool,
}

/// Moves β(u) out of the θ-balls around the singular points in `J_ρ`, along
/// the geodesic from the offending point through β.
pub fn psi_projection(p: &Problem, u: &[f64], theta: f64, level: f64, c1: f64, tau: f64) -> Result<PsiOutcome> {
    let value = eval_i_rho(p, u)?;
    if value > -level {
        return Err(LabError::precondition(format!(
            "I_rho(u) = {value} is above the sublevel -L = {}",
            -level
        )));
    }
    let s = p.surface();
    let f = p.density(u)?;
    let report = concentration_report(s, &f, c1, tau, TauSource::User)?;
    let beta = report.beta()?;
    for i in p.j_rho() {
        let pi = p.sing().points[i];
        let d = s.geodesic_distance(pi, beta);
        if d < theta {
            let (through, ambiguous) = if pi == beta {
                // any neighbor fixes a direction; use the lowest-index nearest node
                let dist = s.distances_from(pi);
                let nb = (0..s.n_nodes())
                    .filter(|&y| y != pi.0)
                    .min_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)))
                    .expect("surface has more than one node");
                (Node(nb), true)
            } else {
                (beta, false)
            };
            let target = s.geodesic_ray(pi, through, theta)?;
            let node = s.nearest_point_projection(&target)?;
            return Ok(PsiOutcome { node, beta, moved_from: Some(pi), ambiguous });
        }
    }
    Ok(PsiOutcome { node: beta, beta, moved_from: None, ambiguous: false })
}

/// Node whose `r`-ball carries more than `1 - eps` of `h̃ e^{2u}`, if any
/// (the heaviest such ball; lowest index on ties).
pub fn dominant_ball(p: &Problem, u: &[f64], r: f64, eps: f64) -> Result<Option<Node>> {
    if !(r > 0.0 && eps > 0.0) {
        return Err(LabError::config("dominant ball needs r > 0 and eps > 0"));
    }
    let s = p.surface();
    let f = p.density(u)?;
    let masses = ball_masses(s, f.values(), r);
    let best = Field::new(masses.clone()).argmax();
    Ok((masses[best] > 1.0 - eps).then_some(Node(best)))
}

/// `∫_{B_x(r)} f` at every node.
pub fn ball_masses(s: &Surface, f: &[f64], r: f64) -> Vec<f64> {
    s.warm_profiles();
    let w = s.weights();
    (0..s.n_nodes())
        .into_par_iter()
        .map(|x| {
            let prof = s.profile(s.class_of(Node(x)));
            let k = prof.entries.partition_point(|e| e.dist <= r);
            compensated_sum(prof.entries[..k].iter().map(|e| {
                let y = s.resolve(Node(x), e);
                w[y] * f[y]
            }))
        })
        .collect()
}

/// Defining identity of σ at one node, recomputed by brute-force ball
/// quadrature (independent of the profile sums used by [`sigma_t`]).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub node: Node,
    /// `|∫_{B(σ)} f - ∫_{Σ∖B(C1σ)} f|`
    pub residual: f64,
    /// Mass of the shells crossed when either ball grows to the end of the
    /// sign-change interval: the one-cell quadrature tolerance.
    pub tolerance: f64,
}

impl IdentityCheck {
    pub fn holds(&self) -> bool {
        self.residual <= self.tolerance + 1e-12
    }
}

pub fn sigma_identity_check(s: &Surface, f: &Density, x: Node, c1: f64, st: &SigmaT) -> IdentityCheck {
    let fv = f.values();
    // the shells end on a breakpoint; C1 (d / C1) may round below d
    let edge = 1.0 + 1e-12;
    let b = s.ball_integrals(fv, x, &[st.sigma, c1 * st.sigma, st.upper * edge, c1 * st.upper * edge]);
    let (inside, big) = (b[0], b[1]);
    let total = s.integrate(fv);
    let shell_in = b[2] - inside;
    let shell_out = b[3] - big;
    // an atom holding half the mass puts the sign change at r = 0, where both balls gain x at once
    let own = s.weights()[x.0] * fv[x.0];
    let atom = if 2.0 * own >= total { 2.0 * own } else { 0.0 };
    IdentityCheck { node: x, residual: (inside - (total - big)).abs(), tolerance: shell_in + shell_out + atom }
}

/// Worst slack of `dist(x,y) ≤ C1 max(σ_x, σ_y) + min(σ_x, σ_y) + slack`
/// over the given pairs; nonpositive means the bound holds for all of them.
pub fn pairwise_sigma_margin(s: &Surface, sigma_of: &[f64], c1: f64, pairs: &[(Node, Node)], slack: f64) -> f64 {
    pairs
        .iter()
        .map(|&(x, y)| {
            let (a, b) = (sigma_of[x.0], sigma_of[y.0]);
            s.geodesic_distance(x, y) - (c1 * a.max(b) + a.min(b) + slack)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::Resolution;
    use proptest::prelude::*;

    fn bump(s: &Surface, c: Node, width: f64) -> Vec<f64> {
        (0..s.n_nodes())
            .map(|y| {
                let d = s.geodesic_distance(c, Node(y));
                (-(d / width).powi(2)).exp()
            })
            .collect()
    }

    fn check_identity(s: &Surface, f: &Density, x: Node, c1: f64) {
        let st = sigma_t(s, f, x, c1);
        let c = sigma_identity_check(s, f, x, c1, &st);
        assert!(c.holds(), "identity residual {} > {}", c.residual, c.tolerance);
        assert!((st.t - s.ball_integral(f.values(), x, st.sigma)).abs() < 1e-12);
    }

    #[test]
    fn identity_holds_for_bump_on_torus() {
        let s = Surface::torus(32).unwrap();
        let f = Density::normalize(&s, &bump(&s, Node(100), 0.1)).unwrap();
        for x in (0..s.n_nodes()).step_by(37) {
            check_identity(&s, &f, Node(x), 4.0);
        }
    }

    #[test]
    fn delta_density_splits_mass() {
        let s = Surface::torus(32).unwrap();
        let mut raw = vec![0.0; s.n_nodes()];
        raw[77] = 1.0;
        let f = Density::normalize(&s, &raw).unwrap();
        let st = sigma_t(&s, &f, Node(77), 4.0);
        assert!(st.sigma > 0.0 && st.sigma <= s.spacing());
        // node-center inclusion puts the single loaded cell inside both balls
        assert_eq!(st.t, 1.0);
        let far = sigma_t(&s, &f, s.torus_shift(Node(77), 16, 16).unwrap(), 4.0);
        assert!(far.t < 1e-12);
    }

    #[test]
    fn torus_translation_equivariance_is_exact() {
        let s = Surface::torus(24).unwrap();
        let raw = bump(&s, Node(30), 0.08);
        let f = Density::normalize(&s, &raw).unwrap();
        let g = Density::normalize(&s, &s.torus_translate(&raw, 5, 11).unwrap()).unwrap();
        for x in (0..s.n_nodes()).step_by(13) {
            let y = s.torus_shift(Node(x), 5, 11).unwrap();
            assert_eq!(sigma(&s, &f, Node(x), 4.0), sigma(&s, &g, y, 4.0));
        }
    }

    #[test]
    fn uniform_sphere_is_degenerate() {
        let s = Surface::build(SurfaceKind::RoundSphere, Resolution::new(17, 34)).unwrap();
        let f = Density::uniform(&s);
        let r = concentration_report(&s, &f, 4.0, 1e-3, TauSource::User).unwrap();
        assert_eq!(r.s_set.len(), s.n_nodes());
        assert!(r.eta.norm() < 1e-10);
        assert!(r.degenerate && r.beta.is_none());
    }

    #[test]
    fn empty_threshold_set_is_an_error() {
        let s = Surface::torus(16).unwrap();
        let f = Density::uniform(&s);
        assert!(matches!(
            concentration_report(&s, &f, 4.0, 0.9, TauSource::User),
            Err(LabError::Threshold { .. })
        ));
    }

    #[test]
    fn covering_is_monotone_in_c1() {
        let s = Surface::torus(64).unwrap();
        let k3 = covering_number(&s, 3.0, &[(Node(0), 0.1)]).unwrap().k;
        let k4 = covering_number(&s, 4.0, &[(Node(0), 0.1)]).unwrap().k;
        assert!(k3 <= k4, "k(3) = {k3}, k(4) = {k4}");
    }

    #[test]
    fn covering_respects_the_area_bound() {
        // the annulus A(σ, 4σ) has area 15πσ², a ball of radius σ/4 has area πσ²/16
        let s = Surface::torus(128).unwrap();
        let k = covering_number(&s, 4.0, &[(Node(0), 0.05)]).unwrap().k;
        assert!(k >= 240, "k = {k}");
    }

    #[test]
    fn covering_is_scale_free_once_resolved() {
        let s = Surface::torus(256).unwrap();
        let a = covering_number(&s, 4.0, &[(Node(0), 0.075)]).unwrap().k as f64;
        let b = covering_number(&s, 4.0, &[(Node(0), 0.1)]).unwrap().k as f64;
        assert!((a - b).abs() <= 0.02 * b, "k = {a} vs {b}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn sigma_identity_for_random_bumps(cx in 0usize..256, width in 0.03f64..0.4, c1 in 2.5f64..8.0, x in 0usize..256) {
            let s = Surface::torus(16).unwrap();
            let f = Density::normalize(&s, &bump(&s, Node(cx), width)).unwrap();
            check_identity(&s, &f, Node(x), c1);
            let st = sigma_t(&s, &f, Node(x), c1);
            if st.lower > 0.0 {
                prop_assert!(st.residual < 0.0);
                prop_assert!(st.t <= 0.5 + 1e-12);
            }
        }

        #[test]
        fn ball_mass_is_monotone(r1 in 0.0f64..0.8, r2 in 0.0f64..0.8, x in 0usize..256) {
            let s = Surface::torus(16).unwrap();
            let f = bump(&s, Node(40), 0.2);
            let (a, b) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            prop_assert!(s.ball_integral(&f, Node(x), a) <= s.ball_integral(&f, Node(x), b) + 1e-15);
        }
    }
}
