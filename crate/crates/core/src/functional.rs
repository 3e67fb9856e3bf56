//! The energy
//!
//! ```text
//! I_ρ(u) = ∫|∇u|² + 2ρ/|Σ| ∫u - ρ log ∫ h̃ e^{2u}
//! ```
//!
//! with its L² gradient and Hessian, plus the Moser-Trudinger deficits.
//!
//! Every exponential is evaluated as `e^{2(u - max u)}` and the shift is added
//! back in log space, so finite fields never produce non-finite values.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concentration::{concentration_report, Density, TauSource};
use crate::error::{LabError, Result};
use crate::field::Field;
use crate::greens::{tilde_h, SingularSet};
use crate::numeric::compensated_sum;
use crate::stats::{stabilization, Bound, Stabilization};
use crate::surface::{Node, Surface};

/// A surface, a singular set with its cached weight `h̃`, and `ρ > 0`.
#[derive(Clone, Debug)]
pub struct Problem {
    surface: Arc<Surface>,
    sing: SingularSet,
    tilde_h: Field,
    rho: f64,
    fingerprint: u64,
}

impl Problem {
    pub fn new(surface: Arc<Surface>, sing: SingularSet, rho: f64) -> Result<Problem> {
        let th = tilde_h(&surface, &sing)?;
        Self::with_tilde_h(surface, sing, th, rho)
    }

    /// Uses a precomputed `h̃` (which must belong to `sing`).
    pub fn with_tilde_h(surface: Arc<Surface>, sing: SingularSet, tilde_h: Field, rho: f64) -> Result<Problem> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(LabError::config(format!("rho = {rho} must be positive")));
        }
        if tilde_h.len() != surface.n_nodes() {
            return Err(LabError::config("h̃ has the wrong length"));
        }
        if tilde_h.iter().any(|v| !(*v >= 0.0)) || !tilde_h.iter().any(|v| *v > 0.0) {
            return Err(LabError::config("h̃ must be nonnegative and not identically zero"));
        }
        let fingerprint = sing.fingerprint();
        Ok(Problem { surface, sing, tilde_h, rho, fingerprint })
    }

    /// Same surface and weight, different `ρ`.
    pub fn with_rho(&self, rho: f64) -> Result<Problem> {
        Self::with_tilde_h(self.surface.clone(), self.sing.clone(), self.tilde_h.clone(), rho)
    }

    pub fn surface(&self) -> &Surface {
        &self.surface
    }

    pub fn surface_arc(&self) -> Arc<Surface> {
        self.surface.clone()
    }

    pub fn sing(&self) -> &SingularSet {
        &self.sing
    }

    pub fn tilde_h(&self) -> &Field {
        &self.tilde_h
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// True when the cached `h̃` still belongs to the singular set.
    pub fn is_consistent(&self) -> bool {
        self.fingerprint == self.sing.fingerprint()
    }

    /// Indices `i` with `ρ < 4π(1 + α_i)`.
    pub fn j_rho(&self) -> Vec<usize> {
        (0..self.sing.len()).filter(|&i| self.rho < 4.0 * PI * (1.0 + self.sing.alphas[i])).collect()
    }

    pub fn density(&self, u: &[f64]) -> Result<Density> {
        check_finite(&self.surface, u)?;
        Density::from_potential(&self.surface, &self.tilde_h, u)
    }
}

fn check_finite(s: &Surface, u: &[f64]) -> Result<()> {
    if u.len() != s.n_nodes() {
        return Err(LabError::config("field has the wrong length"));
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(LabError::precondition("field has non-finite values"));
    }
    Ok(())
}

/// `log ∫ w e^{2u}` (with `w ≡ 1` when `None`) and the shift `max u` used.
pub fn log_exp_integral(s: &Surface, weight: Option<&[f64]>, u: &[f64]) -> Result<(f64, f64)> {
    check_finite(s, u)?;
    let ws = s.weights();
    let wgt = |i: usize| weight.map_or(1.0, |w| w[i]);
    let m = (0..u.len()).filter(|&i| wgt(i) > 0.0).map(|i| u[i]).fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(LabError::precondition("weight vanishes identically"));
    }
    let sum = compensated_sum((0..u.len()).map(|i| ws[i] * wgt(i) * (2.0 * (u[i] - m)).exp()));
    Ok((2.0 * m + sum.ln(), m))
}

/// The three terms of `I_ρ(u)` and the exponential shift.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: f64,
    pub dirichlet: f64,
    /// `2ρ/|Σ| ∫u`.
    pub mean_term: f64,
    /// `log ∫ h̃ e^{2u}`.
    pub log_integral: f64,
    pub max_shift: f64,
}

pub fn eval_i_rho_detailed(p: &Problem, u: &[f64]) -> Result<Evaluation> {
    let s = p.surface();
    let (log_integral, max_shift) = log_exp_integral(s, Some(p.tilde_h()), u)?;
    let dirichlet = s.dirichlet(u);
    let mean_term = 2.0 * p.rho() * s.mean(u);
    Ok(Evaluation {
        value: dirichlet + mean_term - p.rho() * log_integral,
        dirichlet,
        mean_term,
        log_integral,
        max_shift,
    })
}

pub fn eval_i_rho(p: &Problem, u: &[f64]) -> Result<f64> {
    Ok(eval_i_rho_detailed(p, u)?.value)
}

/// L² gradient `r = -2Δu - 2ρ(h̃e^{2u}/∫h̃e^{2u} - 1/|Σ|)`, so that the
/// directional derivative of `I_ρ` along `v` is `∫ r v`.
pub fn grad_i_rho(p: &Problem, u: &[f64]) -> Result<Field> {
    let s = p.surface();
    let f = p.density(u)?;
    let lap = s.laplacian(u);
    let inv_area = 1.0 / s.total_area();
    let rho = p.rho();
    Ok(lap.iter().zip(f.values().iter()).map(|(l, fv)| -2.0 * l - 2.0 * rho * (fv - inv_area)).collect())
}

/// Central-difference check of [`grad_i_rho`] along one direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub finite_difference: f64,
    pub analytic: f64,
    pub relative_error: f64,
}

/// Compares `(I(u + tv) - I(u - tv)) / 2t` with `∫ grad I(u) v`.
pub fn gradient_check(p: &Problem, u: &[f64], v: &[f64], t: f64) -> Result<GradientCheck> {
    let s = p.surface();
    let up: Field = u.iter().zip(v).map(|(a, b)| a + t * b).collect();
    let um: Field = u.iter().zip(v).map(|(a, b)| a - t * b).collect();
    let fd = (eval_i_rho(p, &up)? - eval_i_rho(p, &um)?) / (2.0 * t);
    let an = s.inner(&grad_i_rho(p, u)?, v);
    Ok(GradientCheck { finite_difference: fd, analytic: an, relative_error: (fd - an).abs() / an.abs().max(f64::MIN_POSITIVE) })
}

/// Hessian of `I_ρ` at `u` applied to `v`:
/// `-2Δv - 4ρ(f v - f ∫ f v)`, `f` the normalized density.
pub fn hessian_apply(p: &Problem, u: &[f64], v: &[f64]) -> Result<Field> {
    let f = p.density(u)?;
    Ok(hessian_with_density(p.surface(), p.rho(), f.values(), v))
}

pub(crate) fn hessian_with_density(s: &Surface, rho: f64, f: &[f64], v: &[f64]) -> Field {
    let fv = s.inner(f, v);
    let lap = s.laplacian(v);
    lap.iter().zip(f.iter().zip(v)).map(|(l, (fi, vi))| -2.0 * l - 4.0 * rho * (fi * vi - fi * fv)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MtVariant {
    /// Closed surface: `log ∫e^{2u} - A ∫|∇u|² - 2⨍u`.
    Closed,
    /// Surface with boundary, arbitrary traces.
    BoundaryFull,
    /// Surface with boundary, `u = 0` on the boundary; no mean term.
    BoundaryZero,
}

impl MtVariant {
    /// Sharp coefficient of the Dirichlet energy.
    pub fn sharp_coefficient(self) -> f64 {
        match self {
            MtVariant::Closed | MtVariant::BoundaryZero => 1.0 / (4.0 * PI),
            MtVariant::BoundaryFull => 1.0 / (2.0 * PI),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deficit {
    pub deficit: f64,
    pub dirichlet: f64,
    /// `⨍ u` (zero-weighted out for the boundary-zero variant).
    pub mean: f64,
    pub log_integral: f64,
}

/// `log ∫ w e^{2u} - coeff ∫|∇u|² - 2⨍u` (mean term dropped for
/// [`MtVariant::BoundaryZero`]). `weight` defaults to `1`.
pub fn mt_deficit(s: &Surface, u: &[f64], variant: MtVariant, coeff: f64, weight: Option<&[f64]>) -> Result<Deficit> {
    match (variant, s.kind().is_closed()) {
        (MtVariant::Closed, false) => {
            return Err(LabError::config("closed deficit requested on a surface with boundary"))
        }
        (MtVariant::BoundaryFull | MtVariant::BoundaryZero, true) => {
            return Err(LabError::config("boundary deficit requested on a closed surface"))
        }
        _ => {}
    }
    if let Some(w) = weight {
        if w.len() != s.n_nodes() {
            return Err(LabError::config("weight has the wrong length"));
        }
    }
    if variant == MtVariant::BoundaryZero {
        for b in s.boundary_nodes() {
            if u[b.0].abs() > 1e-12 {
                return Err(LabError::precondition("boundary-zero deficit needs u = 0 on the boundary ring"));
            }
        }
    }
    let (log_integral, _) = log_exp_integral(s, weight, u)?;
    let dirichlet = s.dirichlet(u);
    let mean = s.mean(u);
    let mean_term = if variant == MtVariant::BoundaryZero { 0.0 } else { 2.0 * mean };
    Ok(Deficit { deficit: log_integral - coeff * dirichlet - mean_term, dirichlet, mean, log_integral })
}

/// Localized deficit `log ∫_Ω w e^{2u} - coeff ∫_Σ|∇u|² - 2⨍_Σ u`.
pub fn local_mt_deficit(s: &Surface, weight: &[f64], u: &[f64], omega: &[Node], coeff: f64) -> Result<f64> {
    if omega.is_empty() {
        return Err(LabError::config("empty region"));
    }
    let mut restricted = vec![0.0; s.n_nodes()];
    for x in omega {
        restricted[x.0] = weight[x.0];
    }
    let (log_integral, _) = log_exp_integral(s, Some(&restricted), u)?;
    Ok(log_integral - coeff * s.dirichlet(u) - 2.0 * s.mean(u))
}

/// Whether both regions carry at least a fraction `γ₀` of `h̃ e^{2u}`.
pub fn chen_li_condition(
    s: &Surface,
    tilde_h: &[f64],
    u: &[f64],
    omega1: &[Node],
    omega2: &[Node],
    gamma0: f64,
) -> Result<bool> {
    if !(gamma0 > 0.0 && gamma0 < 0.5) {
        return Err(LabError::config(format!("gamma0 = {gamma0} outside (0, 1/2)")));
    }
    if omega1.is_empty() || omega2.is_empty() {
        return Err(LabError::config("regions must be nonempty"));
    }
    let mut gap = f64::INFINITY;
    for &a in omega1 {
        for &b in omega2 {
            gap = gap.min(s.geodesic_distance(a, b));
        }
    }
    if !(gap > 0.0) {
        return Err(LabError::config("regions overlap"));
    }
    let f = Density::from_potential(s, tilde_h, u)?;
    let mass = |omega: &[Node]| compensated_sum(omega.iter().map(|x| s.weight(*x) * f.values()[x.0]));
    Ok(mass(omega1) >= gamma0 && mass(omega2) >= gamma0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub c1: f64,
    pub tau: f64,
    /// Skip members whose barycenter is not the target point.
    pub require_barycenter: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSample {
    pub lambda: f64,
    pub i_rho: f64,
    pub beta: Option<Node>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub family_id: String,
    pub rho: f64,
    pub target: Node,
    pub samples: Vec<ProbeSample>,
    pub skipped: usize,
    pub minimum: f64,
    pub stabilization: Option<Stabilization>,
    pub bounded_below: bool,
}

/// Evaluates `I_ρ` along a family `(λ, u_λ)` (λ increasing) and applies the
/// stabilization rule to the running minimum.
pub fn improved_inequality_probe(
    p: &Problem,
    family_id: &str,
    family: Vec<(f64, Field)>,
    target: Node,
    opts: ProbeOptions,
) -> Result<ProbeReport> {
    let s = p.surface();
    let evaluated: Vec<Result<ProbeSample>> = family
        .par_iter()
        .map(|(lambda, u)| {
            let i_rho = eval_i_rho(p, u)?;
            let beta = if opts.require_barycenter {
                let f = p.density(u)?;
                concentration_report(s, &f, opts.c1, opts.tau, TauSource::User)?.beta
            } else {
                None
            };
            Ok(ProbeSample { lambda: *lambda, i_rho, beta })
        })
        .collect();
    let mut samples = Vec::new();
    let mut skipped = 0;
    for r in evaluated {
        let sample = r?;
        if opts.require_barycenter && sample.beta != Some(target) {
            skipped += 1;
        } else {
            samples.push(sample);
        }
    }
    let minimum = samples.iter().map(|x| x.i_rho).fold(f64::INFINITY, f64::min);
    let stab = if samples.len() >= 2 && samples.last().unwrap().lambda / samples[0].lambda >= 10.0 {
        let l: Vec<f64> = samples.iter().map(|x| x.lambda).collect();
        let v: Vec<f64> = samples.iter().map(|x| x.i_rho).collect();
        Some(stabilization(&l, &v, Bound::Below))
    } else {
        None
    };
    let bounded_below = stab.as_ref().is_some_and(|x| x.stabilized);
    Ok(ProbeReport {
        family_id: family_id.to_string(),
        rho: p.rho(),
        target,
        samples,
        skipped,
        minimum,
        stabilization: stab,
        bounded_below,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::SurfaceKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn smooth_random(s: &Surface, rng: &mut ChaCha8Rng) -> Field {
        let coeffs: Vec<(f64, f64, i32, i32)> =
            (0..4).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(-3..4), rng.gen_range(-3..4))).collect();
        Field::from_fn(s.n_nodes(), |i| {
            let [x, y] = s.chart(Node(i));
            coeffs
                .iter()
                .map(|&(a, ph, kx, ky)| a * (2.0 * PI * (kx as f64 * x + ky as f64 * y) + ph).cos())
                .sum()
        })
    }

    fn torus_problem(n: usize, rho: f64) -> Problem {
        let s = Arc::new(Surface::torus(n).unwrap());
        let p = s.snap([0.3, 0.6]).unwrap().0;
        Problem::new(s, SingularSet::single(p, 0.5).unwrap(), rho).unwrap()
    }

    #[test]
    fn constant_field_value() {
        let p = torus_problem(32, 2.0 * PI);
        let s = p.surface();
        let zero = Field::zeros(s.n_nodes());
        let expected = -p.rho() * s.integrate(p.tilde_h()).ln();
        assert!((eval_i_rho(&p, &zero).unwrap() - expected).abs() < 1e-12);
        let five = Field::constant(s.n_nodes(), 5.0);
        assert!((eval_i_rho(&p, &five).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn shift_invariance_and_zero_mean_gradient() {
        let p = torus_problem(32, 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = smooth_random(p.surface(), &mut rng);
        let a = eval_i_rho(&p, &u).unwrap();
        let b = eval_i_rho(&p, &u.add_scalar(3.7)).unwrap();
        assert!((a - b).abs() < 1e-9);
        let g1 = grad_i_rho(&p, &u).unwrap();
        let g2 = grad_i_rho(&p, &u.add_scalar(3.7)).unwrap();
        assert!(g1.axpy(-1.0, &g2).sup_norm() < 1e-9);
        assert!(p.surface().integrate(&g1).abs() < 1e-9);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let p = torus_problem(32, 9.0);
        let s = p.surface();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2 {
            let u = smooth_random(s, &mut rng);
            let v = smooth_random(s, &mut rng);
            let c = gradient_check(&p, &u, &v, 1e-5).unwrap();
            assert!(c.relative_error < 1e-5, "{c:?}");
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let p = torus_problem(32, 9.0);
        let s = p.surface();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = smooth_random(s, &mut rng);
        let v = smooth_random(s, &mut rng);
        let t = 1e-6;
        let gp = grad_i_rho(&p, &u.axpy(t, &v)).unwrap();
        let gm = grad_i_rho(&p, &u.axpy(-t, &v)).unwrap();
        let fd = gp.axpy(-1.0, &gm).scale(0.5 / t);
        let hv = hessian_apply(&p, &u, &v).unwrap();
        let err = fd.axpy(-1.0, &hv).sup_norm() / hv.sup_norm();
        assert!(err < 1e-5, "relative error {err}");
    }

    #[test]
    fn constants_solve_regular_equation_on_sphere() {
        let s = Arc::new(Surface::sphere(17, 34).unwrap());
        let p = Problem::new(s.clone(), SingularSet::empty(), 3.0).unwrap();
        let r = grad_i_rho(&p, &Field::constant(s.n_nodes(), 0.4)).unwrap();
        assert!(r.sup_norm() < 1e-12);
    }

    #[test]
    fn huge_fields_stay_finite() {
        let p = torus_problem(16, 4.0);
        let u = Field::from_fn(p.surface().n_nodes(), |i| if i == 3 { 800.0 } else { 0.0 });
        assert!(eval_i_rho(&p, &u).unwrap().is_finite());
        assert!(grad_i_rho(&p, &u).unwrap().is_finite());
    }

    #[test]
    fn deficit_variants() {
        let t = Surface::torus(16).unwrap();
        let zero = vec![0.0; t.n_nodes()];
        assert!(mt_deficit(&t, &zero, MtVariant::Closed, 1.0 / (4.0 * PI), None).unwrap().deficit.abs() < 1e-14);
        assert!(mt_deficit(&t, &zero, MtVariant::BoundaryZero, 0.1, None).is_err());
        let d = Surface::disk(16, 16).unwrap();
        let one = vec![1.0; d.n_nodes()];
        assert!(mt_deficit(&d, &one, MtVariant::BoundaryZero, 0.1, None).is_err());
        assert!(mt_deficit(&d, &one, MtVariant::BoundaryFull, 0.1, None).is_ok());
        assert!(mt_deficit(&d, &one, MtVariant::Closed, 0.1, None).is_err());
    }

    #[test]
    fn chen_li_examples() {
        let s = Surface::torus(32).unwrap();
        let h = vec![1.0; s.n_nodes()];
        let left: Vec<Node> = s.nodes().filter(|x| s.chart(*x)[0] < 0.4).collect();
        let right: Vec<Node> = s.nodes().filter(|x| s.chart(*x)[0] >= 0.5 && s.chart(*x)[0] < 0.9).collect();
        let zero = vec![0.0; s.n_nodes()];
        assert!(chen_li_condition(&s, &h, &zero, &left, &right, 0.3).unwrap());
        let one_bump: Vec<f64> = (0..s.n_nodes())
            .map(|i| {
                let c = s.snap([0.2, 0.5]).unwrap().0;
                -(s.geodesic_distance(c, Node(i)) / 0.05).powi(2)
            })
            .collect();
        assert!(!chen_li_condition(&s, &h, &one_bump, &left, &right, 0.3).unwrap());
        assert!(chen_li_condition(&s, &h, &zero, &left, &left, 0.3).is_err());
    }

    #[test]
    fn j_rho_selects_subcritical_points() {
        let s = Arc::new(Surface::torus(16).unwrap());
        let sing = SingularSet::new(vec![Node(0), Node(50)], vec![0.2, 0.8]).unwrap();
        let p = Problem::new(s, sing, 6.0 * PI).unwrap();
        assert_eq!(p.j_rho(), vec![1]);
        assert!(p.is_consistent());
        assert_eq!(p.surface().kind(), SurfaceKind::FlatTorus);
    }
}
