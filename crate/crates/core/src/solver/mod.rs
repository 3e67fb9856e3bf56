//! Solvers for `-Δu = ρ(h̃e^{2u}/∫h̃e^{2u} - 1/|Σ|)` on closed surfaces.
//!
//! Two methods share one driver: a semi-implicit gradient flow that decreases
//! `I_ρ` monotonically, and a damped Newton-Krylov iteration (GMRES, right
//! preconditioned by `(2K)^{-1}`). Both keep the mean gauge `∫u = 0` at every
//! iterate and stop at the onset of concentration instead of integrating
//! through it.
//!
//! [`rho_continuation`] warm-starts solves along a `ρ` grid and records the
//! blow-up indicators (maximum of `2u - log∫h̃e^{2u}` and local masses).

mod gmres;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::Field;
use crate::functional::{eval_i_rho, grad_i_rho, hessian_with_density, log_exp_integral, Problem};
use crate::greens::singular_potential;
use crate::surface::{Node, Surface};

pub use gmres::{gmres, GmresStats};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GradientFlow,
    Newton,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    /// Target for `‖∇I_ρ(u)‖_{L²}`.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial flow time step.
    pub dt: f64,
    /// Smallest admissible Newton damping factor.
    pub min_damping: f64,
    pub mean_gauge: bool,
    pub gmres_restart: usize,
    pub gmres_max_iter: usize,
    /// Stop when the concentration length `(π max f)^{-1/2}` falls below
    /// this many local grid cells.
    pub blowup_cells: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::Newton,
            tol: 1e-8,
            max_iter: 200,
            dt: 0.05,
            min_damping: 1.0 / 1024.0,
            mean_gauge: true,
            gmres_restart: 60,
            gmres_max_iter: 600,
            blowup_cells: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn gradient_flow() -> Self {
        SolverConfig { method: Method::GradientFlow, max_iter: 5000, ..Self::default() }
    }

    pub fn newton() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 || !(self.dt > 0.0) || !(self.min_damping > 0.0) {
            return Err(LabError::config("solver needs tol > 0, max_iter > 0, dt > 0, min_damping > 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Converged,
    MaxIterations,
    /// The density concentrated below the grid scale.
    Concentration,
    /// No admissible step (flow step or Newton damping underflow).
    Stalled,
}

/// Check of the solution against the original normalized equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationCheck {
    /// `∫ h e^{2w}` off the singular points, `w` the original unknown.
    pub integral: f64,
    /// The constant `c = (2π Σα_j - ρ)/|Σ|`.
    pub c: f64,
    /// L² norm of `-Δ_h w - ρ h e^{2w} - c` over nodes away from the `p_j`.
    pub equation_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub u: Field,
    pub converged: bool,
    pub stop: StopReason,
    pub iterations: usize,
    pub residual: f64,
    pub i_rho: f64,
    pub residual_history: Vec<f64>,
    pub energy_history: Vec<f64>,
    pub max_u_history: Vec<f64>,
    pub normalization: Option<NormalizationCheck>,
}

impl SolveReport {
    /// `r_{k+1} / r_k²` over the last three Newton steps.
    pub fn quadratic_ratios(&self) -> Vec<f64> {
        let h = &self.residual_history;
        let n = h.len();
        (n.saturating_sub(3).max(1)..n).map(|k| h[k] / (h[k - 1] * h[k - 1])).collect()
    }
}

fn residual_norm(s: &Surface, r: &[f64]) -> f64 {
    s.l2_norm(r)
}

fn gauge(s: &Surface, u: &mut Field) {
    let m = s.mean(u);
    u.iter_mut().for_each(|v| *v -= m);
}

/// Concentration length `(π max f)^{-1/2}` of `f = h̃e^{2u}/∫h̃e^{2u}` and where it peaks.
pub fn concentration_length(p: &Problem, u: &[f64]) -> Result<(f64, Node)> {
    let f = p.density(u)?;
    let peak = f.values().argmax();
    Ok(((PI * f.values()[peak]).recip().sqrt(), Node(peak)))
}

fn concentrated(p: &Problem, u: &[f64], cells: f64) -> Result<bool> {
    let (len, at) = concentration_length(p, u)?;
    Ok(len < cells * p.surface().local_spacing(at))
}

/// Solves the mean-field equation from `u0`.
pub fn solve(p: &Problem, cfg: &SolverConfig, u0: &[f64]) -> Result<SolveReport> {
    cfg.validate()?;
    let s = p.surface();
    if !s.kind().is_closed() {
        return Err(LabError::config("the mean-field solver needs a closed surface"));
    }
    if u0.len() != s.n_nodes() || u0.iter().any(|v| !v.is_finite()) {
        return Err(LabError::precondition("initial guess must be finite with one value per node"));
    }
    let mut u = Field::new(u0.to_vec());
    if cfg.mean_gauge {
        gauge(s, &mut u);
    }
    let mut report = match cfg.method {
        Method::GradientFlow => flow(p, cfg, u)?,
        Method::Newton => newton(p, cfg, u)?,
    };
    if report.converged {
        report.normalization = Some(normalization_check(p, &report.u)?);
    }
    Ok(report)
}

struct Trace {
    residuals: Vec<f64>,
    energies: Vec<f64>,
    maxima: Vec<f64>,
}

impl Trace {
    fn new() -> Self {
        Trace { residuals: Vec::new(), energies: Vec::new(), maxima: Vec::new() }
    }

    fn push(&mut self, r: f64, e: f64, u: &Field) {
        self.residuals.push(r);
        self.energies.push(e);
        self.maxima.push(u.max());
    }

    fn finish(self, u: Field, stop: StopReason, iterations: usize) -> SolveReport {
        SolveReport {
            converged: stop == StopReason::Converged,
            stop,
            iterations,
            residual: *self.residuals.last().unwrap_or(&f64::NAN),
            i_rho: *self.energies.last().unwrap_or(&f64::NAN),
            residual_history: self.residuals,
            energy_history: self.energies,
            max_u_history: self.maxima,
            normalization: None,
            u,
        }
    }
}

fn check_iterate(u: &Field, iteration: usize) -> Result<()> {
    if u.is_finite() {
        Ok(())
    } else {
        Err(LabError::NumericalBlowup { iteration })
    }
}

/// Semi-implicit flow `(1 + 2 dt K) u⁺ = u - dt N(u)` with `N` the
/// nonlinear part of the gradient; a step is accepted only if `I_ρ` does not
/// increase, otherwise `dt` is halved.
fn flow(p: &Problem, cfg: &SolverConfig, mut u: Field) -> Result<SolveReport> {
    let s = p.surface();
    let rho = p.rho();
    let inv_area = 1.0 / s.total_area();
    let mut trace = Trace::new();
    let mut energy = eval_i_rho(p, &u)?;
    let mut r = grad_i_rho(p, &u)?;
    let mut rn = residual_norm(s, &r);
    trace.push(rn, energy, &u);
    let mut dt = cfg.dt;
    let mut it = 0;
    while it < cfg.max_iter {
        if rn <= cfg.tol {
            return Ok(trace.finish(u, StopReason::Converged, it));
        }
        if concentrated(p, &u, cfg.blowup_cells)? {
            return Ok(trace.finish(u, StopReason::Concentration, it));
        }
        let f = p.density(&u)?;
        let rhs: Vec<f64> = u.iter().zip(f.values().iter()).map(|(ui, fi)| ui + dt * 2.0 * rho * (fi - inv_area)).collect();
        let mut cand = s.solve_shifted(2.0 * dt, 1.0, &rhs);
        check_iterate(&cand, it + 1)?;
        if cfg.mean_gauge {
            gauge(s, &mut cand);
        }
        let e_new = eval_i_rho(p, &cand)?;
        if e_new <= energy + 1e-12 {
            it += 1;
            u = cand;
            energy = e_new;
            r = grad_i_rho(p, &u)?;
            rn = residual_norm(s, &r);
            trace.push(rn, energy, &u);
            dt = (dt * 1.5).min(1e6);
        } else {
            dt *= 0.5;
            if dt < 1e-14 {
                return Ok(trace.finish(u, StopReason::Stalled, it));
            }
        }
    }
    let stop = if rn <= cfg.tol { StopReason::Converged } else { StopReason::MaxIterations };
    Ok(trace.finish(u, stop, it))
}

fn newton(p: &Problem, cfg: &SolverConfig, mut u: Field) -> Result<SolveReport> {
    let s = p.surface();
    let rho = p.rho();
    let mut trace = Trace::new();
    let mut r = grad_i_rho(p, &u)?;
    let mut rn = residual_norm(s, &r);
    trace.push(rn, eval_i_rho(p, &u)?, &u);
    let mut it = 0;
    while it < cfg.max_iter {
        if rn <= cfg.tol {
            return Ok(trace.finish(u, StopReason::Converged, it));
        }
        if concentrated(p, &u, cfg.blowup_cells)? {
            return Ok(trace.finish(u, StopReason::Concentration, it));
        }
        let f = p.density(&u)?;
        let fv = f.values().to_vec();
        let apply_a = |v: &[f64]| hessian_with_density(s, rho, &fv, v).into_vec();
        let apply_p = |v: &[f64]| s.solve_shifted(2.0, 0.0, v).into_vec();
        let dot = |a: &[f64], b: &[f64]| s.inner(a, b);
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let forcing = (0.1 * rn).clamp(1e-10, 1e-2);
        let (delta, _stats) = gmres(&apply_a, &apply_p, &dot, &rhs, forcing, cfg.gmres_restart, cfg.gmres_max_iter);
        let delta = Field::new(delta);
        let mut t = 1.0;
        loop {
            let mut cand = u.axpy(t, &delta);
            check_iterate(&cand, it + 1)?;
            if cfg.mean_gauge {
                gauge(s, &mut cand);
            }
            let rc = grad_i_rho(p, &cand)?;
            let rcn = residual_norm(s, &rc);
            if rcn.is_finite() && rcn < (1.0 - 1e-4 * t) * rn {
                u = cand;
                r = rc;
                rn = rcn;
                break;
            }
            t *= 0.5;
            if t < cfg.min_damping {
                return Ok(trace.finish(u, StopReason::Stalled, it));
            }
        }
        it += 1;
        trace.push(rn, eval_i_rho(p, &u)?, &u);
    }
    let stop = if rn <= cfg.tol { StopReason::Converged } else { StopReason::MaxIterations };
    Ok(trace.finish(u, stop, it))
}

/// Undoes the change of variables: `w = u - 2πΣα_jG_j - ½ log ∫ h̃ e^{2u}`,
/// then checks `∫ h e^{2w} = 1` and the original equation away from the `p_j`.
pub fn normalization_check(p: &Problem, u: &[f64]) -> Result<NormalizationCheck> {
    let s = p.surface();
    let sing = p.sing();
    let pot = singular_potential(s, sing)?;
    let (log_z, _) = log_exp_integral(s, Some(p.tilde_h()), u)?;
    let w: Vec<f64> = u.iter().zip(pot.iter()).map(|(a, b)| a - b - 0.5 * log_z).collect();
    let h: Vec<f64> = match &sing.h {
        Some(h) => h.to_vec(),
        None => vec![1.0; s.n_nodes()],
    };
    let off: Vec<bool> = (0..s.n_nodes()).map(|y| !sing.points.contains(&Node(y))).collect();
    let integrand: Vec<f64> = (0..s.n_nodes()).map(|y| if off[y] { h[y] * (2.0 * w[y]).exp() } else { 0.0 }).collect();
    let integral = s.integrate(&integrand);
    let c = (2.0 * PI * sing.total_alpha() - p.rho()) / s.total_area();
    let lap = s.laplacian(&w);
    let eq: Vec<f64> = (0..s.n_nodes())
        .map(|y| if off[y] { -lap[y] - p.rho() * h[y] * (2.0 * w[y]).exp() - c } else { 0.0 })
        .collect();
    Ok(NormalizationCheck { integral, c, equation_residual: s.l2_norm(&eq) })
}

/// Local mass `ρ ∫_{B_q(r)} h̃e^{2u} / ∫ h̃e^{2u}` around a node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalMass {
    pub node: Node,
    pub radius: f64,
    pub mass: f64,
}

pub fn local_mass(p: &Problem, u: &[f64], node: Node, radius: f64) -> Result<LocalMass> {
    let f = p.density(u)?;
    let mass = p.rho() * p.surface().ball_integral(f.values(), node, radius);
    Ok(LocalMass { node, radius, mass })
}

/// Shrinking radius for quantization diagnostics: `k` concentration
/// lengths, clamped between three local cells and `r0`.
pub fn shrinking_radius(p: &Problem, u: &[f64], at: Node, k: f64, r0: f64) -> Result<f64> {
    let (len, _) = concentration_length(p, u)?;
    let h = p.surface().local_spacing(at);
    Ok((k * len).clamp(3.0 * h, r0.max(3.0 * h)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationRecord {
    pub rho: f64,
    pub converged: bool,
    pub stop: StopReason,
    pub iterations: usize,
    pub residual: f64,
    pub i_rho: f64,
    pub max_u: f64,
    pub sup_u: f64,
    /// Discrete C² proxy `max |Δ_h u|`.
    pub max_laplacian: f64,
    /// `max(2u - log ∫ h̃ e^{2u})`.
    pub max_normalized: f64,
    pub concentration_length: f64,
    pub peak: Node,
    pub local_masses: Vec<LocalMass>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationTrace {
    pub records: Vec<ContinuationRecord>,
    pub threads: usize,
    pub float_mode: String,
}

impl ContinuationTrace {
    pub fn rho_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.rho).collect()
    }

    /// `ρ` strictly monotone and every converged record within `tol`.
    pub fn is_consistent(&self, tol: f64) -> bool {
        let r = self.rho_values();
        let monotone = r.windows(2).all(|w| w[1] > w[0]) || r.windows(2).all(|w| w[1] < w[0]);
        monotone && self.records.iter().all(|x| !x.converged || x.residual <= tol)
    }

    /// Last converged record, if any.
    pub fn last_resolved(&self) -> Option<&ContinuationRecord> {
        self.records.iter().rev().find(|r| r.converged)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationOptions {
    /// Largest radius of the local-mass balls; half the injectivity scale
    /// when unset.
    pub r0: Option<f64>,
    /// Ball radius in concentration lengths.
    pub lengths: f64,
    /// Bisection refinements after the first failure.
    pub refinements: usize,
    /// Keep going after a failure (records it as data).
    pub continue_after_failure: bool,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions { r0: None, lengths: 8.0, refinements: 4, continue_after_failure: false }
    }
}

/// Checks a `ρ` grid: strictly monotone and away from the critical values
/// `4πk` and `4π(1+α_j)`.
pub fn check_rho_grid(p: &Problem, rhos: &[f64]) -> Result<()> {
    if rhos.is_empty() {
        return Err(LabError::config("empty rho grid"));
    }
    let up = rhos.windows(2).all(|w| w[1] > w[0]);
    let down = rhos.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return Err(LabError::config("rho grid must be strictly monotone"));
    }
    let mut critical: Vec<f64> = (1..=4).map(|k| 4.0 * PI * k as f64).collect();
    critical.extend(p.sing().alphas.iter().map(|a| 4.0 * PI * (1.0 + a)));
    for &r in rhos {
        if !(r > 0.0) {
            return Err(LabError::config("rho must be positive"));
        }
        if let Some(c) = critical.iter().find(|&&c| (r - c).abs() < 1e-9 * c) {
            return Err(LabError::precondition(format!("rho = {r} sits on the critical value {c}")));
        }
    }
    Ok(())
}

fn record(p: &Problem, rep: &SolveReport, opts: &ContinuationOptions) -> Result<ContinuationRecord> {
    let u = &rep.u;
    let (len, peak) = concentration_length(p, u)?;
    let (log_z, _) = log_exp_integral(p.surface(), Some(p.tilde_h()), u)?;
    let max_normalized = 2.0 * u.max() - log_z;
    let mut centers = vec![peak];
    for &q in &p.sing().points {
        if !centers.contains(&q) {
            centers.push(q);
        }
    }
    let r0 = opts.r0.unwrap_or(0.5 * p.surface().injectivity_scale());
    let r = shrinking_radius(p, u, peak, opts.lengths, r0)?;
    let local_masses = centers.iter().map(|&c| local_mass(p, u, c, r)).collect::<Result<Vec<_>>>()?;
    Ok(ContinuationRecord {
        rho: p.rho(),
        converged: rep.converged,
        stop: rep.stop,
        iterations: rep.iterations,
        residual: rep.residual,
        i_rho: rep.i_rho,
        max_u: u.max(),
        sup_u: u.sup_norm(),
        max_laplacian: p.surface().laplacian(u).sup_norm(),
        max_normalized,
        concentration_length: len,
        peak,
        local_masses,
    })
}

/// Warm-started solves along `rhos`. After the first failure the interval
/// to the last success is bisected `refinements` times. Returns the trace
/// and every converged solution, ordered like the trace.
pub fn rho_continuation(
    base: &Problem,
    rhos: &[f64],
    cfg: &SolverConfig,
    u0: &[f64],
    opts: &ContinuationOptions,
) -> Result<(ContinuationTrace, Vec<(f64, Field)>)> {
    check_rho_grid(base, rhos)?;
    let mut records = Vec::new();
    let mut warm = Field::new(u0.to_vec());
    let mut last_good: Option<(f64, Field)> = None;
    let mut solutions: Vec<(f64, Field)> = Vec::new();
    for &rho in rhos {
        let p = base.with_rho(rho)?;
        let rep = solve(&p, cfg, &warm)?;
        records.push(record(&p, &rep, opts)?);
        if rep.converged {
            warm = rep.u.clone();
            last_good = Some((rho, rep.u.clone()));
            solutions.push((rho, rep.u));
            continue;
        }
        // refine between the last success and the failure
        if let Some((mut lo, mut u_lo)) = last_good.clone() {
            let mut hi = rho;
            for _ in 0..opts.refinements {
                let mid = 0.5 * (lo + hi);
                if check_rho_grid(base, &[mid]).is_err() {
                    break;
                }
                let pm = base.with_rho(mid)?;
                let rm = solve(&pm, cfg, &u_lo)?;
                records.push(record(&pm, &rm, opts)?);
                if rm.converged {
                    lo = mid;
                    u_lo = rm.u.clone();
                    solutions.push((mid, rm.u));
                } else {
                    hi = mid;
                }
            }
            warm = u_lo.clone();
            last_good = Some((lo, u_lo));
        }
        if !opts.continue_after_failure {
            break;
        }
    }
    let up = rhos.len() < 2 || rhos[1] > rhos[0];
    let order = |a: f64, b: f64| if up { a.total_cmp(&b) } else { b.total_cmp(&a) };
    records.sort_by(|a, b| order(a.rho, b.rho));
    solutions.sort_by(|a, b| order(a.0, b.0));
    let trace = ContinuationTrace {
        records,
        threads: rayon::current_num_threads(),
        float_mode: "IEEE-754 binary64, round-to-nearest".to_string(),
    };
    Ok((trace, solutions))
}

/// One Newton attempt from a bubble-shaped initial guess.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedAttempt {
    pub center: Node,
    pub lambda: f64,
    pub stop: StopReason,
    pub iterations: usize,
    pub residual: f64,
}

/// Bubble centers on a `k × k` chart lattice of a torus, restricted to
/// `Θ_ρ`: nodes farther than `exclusion` from every `p_j` with
/// `ρ < 4π(1+α_j)`.
pub fn theta_rho_centers(p: &Problem, k: usize, exclusion: f64) -> Result<Vec<Node>> {
    let s = p.surface();
    if s.kind() != crate::surface::SurfaceKind::FlatTorus {
        return Err(LabError::precondition("lattice seeds are defined on the torus"));
    }
    let guarded: Vec<Node> = p
        .sing()
        .points
        .iter()
        .zip(&p.sing().alphas)
        .filter(|(_, &a)| p.rho() < 4.0 * PI * (1.0 + a))
        .map(|(&q, _)| q)
        .collect();
    let mut out = Vec::new();
    for i in 0..k {
        for j in 0..k {
            let x = s.snap([i as f64 / k as f64, j as f64 / k as f64])?.0;
            if guarded.iter().all(|&q| s.geodesic_distance(x, q) > exclusion) && !out.contains(&x) {
                out.push(x);
            }
        }
    }
    Ok(out)
}

/// Newton from regular bubbles `log(λ/(1+λ²d²))` at each center and scale,
/// in order; returns every attempt and the first converged solve.
pub fn seeded_newton(
    p: &Problem,
    cfg: &SolverConfig,
    centers: &[Node],
    lambdas: &[f64],
) -> Result<(Vec<SeedAttempt>, Option<SolveReport>)> {
    let mut attempts = Vec::new();
    for &center in centers {
        for &lambda in lambdas {
            let seed = crate::bubbles::make_bubble(p.surface(), crate::bubbles::BubbleParams::new(0.0, lambda, center)?)?;
            let rep = match solve(p, cfg, &seed) {
                Ok(r) => r,
                Err(LabError::NumericalBlowup { .. }) => continue,
                Err(e) => return Err(e),
            };
            attempts.push(SeedAttempt { center, lambda, stop: rep.stop, iterations: rep.iterations, residual: rep.residual });
            if rep.converged {
                return Ok((attempts, Some(rep)));
            }
        }
    }
    Ok((attempts, None))
}

/// Periodic bilinear resampling of a torus field onto another torus grid.
pub fn resample_torus(from: &Surface, u: &[f64], to: &Surface) -> Result<Field> {
    use crate::surface::SurfaceKind::FlatTorus;
    if from.kind() != FlatTorus || to.kind() != FlatTorus || u.len() != from.n_nodes() {
        return Err(LabError::precondition("resampling needs two torus grids and a matching field"));
    }
    let (n1, n2) = (from.resolution().n1, from.resolution().n2);
    let at = |i: usize, j: usize| u[(i % n1) * n2 + (j % n2)];
    Ok(to
        .nodes()
        .map(|x| {
            let [a, b] = to.chart(x);
            let (fa, fb) = (a * n1 as f64, b * n2 as f64);
            let (i, j) = (fa.floor() as usize, fb.floor() as usize);
            let (ta, tb) = (fa - i as f64, fb - j as f64);
            (1.0 - ta) * ((1.0 - tb) * at(i, j) + tb * at(i, j + 1)) + ta * ((1.0 - tb) * at(i + 1, j) + tb * at(i + 1, j + 1))
        })
        .collect())
}

/// Sup norms and discrete C² proxies of solutions across a `ρ` window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactnessReport {
    pub window: (f64, f64),
    /// `(ρ, sup|u|, max|Δ_h u|)` for every solution inside the window.
    pub samples: Vec<(f64, f64, f64)>,
    pub sup_norm: f64,
    pub max_laplacian: f64,
    /// No solution inside the window: the bound holds vacuously.
    pub vacuous: bool,
    pub pass: bool,
}

fn check_window(base: &Problem, window: (f64, f64)) -> Result<()> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(LabError::config("empty rho window"));
    }
    let mut critical: Vec<f64> = (1..=4).map(|k| 4.0 * PI * k as f64).collect();
    critical.extend(base.sing().alphas.iter().map(|a| 4.0 * PI * (1.0 + a)));
    if critical.iter().any(|&c| c >= lo && c <= hi) {
        return Err(LabError::precondition("rho window touches a critical value"));
    }
    Ok(())
}

fn compactness_report(window: (f64, f64), samples: Vec<(f64, f64, f64)>) -> CompactnessReport {
    let sup_norm = samples.iter().map(|x| x.1).fold(0.0, f64::max);
    let max_laplacian = samples.iter().map(|x| x.2).fold(0.0, f64::max);
    let vacuous = samples.is_empty();
    CompactnessReport { window, samples, sup_norm, max_laplacian, vacuous, pass: sup_norm.is_finite() && max_laplacian.is_finite() }
}

/// Bound report over `(ρ, u)` solutions; `window` must stay clear of the
/// critical values.
pub fn compactness_scan(base: &Problem, window: (f64, f64), solutions: &[(f64, Field)]) -> Result<CompactnessReport> {
    check_window(base, window)?;
    let s = base.surface();
    let samples = solutions
        .iter()
        .filter(|(r, _)| *r >= window.0 && *r <= window.1)
        .map(|(r, u)| (*r, u.sup_norm(), s.laplacian(u).sup_norm()))
        .collect();
    Ok(compactness_report(window, samples))
}

/// Same report from the converged records of a trace.
pub fn compactness_from_trace(base: &Problem, window: (f64, f64), trace: &ContinuationTrace) -> Result<CompactnessReport> {
    check_window(base, window)?;
    let samples = trace
        .records
        .iter()
        .filter(|r| r.converged && r.rho >= window.0 && r.rho <= window.1)
        .map(|r| (r.rho, r.sup_u, r.max_laplacian))
        .collect();
    Ok(compactness_report(window, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greens::SingularSet;
    use std::sync::Arc;

    fn torus_problem(n: usize, rho: f64, alpha: f64) -> Problem {
        let s = Arc::new(Surface::torus(n).unwrap());
        let p = s.snap([0.5, 0.5]).unwrap().0;
        Problem::new(s, SingularSet::single(p, alpha).unwrap(), rho).unwrap()
    }

    #[test]
    fn constants_need_no_iterations() {
        let s = Arc::new(Surface::torus(16).unwrap());
        let p = Problem::new(s.clone(), SingularSet::empty(), 3.0).unwrap();
        let rep = solve(&p, &SolverConfig::newton(), &vec![0.0; s.n_nodes()]).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn flow_decreases_energy_and_converges() {
        let p = torus_problem(32, 2.0 * PI, 0.5);
        let zero = vec![0.0; p.surface().n_nodes()];
        let rep = solve(&p, &SolverConfig::gradient_flow(), &zero).unwrap();
        assert!(rep.converged, "{:?} after {}", rep.stop, rep.iterations);
        assert!(rep.energy_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(p.surface().integrate(&rep.u).abs() < 1e-10);
        let norm = rep.normalization.unwrap();
        assert!((norm.integral - 1.0).abs() < 1e-10);
    }

    #[test]
    fn newton_agrees_with_flow() {
        let p = torus_problem(32, 2.0 * PI, 0.5);
        let zero = vec![0.0; p.surface().n_nodes()];
        let a = solve(&p, &SolverConfig::gradient_flow(), &zero).unwrap();
        let b = solve(&p, &SolverConfig::newton(), &zero).unwrap();
        assert!(b.converged);
        assert!(a.u.axpy(-1.0, &b.u).sup_norm() < 1e-6);
    }

    #[test]
    fn rho_grid_checks() {
        let p = torus_problem(16, 2.0, 0.5);
        assert!(check_rho_grid(&p, &[1.0, 2.0, 3.0]).is_ok());
        assert!(check_rho_grid(&p, &[1.0, 3.0, 2.0]).is_err());
        assert!(check_rho_grid(&p, &[1.0, 6.0 * PI]).is_err());
        assert!(compactness_scan(&p, (5.0 * PI, 6.5 * PI), &[]).is_err());
        assert!(compactness_scan(&p, (4.5 * PI, 5.0 * PI), &[]).unwrap().vacuous);
    }
}
