//! Green's functions of `-Δ` and the singular weight `h̃`.
//!
//! On closed surfaces `G_p` solves `-Δ G_p = δ_p - 1/|Σ|` with zero mean; on
//! the disk it is the Dirichlet Green's function. Every Green's function is
//! stored together with its regular part `R = G + log(d(·,p)) / 2π`, so that
//! the weight factor `exp(-4πα G) = d^{2α} exp(-4πα R)` never evaluates a
//! logarithm at the pole.

use std::f64::consts::PI;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::Field;
use crate::surface::{Node, Surface, SurfaceKind};

/// Vortex points `p_j` with weights `α_j ∈ (0, 1]` and a positive background `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularSet {
    pub points: Vec<Node>,
    pub alphas: Vec<f64>,
    /// Background weight; `None` stands for `h ≡ 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Field>,
}

/// A singular point requested in chart coordinates and the node it snapped to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnappedPoint {
    pub chart: [f64; 2],
    pub alpha: f64,
    pub node: Node,
    pub offset: f64,
}

impl SingularSet {
    pub fn empty() -> Self {
        SingularSet { points: Vec::new(), alphas: Vec::new(), h: None }
    }

    pub fn new(points: Vec<Node>, alphas: Vec<f64>) -> Result<Self> {
        let set = SingularSet { points, alphas, h: None };
        set.validate()?;
        Ok(set)
    }

    pub fn single(point: Node, alpha: f64) -> Result<Self> {
        Self::new(vec![point], vec![alpha])
    }

    /// Snaps chart coordinates to nodes; the offsets are returned for the record.
    pub fn from_chart(s: &Surface, specs: &[([f64; 2], f64)]) -> Result<(Self, Vec<SnappedPoint>)> {
        let mut points = Vec::new();
        let mut alphas = Vec::new();
        let mut snapped = Vec::new();
        for &(chart, alpha) in specs {
            let (node, offset) = s.snap(chart)?;
            points.push(node);
            alphas.push(alpha);
            snapped.push(SnappedPoint { chart, alpha, node, offset });
        }
        Ok((Self::new(points, alphas)?, snapped))
    }

    pub fn with_background(mut self, h: Field) -> Result<Self> {
        if h.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(LabError::config("background weight h must be finite and positive"));
        }
        self.h = Some(h);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() != self.alphas.len() {
            return Err(LabError::config("singular set needs one alpha per point"));
        }
        for &a in &self.alphas {
            if !(a > 0.0 && a <= 1.0) {
                return Err(LabError::config(format!("singular weight alpha = {a} outside (0, 1]")));
            }
        }
        for (i, p) in self.points.iter().enumerate() {
            if self.points[..i].contains(p) {
                return Err(LabError::config(format!("singular point {} listed twice", p.0)));
            }
        }
        Ok(())
    }

    /// Stable fingerprint used to tie a cached `h̃` to its singular set.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        for (p, a) in self.points.iter().zip(&self.alphas) {
            p.hash(&mut hasher);
            a.to_bits().hash(&mut hasher);
        }
        if let Some(h) = &self.h {
            for v in h.iter() {
                v.to_bits().hash(&mut hasher);
            }
        }
        hasher.finish()
    }

    pub fn total_alpha(&self) -> f64 {
        self.alphas.iter().sum()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GreenFunction {
    pub pole: Node,
    /// Nodal values; at the pole, the average of the kernel over the pole cell
    /// (sphere, disk) or the discrete solution itself (torus).
    pub values: Field,
    /// `G + log(d)/2π` off the pole, its limit at the pole.
    pub regular_part: Field,
    pub log_coefficient: f64,
    /// Additive constant fixed by the zero-mean condition (sphere closed
    /// form); zero where no such constant appears.
    pub constant: f64,
}

/// Green's function of `-Δ` with pole at `p`.
pub fn green_function(s: &Surface, p: Node) -> Result<GreenFunction> {
    if p.0 >= s.n_nodes() {
        return Err(LabError::config(format!("pole {} is not a node", p.0)));
    }
    let k = 1.0 / (2.0 * PI);
    let dist = s.distances_from(p);
    match s.kind() {
        SurfaceKind::FlatTorus => {
            let mut delta = vec![0.0; s.n_nodes()];
            delta[p.0] = 1.0 / s.weight(p);
            let values = s.solve_shifted(1.0, 0.0, &delta);
            let mut reg: Vec<f64> = values.iter().zip(&dist).map(|(g, d)| g + k * d.ln()).collect();
            // limit at the pole: average over the nearest shell
            let h = dist.iter().copied().filter(|&d| d > 0.0).fold(f64::INFINITY, f64::min);
            let shell: Vec<f64> = (0..s.n_nodes())
                .filter(|&y| dist[y] > 0.0 && dist[y] <= h * (1.0 + 1e-12))
                .map(|y| reg[y])
                .collect();
            reg[p.0] = shell.iter().sum::<f64>() / shell.len() as f64;
            Ok(GreenFunction { pole: p, values, regular_part: Field::new(reg), log_coefficient: k, constant: 0.0 })
        }
        SurfaceKind::RoundSphere => {
            let kernel = |d: f64| -0.5 * k * (1.0 - d.cos()).ln();
            let mut raw: Vec<f64> = dist.iter().map(|&d| if d > 0.0 { kernel(d) } else { 0.0 }).collect();
            near_field_patch(s, p, &dist, &mut raw);
            let c = -s.mean(&raw);
            let values: Field = raw.iter().map(|g| g + c).collect();
            let reg: Field = dist
                .iter()
                .enumerate()
                .map(|(y, &d)| {
                    if d > 0.0 {
                        values[y] + k * d.ln()
                    } else {
                        0.5 * k * 2f64.ln() + c
                    }
                })
                .collect();
            Ok(GreenFunction { pole: p, values, regular_part: reg, log_coefficient: k, constant: c })
        }
        SurfaceKind::UnitDisk => {
            if s.is_boundary(p) {
                return Err(LabError::config("Dirichlet Green's function needs an interior pole"));
            }
            let pp = s.chart(p);
            let rp = pp[0].hypot(pp[1]);
            let reg: Field = (0..s.n_nodes())
                .map(|y| {
                    if rp == 0.0 {
                        return 0.0;
                    }
                    let x = s.chart(Node(y));
                    let star = [pp[0] / (rp * rp), pp[1] / (rp * rp)];
                    k * (rp * (x[0] - star[0]).hypot(x[1] - star[1])).ln()
                })
                .collect();
            let radius = (s.weight(p) / PI).sqrt();
            let values: Field = (0..s.n_nodes())
                .map(|y| {
                    let d = dist[y];
                    if d > 0.0 {
                        -k * d.ln() + reg[y]
                    } else {
                        -k * (radius.ln() - 0.5) + reg[y]
                    }
                })
                .collect();
            Ok(GreenFunction { pole: p, values, regular_part: reg, log_coefficient: k, constant: 0.0 })
        }
    }
}

/// Replaces the kernel on a small patch around `p` by the values for which
/// the discrete equation `-Δ_h G = δ_p - 1/|Σ|` holds exactly on the patch,
/// with the closed form as exterior data.
fn near_field_patch(s: &Surface, p: Node, dist: &[f64], raw: &mut [f64]) {
    let radius = 2.0 * s.local_spacing(p) * (1.0 + 1e-9);
    let patch: Vec<usize> = (0..s.n_nodes()).filter(|&y| dist[y] <= radius).collect();
    for &y in &patch {
        raw[y] = 0.0;
    }
    let exterior = s.laplacian(raw);
    let n = patch.len();
    let mut a = vec![0.0; n * n];
    let mut unit = vec![0.0; s.n_nodes()];
    for (j, &y) in patch.iter().enumerate() {
        unit[y] = 1.0;
        let col = s.laplacian(&unit);
        unit[y] = 0.0;
        for (i, &x) in patch.iter().enumerate() {
            a[i * n + j] = -col[x];
        }
    }
    let mut b: Vec<f64> = patch
        .iter()
        .map(|&x| {
            let delta = if x == p.0 { 1.0 / s.weight(p) } else { 0.0 };
            delta - 1.0 / s.total_area() + exterior[x]
        })
        .collect();
    crate::numeric::solve_dense(&mut a, &mut b);
    for (&y, v) in patch.iter().zip(b) {
        raw[y] = v;
    }
}

/// Relative residual of `-Δ_h G = δ_p^h - 1/|Σ|` in the discrete dual norm
/// `‖r‖_* = ‖∇ K^{-1} r‖_{L²}` on closed surfaces.
pub fn dual_norm_residual(s: &Surface, g: &GreenFunction) -> Result<f64> {
    if !s.kind().is_closed() {
        return Err(LabError::config("dual-norm residual is defined on closed surfaces"));
    }
    let mut delta = vec![-1.0 / s.total_area(); s.n_nodes()];
    delta[g.pole.0] += 1.0 / s.weight(g.pole);
    let exact = s.solve_shifted(1.0, 0.0, &delta);
    let diff: Vec<f64> = g.values.iter().zip(exact.iter()).map(|(a, b)| a - b).collect();
    Ok((s.dirichlet(&diff) / s.dirichlet(&exact)).sqrt())
}

/// Factor `exp(-4πα G_p)` written as `d^{2α} exp(-4πα R)`, zero at the pole.
fn weight_factor(s: &Surface, g: &GreenFunction, alpha: f64) -> Vec<f64> {
    (0..s.n_nodes())
        .map(|y| {
            if y == g.pole.0 {
                0.0
            } else {
                let d = s.geodesic_distance(g.pole, Node(y));
                d.powf(2.0 * alpha) * (-4.0 * PI * alpha * g.regular_part[y]).exp()
            }
        })
        .collect()
}

/// `h̃ = h · Π_j exp(-4π α_j G_{p_j})`, exactly zero at each `p_j`.
pub fn tilde_h(s: &Surface, sing: &SingularSet) -> Result<Field> {
    sing.validate()?;
    let mut out: Vec<f64> = match &sing.h {
        Some(h) => {
            if h.len() != s.n_nodes() {
                return Err(LabError::config("background weight has the wrong length"));
            }
            h.to_vec()
        }
        None => vec![1.0; s.n_nodes()],
    };
    for (&p, &a) in sing.points.iter().zip(&sing.alphas) {
        let g = green_function(s, p)?;
        for (o, f) in out.iter_mut().zip(weight_factor(s, &g, a)) {
            *o *= f;
        }
    }
    Ok(Field::new(out))
}

/// `2π Σ_j α_j G_{p_j}`, the potential removed by the change of variables.
pub fn singular_potential(s: &Surface, sing: &SingularSet) -> Result<Field> {
    let mut out = vec![0.0; s.n_nodes()];
    for (&p, &a) in sing.points.iter().zip(&sing.alphas) {
        let g = green_function(s, p)?;
        for (o, v) in out.iter_mut().zip(g.values.iter()) {
            *o += 2.0 * PI * a * v;
        }
    }
    Ok(Field::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::Resolution;

    #[test]
    fn torus_green_is_zero_mean_exact_and_even() {
        let s = Surface::torus(32).unwrap();
        let p = s.snap([0.25, 0.5]).unwrap().0;
        let g = green_function(&s, p).unwrap();
        assert!(s.integrate(&g.values).abs() < 1e-8);
        assert!(dual_norm_residual(&s, &g).unwrap() < 1e-6);
        for &(di, dj) in &[(1, 0), (3, 2), (5, 7)] {
            let a = s.torus_shift(p, di, dj).unwrap();
            let b = s.torus_shift(p, 32 - di, 32 - dj).unwrap();
            assert!((g.values[a.0] - g.values[b.0]).abs() < 1e-10);
        }
    }

    #[test]
    fn sphere_green_constant_and_antipode() {
        let s = Surface::build(SurfaceKind::RoundSphere, Resolution::sphere_with_nodes(4096)).unwrap();
        let g = green_function(&s, Node(0)).unwrap();
        assert!(s.integrate(&g.values).abs() < 1e-8);
        let res = dual_norm_residual(&s, &g).unwrap();
        assert!(res < 5e-2, "dual-norm residual {res}");
        let q = s.snap([1.0, 2.0]).unwrap().0;
        let res_off = dual_norm_residual(&s, &green_function(&s, q).unwrap()).unwrap();
        assert!(res_off < 5e-2, "dual-norm residual {res_off}");
        let c = g.constant;
        let antipode = g.values[s.n_nodes() - 1];
        assert!((antipode - (-2f64.ln() / (4.0 * PI) + c)).abs() < 1e-12);
        let exact_c = -(1.0 - 2f64.ln()) / (4.0 * PI);
        assert!((c - exact_c).abs() < 2e-3, "c = {c}, closed form {exact_c}");
    }

    #[test]
    fn empty_set_gives_background() {
        let s = Surface::torus(16).unwrap();
        let h = tilde_h(&s, &SingularSet::empty()).unwrap();
        assert!(h.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn tilde_h_vanishes_only_at_poles() {
        let s = Surface::sphere(17, 34).unwrap();
        let sing = SingularSet::new(vec![Node(0), Node(40)], vec![0.5, 1.0]).unwrap();
        let h = tilde_h(&s, &sing).unwrap();
        for (y, &v) in h.iter().enumerate() {
            if y == 0 || y == 40 {
                assert_eq!(v, 0.0);
            } else {
                assert!(v > 0.0);
            }
        }
    }

    #[test]
    fn disk_center_weight_is_power_of_radius() {
        let s = Surface::disk(24, 32).unwrap();
        let h = tilde_h(&s, &SingularSet::single(Node(0), 0.5).unwrap()).unwrap();
        for y in 1..s.n_nodes() {
            let c = s.chart(Node(y));
            let r = c[0].hypot(c[1]);
            assert!((h[y] / r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_sets_are_rejected() {
        assert!(SingularSet::single(Node(0), 0.0).is_err());
        assert!(SingularSet::single(Node(0), 1.5).is_err());
        assert!(SingularSet::new(vec![Node(1), Node(1)], vec![0.5, 0.5]).is_err());
        let d = Surface::disk(16, 16).unwrap();
        assert!(green_function(&d, d.boundary_nodes()[0]).is_err());
    }
}
