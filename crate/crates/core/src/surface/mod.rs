//! Discretized compact surfaces: the flat unit torus, the round unit sphere and
//! the closed unit disk.
//!
//! A [`Surface`] owns its nodes, quadrature weights, discrete Laplacian and
//! geodesic distances. Callers never branch on the surface kind: every
//! geometric query goes through [`Surface::geodesic_distance`],
//! [`Surface::embed`] and friends.

mod rings;
mod torus;

use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::Field;
use crate::numeric::{compensated_sum, weighted_sum, Neumaier};

use rings::RingGrid;
use torus::TorusGrid;

/// Default radius of the innermost disk ring.
pub const DEFAULT_DISK_R_MIN: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SurfaceKind {
    FlatTorus,
    RoundSphere,
    UnitDisk,
}

impl SurfaceKind {
    /// Closed surfaces have no boundary.
    pub fn is_closed(self) -> bool {
        !matches!(self, SurfaceKind::UnitDisk)
    }

    pub fn exact_area(self) -> f64 {
        match self {
            SurfaceKind::FlatTorus => 1.0,
            SurfaceKind::RoundSphere => 4.0 * PI,
            SurfaceKind::UnitDisk => PI,
        }
    }
}

/// Node counts per direction: torus `nx x ny`; sphere `nlat x nlon` (latitude
/// bands x longitudes); disk `rings x nlon`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Resolution {
    pub n1: usize,
    pub n2: usize,
}

impl Resolution {
    pub fn new(n1: usize, n2: usize) -> Self {
        Resolution { n1, n2 }
    }

    pub fn square(n: usize) -> Self {
        Resolution { n1: n, n2: n }
    }

    /// Latitude-longitude sphere with about `nodes` nodes, an odd number of
    /// latitude bands (so the equator is a ring) and `nlon = 2 nlat`.
    pub fn sphere_with_nodes(nodes: usize) -> Self {
        let mut nlat = ((nodes as f64) / 2.0).sqrt().round() as usize;
        if nlat.is_multiple_of(2) {
            nlat += 1;
        }
        Resolution { n1: nlat, n2: 2 * nlat }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.n1, self.n2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Node(pub usize);

/// A point of the ambient Euclidean space (R^3 for the sphere and the disk,
/// R^4 for the torus).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    coords: [f64; 4],
    dim: usize,
}

impl Point {
    pub fn new(coords: &[f64]) -> Self {
        assert!(coords.len() == 3 || coords.len() == 4, "ambient dimension is 3 or 4");
        let mut c = [0.0; 4];
        c[..coords.len()].copy_from_slice(coords);
        Point { coords: c, dim: coords.len() }
    }

    pub fn zero(dim: usize) -> Self {
        Point { coords: [0.0; 4], dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    pub fn norm(&self) -> f64 {
        self.as_slice().iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Serializable description of a built surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMetadata {
    pub kind: SurfaceKind,
    pub resolution: Resolution,
    pub n_nodes: usize,
    pub total_area: f64,
    pub laplacian_scheme: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub disk_r_min: Option<f64>,
}

/// One entry of a sorted distance profile: target slot, angular (or second
/// lattice) offset, and the distance itself.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ProfileEntry {
    pub slot: u32,
    pub offset: u32,
    pub dist: f64,
}

/// All nodes sorted by distance from a representative node of a symmetry
/// class. Every node of the class sees the same list up to relabeling.
#[derive(Clone, Debug)]
pub(crate) struct DistanceProfile {
    pub entries: Vec<ProfileEntry>,
}

#[derive(Clone, Debug)]
enum Geometry {
    Torus(TorusGrid),
    Rings(RingGrid),
}

#[derive(Clone, Debug)]
pub struct Surface {
    kind: SurfaceKind,
    resolution: Resolution,
    geometry: Geometry,
    weights: Vec<f64>,
    total_area: f64,
    disk_r_min: Option<f64>,
    profiles: Vec<OnceLock<DistanceProfile>>,
}

/// Builds a surface with default options.
pub fn build_surface(kind: SurfaceKind, resolution: Resolution) -> Result<Surface> {
    Surface::build(kind, resolution)
}

impl Surface {
    pub fn build(kind: SurfaceKind, resolution: Resolution) -> Result<Surface> {
        Self::build_with_r_min(kind, resolution, DEFAULT_DISK_R_MIN)
    }

    pub fn torus(n: usize) -> Result<Surface> {
        Self::build(SurfaceKind::FlatTorus, Resolution::square(n))
    }

    pub fn sphere(nlat: usize, nlon: usize) -> Result<Surface> {
        Self::build(SurfaceKind::RoundSphere, Resolution::new(nlat, nlon))
    }

    pub fn disk(rings: usize, nlon: usize) -> Result<Surface> {
        Self::build(SurfaceKind::UnitDisk, Resolution::new(rings, nlon))
    }

    /// Like [`Surface::build`], with an explicit innermost disk radius
    /// (ignored for closed surfaces).
    pub fn build_with_r_min(kind: SurfaceKind, resolution: Resolution, r_min: f64) -> Result<Surface> {
        let Resolution { n1, n2 } = resolution;
        if n1 < 16 || n2 < 16 {
            return Err(LabError::config(format!(
                "resolution {resolution} too coarse: need at least 16 nodes per direction"
            )));
        }
        if n1.checked_mul(n2).is_none_or(|n| n > 1 << 24) {
            return Err(LabError::config(format!("resolution {resolution} too large")));
        }
        let (geometry, disk_r_min) = match kind {
            SurfaceKind::FlatTorus => (Geometry::Torus(TorusGrid::new(n1, n2)), None),
            SurfaceKind::RoundSphere => (Geometry::Rings(RingGrid::sphere(n1, n2)), None),
            SurfaceKind::UnitDisk => {
                if !(r_min > 0.0 && r_min < 0.5) || !r_min.is_finite() {
                    return Err(LabError::config(format!("disk r_min must lie in (0, 0.5), got {r_min}")));
                }
                (Geometry::Rings(RingGrid::disk(n1, n2, r_min)), Some(r_min))
            }
        };
        let weights = match &geometry {
            Geometry::Torus(t) => vec![1.0 / t.n_nodes() as f64; t.n_nodes()],
            Geometry::Rings(r) => r.weights(),
        };
        let total_area = compensated_sum(weights.iter().copied());
        let classes = match &geometry {
            Geometry::Torus(_) => 1,
            Geometry::Rings(r) => r.slots.len(),
        };
        Ok(Surface {
            kind,
            resolution,
            geometry,
            weights,
            total_area,
            disk_r_min,
            profiles: (0..classes).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn n_nodes(&self) -> usize {
        self.weights.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        (0..self.n_nodes()).map(Node)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, x: Node) -> f64 {
        self.weights[x.0]
    }

    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    pub fn embedding_dim(&self) -> usize {
        match self.kind {
            SurfaceKind::FlatTorus => 4,
            _ => 3,
        }
    }

    pub fn laplacian_scheme(&self) -> &'static str {
        match self.kind {
            SurfaceKind::FlatTorus => "spectral Fourier multipliers on a uniform periodic grid",
            SurfaceKind::RoundSphere => {
                "second-order finite volumes on a latitude-longitude grid with polar cap cells"
            }
            SurfaceKind::UnitDisk => {
                "second-order finite volumes on a polar grid with geometrically clustered rings; \
                 boundary ring flagged for Dirichlet data"
            }
        }
    }

    pub fn metadata(&self) -> SurfaceMetadata {
        SurfaceMetadata {
            kind: self.kind,
            resolution: self.resolution,
            n_nodes: self.n_nodes(),
            total_area: self.total_area,
            laplacian_scheme: self.laplacian_scheme().to_string(),
            disk_r_min: self.disk_r_min,
        }
    }

    fn check_len(&self, f: &[f64]) {
        assert_eq!(f.len(), self.n_nodes(), "field length does not match the surface");
    }

    /// Chart coordinates of a node: torus `(x, y)` in `[0,1)^2`; sphere
    /// `(colatitude, longitude)`; disk cartesian `(x, y)`.
    pub fn chart(&self, x: Node) -> [f64; 2] {
        match &self.geometry {
            Geometry::Torus(t) => {
                let (i, j) = t.coords(x.0);
                [i as f64 / t.nx as f64, j as f64 / t.ny as f64]
            }
            Geometry::Rings(r) => {
                let (s, j) = r.locate(x.0);
                let p = r.slots[s].param;
                let phi = if r.slots[s].is_single() { 0.0 } else { r.angle(j) };
                match self.kind {
                    SurfaceKind::RoundSphere => [p, phi],
                    _ => [p * phi.cos(), p * phi.sin()],
                }
            }
        }
    }

    /// Angular coordinate of a node on ring grids, `None` on the torus.
    pub fn polar(&self, x: Node) -> Option<(f64, f64)> {
        match &self.geometry {
            Geometry::Torus(_) => None,
            Geometry::Rings(r) => {
                let (s, j) = r.locate(x.0);
                let phi = if r.slots[s].is_single() { 0.0 } else { r.angle(j) };
                Some((r.slots[s].param, phi))
            }
        }
    }

    pub fn geodesic_distance(&self, x: Node, y: Node) -> f64 {
        match &self.geometry {
            Geometry::Torus(t) => {
                let (xi, xj) = t.coords(x.0);
                let (yi, yj) = t.coords(y.0);
                t.distance((yi + t.nx - xi) % t.nx, (yj + t.ny - xj) % t.ny)
            }
            Geometry::Rings(r) => {
                let (s, js) = r.locate(x.0);
                let (u, ju) = r.locate(y.0);
                r.distance(s, u, (ju + r.nlon - js) % r.nlon)
            }
        }
    }

    /// Distances from `x` to every node.
    pub fn distances_from(&self, x: Node) -> Vec<f64> {
        (0..self.n_nodes()).map(|y| self.geodesic_distance(x, Node(y))).collect()
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.check_len(f);
        weighted_sum(&self.weights, f)
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        self.integrate(f) / self.total_area
    }

    /// `∫ a b dV`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.check_len(a);
        crate::numeric::weighted_dot(&self.weights, a, b)
    }

    pub fn l2_norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).max(0.0).sqrt()
    }

    /// Discrete Laplace-Beltrami operator.
    pub fn laplacian(&self, u: &[f64]) -> Field {
        self.check_len(u);
        Field::new(match &self.geometry {
            Geometry::Torus(t) => t.laplacian(u),
            Geometry::Rings(r) => r.laplacian(u),
        })
    }

    /// Dirichlet energy `∫ |∇u|^2 dV = -∫ u Δ_h u dV`.
    pub fn dirichlet(&self, u: &[f64]) -> f64 {
        self.check_len(u);
        match &self.geometry {
            Geometry::Torus(t) => t.dirichlet(u),
            Geometry::Rings(r) => r.dirichlet(u),
        }
    }

    /// Solves `(a (-Δ_h) + s) u = f` with `a > 0`, `s >= 0`. For `s = 0` the
    /// mean of `f` is discarded and the mean-zero solution is returned.
    pub fn solve_shifted(&self, a: f64, s: f64, f: &[f64]) -> Field {
        self.check_len(f);
        assert!(a > 0.0 && s >= 0.0, "shifted solve needs a > 0 and s >= 0");
        Field::new(match &self.geometry {
            Geometry::Torus(t) => t.solve_shifted(a, s, f),
            Geometry::Rings(r) => r.solve_shifted(a, s, f),
        })
    }

    /// Mass of `f` in the closed geodesic ball `B_center(r)`, node-center inclusion.
    pub fn ball_integral(&self, f: &[f64], center: Node, r: f64) -> f64 {
        self.check_len(f);
        compensated_sum(
            (0..self.n_nodes())
                .filter(|&y| self.geodesic_distance(center, Node(y)) <= r)
                .map(|y| self.weights[y] * f[y]),
        )
    }

    /// [`Surface::ball_integral`] for several radii in one sweep over the
    /// nodes.
    pub fn ball_integrals(&self, f: &[f64], center: Node, radii: &[f64]) -> Vec<f64> {
        self.check_len(f);
        let mut acc = vec![Neumaier::default(); radii.len()];
        for (y, (w, fy)) in self.weights.iter().zip(f).enumerate() {
            let d = self.geodesic_distance(center, Node(y));
            let v = w * fy;
            for (a, &r) in acc.iter_mut().zip(radii) {
                if d <= r {
                    a.add(v);
                }
            }
        }
        acc.iter().map(Neumaier::value).collect()
    }

    pub fn embed(&self, x: Node) -> Point {
        match &self.geometry {
            Geometry::Torus(t) => {
                let (i, j) = t.coords(x.0);
                let a = 2.0 * PI * i as f64 / t.nx as f64;
                let b = 2.0 * PI * j as f64 / t.ny as f64;
                let s = 1.0 / (2.0 * PI);
                Point::new(&[s * a.cos(), s * a.sin(), s * b.cos(), s * b.sin()])
            }
            Geometry::Rings(r) => {
                let (slot, j) = r.locate(x.0);
                let p = r.slots[slot].param;
                let phi = if r.slots[slot].is_single() { 0.0 } else { r.angle(j) };
                match self.kind {
                    SurfaceKind::RoundSphere => {
                        Point::new(&[p.sin() * phi.cos(), p.sin() * phi.sin(), p.cos()])
                    }
                    _ => Point::new(&[p * phi.cos(), p * phi.sin(), 0.0]),
                }
            }
        }
    }

    /// Nearest node (in ambient distance) to a point of the tubular
    /// neighborhood; ties go to the lowest node index.
    pub fn nearest_point_projection(&self, p: &Point) -> Result<Node> {
        let domain_error = || LabError::ProjectionDomain { kind: self.kind, point: p.as_slice().to_vec() };
        if p.dim() != self.embedding_dim() || p.as_slice().iter().any(|c| !c.is_finite()) {
            return Err(domain_error());
        }
        let c = p.as_slice();
        let target = match self.kind {
            SurfaceKind::RoundSphere => {
                let n = p.norm();
                if !(n > 0.5 && n < 1.5) {
                    return Err(domain_error());
                }
                *p
            }
            SurfaceKind::FlatTorus => {
                let scale = 1.0 / (2.0 * PI);
                let r1 = c[0].hypot(c[1]);
                let r2 = c[2].hypot(c[3]);
                if r1 < 1e-8 * scale || r2 < 1e-8 * scale {
                    return Err(domain_error());
                }
                *p
            }
            SurfaceKind::UnitDisk => {
                if c[2].abs() > 0.5 {
                    return Err(domain_error());
                }
                let r = c[0].hypot(c[1]);
                let k = if r > 1.0 { 1.0 / r } else { 1.0 };
                Point::new(&[c[0] * k, c[1] * k, 0.0])
            }
        };
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for y in 0..self.n_nodes() {
            let d = self.embed(Node(y)).distance(&target);
            if d < best_d {
                best_d = d;
                best = y;
            }
        }
        Ok(Node(best))
    }

    /// Ambient point of a chart coordinate (see [`Surface::chart`]).
    pub fn chart_point(&self, chart: [f64; 2]) -> Result<Point> {
        let [a, b] = chart;
        if !a.is_finite() || !b.is_finite() {
            return Err(LabError::config(format!("non-finite chart coordinates {chart:?}")));
        }
        Ok(match self.kind {
            SurfaceKind::FlatTorus => {
                let s = 1.0 / (2.0 * PI);
                let (x, y) = (2.0 * PI * a, 2.0 * PI * b);
                Point::new(&[s * x.cos(), s * x.sin(), s * y.cos(), s * y.sin()])
            }
            SurfaceKind::RoundSphere => {
                if !(0.0..=PI).contains(&a) {
                    return Err(LabError::config(format!("colatitude {a} outside [0, pi]")));
                }
                Point::new(&[a.sin() * b.cos(), a.sin() * b.sin(), a.cos()])
            }
            SurfaceKind::UnitDisk => {
                if a.hypot(b) > 1.0 + 1e-12 {
                    return Err(LabError::config(format!("point {chart:?} outside the unit disk")));
                }
                Point::new(&[a, b, 0.0])
            }
        })
    }

    /// Snaps a chart coordinate to the nearest node; returns the node and the
    /// ambient offset between the requested point and the node.
    pub fn snap(&self, chart: [f64; 2]) -> Result<(Node, f64)> {
        let p = self.chart_point(chart)?;
        let node = self.nearest_point_projection(&p)?;
        Ok((node, self.embed(node).distance(&p)))
    }

    /// Largest distance between neighboring nodes (the grid spacing `h`).
    pub fn spacing(&self) -> f64 {
        match &self.geometry {
            Geometry::Torus(t) => (1.0 / t.nx as f64).max(1.0 / t.ny as f64),
            Geometry::Rings(r) => match r.metric {
                rings::RingMetric::Sphere => (PI / (r.slots.len() - 1) as f64).max(2.0 * PI / r.nlon as f64),
                rings::RingMetric::Disk => {
                    let m = r.slots.len();
                    let radial = r.slots[m - 1].param - r.slots[m - 2].param;
                    radial.max(2.0 * PI / r.nlon as f64)
                }
            },
        }
    }

    /// Size of the cell around `x`: the largest distance to a grid neighbor.
    pub fn local_spacing(&self, x: Node) -> f64 {
        match &self.geometry {
            Geometry::Torus(_) => self.spacing(),
            Geometry::Rings(r) => {
                let (s, _) = r.locate(x.0);
                let mut h: f64 = 0.0;
                if s > 0 {
                    h = h.max(r.distance(s, s - 1, 0));
                }
                if s + 1 < r.slots.len() {
                    h = h.max(r.distance(s, s + 1, 0));
                }
                if !r.slots[s].is_single() {
                    h = h.max(r.distance(s, s, 1));
                }
                h
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self.kind {
            SurfaceKind::FlatTorus => 0.5 * 2f64.sqrt(),
            SurfaceKind::RoundSphere => PI,
            SurfaceKind::UnitDisk => 2.0,
        }
    }

    /// Scale below which geodesic balls are embedded disks.
    pub fn injectivity_scale(&self) -> f64 {
        match self.kind {
            SurfaceKind::FlatTorus => 0.5,
            SurfaceKind::RoundSphere => PI,
            SurfaceKind::UnitDisk => 1.0,
        }
    }

    /// Nodes on the boundary (the outer disk ring); empty for closed surfaces.
    pub fn boundary_nodes(&self) -> Vec<Node> {
        match (&self.geometry, self.kind) {
            (Geometry::Rings(r), SurfaceKind::UnitDisk) => {
                let s = r.slots.last().expect("rings");
                (s.start..s.start + s.count).map(Node).collect()
            }
            _ => Vec::new(),
        }
    }

    pub fn is_boundary(&self, x: Node) -> bool {
        match (&self.geometry, self.kind) {
            (Geometry::Rings(r), SurfaceKind::UnitDisk) => r.slot_of[x.0] as usize == r.slots.len() - 1,
            _ => false,
        }
    }

    /// The node with lattice offsets `(di, dj)` from `x` on the torus.
    pub fn torus_shift(&self, x: Node, di: usize, dj: usize) -> Option<Node> {
        match &self.geometry {
            Geometry::Torus(t) => {
                let (i, j) = t.coords(x.0);
                Some(Node(t.index((i + di) % t.nx, (j + dj) % t.ny)))
            }
            Geometry::Rings(_) => None,
        }
    }

    /// Nodes in index order shifted by a lattice vector, as a permutation:
    /// `out[shift(x)] = f[x]`.
    pub fn torus_translate(&self, f: &[f64], di: usize, dj: usize) -> Option<Field> {
        self.check_len(f);
        let mut out = vec![0.0; f.len()];
        for x in 0..f.len() {
            out[self.torus_shift(Node(x), di, dj)?.0] = f[x];
        }
        Some(Field::new(out))
    }

    /// Ambient point at geodesic distance `length` from `from`, on the
    /// geodesic ray through `through` (which must differ from `from`).
    pub fn geodesic_ray(&self, from: Node, through: Node, length: f64) -> Result<Point> {
        if from == through {
            return Err(LabError::precondition("geodesic ray needs two distinct nodes"));
        }
        match self.kind {
            SurfaceKind::FlatTorus => {
                let a = self.chart(from);
                let b = self.chart(through);
                let wrap = |d: f64| d - d.round();
                let v = [wrap(b[0] - a[0]), wrap(b[1] - a[1])];
                let n = v[0].hypot(v[1]);
                let c = [a[0] + length * v[0] / n, a[1] + length * v[1] / n];
                self.chart_point([c[0].rem_euclid(1.0), c[1].rem_euclid(1.0)])
            }
            SurfaceKind::RoundSphere => {
                let p = self.embed(from);
                let q = self.embed(through);
                let (p, q) = (p.as_slice(), q.as_slice());
                let dot: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
                let t: Vec<f64> = p.iter().zip(q).map(|(a, b)| b - dot * a).collect();
                let tn = t.iter().map(|v| v * v).sum::<f64>().sqrt();
                if tn < 1e-14 {
                    return Err(LabError::precondition("geodesic ray through an antipodal node is undefined"));
                }
                let out: Vec<f64> =
                    p.iter().zip(&t).map(|(a, b)| length.cos() * a + length.sin() * b / tn).collect();
                Ok(Point::new(&out))
            }
            SurfaceKind::UnitDisk => {
                let a = self.chart(from);
                let b = self.chart(through);
                let v = [b[0] - a[0], b[1] - a[1]];
                let n = v[0].hypot(v[1]);
                let mut c = [a[0] + length * v[0] / n, a[1] + length * v[1] / n];
                let r = c[0].hypot(c[1]);
                if r > 1.0 {
                    c = [c[0] / r, c[1] / r];
                }
                Ok(Point::new(&[c[0], c[1], 0.0]))
            }
        }
    }

    // ---- distance profiles ---------------------------------------------

    pub(crate) fn class_of(&self, x: Node) -> usize {
        match &self.geometry {
            Geometry::Torus(_) => 0,
            Geometry::Rings(r) => r.slot_of[x.0] as usize,
        }
    }

    pub(crate) fn profile(&self, class: usize) -> &DistanceProfile {
        self.profiles[class].get_or_init(|| self.build_profile(class))
    }

    /// Builds every profile up front, in parallel.
    pub(crate) fn warm_profiles(&self) {
        (0..self.profiles.len()).into_par_iter().for_each(|c| {
            self.profile(c);
        });
    }

    fn build_profile(&self, class: usize) -> DistanceProfile {
        let mut entries = Vec::with_capacity(self.n_nodes());
        match &self.geometry {
            Geometry::Torus(t) => {
                for di in 0..t.nx {
                    for dj in 0..t.ny {
                        entries.push(ProfileEntry { slot: di as u32, offset: dj as u32, dist: t.distance(di, dj) });
                    }
                }
            }
            Geometry::Rings(r) => {
                for (t, slot) in r.slots.iter().enumerate() {
                    for dj in 0..slot.count {
                        entries.push(ProfileEntry { slot: t as u32, offset: dj as u32, dist: r.distance(class, t, dj) });
                    }
                }
            }
        }
        entries.sort_by(|a, b| {
            a.dist
                .total_cmp(&b.dist)
                .then(a.slot.cmp(&b.slot))
                .then(a.offset.cmp(&b.offset))
        });
        DistanceProfile { entries }
    }

    /// Node reached from `x` by a profile entry of `x`'s class.
    #[inline]
    pub(crate) fn resolve(&self, x: Node, e: &ProfileEntry) -> usize {
        match &self.geometry {
            Geometry::Torus(t) => {
                let (i, j) = t.coords(x.0);
                t.index((i + e.slot as usize) % t.nx, (j + e.offset as usize) % t.ny)
            }
            Geometry::Rings(r) => {
                let (_, j0) = r.locate(x.0);
                r.node(e.slot as usize, j0 + e.offset as usize)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn all_kinds() -> Vec<Surface> {
        vec![
            Surface::torus(32).unwrap(),
            Surface::sphere(17, 34).unwrap(),
            Surface::disk(20, 32).unwrap(),
        ]
    }

    fn random_field(s: &Surface, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..s.n_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn areas_match_exact_values() {
        assert_eq!(Surface::torus(64).unwrap().total_area(), 1.0);
        let sphere = Surface::build(SurfaceKind::RoundSphere, Resolution::sphere_with_nodes(4096)).unwrap();
        assert!((sphere.total_area() - 4.0 * PI).abs() < 1e-8);
        let disk = Surface::disk(48, 96).unwrap();
        assert!((disk.total_area() - PI).abs() < 1e-8);
        for s in all_kinds() {
            assert_relative_eq!(s.total_area(), s.kind().exact_area(), max_relative = 1e-12);
        }
    }

    #[test]
    fn coarse_resolution_is_rejected() {
        assert!(matches!(Surface::torus(8), Err(LabError::Config(_))));
        assert!(matches!(Surface::disk(48, 12), Err(LabError::Config(_))));
    }

    #[test]
    fn laplacian_kills_constants_and_is_symmetric() {
        for s in all_kinds() {
            let one = vec![1.0; s.n_nodes()];
            assert!(s.laplacian(&one).sup_norm() < 1e-10);
            let u = random_field(&s, 1);
            let v = random_field(&s, 2);
            let a = s.inner(&u, &s.laplacian(&v));
            let b = s.inner(&v, &s.laplacian(&u));
            assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "{:?}: {a} vs {b}", s.kind());
            assert!(s.inner(&u, &s.laplacian(&u)) <= 0.0);
            let d = s.dirichlet(&u);
            assert_relative_eq!(d, -s.inner(&u, &s.laplacian(&u)), max_relative = 1e-9);
        }
    }

    #[test]
    fn torus_dirichlet_of_sine() {
        let s = Surface::torus(64).unwrap();
        let u = Field::from_fn(s.n_nodes(), |i| (2.0 * PI * s.chart(Node(i))[0]).sin());
        assert!((s.dirichlet(&u) - 2.0 * PI * PI).abs() < 1e-10);
        assert!(s.integrate(&u).abs() < 1e-12);
    }

    #[test]
    fn torus_dirichlet_converges_under_refinement() {
        // band-limited data is resolved exactly, so the error is already at rounding level
        let err = |n: usize| {
            let s = Surface::torus(n).unwrap();
            let u = Field::from_fn(s.n_nodes(), |i| (2.0 * PI * s.chart(Node(i))[0]).sin());
            (s.dirichlet(&u) - 2.0 * PI * PI).abs()
        };
        for n in [16, 32, 64] {
            assert!(err(2 * n) <= (err(n) / 4.0).max(1e-12));
        }
    }

    #[test]
    fn sphere_first_harmonic_energy() {
        let s = Surface::sphere(45, 90).unwrap();
        let y1 = Field::from_fn(s.n_nodes(), |i| s.chart(Node(i))[0].cos());
        let norm2 = s.inner(&y1, &y1);
        assert_relative_eq!(s.dirichlet(&y1), 2.0 * norm2, max_relative = 2e-3);
        assert!(s.integrate(&y1).abs() < 1e-8);
    }

    #[test]
    fn shifted_solve_inverts_operator() {
        for s in all_kinds() {
            let f = random_field(&s, 3);
            for &(a, shift) in &[(1.0, 0.0), (2.0, 3.5)] {
                let u = s.solve_shifted(a, shift, &f);
                let ku = s.laplacian(&u).scale(-a).axpy(shift, &u);
                let mut target = f.clone();
                if shift == 0.0 {
                    let m = s.mean(&f);
                    target.iter_mut().for_each(|v| *v -= m);
                    assert!(s.integrate(&u).abs() < 1e-12);
                }
                // flux form: tiny disk cells make the pointwise operator entries huge
                let wmax = s.weights().iter().copied().fold(0.0, f64::max);
                let err = ku
                    .iter()
                    .zip(&target)
                    .zip(s.weights())
                    .fold(0.0f64, |m, ((a, b), w)| m.max((a - b).abs() * w / wmax));
                assert!(err < 1e-8, "{:?} a={a} s={shift}: {err}", s.kind());
            }
        }
    }

    #[test]
    fn distance_examples() {
        let t = Surface::torus(20).unwrap();
        let a = t.snap([0.0, 0.0]).unwrap().0;
        let b = t.snap([0.9, 0.0]).unwrap().0;
        assert!((t.geodesic_distance(a, b) - 0.1).abs() < 1e-12);
        let s = Surface::sphere(17, 34).unwrap();
        assert!((s.geodesic_distance(Node(0), Node(s.n_nodes() - 1)) - PI).abs() < 1e-12);
        let d = Surface::disk(16, 32).unwrap();
        let far = d.snap([1.0, 0.0]).unwrap().0;
        assert!((d.geodesic_distance(Node(0), far) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn embedding_examples() {
        let s = Surface::sphere(17, 34).unwrap();
        assert_eq!(s.embed(Node(0)).as_slice(), &[0.0, 0.0, 1.0]);
        let t = Surface::torus(16).unwrap();
        let c = 1.0 / (2.0 * PI);
        assert_eq!(t.embed(Node(0)).as_slice(), &[c, 0.0, c, 0.0]);
        let d = Surface::disk(16, 32).unwrap();
        assert_eq!(d.embed(Node(0)).as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn projection_examples() {
        let s = Surface::sphere(17, 34).unwrap();
        assert_eq!(s.nearest_point_projection(&Point::new(&[0.0, 0.0, 0.7])).unwrap(), Node(0));
        assert!(matches!(
            s.nearest_point_projection(&Point::zero(3)),
            Err(LabError::ProjectionDomain { .. })
        ));
        for surf in all_kinds() {
            for x in surf.nodes().step_by(7) {
                assert_eq!(surf.nearest_point_projection(&surf.embed(x)).unwrap(), x);
            }
        }
    }

    #[test]
    fn ball_integral_examples() {
        let s = Surface::build(SurfaceKind::RoundSphere, Resolution::sphere_with_nodes(4096)).unwrap();
        let one = vec![1.0; s.n_nodes()];
        let hemi = s.ball_integral(&one, Node(0), PI / 2.0);
        assert!((hemi / (2.0 * PI) - 1.0).abs() < 0.02);
        assert_eq!(s.ball_integral(&one, Node(5), 0.0), s.weight(Node(5)));
        assert_relative_eq!(s.ball_integral(&one, Node(5), s.diameter()), s.total_area(), max_relative = 1e-12);
        let t = Surface::torus(64).unwrap();
        let one = vec![1.0; t.n_nodes()];
        let disc = t.ball_integral(&one, Node(0), 0.25);
        assert!((disc / (PI / 16.0) - 1.0).abs() < 0.02);
    }

    #[test]
    fn ball_integrals_match_single_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for s in all_kinds() {
            let f: Vec<f64> = (0..s.n_nodes()).map(|_| rng.gen_range(0.0..1.0)).collect();
            let x = Node(rng.gen_range(0..s.n_nodes()));
            let radii = [0.0, 0.1, 0.37, s.diameter()];
            let many = s.ball_integrals(&f, x, &radii);
            for (r, m) in radii.iter().zip(&many) {
                assert_eq!(*m, s.ball_integral(&f, x, *r));
            }
        }
    }

    #[test]
    fn profiles_agree_with_direct_distances() {
        for s in all_kinds() {
            for x in [Node(0), Node(s.n_nodes() / 2 + 3), Node(s.n_nodes() - 1)] {
                let p = s.profile(s.class_of(x));
                let mut seen = vec![false; s.n_nodes()];
                for e in &p.entries {
                    let y = s.resolve(x, e);
                    assert!(!seen[y]);
                    seen[y] = true;
                    assert_eq!(e.dist, s.geodesic_distance(x, Node(y)));
                }
                assert!(seen.iter().all(|&b| b));
            }
        }
    }

    #[test]
    fn metadata_serializes() {
        let s = Surface::disk(16, 32).unwrap();
        let json = serde_json::to_value(s.metadata()).unwrap();
        assert_eq!(json["kind"], "UnitDisk");
        assert_eq!(json["n_nodes"], 1 + 16 * 32);
    }
}
