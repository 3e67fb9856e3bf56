//! Finite-volume grids made of concentric rings of nodes: the latitude-longitude
//! sphere (pole cells at both ends) and the polar disk (a center cell plus
//! geometrically clustered rings).
//!
//! Nodes are grouped in *slots*: a pole/center slot holds one node, a ring slot
//! holds `nlon` equally spaced nodes. Node indices follow slot order.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::numeric::{compensated_sum, solve_tridiagonal};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum RingMetric {
    /// Slot parameter is the colatitude.
    Sphere,
    /// Slot parameter is the radius.
    Disk,
}

#[derive(Clone, Debug)]
pub(crate) struct Slot {
    pub start: usize,
    pub count: usize,
    /// Colatitude (sphere) or radius (disk).
    pub param: f64,
    /// Area weight of each node in the slot.
    pub weight: f64,
    /// Per-edge coupling to each neighbor in the previous / next slot.
    pub c_prev: f64,
    pub c_next: f64,
    /// Coupling between angular neighbors inside the ring.
    pub c_ang: f64,
}

impl Slot {
    pub fn is_single(&self) -> bool {
        self.count == 1
    }
}

#[derive(Clone)]
pub(crate) struct RingGrid {
    pub metric: RingMetric,
    pub nlon: usize,
    pub slots: Vec<Slot>,
    pub slot_of: Vec<u32>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for RingGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RingGrid")
            .field("metric", &self.metric)
            .field("nlon", &self.nlon)
            .field("slots", &self.slots.len())
            .finish()
    }
}

impl RingGrid {
    fn assemble(metric: RingMetric, nlon: usize, mut slots: Vec<Slot>) -> Self {
        let mut start = 0;
        let mut slot_of = Vec::new();
        for (s, slot) in slots.iter_mut().enumerate() {
            slot.start = start;
            start += slot.count;
            slot_of.extend(std::iter::repeat_n(s as u32, slot.count));
        }
        let mut planner = FftPlanner::new();
        RingGrid {
            metric,
            nlon,
            slots,
            slot_of,
            fwd: planner.plan_fft_forward(nlon),
            inv: planner.plan_fft_inverse(nlon),
        }
    }

    /// Latitude-longitude sphere: rings at colatitude `i pi / nlat`, `i = 1..nlat-1`,
    /// plus two polar caps of angular radius `pi / (2 nlat)`.
    pub fn sphere(nlat: usize, nlon: usize) -> Self {
        let dth = PI / nlat as f64;
        let dph = 2.0 * PI / nlon as f64;
        let half = 0.5 * dth;
        let pole_weight = 2.0 * PI * (1.0 - half.cos());
        let pole_coupling = half.sin() * dph / dth;
        let mut slots = Vec::with_capacity(nlat + 1);
        slots.push(Slot {
            start: 0,
            count: 1,
            param: 0.0,
            weight: pole_weight,
            c_prev: 0.0,
            c_next: pole_coupling,
            c_ang: 0.0,
        });
        for i in 1..nlat {
            let th = i as f64 * dth;
            slots.push(Slot {
                start: 0,
                count: nlon,
                param: th,
                weight: 2.0 * dph * th.sin() * half.sin(),
                c_prev: (th - half).sin() * dph / dth,
                c_next: (th + half).sin() * dph / dth,
                c_ang: dth / (th.sin() * dph),
            });
        }
        slots.push(Slot {
            start: 0,
            count: 1,
            param: PI,
            weight: pole_weight,
            c_prev: pole_coupling,
            c_next: 0.0,
            c_ang: 0.0,
        });
        Self::assemble(RingMetric::Sphere, nlon, slots)
    }

    /// Polar disk with `rings` rings at radii `r_min^{(M-k)/(M-1)}`, `k = 1..M`,
    /// so the outermost ring sits on the unit circle. Neumann finite volumes:
    /// constants are annihilated; the boundary ring is reported separately.
    pub fn disk(rings: usize, nlon: usize, r_min: f64) -> Self {
        let m = rings;
        let dph = 2.0 * PI / nlon as f64;
        let radii: Vec<f64> = (1..=m)
            .map(|k| {
                if k == m {
                    1.0
                } else {
                    r_min.powf((m - k) as f64 / (m - 1) as f64)
                }
            })
            .collect();
        // edges[k] is the outer edge of ring k (0-based); edge_center is the center cell radius
        let ratio = radii[1] / radii[0];
        let edge_center = radii[0] / ratio.sqrt();
        let mut edges: Vec<f64> = (0..m - 1).map(|k| (radii[k] * radii[k + 1]).sqrt()).collect();
        edges.push(1.0);
        let c_center = edge_center * dph / radii[0];
        let mut slots = Vec::with_capacity(m + 1);
        slots.push(Slot {
            start: 0,
            count: 1,
            param: 0.0,
            weight: PI * edge_center * edge_center,
            c_prev: 0.0,
            c_next: c_center,
            c_ang: 0.0,
        });
        for k in 0..m {
            let inner = if k == 0 { edge_center } else { edges[k - 1] };
            let outer = edges[k];
            let c_prev = if k == 0 {
                c_center
            } else {
                inner * dph / (radii[k] - radii[k - 1])
            };
            let c_next = if k + 1 < m {
                outer * dph / (radii[k + 1] - radii[k])
            } else {
                0.0
            };
            slots.push(Slot {
                start: 0,
                count: nlon,
                param: radii[k],
                weight: 0.5 * (outer * outer - inner * inner) * dph,
                c_prev,
                c_next,
                c_ang: (outer - inner) / (radii[k] * dph),
            });
        }
        Self::assemble(RingMetric::Disk, nlon, slots)
    }

    pub fn n_nodes(&self) -> usize {
        let last = self.slots.last().expect("nonempty grid");
        last.start + last.count
    }

    pub fn weights(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.n_nodes());
        for s in &self.slots {
            w.extend(std::iter::repeat_n(s.weight, s.count));
        }
        w
    }

    /// `(slot, angular index)` of a node.
    pub fn locate(&self, node: usize) -> (usize, usize) {
        let s = self.slot_of[node] as usize;
        (s, node - self.slots[s].start)
    }

    pub fn node(&self, slot: usize, j: usize) -> usize {
        let s = &self.slots[slot];
        if s.is_single() {
            s.start
        } else {
            s.start + j % self.nlon
        }
    }

    pub fn angle(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.nlon as f64
    }

    /// Distance between a node of slot `s` and a node of slot `t` whose
    /// angular indices differ by `dj` (taken modulo `nlon`).
    pub fn distance(&self, s: usize, t: usize, dj: usize) -> f64 {
        let dj = dj % self.nlon;
        let dj = dj.min(self.nlon - dj);
        let half_dphi = PI * dj as f64 / self.nlon as f64;
        let a = self.slots[s].param;
        let b = self.slots[t].param;
        match self.metric {
            RingMetric::Sphere => {
                let sh = (0.5 * (a - b)).sin();
                let sp = half_dphi.sin();
                let hav = sh * sh + a.sin() * b.sin() * sp * sp;
                2.0 * hav.sqrt().min(1.0).asin()
            }
            RingMetric::Disk => {
                let sp = half_dphi.sin();
                ((a - b) * (a - b) + 4.0 * a * b * sp * sp).sqrt()
            }
        }
    }

    /// Visits every edge `(i, j, coupling)` once, in a fixed order.
    fn for_each_edge(&self, mut visit: impl FnMut(usize, usize, f64)) {
        let n = self.nlon;
        for (si, s) in self.slots.iter().enumerate() {
            if !s.is_single() && s.c_ang > 0.0 {
                for j in 0..n {
                    visit(s.start + j, s.start + (j + 1) % n, s.c_ang);
                }
            }
            if si + 1 < self.slots.len() && s.c_next > 0.0 {
                let t = &self.slots[si + 1];
                match (s.is_single(), t.is_single()) {
                    (true, false) => {
                        for j in 0..n {
                            visit(s.start, t.start + j, s.c_next);
                        }
                    }
                    (false, true) => {
                        for j in 0..n {
                            visit(s.start + j, t.start, s.c_next);
                        }
                    }
                    (false, false) => {
                        for j in 0..n {
                            visit(s.start + j, t.start + j, s.c_next);
                        }
                    }
                    (true, true) => visit(s.start, t.start, s.c_next),
                }
            }
        }
    }

    pub fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; u.len()];
        self.for_each_edge(|i, j, c| {
            let d = c * (u[j] - u[i]);
            acc[i] += d;
            acc[j] -= d;
        });
        let w = self.weights();
        acc.iter().zip(&w).map(|(a, w)| a / w).collect()
    }

    pub fn dirichlet(&self, u: &[f64]) -> f64 {
        let mut terms = Vec::with_capacity(3 * u.len());
        self.for_each_edge(|i, j, c| {
            let d = u[i] - u[j];
            terms.push(c * d * d);
        });
        compensated_sum(terms)
    }

    /// Solves `(a K + s) u = f`, `K = -Laplacian`, by a DFT in the angle and a
    /// tridiagonal solve across slots for every angular mode. With `s == 0`
    /// the weighted mean of `f` is removed first and `u` is returned with zero mean.
    pub fn solve_shifted(&self, a: f64, shift: f64, rhs: &[f64]) -> Vec<f64> {
        let n = self.nlon;
        let ns = self.slots.len();
        let weights = self.weights();
        let mut f = rhs.to_vec();
        if shift == 0.0 {
            let total: f64 = weights.iter().sum();
            let mean = crate::numeric::weighted_sum(&weights, &f) / total;
            f.iter_mut().for_each(|v| *v -= mean);
        }
        // spectra[s][m] for ring slots; single slots use only m = 0 (as n * value)
        let mut spectra: Vec<Vec<Complex<f64>>> = self
            .slots
            .iter()
            .map(|s| {
                if s.is_single() {
                    vec![Complex::new(n as f64 * f[s.start], 0.0)]
                } else {
                    let mut buf: Vec<Complex<f64>> =
                        f[s.start..s.start + n].iter().map(|&v| Complex::new(v, 0.0)).collect();
                    self.fwd.process(&mut buf);
                    buf
                }
            })
            .collect();

        let mut lower = Vec::with_capacity(ns);
        let mut diag = Vec::with_capacity(ns);
        let mut upper = Vec::with_capacity(ns);
        let mut rhs_m = Vec::with_capacity(ns);
        let mut members = Vec::with_capacity(ns);
        for m in 0..n {
            lower.clear();
            diag.clear();
            upper.clear();
            rhs_m.clear();
            members.clear();
            let angular = 2.0 - 2.0 * (2.0 * PI * m as f64 / n as f64).cos();
            for (si, s) in self.slots.iter().enumerate() {
                if s.is_single() && m != 0 {
                    continue;
                }
                let scale = if s.is_single() { a * n as f64 / s.weight } else { a / s.weight };
                let prev_ok = si > 0 && !(self.slots[si - 1].is_single() && m != 0);
                let next_ok = si + 1 < ns && !(self.slots[si + 1].is_single() && m != 0);
                diag.push(scale * (s.c_prev + s.c_next + s.c_ang * angular) + shift);
                lower.push(if prev_ok { -scale * s.c_prev } else { 0.0 });
                upper.push(if next_ok { -scale * s.c_next } else { 0.0 });
                rhs_m.push(spectra[si][if s.is_single() { 0 } else { m }]);
                members.push(si);
            }
            if m == 0 && shift == 0.0 {
                // singular block: pin the first unknown and drop its row
                rhs_m[0] = Complex::new(0.0, 0.0);
                diag[0] = 1.0;
                upper[0] = 0.0;
                if lower.len() > 1 {
                    lower[1] = 0.0;
                }
            }
            solve_tridiagonal(&lower, &diag, &upper, &mut rhs_m);
            for (k, &si) in members.iter().enumerate() {
                let idx = if self.slots[si].is_single() { 0 } else { m };
                spectra[si][idx] = rhs_m[k];
            }
        }

        let mut u = vec![0.0; rhs.len()];
        for (s, spec) in self.slots.iter().zip(spectra.iter_mut()) {
            if s.is_single() {
                u[s.start] = spec[0].re / n as f64;
            } else {
                self.inv.process(spec);
                for j in 0..n {
                    u[s.start + j] = spec[j].re / n as f64;
                }
            }
        }
        if shift == 0.0 {
            let total: f64 = weights.iter().sum();
            let mean = crate::numeric::weighted_sum(&weights, &u) / total;
            u.iter_mut().for_each(|v| *v -= mean);
        }
        u
    }
}
