//! Uniform periodic grid on the unit flat torus with a Fourier Laplacian.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::numeric::compensated_sum;

/// Node `(ix, iy)` lives at index `ix * ny + iy` and chart point `(ix/nx, iy/ny)`.
#[derive(Clone)]
pub(crate) struct TorusGrid {
    pub nx: usize,
    pub ny: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    /// `|2 pi k|^2` in spectral layout `ky * nx + kx`.
    symbol: Vec<f64>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid").field("nx", &self.nx).field("ny", &self.ny).finish()
    }
}

fn signed_frequency(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

impl TorusGrid {
    pub fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        let mut symbol = vec![0.0; nx * ny];
        for ky in 0..ny {
            let fy = signed_frequency(ky, ny);
            for kx in 0..nx {
                let fx = signed_frequency(kx, nx);
                symbol[ky * nx + kx] = 4.0 * PI * PI * (fx * fx + fy * fy);
            }
        }
        TorusGrid {
            nx,
            ny,
            fwd_x: planner.plan_fft_forward(nx),
            inv_x: planner.plan_fft_inverse(nx),
            fwd_y: planner.plan_fft_forward(ny),
            inv_y: planner.plan_fft_inverse(ny),
            symbol,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nx * self.ny
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix * self.ny + iy
    }

    pub fn coords(&self, node: usize) -> (usize, usize) {
        (node / self.ny, node % self.ny)
    }

    /// Unnormalized 2-D DFT, returned in layout `ky * nx + kx`.
    fn forward(&self, values: &[f64]) -> Vec<Complex<f64>> {
        let (nx, ny) = (self.nx, self.ny);
        let mut rows: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fwd_y.process(&mut rows);
        let mut cols = vec![Complex::new(0.0, 0.0); nx * ny];
        for ix in 0..nx {
            for ky in 0..ny {
                cols[ky * nx + ix] = rows[ix * ny + ky];
            }
        }
        self.fwd_x.process(&mut cols);
        cols
    }

    /// Inverse of [`forward`](Self::forward), including the `1/N` factor.
    fn inverse(&self, mut spec: Vec<Complex<f64>>) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.ny);
        self.inv_x.process(&mut spec);
        let mut rows = vec![Complex::new(0.0, 0.0); nx * ny];
        for ky in 0..ny {
            for ix in 0..nx {
                rows[ix * ny + ky] = spec[ky * nx + ix];
            }
        }
        self.inv_y.process(&mut rows);
        let scale = 1.0 / (nx * ny) as f64;
        rows.into_iter().map(|c| c.re * scale).collect()
    }

    pub fn laplacian(&self, values: &[f64]) -> Vec<f64> {
        let mut spec = self.forward(values);
        for (c, &s) in spec.iter_mut().zip(&self.symbol) {
            *c *= -s;
        }
        self.inverse(spec)
    }

    /// Parseval form of the Dirichlet energy; the zero mode never contributes.
    pub fn dirichlet(&self, values: &[f64]) -> f64 {
        let spec = self.forward(values);
        let n = (self.nx * self.ny) as f64;
        compensated_sum(spec.iter().zip(&self.symbol).map(|(c, &s)| s * c.norm_sqr())) / (n * n)
    }

    /// Solves `(a K + s) u = f` with `K = -Laplacian`. With `s == 0` the zero
    /// mode of `f` is dropped and the returned `u` has zero mean.
    pub fn solve_shifted(&self, a: f64, s: f64, rhs: &[f64]) -> Vec<f64> {
        let mut spec = self.forward(rhs);
        for (k, (c, &sym)) in spec.iter_mut().zip(&self.symbol).enumerate() {
            let d = a * sym + s;
            if k == 0 && s == 0.0 {
                *c = Complex::new(0.0, 0.0);
            } else {
                *c /= d;
            }
        }
        self.inverse(spec)
    }

    pub fn distance(&self, di: usize, dj: usize) -> f64 {
        let di = di.min(self.nx - di);
        let dj = dj.min(self.ny - dj);
        (di as f64 / self.nx as f64).hypot(dj as f64 / self.ny as f64)
    }
}
