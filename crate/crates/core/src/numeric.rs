//! Small numerical helpers shared across modules.

/// Running Neumaier-compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Neumaier-compensated summation. Order-dependent only through the input
/// order, so sequential reductions stay bitwise reproducible.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = Neumaier::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

pub fn weighted_sum(weights: &[f64], values: &[f64]) -> f64 {
    debug_assert_eq!(weights.len(), values.len());
    compensated_sum(weights.iter().zip(values).map(|(w, v)| w * v))
}

pub fn weighted_dot(weights: &[f64], a: &[f64], b: &[f64]) -> f64 {
    compensated_sum(weights.iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * x * y))
}

/// Ordinary least squares fit `y = slope * x + intercept`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "need at least two samples");
    let n = x.len() as f64;
    let mx = compensated_sum(x.iter().copied()) / n;
    let my = compensated_sum(y.iter().copied()) / n;
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = compensated_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// `n` geometrically spaced values from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && n >= 1);
    if n == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    (0..n)
        .map(|k| {
            if k == n - 1 {
                hi
            } else {
                lo * (ratio * k as f64).exp()
            }
        })
        .collect()
}

/// Solve a tridiagonal system with real coefficients and complex right-hand
/// side in place (Thomas algorithm). `lower[0]` and `upper[n-1]` are ignored.
pub(crate) fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [rustfft::num_complex::Complex<f64>],
) {
    let n = diag.len();
    let mut c_prime = vec![0.0; n];
    let mut beta = diag[0];
    rhs[0] /= beta;
    for i in 1..n {
        c_prime[i - 1] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c_prime[i - 1];
        let prev = rhs[i - 1];
        rhs[i] = (rhs[i] - prev * lower[i]) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= next * c_prime[i];
    }
}

/// Dense Gaussian elimination with partial pivoting; `a` is row-major `n x n`
/// and is destroyed, the solution overwrites `b`.
pub(crate) fn solve_dense(a: &mut [f64], b: &mut [f64]) {
    let n = b.len();
    assert_eq!(a.len(), n * n);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .expect("nonempty");
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f != 0.0 {
                for k in col..n {
                    a[row * n + k] -= f * a[col * n + k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * b[k];
        }
        b[row] = acc / a[row * n + row];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::num_complex::Complex;

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }

    #[test]
    fn least_squares_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|t| 2.5 * t - 1.0).collect();
        let (s, c) = least_squares(&x, &y);
        assert!((s - 2.5).abs() < 1e-14 && (c + 1.0).abs() < 1e-14);
    }

    #[test]
    fn tridiagonal_matches_dense() {
        let lower = [0.0, -1.0, -1.0, -2.0];
        let diag = [4.0, 4.0, 5.0, 6.0];
        let upper = [-1.0, -1.0, -2.0, 0.0];
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut rhs: Vec<Complex<f64>> = (0..4)
            .map(|i| {
                let mut v = diag[i] * x[i];
                if i > 0 {
                    v += lower[i] * x[i - 1];
                }
                if i < 3 {
                    v += upper[i] * x[i + 1];
                }
                Complex::new(v, -v)
            })
            .collect();
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs);
        for i in 0..4 {
            assert!((rhs[i].re - x[i]).abs() < 1e-13);
            assert!((rhs[i].im + x[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn dense_solve_small_system() {
        let mut a = vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let x = [1.0, -1.0, 2.0];
        let mut b = vec![-2.0 + 2.0, 1.0 - 1.0, 3.0 + 2.0];
        solve_dense(&mut a, &mut b);
        for i in 0..3 {
            assert!((b[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn geometric_grid_endpoints() {
        let g = geometric_grid(10.0, 1000.0, 5);
        assert_eq!(g[0], 10.0);
        assert_eq!(g[4], 1000.0);
        assert!((g[2] - 100.0).abs() < 1e-9);
    }
}
