//! Restarted GMRES with right preconditioning in a weighted inner product.

/// Outcome of a linear solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmresStats {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Solves `A x = b` for `x = P y`, starting from zero. `dot` is the inner
/// product in which the Arnoldi basis is orthonormalized.
pub fn gmres(
    apply_a: &dyn Fn(&[f64]) -> Vec<f64>,
    apply_p: &dyn Fn(&[f64]) -> Vec<f64>,
    dot: &dyn Fn(&[f64], &[f64]) -> f64,
    b: &[f64],
    rel_tol: f64,
    restart: usize,
    max_iter: usize,
) -> (Vec<f64>, GmresStats) {
    let n = b.len();
    let norm = |v: &[f64]| dot(v, v).max(0.0).sqrt();
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return (x, GmresStats { iterations: 0, relative_residual: 0.0, converged: true });
    }
    let mut total = 0;
    let mut r = b.to_vec();
    let mut beta = b_norm;
    loop {
        let m = restart.min(max_iter - total).max(1);
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        let mut rel = beta / b_norm;
        for k in 0..m {
            let z = apply_p(&basis[k]);
            let mut w = apply_a(&z);
            for (i, v) in basis.iter().enumerate() {
                let hik = dot(&w, v);
                h[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(v) {
                    *wj -= hik * vj;
                }
            }
            let wn = norm(&w);
            h[k + 1][k] = wn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            cs[k] = if d == 0.0 { 1.0 } else { h[k][k] / d };
            sn[k] = if d == 0.0 { 0.0 } else { h[k + 1][k] / d };
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            total += 1;
            rel = g[k + 1].abs() / b_norm;
            if rel <= rel_tol || wn == 0.0 || total >= max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // back substitution for y, then x += P (V y)
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in i + 1..k_used {
                acc -= h[i][j] * y[j];
            }
            y[i] = acc / h[i][i];
        }
        let mut vy = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            for (a, v) in vy.iter_mut().zip(&basis[j]) {
                *a += yj * v;
            }
        }
        let dx = apply_p(&vy);
        for (a, d) in x.iter_mut().zip(&dx) {
            *a += d;
        }
        let ax = apply_a(&x);
        r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        beta = norm(&r);
        let true_rel = beta / b_norm;
        let _ = rel;
        if true_rel <= rel_tol || total >= max_iter || beta == 0.0 {
            return (x, GmresStats { iterations: total, relative_residual: true_rel, converged: true_rel <= rel_tol });
        }
    }
}
