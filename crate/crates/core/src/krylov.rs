//! Restarted GMRES with right preconditioning.

pub(crate) struct GmresSettings {
    /// Stop once `‖b - A x‖ ≤ tol ‖b‖`.
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` starting from the given `x`. Returns the number of
/// iterations on success and `None` if the budget is exhausted.
pub(crate) fn gmres(
    apply: impl Fn(&[f64], &mut [f64]),
    precondition: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    settings: &GmresSettings,
) -> Option<usize> {
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Some(0);
    }
    let target = settings.tol * b_norm;
    let restart = settings.restart.max(1);
    let mut total = 0;
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];

    loop {
        apply(x, &mut w);
        let mut r: Vec<f64> = b.iter().zip(&w).map(|(bi, wi)| bi - wi).collect();
        let beta = norm(&r);
        if beta <= target {
            return Some(total);
        }
        if total >= settings.max_iter {
            return None;
        }
        r.iter_mut().for_each(|v| *v /= beta);
        let mut basis = vec![r];
        // Hessenberg columns, Givens rotations and the rotated residual.
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(restart);
        let mut cs: Vec<f64> = Vec::with_capacity(restart);
        let mut sn: Vec<f64> = Vec::with_capacity(restart);
        let mut g = vec![beta];

        let mut converged = false;
        for j in 0..restart {
            precondition(&basis[j], &mut z);
            apply(&z, &mut w);
            let mut col = Vec::with_capacity(j + 2);
            for v in &basis {
                let hij = dot(&w, v);
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= hij * vi);
                col.push(hij);
            }
            let h_next = norm(&w);
            col.push(h_next);
            for i in 0..j {
                let (a, b) = (col[i], col[i + 1]);
                col[i] = cs[i] * a + sn[i] * b;
                col[i + 1] = -sn[i] * a + cs[i] * b;
            }
            let denom = col[j].hypot(col[j + 1]);
            let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (col[j] / denom, col[j + 1] / denom) };
            col[j] = denom;
            col[j + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            let gj = g[j];
            g[j] = c * gj;
            g.push(-s * gj);
            h.push(col);
            total += 1;

            let small = g[j + 1].abs() <= target;
            if small || h_next == 0.0 || total >= settings.max_iter || j + 1 == restart {
                converged = small || h_next == 0.0;
                break;
            }
            basis.push(w.iter().map(|v| v / h_next).collect());
        }

        // Back substitution for the least-squares coefficients.
        let m = h.len();
        let mut y = vec![0.0; m];
        for i in (0..m).rev() {
            let mut s = g[i];
            for l in i + 1..m {
                s -= h[l][i] * y[l];
            }
            y[i] = s / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (v, yi) in basis.iter().zip(&y) {
            update.iter_mut().zip(v).for_each(|(u, vi)| *u += yi * vi);
        }
        precondition(&update, &mut z);
        x.iter_mut().zip(&z).for_each(|(xi, zi)| *xi += zi);

        if converged {
            // Confirm with the true residual; the recursive estimate can
            // drift below round-off.
            apply(x, &mut w);
            let res = norm(&b.iter().zip(&w).map(|(bi, wi)| bi - wi).collect::<Vec<_>>());
            if res <= 10.0 * target {
                return Some(total);
            }
        }
        if total >= settings.max_iter {
            return None;
        }
    }
}
