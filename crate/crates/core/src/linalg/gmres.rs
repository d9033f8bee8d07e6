use super::{norm2, CsrMatrix};
use crate::error::{Error, Result};

/// Restarted GMRES with right Jacobi preconditioning.
///
/// Returns the iterate and the number of inner iterations performed. The
/// caller checks the true residual; this only reports stagnation.
pub fn gmres(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    restart: usize,
    max_iterations: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = a.nrows();
    let restart = restart.max(1).min(n.max(1));
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0));
    }

    let mut total = 0;
    let mut best = f64::INFINITY;
    let mut stalled_cycles = 0;
    while total < max_iterations {
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = norm2(&r);
        if beta / bnorm <= tol {
            return Ok((x, total));
        }
        if beta < 0.999 * best {
            best = beta;
            stalled_cycles = 0;
        } else {
            stalled_cycles += 1;
            if stalled_cycles >= 3 {
                break;
            }
        }

        let mut v: Vec<Vec<f64>> = Vec::with_capacity(restart + 1);
        v.push(r.iter().map(|x| x / beta).collect());
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k_used = 0;

        for k in 0..restart {
            let z: Vec<f64> = v[k].iter().zip(&inv_diag).map(|(p, d)| p * d).collect();
            let mut w = a.mul_vec(&z);
            for (i, vi) in v.iter().enumerate() {
                let hik: f64 = w.iter().zip(vi).map(|(p, q)| p * q).sum();
                h[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(vi) {
                    *wj -= hik * vj;
                }
            }
            let hnext = norm2(&w);
            h[k + 1][k] = hnext;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            total += 1;
            if g[k + 1].abs() / bnorm <= 0.5 * tol || hnext == 0.0 || total >= max_iterations {
                break;
            }
            v.push(w.iter().map(|x| x / hnext).collect());
        }

        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for ((xi, vi), d) in x.iter_mut().zip(&v[j]).zip(&inv_diag) {
                *xi += yj * vi * d;
            }
        }
        if k_used == 0 {
            break;
        }
    }
    let ax = a.mul_vec(&x);
    let res = norm2(&b.iter().zip(&ax).map(|(p, q)| p - q).collect::<Vec<_>>()) / bnorm;
    if res <= tol {
        Ok((x, total))
    } else {
        Err(Error::NotConverged {
            tol,
            residual: res,
            iterations: total,
        })
    }
}
