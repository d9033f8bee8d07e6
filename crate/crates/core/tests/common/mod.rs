//! Independent reference computations shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use sgs_fem::mesh::Point;
use sgs_fem::problem::{ProblemDefinition, ScalarField};

/// Gaussian elimination with partial pivoting on a dense copy.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Central difference of a scalar function of one variable.
fn central(f: impl Fn(f64) -> f64, t: f64, h: f64) -> f64 {
    (f(t + h) - f(t - h)) / (2.0 * h)
}

/// Gradient of a field by central differences of its values.
pub fn fd_gradient(f: &dyn ScalarField, p: Point, h: f64) -> [f64; 2] {
    [
        central(|x| f.value([x, p[1]]), p[0], h),
        central(|y| f.value([p[0], y]), p[1], h),
    ]
}

/// `-(D1 c_x)_x - (D2 c_y)_y + u . grad c + mu c`, with the flux derivatives
/// taken by central differences and every coefficient read pointwise.
pub fn fd_operator(p: &ProblemDefinition, c: &dyn ScalarField, x: Point, h: f64) -> f64 {
    let flux_x = |t: f64| p.d1.value([t, x[1]]) * c.gradient([t, x[1]])[0];
    let flux_y = |t: f64| p.d2.value([x[0], t]) * c.gradient([x[0], t])[1];
    let g = fd_gradient(c, x, h);
    -central(flux_x, x[0], h) - central(flux_y, x[1], h)
        + p.u1.value(x) * g[0]
        + p.u2.value(x) * g[1]
        + p.mu.value(x) * c.value(x)
}

pub fn max_relative_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs() / scale))
}
