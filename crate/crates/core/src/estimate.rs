//! L2 errors, elementwise strong residuals and the residual-based a posteriori
//! error estimate.

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::mesh::Mesh;
use crate::problem::{ProblemDefinition, ScalarField};
use crate::quadrature::QuadratureRule;

/// Surrogates for the interpolation/stability constants of the estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConstants {
    /// Multiplies `h_k^2` (interpolation constant times stability constant).
    pub c_interp: f64,
    /// Multiplies `|tau_k|`.
    pub d_bar: f64,
}

impl Default for EstimatorConstants {
    fn default() -> Self {
        EstimatorConstants {
            c_interp: 1.0,
            d_bar: 1.0,
        }
    }
}

impl EstimatorConstants {
    pub fn new(c_interp: f64, d_bar: f64) -> Result<Self> {
        if !(c_interp > 0.0) || !(d_bar > 0.0) {
            return Err(invalid(
                "estimator constants",
                format!("both must be positive, got c_interp = {c_interp}, d_bar = {d_bar}"),
            ));
        }
        Ok(EstimatorConstants { c_interp, d_bar })
    }
}

fn check_solution(mesh: &Mesh, solution: &[f64]) -> Result<()> {
    if solution.len() != mesh.n_pt() {
        return Err(Error::LengthMismatch {
            what: "solution",
            got: solution.len(),
            expected: mesh.n_pt(),
        });
    }
    Ok(())
}

/// `||c_h - c||` over the domain.
pub fn l2_error(
    mesh: &Mesh,
    solution: &[f64],
    exact: &dyn ScalarField,
    rule: &QuadratureRule,
) -> Result<f64> {
    check_solution(mesh, solution)?;
    let mut sum = 0.0;
    for (e, t) in mesh.triangles().iter().enumerate() {
        let g = mesh.element_geometry(e)?;
        let local = [solution[t[0]], solution[t[1]], solution[t[2]]];
        for (l, w) in rule.iter() {
            let ch = l[0] * local[0] + l[1] * local[1] + l[2] * local[2];
            let d = ch - exact.value(g.point(l));
            sum += w * g.area * d * d;
        }
    }
    Ok(sum.sqrt())
}

/// `||c_h - I_h c||`, the distance to the nodal interpolant of the exact
/// solution. Diagnostic only; it superconverges on uniform meshes.
pub fn l2_error_to_interpolant(
    mesh: &Mesh,
    solution: &[f64],
    exact: &dyn ScalarField,
) -> Result<f64> {
    check_solution(mesh, solution)?;
    let diff: Vec<f64> = mesh
        .nodes()
        .iter()
        .zip(solution)
        .map(|(&p, &v)| v - exact.value(p))
        .collect();
    // The difference is piecewise linear, so its exact element mass matrix applies.
    let mut sum = 0.0;
    for (e, t) in mesh.triangles().iter().enumerate() {
        let area = mesh.element_geometry(e)?.area;
        let d = [diff[t[0]], diff[t[1]], diff[t[2]]];
        let s = d[0] + d[1] + d[2];
        let sq = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        sum += area / 12.0 * (sq + s * s);
    }
    Ok(sum.sqrt())
}

/// `||L c_h - q||` on each element, with `L` applied to the piecewise linear
/// solution (no second derivatives; coefficient gradients kept when
/// `coefficient_gradients` is set).
pub fn elementwise_residual(
    mesh: &Mesh,
    problem: &ProblemDefinition,
    solution: &[f64],
    rule: &QuadratureRule,
    coefficient_gradients: bool,
) -> Result<Vec<f64>> {
    check_solution(mesh, solution)?;
    let cg = if coefficient_gradients { 1.0 } else { 0.0 };
    mesh.triangles()
        .iter()
        .enumerate()
        .map(|(e, t)| {
            let g = mesh.element_geometry(e)?;
            let local = [solution[t[0]], solution[t[1]], solution[t[2]]];
            let grads = g.grads();
            let cx: f64 = (0..3).map(|a| local[a] * grads[a][0]).sum();
            let cy: f64 = (0..3).map(|a| local[a] * grads[a][1]).sum();
            let mut sum = 0.0;
            for (l, w) in rule.iter() {
                let x = g.point(l);
                let k = problem.coefficients(x);
                let ch = l[0] * local[0] + l[1] * local[1] + l[2] * local[2];
                let r = -cg * (k.d1_x * cx + k.d2_y * cy) + k.u1 * cx + k.u2 * cy + k.mu * ch
                    - problem.source_at(x);
                sum += w * g.area * r * r;
            }
            Ok(sum.sqrt())
        })
        .collect()
}

/// `sum_k (c_interp h_k^2 + d_bar |tau_k|) ||r_h||_k`
pub fn a_posteriori_estimate(
    residuals: &[f64],
    h: &[f64],
    tau: &[f64],
    constants: &EstimatorConstants,
) -> Result<f64> {
    for (what, len) in [("h", h.len()), ("tau", tau.len())] {
        if len != residuals.len() {
            return Err(Error::LengthMismatch {
                what,
                got: len,
                expected: residuals.len(),
            });
        }
    }
    Ok(residuals
        .iter()
        .zip(h)
        .zip(tau)
        .map(|((r, h), t)| (constants.c_interp * h * h + constants.d_bar * t.abs()) * r)
        .sum())
}

/// Convergence rate between a level and its refinement with `fine_n / coarse_n`
/// times as many subdivisions.
pub fn observed_order_between(
    coarse_error: f64,
    fine_error: f64,
    coarse_n: usize,
    fine_n: usize,
) -> Result<f64> {
    if !(coarse_error > 0.0) || !(fine_error > 0.0) {
        return Err(invalid(
            "errors",
            format!("both must be positive, got {coarse_error} and {fine_error}"),
        ));
    }
    if fine_n <= coarse_n || coarse_n == 0 {
        return Err(invalid(
            "levels",
            format!("need 0 < coarse < fine, got {coarse_n} and {fine_n}"),
        ));
    }
    Ok((coarse_error / fine_error).ln() / (fine_n as f64 / coarse_n as f64).ln())
}

/// `log2(e_n / e_2n)`
pub fn observed_order(coarse_error: f64, fine_error: f64) -> Result<f64> {
    observed_order_between(coarse_error, fine_error, 1, 2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub l2_error: f64,
    pub per_element_residual_norms: Vec<f64>,
    pub element_sizes: Vec<f64>,
    pub estimate: f64,
    /// `estimate / l2_error`; infinite when the error vanishes.
    pub effectivity: f64,
}

impl ErrorReport {
    /// Error, residuals and estimate for a solution of a problem with an exact solution.
    pub fn compute(
        mesh: &Mesh,
        problem: &ProblemDefinition,
        solution: &[f64],
        tau: &[f64],
        constants: &EstimatorConstants,
        rule: &QuadratureRule,
    ) -> Result<Self> {
        let exact = problem
            .exact
            .as_ref()
            .ok_or_else(|| invalid("problem", "no exact solution to measure against"))?;
        let l2_error = l2_error(mesh, solution, exact.as_ref(), rule)?;
        let per_element_residual_norms = elementwise_residual(mesh, problem, solution, rule, true)?;
        let element_sizes = (0..mesh.n_elements())
            .map(|e| mesh.element_geometry(e).map(|g| g.diameter))
            .collect::<Result<Vec<_>>>()?;
        let estimate =
            a_posteriori_estimate(&per_element_residual_norms, &element_sizes, tau, constants)?;
        Ok(ErrorReport {
            l2_error,
            per_element_residual_norms,
            element_sizes,
            estimate,
            effectivity: estimate / l2_error,
        })
    }

    /// One row per element (`element,h,residual`) after a comment line holding the totals.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# l2_error={:e} estimate={:e} effectivity={:e}",
            self.l2_error, self.estimate, self.effectivity
        )?;
        writeln!(out, "element,h,residual_norm")?;
        for (e, (h, r)) in self
            .element_sizes
            .iter()
            .zip(&self.per_element_residual_norms)
            .enumerate()
        {
            writeln!(out, "{e},{h:e},{r:e}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Affine, Constant, SinBubble, Source};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    #[test]
    fn zero_and_unit_errors() {
        let mesh = Mesh::structured(3).unwrap();
        let rule = QuadratureRule::degree5();
        let zero = vec![0.0; mesh.n_pt()];
        assert_eq!(l2_error(&mesh, &zero, &Constant(0.0), &rule).unwrap(), 0.0);
        let one = vec![1.0; mesh.n_pt()];
        assert_relative_eq!(
            l2_error(&mesh, &one, &Constant(0.0), &rule).unwrap(),
            1.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            l2_error_to_interpolant(&mesh, &one, &Constant(0.0)).unwrap(),
            1.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn wrong_length_solution() {
        let mesh = Mesh::structured(2).unwrap();
        let r = l2_error(&mesh, &[0.0; 3], &Constant(0.0), &QuadratureRule::degree5());
        assert!(matches!(r, Err(Error::LengthMismatch { .. })));
    }

    fn linear_problem(q: f64) -> (Mesh, ProblemDefinition, Vec<f64>) {
        let mesh = Mesh::structured(4).unwrap();
        let c = Affine::new(0.2, 1.0, -0.5);
        let p = ProblemDefinition::constant(1.0, [0.0, 0.0], 0.0)
            .with_exact(Arc::new(c))
            .with_source(Source::Field(Arc::new(Constant(q))));
        let sol = mesh.nodes().iter().map(|&x| c.value(x)).collect();
        (mesh, p, sol)
    }

    #[test]
    fn linear_solution_has_zero_residual() {
        let (mesh, p, sol) = linear_problem(0.0);
        let r = elementwise_residual(&mesh, &p, &sol, &QuadratureRule::degree4(), true).unwrap();
        assert!(r.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn unit_source_residual_is_sqrt_area() {
        let (mesh, p, sol) = linear_problem(1.0);
        let r = elementwise_residual(&mesh, &p, &sol, &QuadratureRule::degree4(), true).unwrap();
        for v in r {
            assert_relative_eq!(v, (1.0f64 / 32.0).sqrt(), max_relative = 1e-13);
        }
    }

    #[test]
    fn estimate_formula() {
        let c = EstimatorConstants::default();
        assert_eq!(
            a_posteriori_estimate(&[0.0; 4], &[0.1; 4], &[0.5; 4], &c).unwrap(),
            0.0
        );
        assert_relative_eq!(
            a_posteriori_estimate(&[2.0], &[0.1], &[0.0], &c).unwrap(),
            0.02,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            a_posteriori_estimate(&[2.0], &[0.1], &[-0.5], &c).unwrap(),
            1.02,
            max_relative = 1e-14
        );
        assert!(a_posteriori_estimate(&[1.0, 2.0], &[0.1], &[0.0, 0.0], &c).is_err());
        assert!(EstimatorConstants::new(0.0, 1.0).is_err());
    }

    #[test]
    fn orders() {
        assert_relative_eq!(
            observed_order(2.54151e-4, 6.28651e-5).unwrap(),
            2.01536,
            max_relative = 1e-5
        );
        assert_eq!(observed_order(4e-4, 1e-4).unwrap(), 2.0);
        assert_relative_eq!(
            observed_order(0.000405122, 0.000105007).unwrap(),
            1.94787,
            max_relative = 1e-5
        );
        assert!(observed_order(0.0, 1.0).is_err());
        assert!(observed_order(1.0, -1.0).is_err());
        assert_relative_eq!(
            observed_order_between(9.0, 1.0, 10, 30).unwrap(),
            2.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn report_needs_exact_solution() {
        let mesh = Mesh::structured(2).unwrap();
        let p = ProblemDefinition::constant(1.0, [0.0, 0.0], 0.0);
        let r = ErrorReport::compute(
            &mesh,
            &p,
            &[0.0; 9],
            &[0.0; 8],
            &EstimatorConstants::default(),
            &QuadratureRule::degree5(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn report_csv_has_one_row_per_element() {
        let mesh = Mesh::structured(2).unwrap();
        let p = ProblemDefinition::case1();
        let sol: Vec<f64> = mesh.nodes().iter().map(|&x| SinBubble.value(x)).collect();
        let rep = ErrorReport::compute(
            &mesh,
            &p,
            &sol,
            &[0.0; 8],
            &EstimatorConstants::default(),
            &QuadratureRule::degree5(),
        )
        .unwrap();
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2 + 8);
        assert!(rep.effectivity > 0.0 && rep.effectivity.is_finite());
    }
}
