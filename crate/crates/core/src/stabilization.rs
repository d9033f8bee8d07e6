//! Stabilization parameter and discrete-maximum-principle diagnostics.

use crate::assembly::{ElementSystem, SparseSystem};
use crate::error::{invalid, Result};
use crate::mesh::Mesh;
use crate::problem::SupBounds;

/// Inputs of the closed-form stabilization parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauParams {
    /// Sup norm of the diffusion coefficients.
    pub d_sup: f64,
    /// Sup norm of the velocity components.
    pub u_sup: f64,
    /// Reaction constant (sup norm if variable).
    pub mu_ref: f64,
    /// Mesh size.
    pub h: f64,
}

impl TauParams {
    pub fn new(d_sup: f64, u_sup: f64, mu_ref: f64, h: f64) -> Self {
        TauParams {
            d_sup,
            u_sup,
            mu_ref,
            h,
        }
    }

    pub fn from_bounds(bounds: &SupBounds, h: f64) -> Self {
        Self::new(bounds.d_sup, bounds.u_sup, bounds.mu_sup, h)
    }

    /// Element Peclet-type number `2 U h / (3 D)`.
    pub fn q(&self) -> f64 {
        2.0 * self.u_sup * self.h / (3.0 * self.d_sup)
    }

    /// Damkohler-type number `mu h^2 / D`.
    pub fn r(&self) -> f64 {
        self.mu_ref * self.h * self.h / self.d_sup
    }

    fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) {
            return Err(invalid("h", format!("must be positive, got {}", self.h)));
        }
        if !(self.d_sup > 0.0) {
            return Err(invalid(
                "D",
                format!("must be positive, got {}", self.d_sup),
            ));
        }
        if !(self.u_sup >= 0.0) {
            return Err(invalid(
                "U",
                format!("must be non-negative, got {}", self.u_sup),
            ));
        }
        if !(self.mu_ref >= 0.0) {
            return Err(invalid(
                "mu",
                format!("must be non-negative, got {}", self.mu_ref),
            ));
        }
        Ok(())
    }
}

/// `tau = (9D / (4h^2) + 3U / (2h) + mu)^-1`
pub fn compute_tau(p: &TauParams) -> Result<f64> {
    p.validate()?;
    let h = p.h;
    Ok(1.0 / (9.0 * p.d_sup / (4.0 * h * h) + 3.0 * p.u_sup / (2.0 * h) + p.mu_ref))
}

/// One tau per element using its own diameter and the global coefficient bounds.
pub fn compute_tau_elementwise(mesh: &Mesh, bounds: &SupBounds) -> Result<Vec<f64>> {
    (0..mesh.n_elements())
        .map(|e| {
            let h = mesh.element_geometry(e)?.diameter;
            compute_tau(&TauParams::from_bounds(bounds, h))
        })
        .collect()
}

/// Lower bound on tau for non-negativity without reaction:
/// `max(0, (2h / 3U)(1 - 1/Q))`.
pub fn tau_bound_advection(d: f64, u: f64, h_e: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(invalid("U", format!("must be positive, got {u}")));
    }
    if !(h_e > 0.0) {
        return Err(invalid("h", format!("must be positive, got {h_e}")));
    }
    // Written as 2h/3U - D/U^2 so that D = 0 (Q infinite) is well defined.
    let bound = 2.0 * h_e / (3.0 * u) - d / (u * u);
    Ok(bound.max(0.0))
}

/// Lower bound on tau for non-negativity without advection:
/// `max(0, (1/mu)(1 - 3/R))`.
pub fn tau_bound_reaction(d: f64, mu: f64, h_e: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(invalid("mu", format!("must be positive, got {mu}")));
    }
    if !(h_e > 0.0) {
        return Err(invalid("h", format!("must be positive, got {h_e}")));
    }
    let bound = 1.0 / mu - 3.0 * d / (mu * mu * h_e * h_e);
    Ok(bound.max(0.0))
}

/// Non-negative type violations of one matrix (an element matrix or the
/// interior rows of the global operator).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DmpReport {
    /// Element index; `None` for the assembled matrix.
    pub element: Option<usize>,
    /// `(i, j, a_ij)` with `i != j` and `a_ij > 0`.
    pub offdiag_violations: Vec<(usize, usize, f64)>,
    /// `(i, sum_j a_ij)` for negative row sums.
    pub rowsum_violations: Vec<(usize, f64)>,
}

impl DmpReport {
    pub fn satisfied(&self) -> bool {
        self.offdiag_violations.is_empty() && self.rowsum_violations.is_empty()
    }

    pub fn violation_count(&self) -> usize {
        self.offdiag_violations.len() + self.rowsum_violations.len()
    }
}

/// Round-off allowance: entries are compared against
/// `DMP_RELATIVE_TOL * max |a_ij|` of the matrix being checked.
pub const DMP_RELATIVE_TOL: f64 = 1e-12;

/// Checks every element matrix.
pub fn check_elements(locals: &[ElementSystem]) -> Vec<DmpReport> {
    locals
        .iter()
        .enumerate()
        .map(|(e, s)| {
            let rows: Vec<Vec<(usize, f64)>> = s
                .matrix
                .iter()
                .map(|r| r.iter().copied().enumerate().collect())
                .collect();
            let mut rep = check_rows(rows.iter().enumerate().map(|(i, r)| (i, r.as_slice())));
            rep.element = Some(e);
            rep
        })
        .collect()
}

/// Checks the `n_free x n_pt` rows of the assembled operator. Row indices in
/// the report are global node numbers.
pub fn check_system(system: &SparseSystem) -> DmpReport {
    let a = &system.full_matrix;
    let rows: Vec<(usize, Vec<(usize, f64)>)> = system
        .free_nodes
        .iter()
        .map(|&g| (g, a.row(g).collect()))
        .collect();
    check_rows(rows.iter().map(|(g, r)| (*g, r.as_slice())))
}

fn check_rows<'a>(rows: impl Iterator<Item = (usize, &'a [(usize, f64)])> + Clone) -> DmpReport {
    let scale = rows
        .clone()
        .flat_map(|(_, r)| r.iter().map(|(_, v)| v.abs()))
        .fold(0.0, f64::max);
    let eps = DMP_RELATIVE_TOL * scale;
    let mut rep = DmpReport::default();
    for (i, row) in rows {
        let mut sum = 0.0;
        for &(j, v) in row {
            sum += v;
            if j != i && v > eps {
                rep.offdiag_violations.push((i, j, v));
            }
        }
        if sum < -eps {
            rep.rowsum_violations.push((i, sum));
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn case1_tau_value() {
        let tau = compute_tau(&TauParams::new(1.0404, 0.51, 0.01, 0.1)).unwrap();
        // 1 / (234.09 + 7.65 + 0.01)
        assert_relative_eq!(tau, 1.0 / 241.75, max_relative = 1e-14);
        assert_relative_eq!(tau, 4.1365e-3, max_relative = 1e-4);
    }

    #[test]
    fn case2_tau_value() {
        let tau = compute_tau(&TauParams::new(1.0404e-7, 1.02, 1.0, 0.05)).unwrap();
        assert_relative_eq!(tau, 3.1646e-2, max_relative = 1e-4);
    }

    #[test]
    fn pure_diffusion_reduces_to_h_squared() {
        let (d, h) = (0.7, 0.03);
        let tau = compute_tau(&TauParams::new(d, 0.0, 0.0, h)).unwrap();
        assert_relative_eq!(tau, 4.0 * h * h / (9.0 * d), max_relative = 1e-14);
    }

    #[test]
    fn invalid_inputs() {
        assert!(compute_tau(&TauParams::new(1.0, 1.0, 0.0, 0.0)).is_err());
        assert!(compute_tau(&TauParams::new(0.0, 1.0, 0.0, 0.1)).is_err());
        assert!(compute_tau(&TauParams::new(1.0, 1.0, -1.0, 0.1)).is_err());
        assert!(tau_bound_advection(1.0, 0.0, 0.1).is_err());
        assert!(tau_bound_reaction(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn q_and_r() {
        let p = TauParams::new(0.01, 1.0, 1.0, 0.1);
        assert_relative_eq!(p.q(), 20.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(p.r(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn advection_bound() {
        // Q <= 1 means no stabilization needed.
        assert_eq!(tau_bound_advection(1.0, 1.0, 0.1).unwrap(), 0.0);
        assert_relative_eq!(
            tau_bound_advection(0.0, 2.0, 0.3).unwrap(),
            2.0 * 0.3 / 6.0,
            max_relative = 1e-15
        );
        // (0.2/3)(1 - 0.15) = 0.0566...
        assert_relative_eq!(
            tau_bound_advection(0.01, 1.0, 0.1).unwrap(),
            0.2 / 3.0 * (1.0 - 0.15),
            max_relative = 1e-14
        );
    }

    #[test]
    fn reaction_bound() {
        assert_eq!(tau_bound_reaction(1.0, 1.0, 0.1).unwrap(), 0.0);
        assert_eq!(tau_bound_reaction(0.0, 4.0, 0.1).unwrap(), 0.25);
        assert_relative_eq!(
            tau_bound_reaction(1e-4, 1.0, 0.1).unwrap(),
            0.97,
            max_relative = 1e-13
        );
    }

    #[test]
    fn row_checks() {
        let locals = [ElementSystem {
            matrix: [[2.0, -1.0, -1.0], [-1.0, 1.0, 0.5], [-1.0, -1.0, 1.0]],
            rhs: [0.0; 3],
        }];
        let rep = &check_elements(&locals)[0];
        assert_eq!(rep.element, Some(0));
        assert_eq!(rep.offdiag_violations, vec![(1, 2, 0.5)]);
        assert_eq!(rep.rowsum_violations, vec![(2, -1.0)]);
        assert!(!rep.satisfied());
        assert_eq!(rep.violation_count(), 2);
    }
}
