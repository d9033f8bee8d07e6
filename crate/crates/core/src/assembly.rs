//! Element integration and global assembly of the Galerkin and SGS systems.
//!
//! Rows are indexed by the test function, columns by the trial function:
//!
//! ```text
//! a(N_b, N_a) = ∫ D1 ∂xN_a ∂xN_b + D2 ∂yN_a ∂yN_b + N_a u·∇N_b + μ N_a N_b
//! ```
//!
//! The SGS form adds, element by element, `∫ (-L*N_a) τ (L N_b)` to the matrix
//! and `∫ (-L*N_a) τ q` to the load. On P1 elements the second derivatives
//! vanish, leaving `L N = -∂xD1 ∂xN - ∂yD2 ∂yN + u·∇N + μN`.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::{ElementGeometry, Mesh};
use crate::problem::ProblemDefinition;
use crate::quadrature::QuadratureRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssemblyOptions {
    /// Keep the `-∂xD1 ∂x - ∂yD2 ∂y` terms when applying the operator to P1
    /// functions inside the stabilization integrals.
    pub coefficient_gradients: bool,
    /// Integrate elements on the rayon pool. Accumulation into the global
    /// matrix stays sequential, so results do not depend on this flag.
    pub parallel: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            coefficient_gradients: true,
            parallel: false,
        }
    }
}

/// Local 3x3 matrix (row = test, column = trial) and load vector.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ElementSystem {
    pub matrix: [[f64; 3]; 3],
    pub rhs: [f64; 3],
}

/// Integrates one element. `tau = None` gives the plain Galerkin contribution;
/// `Some(t)` adds the subgrid term even when `t == 0`.
pub fn element_system(
    geom: &ElementGeometry,
    problem: &ProblemDefinition,
    tau: Option<f64>,
    rule: &QuadratureRule,
    opts: &AssemblyOptions,
) -> ElementSystem {
    let grads = geom.grads();
    let cg = if opts.coefficient_gradients { 1.0 } else { 0.0 };
    let mut out = ElementSystem::default();

    for (lambda, w) in rule.iter() {
        let x = geom.point(lambda);
        let wa = w * geom.area;
        let k = problem.coefficients(x);
        let q = problem.source_at(x);

        let mut adv = [0.0; 3];
        let mut lower = [0.0; 3];
        for a in 0..3 {
            let [gx, gy] = grads[a];
            adv[a] = k.u1 * gx + k.u2 * gy;
            lower[a] = -cg * (k.d1_x * gx + k.d2_y * gy);
        }

        for a in 0..3 {
            let [gxa, gya] = grads[a];
            let na = lambda[a];
            out.rhs[a] += wa * q * na;
            for b in 0..3 {
                let [gxb, gyb] = grads[b];
                let nb = lambda[b];
                out.matrix[a][b] +=
                    wa * (k.d1 * gxa * gxb + k.d2 * gya * gyb + na * adv[b] + k.mu * na * nb);
            }
        }

        if let Some(t) = tau {
            // -L* N_a and L N_b at this point.
            let mut neg_adjoint = [0.0; 3];
            let mut op = [0.0; 3];
            for a in 0..3 {
                neg_adjoint[a] = -(lower[a] - adv[a] + k.mu * lambda[a]);
                op[a] = lower[a] + adv[a] + k.mu * lambda[a];
            }
            for a in 0..3 {
                out.rhs[a] += wa * t * neg_adjoint[a] * q;
                for b in 0..3 {
                    out.matrix[a][b] += wa * t * neg_adjoint[a] * op[b];
                }
            }
        }
    }
    out
}

/// Element systems for the whole mesh, in element order.
pub fn element_systems(
    mesh: &Mesh,
    problem: &ProblemDefinition,
    tau: Option<&[f64]>,
    rule: &QuadratureRule,
    opts: &AssemblyOptions,
) -> Result<Vec<ElementSystem>> {
    if let Some(t) = tau {
        validate_tau(mesh, t)?;
    }
    let one = |e: usize| -> Result<ElementSystem> {
        let geom = mesh.element_geometry(e)?;
        Ok(element_system(
            &geom,
            problem,
            tau.map(|t| t[e]),
            rule,
            opts,
        ))
    };
    if opts.parallel {
        (0..mesh.n_elements()).into_par_iter().map(one).collect()
    } else {
        (0..mesh.n_elements()).map(one).collect()
    }
}

fn validate_tau(mesh: &Mesh, tau: &[f64]) -> Result<()> {
    if tau.len() != mesh.n_elements() {
        return Err(Error::LengthMismatch {
            what: "tau",
            got: tau.len(),
            expected: mesh.n_elements(),
        });
    }
    if let Some((e, t)) = tau.iter().enumerate().find(|(_, t)| !(**t >= 0.0)) {
        return Err(invalid("tau", format!("element {e} has tau = {t}")));
    }
    Ok(())
}

/// Assembled system after Dirichlet elimination, together with the full
/// `n_pt x n_pt` operator it came from.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    /// `n_free x n_free`
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Unknown index -> global node.
    pub free_nodes: Vec<usize>,
    /// Dirichlet value on boundary nodes, zero on interior nodes.
    pub boundary_values: Vec<f64>,
    /// Operator and load before elimination.
    pub full_matrix: CsrMatrix,
    pub full_rhs: Vec<f64>,
}

impl SparseSystem {
    pub fn n_free(&self) -> usize {
        self.free_nodes.len()
    }

    /// Nodal values on every mesh node from the interior unknowns.
    pub fn expand(&self, free_values: &[f64]) -> Vec<f64> {
        let mut all = self.boundary_values.clone();
        for (&g, &v) in self.free_nodes.iter().zip(free_values) {
            all[g] = v;
        }
        all
    }

    /// The `n_free x n_pt` block of rows belonging to unknowns.
    pub fn free_rows(&self) -> CsrMatrix {
        let cols: Vec<usize> = (0..self.full_matrix.ncols()).collect();
        self.full_matrix.submatrix(&self.free_nodes, &cols)
    }
}

pub fn assemble_galerkin(
    mesh: &Mesh,
    problem: &ProblemDefinition,
    rule: &QuadratureRule,
) -> Result<SparseSystem> {
    assemble(mesh, problem, None, rule, &AssemblyOptions::default())
}

pub fn assemble_sgs(
    mesh: &Mesh,
    problem: &ProblemDefinition,
    tau: &[f64],
    rule: &QuadratureRule,
) -> Result<SparseSystem> {
    assemble(mesh, problem, Some(tau), rule, &AssemblyOptions::default())
}

/// Galerkin when `tau` is `None`, SGS otherwise.
pub fn assemble(
    mesh: &Mesh,
    problem: &ProblemDefinition,
    tau: Option<&[f64]>,
    rule: &QuadratureRule,
    opts: &AssemblyOptions,
) -> Result<SparseSystem> {
    let locals = element_systems(mesh, problem, tau, rule, opts)?;
    let (full_matrix, full_rhs) = accumulate(mesh, &locals);
    Ok(eliminate_dirichlet(mesh, problem, full_matrix, full_rhs))
}

/// Node-to-node sparsity of P1 elements: each row lists itself and its edge neighbours.
pub fn node_pattern(mesh: &Mesh) -> Vec<Vec<usize>> {
    let mut rows = vec![Vec::new(); mesh.n_pt()];
    for t in mesh.triangles() {
        for &a in t {
            rows[a].extend_from_slice(t);
        }
    }
    for r in &mut rows {
        r.sort_unstable();
        r.dedup();
    }
    rows
}

/// Sums element contributions into the full operator in element order.
pub fn accumulate(mesh: &Mesh, locals: &[ElementSystem]) -> (CsrMatrix, Vec<f64>) {
    let mut matrix = CsrMatrix::from_pattern(mesh.n_pt(), &node_pattern(mesh));
    let mut rhs = vec![0.0; mesh.n_pt()];
    for (t, local) in mesh.triangles().iter().zip(locals) {
        for a in 0..3 {
            rhs[t[a]] += local.rhs[a];
            for b in 0..3 {
                matrix.add_to(t[a], t[b], local.matrix[a][b]);
            }
        }
    }
    (matrix, rhs)
}

/// Keeps interior rows and columns and moves known boundary columns to the load.
pub fn eliminate_dirichlet(
    mesh: &Mesh,
    problem: &ProblemDefinition,
    full_matrix: CsrMatrix,
    full_rhs: Vec<f64>,
) -> SparseSystem {
    let boundary_values: Vec<f64> = mesh
        .nodes()
        .iter()
        .zip(mesh.boundary_flags())
        .map(|(&p, &b)| if b { problem.dirichlet_at(p) } else { 0.0 })
        .collect();
    let free_nodes = mesh.free_nodes().to_vec();
    let matrix = full_matrix.submatrix(&free_nodes, &free_nodes);
    let rhs = free_nodes
        .iter()
        .map(|&g| {
            let lift: f64 = full_matrix
                .row(g)
                .filter(|(c, _)| mesh.is_boundary(*c))
                .map(|(c, v)| v * boundary_values[c])
                .sum();
            full_rhs[g] - lift
        })
        .collect();
    SparseSystem {
        matrix,
        rhs,
        free_nodes,
        boundary_values,
        full_matrix,
        full_rhs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Diagonal;
    use crate::problem::{Affine, Constant, Source};
    use std::sync::Arc;

    fn reference() -> ElementGeometry {
        ElementGeometry::new([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap()
    }

    fn local(p: &ProblemDefinition, tau: Option<f64>) -> ElementSystem {
        element_system(
            &reference(),
            p,
            tau,
            &QuadratureRule::degree4(),
            &AssemblyOptions::default(),
        )
    }

    #[test]
    fn laplacian_diagonal_entry() {
        let m = local(&ProblemDefinition::constant(1.0, [0.0, 0.0], 0.0), None).matrix;
        assert!((m[1][1] - 0.5).abs() < 1e-15);
        assert!((m[0][0] - 1.0).abs() < 1e-15);
        assert!(m[1][2].abs() < 1e-15);
    }

    #[test]
    fn mass_off_diagonal_is_area_over_twelve() {
        let m = local(&ProblemDefinition::constant(0.0, [0.0, 0.0], 1.0), None).matrix;
        for a in 0..3 {
            for b in 0..3 {
                let want = if a == b { 1.0 / 12.0 } else { 1.0 / 24.0 };
                assert!((m[a][b] - want).abs() < 1e-15, "({a},{b}) = {}", m[a][b]);
            }
        }
    }

    #[test]
    fn sgs_term_for_pure_x_advection() {
        let p = ProblemDefinition::constant(1.0, [1.0, 0.0], 0.0);
        let tau = 0.3;
        let gal = local(&p, None).matrix;
        let sgs = local(&p, Some(tau)).matrix;
        let g = reference().grads();
        for a in 0..3 {
            for b in 0..3 {
                let want = tau * 0.5 * g[a][0] * g[b][0];
                assert!((sgs[a][b] - gal[a][b] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_source_gives_zero_load() {
        let mesh = Mesh::structured(4).unwrap();
        let p = ProblemDefinition::constant(1.0, [1.0, -0.5], 0.1);
        let s = assemble_galerkin(&mesh, &p, &QuadratureRule::degree4()).unwrap();
        assert!(s.rhs.iter().all(|&v| v == 0.0));
        assert_eq!(s.matrix.nrows(), 9);
    }

    #[test]
    fn every_free_row_has_a_nonzero_diagonal() {
        let mesh = Mesh::structured(6).unwrap();
        let s = assemble_galerkin(
            &mesh,
            &ProblemDefinition::case2(),
            &QuadratureRule::degree4(),
        )
        .unwrap();
        assert!(s.matrix.diagonal().iter().all(|&d| d != 0.0));
    }

    #[test]
    fn negative_or_misshapen_tau_rejected() {
        let mesh = Mesh::structured(2).unwrap();
        let p = ProblemDefinition::case1();
        let rule = QuadratureRule::degree4();
        let mut tau = vec![0.01; mesh.n_elements()];
        tau[3] = -1e-3;
        assert!(matches!(
            assemble_sgs(&mesh, &p, &tau, &rule),
            Err(Error::InvalidParameter { name: "tau", .. })
        ));
        assert!(matches!(
            assemble_sgs(&mesh, &p, &[0.0; 3], &rule),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn degenerate_element_aborts() {
        let mesh = Mesh::from_parts(
            vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            vec![[0, 1, 2]],
            vec![true; 3],
        );
        let r = assemble_galerkin(
            &mesh,
            &ProblemDefinition::case1(),
            &QuadratureRule::degree4(),
        );
        assert!(matches!(r, Err(Error::DegenerateElement { .. })));
    }

    #[test]
    fn symmetric_without_advection_nonsymmetric_with_it() {
        let mesh = Mesh::structured(5).unwrap();
        let rule = QuadratureRule::degree4();
        let mut p = ProblemDefinition::case1();
        p.u1 = Arc::new(Constant(0.0));
        p.u2 = Arc::new(Constant(0.0));
        let a = assemble_galerkin(&mesh, &p, &rule).unwrap().matrix;
        let at = a.transpose();
        let asym = a
            .values()
            .iter()
            .zip(at.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(asym <= 1e-12);

        let a = assemble_galerkin(&mesh, &ProblemDefinition::case1(), &rule)
            .unwrap()
            .matrix;
        let at = a.transpose();
        assert!(a
            .values()
            .iter()
            .zip(at.values())
            .any(|(x, y)| (x - y).abs() > 1e-6));
    }

    #[test]
    fn pure_advection_is_skew_on_interior_block() {
        let mesh = Mesh::structured_with(6, Diagonal::LowerLeftToUpperRight).unwrap();
        let p = ProblemDefinition::constant(0.0, [0.7, -0.4], 0.0);
        let s = assemble_galerkin(&mesh, &p, &QuadratureRule::degree2()).unwrap();
        let a = s.matrix.to_dense();
        for i in 0..a.len() {
            for j in 0..a.len() {
                assert!((a[i][j] + a[j][i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn boundary_lift_reproduces_linear_solution() {
        // Linear exact solution with constant coefficients: q = u·∇c + μc.
        let mesh = Mesh::structured(4).unwrap();
        let c = Affine::new(0.5, 2.0, -1.0);
        let (u, mu) = ([0.3, 0.2], 0.5);
        let p = ProblemDefinition::constant(1.0, u, mu)
            .with_exact(Arc::new(c))
            .with_source(Source::Manufactured)
            .with_dirichlet(Arc::new(c));
        let s = assemble_galerkin(&mesh, &p, &QuadratureRule::degree4()).unwrap();
        let x: Vec<f64> = s
            .free_nodes
            .iter()
            .map(|&g| crate::problem::ScalarField::value(&c, mesh.nodes()[g]))
            .collect();
        let ax = s.matrix.mul_vec(&x);
        for (l, r) in ax.iter().zip(&s.rhs) {
            assert!((l - r).abs() < 1e-13, "{l} vs {r}");
        }
    }

    #[test]
    fn parallel_matches_sequential_bitwise() {
        let mesh = Mesh::structured(8).unwrap();
        let p = ProblemDefinition::case1();
        let rule = QuadratureRule::degree4();
        let tau = vec![1e-3; mesh.n_elements()];
        let seq = assemble(&mesh, &p, Some(&tau), &rule, &AssemblyOptions::default()).unwrap();
        let par = assemble(
            &mesh,
            &p,
            Some(&tau),
            &rule,
            &AssemblyOptions {
                parallel: true,
                ..AssemblyOptions::default()
            },
        )
        .unwrap();
        assert_eq!(seq.matrix, par.matrix);
        assert_eq!(seq.rhs, par.rhs);
    }
}
