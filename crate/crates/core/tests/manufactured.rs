mod common;

use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sgs_fem::estimate::{l2_error, l2_error_to_interpolant, observed_order};
use sgs_fem::harness::{solve_level, Method, RunConfig};
use sgs_fem::mesh::Mesh;
use sgs_fem::problem::{Affine, ProblemDefinition, ScalarField, SinBubble};
use sgs_fem::quadrature::QuadratureRule;

use common::{fd_gradient, fd_operator};

fn random_points(seed: u64, count: usize) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| [rng.gen_range(0.01..0.99), rng.gen_range(0.01..0.99)])
        .collect()
}

#[test]
fn source_matches_finite_differences() {
    for (seed, p) in [
        (1, ProblemDefinition::case1()),
        (2, ProblemDefinition::case2()),
    ] {
        let exact = p.exact.clone().unwrap();
        let mut pts = random_points(seed, 20);
        pts.push([0.5, 0.5]);
        for x in pts {
            let q = p.source_at(x);
            let fd = fd_operator(&p, exact.as_ref(), x, 1e-5);
            assert_relative_eq!(q, fd, max_relative = 1e-6);
            assert_relative_eq!(p.apply_operator(exact.as_ref(), x), q, max_relative = 1e-12);
        }
    }
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let p = ProblemDefinition::case1();
    let fields: [&dyn ScalarField; 5] = [&SinBubble, &*p.d1, &*p.d2, &*p.u1, &*p.u2];
    for x in random_points(3, 20) {
        for f in fields {
            let g = f.gradient(x);
            let fd = fd_gradient(f, x, 1e-5);
            for k in 0..2 {
                assert!(
                    (g[k] - fd[k]).abs() <= 1e-8 * (1.0 + g[k].abs()),
                    "{f:?} at {x:?}"
                );
            }
        }
    }
}

#[test]
fn operator_and_adjoint_agree_without_advection() {
    let mut p = ProblemDefinition::case1();
    p.u1 = std::sync::Arc::new(Affine::new(0.0, 0.0, 0.0));
    p.u2 = std::sync::Arc::new(Affine::new(0.0, 0.0, 0.0));
    for x in random_points(4, 50) {
        let a = p.apply_operator(&SinBubble, x);
        let b = p.apply_adjoint(&SinBubble, x);
        assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }
}

#[test]
fn interpolation_error_is_second_order() {
    let rule = QuadratureRule::degree5();
    let errors: Vec<f64> = [20, 40, 80, 160]
        .iter()
        .map(|&n| {
            let mesh = Mesh::structured(n).unwrap();
            let nodal: Vec<f64> = mesh.nodes().iter().map(|&x| SinBubble.value(x)).collect();
            l2_error(&mesh, &nodal, &SinBubble, &rule).unwrap()
        })
        .collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.6..=4.4).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn interpolant_of_exact_has_zero_interpolant_error() {
    let mesh = Mesh::structured(7).unwrap();
    let nodal: Vec<f64> = mesh.nodes().iter().map(|&x| SinBubble.value(x)).collect();
    assert_eq!(
        l2_error_to_interpolant(&mesh, &nodal, &SinBubble).unwrap(),
        0.0
    );
}

#[test]
fn galerkin_residuals_positive_and_estimate_decreases() {
    let problem = ProblemDefinition::case1();
    let cfg = RunConfig {
        method: Method::Galerkin,
        ..RunConfig::default()
    };
    let coarse = solve_level(&problem, &cfg, 10).unwrap();
    let fine = solve_level(&problem, &cfg, 20).unwrap();
    assert!(coarse.residuals.iter().all(|&r| r > 0.0));
    assert!(fine.estimate < coarse.estimate);
}

#[test]
fn effectivity_positive_and_finite() {
    for method in [Method::Galerkin, Method::Sgs] {
        for case in [ProblemDefinition::case1(), ProblemDefinition::case2()] {
            let cfg = RunConfig {
                method,
                ..RunConfig::default()
            };
            for n in [5, 10, 20] {
                let e = solve_level(&case, &cfg, n).unwrap().effectivity().unwrap();
                assert!(e.is_finite() && e > 0.0);
            }
        }
    }
}

#[test]
fn published_orders_from_published_errors() {
    assert_relative_eq!(
        observed_order(2.54151e-4, 6.28651e-5).unwrap(),
        2.01536,
        max_relative = 1e-5
    );
    assert_relative_eq!(
        observed_order(0.000405122, 0.000105007).unwrap(),
        1.94787,
        max_relative = 1e-5
    );
    assert_eq!(observed_order(4e-4, 1e-4).unwrap(), 2.0);
}

/// The published coarse-mesh error for case 1 with SGS is 4.05122e-4.
#[test]
fn case1_sgs_coarse_error_near_published_value() {
    let cfg = RunConfig::default();
    let level = solve_level(&ProblemDefinition::case1(), &cfg, 10).unwrap();
    let e = level.l2_error.unwrap();
    let factor = (e / 4.05122e-4).max(4.05122e-4 / e);
    assert!(
        factor <= 2.0,
        "n=10 error {e:e} is a factor {factor:.2} from 4.05122e-4"
    );
}
