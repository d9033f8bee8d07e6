//! Symmetric Gauss rules on triangles in barycentric form.

use crate::error::{invalid, Result};

/// Points in barycentric coordinates with weights normalized to sum to one;
/// multiply by the element area when integrating.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    degree: usize,
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ([f64; 3], f64)> + '_ {
        self.points
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
    }

    /// Midpoint rule, exact for linears.
    pub fn centroid() -> Self {
        QuadratureRule {
            degree: 1,
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![1.0],
        }
    }

    /// 3-point interior rule, exact for quadratics.
    pub fn degree2() -> Self {
        let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
        let mut rule = QuadratureRule {
            degree: 2,
            points: Vec::new(),
            weights: Vec::new(),
        };
        rule.push_orbit3(a, b, 1.0 / 3.0);
        rule
    }

    /// 6-point rule (Dunavant), exact for quartics.
    pub fn degree4() -> Self {
        let mut rule = QuadratureRule {
            degree: 4,
            points: Vec::new(),
            weights: Vec::new(),
        };
        let a1 = 0.445_948_490_915_965;
        let w1 = 0.223_381_589_678_011_47;
        let a2 = 0.091_576_213_509_770_74;
        let w2 = 0.109_951_743_655_321_87;
        rule.push_orbit3(1.0 - 2.0 * a1, a1, w1);
        rule.push_orbit3(1.0 - 2.0 * a2, a2, w2);
        rule
    }

    /// 7-point rule (Radon), exact for quintics.
    pub fn degree5() -> Self {
        let s15 = 15f64.sqrt();
        let mut rule = QuadratureRule {
            degree: 5,
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![9.0 / 40.0],
        };
        let a1 = (6.0 - s15) / 21.0;
        let a2 = (6.0 + s15) / 21.0;
        rule.push_orbit3(1.0 - 2.0 * a1, a1, (155.0 - s15) / 1200.0);
        rule.push_orbit3(1.0 - 2.0 * a2, a2, (155.0 + s15) / 1200.0);
        rule
    }

    /// The lowest-order standard rule of at least the requested degree.
    pub fn with_degree(degree: usize) -> Result<Self> {
        match degree {
            0 | 1 => Ok(Self::centroid()),
            2 => Ok(Self::degree2()),
            3 | 4 => Ok(Self::degree4()),
            5 => Ok(Self::degree5()),
            d => Err(invalid(
                "quadrature degree",
                format!("no rule of degree {d}; the highest available is 5"),
            )),
        }
    }

    /// `(a, b, b)` and its two rotations.
    fn push_orbit3(&mut self, a: f64, b: f64, w: f64) {
        self.points.extend([[a, b, b], [b, a, b], [b, b, a]]);
        self.weights.extend([w; 3]);
    }
}

/// Rules of degree 2, 4 and 5.
pub fn standard_rules() -> [QuadratureRule; 3] {
    [
        QuadratureRule::degree2(),
        QuadratureRule::degree4(),
        QuadratureRule::degree5(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact `int x^a y^b` over the reference triangle: `a! b! / (a + b + 2)!`.
    fn monomial_integral(a: u32, b: u32) -> f64 {
        let fact = |k: u32| (1..=k).map(f64::from).product::<f64>();
        fact(a) * fact(b) / fact(a + b + 2)
    }

    /// On the reference triangle (0,0),(1,0),(0,1): x = l1, y = l2, area 1/2.
    fn integrate(rule: &QuadratureRule, f: impl Fn(f64, f64) -> f64) -> f64 {
        0.5 * rule.iter().map(|(l, w)| w * f(l[1], l[2])).sum::<f64>()
    }

    #[test]
    fn weights_sum_to_one() {
        for rule in standard_rules().iter().chain([&QuadratureRule::centroid()]) {
            let s: f64 = rule.weights().iter().sum();
            assert!((s - 1.0).abs() < 1e-14, "degree {}: {s}", rule.degree());
            for p in rule.points() {
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn exact_up_to_stated_degree() {
        for rule in standard_rules() {
            for a in 0..=rule.degree() as u32 {
                for b in 0..=(rule.degree() as u32 - a) {
                    let got = integrate(&rule, |x, y| x.powi(a as i32) * y.powi(b as i32));
                    let want = monomial_integral(a, b);
                    assert!(
                        (got - want).abs() < 1e-13,
                        "degree {} on x^{a} y^{b}: {got} vs {want}",
                        rule.degree()
                    );
                }
            }
        }
    }

    #[test]
    fn area_and_quartic_examples() {
        assert!((integrate(&QuadratureRule::degree2(), |_, _| 1.0) - 0.5).abs() < 1e-15);
        let got = integrate(&QuadratureRule::degree4(), |x, y| x * x * y * y);
        assert!((got - 1.0 / 180.0).abs() < 1e-15);
    }

    #[test]
    fn degree_lookup() {
        assert_eq!(QuadratureRule::with_degree(3).unwrap().degree(), 4);
        assert_eq!(QuadratureRule::with_degree(5).unwrap().len(), 7);
        assert!(QuadratureRule::with_degree(6).is_err());
    }
}
