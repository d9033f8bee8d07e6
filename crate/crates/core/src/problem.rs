//! PDE data for `-div(diag(D1, D2) grad c) + u . grad c + mu c = q` on the
//! unit square with Dirichlet boundary values.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Point;

/// A scalar field with analytic first and second partial derivatives.
pub trait ScalarField: fmt::Debug + Send + Sync {
    fn value(&self, p: Point) -> f64;

    /// `(f_x, f_y)`
    fn gradient(&self, p: Point) -> [f64; 2];

    /// `(f_xx, f_xy, f_yy)`
    fn hessian(&self, p: Point) -> [f64; 3];

    /// `sup |f|` over the unit square when it is known in closed form.
    fn sup_abs(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant(pub f64);

impl ScalarField for Constant {
    fn value(&self, _: Point) -> f64 {
        self.0
    }
    fn gradient(&self, _: Point) -> [f64; 2] {
        [0.0, 0.0]
    }
    fn hessian(&self, _: Point) -> [f64; 3] {
        [0.0; 3]
    }
    fn sup_abs(&self) -> Option<f64> {
        Some(self.0.abs())
    }
}

/// `c0 + cx x + cy y`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub c0: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Affine {
    pub fn new(c0: f64, cx: f64, cy: f64) -> Self {
        Affine { c0, cx, cy }
    }
}

const CORNERS: [Point; 4] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];

impl ScalarField for Affine {
    fn value(&self, p: Point) -> f64 {
        self.c0 + self.cx * p[0] + self.cy * p[1]
    }
    fn gradient(&self, _: Point) -> [f64; 2] {
        [self.cx, self.cy]
    }
    fn hessian(&self, _: Point) -> [f64; 3] {
        [0.0; 3]
    }
    fn sup_abs(&self) -> Option<f64> {
        Some(
            CORNERS
                .iter()
                .map(|&c| self.value(c).abs())
                .fold(0.0, f64::max),
        )
    }
}

/// `scale * (c0 + cx x + cy y)^2`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineSquared {
    pub scale: f64,
    pub inner: Affine,
}

impl AffineSquared {
    pub fn new(scale: f64, c0: f64, cx: f64, cy: f64) -> Self {
        AffineSquared {
            scale,
            inner: Affine::new(c0, cx, cy),
        }
    }
}

impl ScalarField for AffineSquared {
    fn value(&self, p: Point) -> f64 {
        let l = self.inner.value(p);
        self.scale * l * l
    }
    fn gradient(&self, p: Point) -> [f64; 2] {
        let l = self.inner.value(p);
        [
            2.0 * self.scale * l * self.inner.cx,
            2.0 * self.scale * l * self.inner.cy,
        ]
    }
    fn hessian(&self, _: Point) -> [f64; 3] {
        let (a, b) = (self.inner.cx, self.inner.cy);
        let s2 = 2.0 * self.scale;
        [s2 * a * a, s2 * a * b, s2 * b * b]
    }
    fn sup_abs(&self) -> Option<f64> {
        // |l|^2 is convex, so the maximum sits on a corner.
        let m = self.inner.sup_abs()?;
        Some(self.scale.abs() * m * m)
    }
}

/// `sin(x y (x - 1) (y - 1))`, zero on the whole boundary of the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SinBubble;

impl ScalarField for SinBubble {
    fn value(&self, p: Point) -> f64 {
        let [x, y] = p;
        (x * y * (x - 1.0) * (y - 1.0)).sin()
    }

    fn gradient(&self, p: Point) -> [f64; 2] {
        let [x, y] = p;
        let g = x * y * (x - 1.0) * (y - 1.0);
        let gx = y * (y - 1.0) * (2.0 * x - 1.0);
        let gy = x * (x - 1.0) * (2.0 * y - 1.0);
        let c = g.cos();
        [c * gx, c * gy]
    }

    fn hessian(&self, p: Point) -> [f64; 3] {
        let [x, y] = p;
        let g = x * y * (x - 1.0) * (y - 1.0);
        let gx = y * (y - 1.0) * (2.0 * x - 1.0);
        let gy = x * (x - 1.0) * (2.0 * y - 1.0);
        let gxx = 2.0 * y * (y - 1.0);
        let gyy = 2.0 * x * (x - 1.0);
        let gxy = (2.0 * x - 1.0) * (2.0 * y - 1.0);
        let (s, c) = g.sin_cos();
        [
            -s * gx * gx + c * gxx,
            -s * gx * gy + c * gxy,
            -s * gy * gy + c * gyy,
        ]
    }

    fn sup_abs(&self) -> Option<f64> {
        // g ranges over [0, 1/16] on the unit square.
        Some((1.0f64 / 16.0).sin())
    }
}

pub type FieldRef = Arc<dyn ScalarField>;

/// Right-hand side of the equation.
#[derive(Debug, Clone)]
pub enum Source {
    /// `q = L(exact)` evaluated from the analytic derivatives of the exact solution.
    Manufactured,
    Field(FieldRef),
}

/// Coefficients, source and boundary data of one advection-diffusion-reaction problem.
#[derive(Debug, Clone)]
pub struct ProblemDefinition {
    pub name: String,
    pub d1: FieldRef,
    pub d2: FieldRef,
    pub u1: FieldRef,
    pub u2: FieldRef,
    pub mu: FieldRef,
    pub source: Source,
    pub dirichlet: FieldRef,
    pub exact: Option<FieldRef>,
}

/// Coefficient values at one point, including the diffusion gradients that
/// survive when the operator acts on piecewise linear functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub d1: f64,
    pub d2: f64,
    /// `dD1/dx`
    pub d1_x: f64,
    /// `dD2/dy`
    pub d2_y: f64,
    pub u1: f64,
    pub u2: f64,
    pub mu: f64,
}

/// Sup norms of the diffusion and velocity fields over the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupBounds {
    pub d_sup: f64,
    pub u_sup: f64,
    pub mu_sup: f64,
    /// False when any bound came from grid sampling.
    pub exact: bool,
}

/// Points per side of the sampling grid used when a field has no closed-form sup.
pub const SUP_SAMPLES: usize = 101;

impl ProblemDefinition {
    /// Diffusion-dominated benchmark with the `sin(xy(x-1)(y-1))` solution.
    pub fn case1() -> Self {
        Self::scaled_benchmark("case1", 1.0, 0.1, 0.5, 0.01)
    }

    /// Advection-reaction-dominated benchmark; same exact solution.
    pub fn case2() -> Self {
        Self::scaled_benchmark("case2", 1e-7, 1e-8, 1.0, 1.0)
    }

    fn scaled_benchmark(name: &str, dx: f64, dy: f64, speed: f64, mu: f64) -> Self {
        ProblemDefinition {
            name: name.to_string(),
            d1: Arc::new(AffineSquared::new(dx, 1.0, 0.02, 0.0)),
            d2: Arc::new(AffineSquared::new(dy, 1.0, 0.0, 0.02)),
            u1: Arc::new(Affine::new(speed, 0.02 * speed, 0.0)),
            u2: Arc::new(Affine::new(-speed, 0.0, -0.02 * speed)),
            mu: Arc::new(Constant(mu)),
            source: Source::Manufactured,
            dirichlet: Arc::new(Constant(0.0)),
            exact: Some(Arc::new(SinBubble)),
        }
    }

    /// Constant coefficients, `q = 0`, zero Dirichlet data and no exact solution.
    pub fn constant(d: f64, u: [f64; 2], mu: f64) -> Self {
        ProblemDefinition {
            name: "constant".to_string(),
            d1: Arc::new(Constant(d)),
            d2: Arc::new(Constant(d)),
            u1: Arc::new(Constant(u[0])),
            u2: Arc::new(Constant(u[1])),
            mu: Arc::new(Constant(mu)),
            source: Source::Field(Arc::new(Constant(0.0))),
            dirichlet: Arc::new(Constant(0.0)),
            exact: None,
        }
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "case1" => Ok(Self::case1()),
            "case2" => Ok(Self::case2()),
            other => Err(crate::error::invalid(
                "case",
                format!("unknown built-in case `{other}` (expected case1 or case2)"),
            )),
        }
    }

    pub fn with_source(mut self, source: Source) -> Self {
        self.source = source;
        self
    }

    pub fn with_dirichlet(mut self, g: FieldRef) -> Self {
        self.dirichlet = g;
        self
    }

    pub fn with_exact(mut self, exact: FieldRef) -> Self {
        self.exact = Some(exact);
        self
    }

    pub fn coefficients(&self, p: Point) -> Coefficients {
        Coefficients {
            d1: self.d1.value(p),
            d2: self.d2.value(p),
            d1_x: self.d1.gradient(p)[0],
            d2_y: self.d2.gradient(p)[1],
            u1: self.u1.value(p),
            u2: self.u2.value(p),
            mu: self.mu.value(p),
        }
    }

    /// `L f = -D1 f_xx - D2 f_yy - D1_x f_x - D2_y f_y + u . grad f + mu f`
    pub fn apply_operator(&self, f: &dyn ScalarField, p: Point) -> f64 {
        self.apply(f, p, 1.0)
    }

    /// Formal adjoint: the advection term changes sign.
    pub fn apply_adjoint(&self, f: &dyn ScalarField, p: Point) -> f64 {
        self.apply(f, p, -1.0)
    }

    fn apply(&self, f: &dyn ScalarField, p: Point, advection_sign: f64) -> f64 {
        let k = self.coefficients(p);
        let [fx, fy] = f.gradient(p);
        let [fxx, _, fyy] = f.hessian(p);
        -k.d1 * fxx - k.d2 * fyy - k.d1_x * fx - k.d2_y * fy
            + advection_sign * (k.u1 * fx + k.u2 * fy)
            + k.mu * f.value(p)
    }

    /// Source term `q(p)`.
    pub fn source_at(&self, p: Point) -> f64 {
        match &self.source {
            Source::Field(q) => q.value(p),
            Source::Manufactured => match &self.exact {
                Some(c) => self.apply_operator(c.as_ref(), p),
                None => 0.0,
            },
        }
    }

    pub fn dirichlet_at(&self, p: Point) -> f64 {
        self.dirichlet.value(p)
    }

    pub fn sup_bounds(&self) -> SupBounds {
        let mut exact = true;
        let mut sup = |f: &FieldRef| {
            f.sup_abs().unwrap_or_else(|| {
                exact = false;
                sampled_sup(f.as_ref(), SUP_SAMPLES)
            })
        };
        let d_sup = sup(&self.d1).max(sup(&self.d2));
        let u_sup = sup(&self.u1).max(sup(&self.u2));
        let mu_sup = sup(&self.mu);
        SupBounds {
            d_sup,
            u_sup,
            mu_sup,
            exact,
        }
    }

    /// Fails if either diffusion field is not strictly positive on a sampling grid.
    pub fn check_positive_diffusion(&self) -> Result<()> {
        for (name, f) in [("D1", &self.d1), ("D2", &self.d2)] {
            for p in grid(SUP_SAMPLES) {
                let v = f.value(p);
                if !(v > 0.0) {
                    return Err(Error::InvalidParameter {
                        name: "diffusion",
                        reason: format!("{name} = {v} at ({}, {})", p[0], p[1]),
                    });
                }
            }
        }
        Ok(())
    }
}

fn grid(samples: usize) -> impl Iterator<Item = Point> {
    let m = (samples.max(2) - 1) as f64;
    (0..samples.max(2))
        .flat_map(move |j| (0..samples.max(2)).map(move |i| [i as f64 / m, j as f64 / m]))
}

/// Approximate `sup |f|` from a `samples x samples` grid on the unit square.
pub fn sampled_sup(f: &dyn ScalarField, samples: usize) -> f64 {
    grid(samples).map(|p| f.value(p).abs()).fold(0.0, f64::max)
}
