//! Structured triangulations of the unit square and per-element P1 geometry.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Which diagonal splits each grid cell into two triangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Diagonal {
    /// Cells are cut from (x_i, y_j) to (x_{i+1}, y_{j+1}).
    LowerLeftToUpperRight,
    /// Cells are cut from (x_i, y_{j+1}) to (x_{i+1}, y_j).
    #[default]
    UpperLeftToLowerRight,
}

impl std::str::FromStr for Diagonal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ll-ur" | "lower-left" => Ok(Diagonal::LowerLeftToUpperRight),
            "ul-lr" | "upper-left" => Ok(Diagonal::UpperLeftToLowerRight),
            other => Err(crate::error::invalid(
                "diagonal",
                format!("expected `ll-ur` or `ul-lr`, got `{other}`"),
            )),
        }
    }
}

/// A conforming triangulation with Dirichlet boundary flags.
///
/// Immutable once built; all queries take `&self`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    /// Global node index -> position among the free (interior) nodes.
    free_index: Vec<Option<usize>>,
    free_nodes: Vec<usize>,
}

impl Mesh {
    /// Uniform `n x n` grid on the unit square, two triangles per cell.
    pub fn structured(n: usize) -> Result<Self> {
        Self::structured_with(n, Diagonal::default())
    }

    pub fn structured_with(n: usize, diagonal: Diagonal) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyMesh);
        }
        let side = n + 1;
        let h = 1.0 / n as f64;
        let coord = |i: usize| if i == n { 1.0 } else { i as f64 * h };

        let mut nodes = Vec::with_capacity(side * side);
        let mut boundary = Vec::with_capacity(side * side);
        for j in 0..side {
            for i in 0..side {
                nodes.push([coord(i), coord(j)]);
                boundary.push(i == 0 || j == 0 || i == n || j == n);
            }
        }

        let id = |i: usize, j: usize| j * side + i;
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (sw, se, ne, nw) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                match diagonal {
                    Diagonal::LowerLeftToUpperRight => {
                        triangles.push([sw, se, ne]);
                        triangles.push([sw, ne, nw]);
                    }
                    Diagonal::UpperLeftToLowerRight => {
                        triangles.push([sw, se, nw]);
                        triangles.push([se, ne, nw]);
                    }
                }
            }
        }
        Ok(Self::from_parts(nodes, triangles, boundary))
    }

    /// Builds a mesh from raw parts. Orientation is not checked here;
    /// [`Mesh::element_geometry`] rejects degenerate triangles.
    pub fn from_parts(nodes: Vec<Point>, triangles: Vec<[usize; 3]>, boundary: Vec<bool>) -> Self {
        let mut free_index = vec![None; nodes.len()];
        let mut free_nodes = Vec::new();
        for (g, &b) in boundary.iter().enumerate() {
            if !b {
                free_index[g] = Some(free_nodes.len());
                free_nodes.push(g);
            }
        }
        Mesh {
            nodes,
            triangles,
            boundary,
            free_index,
            free_nodes,
        }
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    /// Total node count.
    pub fn n_pt(&self) -> usize {
        self.nodes.len()
    }

    /// Number of interior (unknown) nodes.
    pub fn n_free(&self) -> usize {
        self.free_nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.triangles.len()
    }

    /// Interior nodes in increasing global order; position = unknown index.
    pub fn free_nodes(&self) -> &[usize] {
        &self.free_nodes
    }

    pub fn free_index(&self, node: usize) -> Option<usize> {
        self.free_index[node]
    }

    pub fn element_geometry(&self, e: usize) -> Result<ElementGeometry> {
        let tri = self.triangles.get(e).ok_or(Error::ElementOutOfRange(e))?;
        let vertices = [self.nodes[tri[0]], self.nodes[tri[1]], self.nodes[tri[2]]];
        ElementGeometry::new(vertices).map_err(|err| match err {
            Error::DegenerateElement { area, .. } => Error::DegenerateElement { element: e, area },
            other => other,
        })
    }

    /// Largest element diameter.
    pub fn h_max(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| diameter(&[self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]]))
            .fold(0.0, f64::max)
    }

    /// Undirected edges mapped to the elements that contain them.
    pub fn edge_elements(&self) -> HashMap<(usize, usize), Vec<usize>> {
        let mut edges: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (e, t) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                edges.entry((a.min(b), a.max(b))).or_default().push(e);
            }
        }
        edges
    }

    /// Plain-text dump: node block, then triangle block, one entity per line.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# sgs-fem mesh v1")?;
        writeln!(out, "nodes {}", self.n_pt())?;
        for (p, &b) in self.nodes.iter().zip(&self.boundary) {
            writeln!(out, "{} {} {}", p[0], p[1], u8::from(b))?;
        }
        writeln!(out, "triangles {}", self.n_elements())?;
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty() || s.starts_with('#')));

        let mut header = |key: &str| -> Result<usize> {
            let (line, text) = lines.next().ok_or(Error::Parse {
                line: 0,
                message: format!("missing `{key}` header"),
            })?;
            let text = text?;
            text.strip_prefix(key)
                .and_then(|rest| rest.trim().parse().ok())
                .ok_or(Error::Parse {
                    line,
                    message: format!("expected `{key} <count>`"),
                })
        };
        let n_nodes = header("nodes")?;
        let mut rows = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            rows.push(lines.next());
        }
        let mut nodes = Vec::with_capacity(n_nodes);
        let mut boundary = Vec::with_capacity(n_nodes);
        for row in rows {
            let (line, text) = row.ok_or(Error::Parse {
                line: 0,
                message: "truncated node block".into(),
            })?;
            let text = text?;
            let f: Vec<&str> = text.split_whitespace().collect();
            let parse = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("bad number `{s}`"),
                })
            };
            if f.len() != 3 {
                return Err(Error::Parse {
                    line,
                    message: "expected `x y boundary`".into(),
                });
            }
            nodes.push([parse(f[0])?, parse(f[1])?]);
            boundary.push(f[2] == "1");
        }

        let mut lines = lines;
        let (line, text) = lines.next().ok_or(Error::Parse {
            line: 0,
            message: "missing `triangles` header".into(),
        })?;
        let n_tri: usize = text?
            .strip_prefix("triangles")
            .and_then(|rest| rest.trim().parse().ok())
            .ok_or(Error::Parse {
                line,
                message: "expected `triangles <count>`".into(),
            })?;
        let mut triangles = Vec::with_capacity(n_tri);
        for _ in 0..n_tri {
            let (line, text) = lines.next().ok_or(Error::Parse {
                line: 0,
                message: "truncated triangle block".into(),
            })?;
            let text = text?;
            let idx: Vec<usize> = text
                .split_whitespace()
                .map(|s| s.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse {
                    line,
                    message: "bad vertex index".into(),
                })?;
            if idx.len() != 3 || idx.iter().any(|&v| v >= n_nodes) {
                return Err(Error::Parse {
                    line,
                    message: "expected three valid vertex indices".into(),
                });
            }
            triangles.push([idx[0], idx[1], idx[2]]);
        }
        Ok(Self::from_parts(nodes, triangles, boundary))
    }
}

fn diameter(v: &[Point; 3]) -> f64 {
    (0..3)
        .map(|k| {
            let (a, b) = (v[k], v[(k + 1) % 3]);
            (b[0] - a[0]).hypot(b[1] - a[1])
        })
        .fold(0.0, f64::max)
}

/// Geometry of one P1 triangle.
///
/// With `(i, j, k)` a cyclic permutation of the vertices,
/// `beta[i] = y_j - y_k` and `gamma[i] = -(x_j - x_k)`, so that
/// `N_i(x, y) = (alpha_i + beta_i x + gamma_i y) / (2 area)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub area: f64,
    pub beta: [f64; 3],
    pub gamma: [f64; 3],
    pub diameter: f64,
    pub vertices: [Point; 3],
    /// Signed `2 * area`; negative for clockwise vertex order.
    signed_double_area: f64,
}

impl ElementGeometry {
    pub fn new(vertices: [Point; 3]) -> Result<Self> {
        let mut beta = [0.0; 3];
        let mut gamma = [0.0; 3];
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            beta[i] = vertices[j][1] - vertices[k][1];
            gamma[i] = -(vertices[j][0] - vertices[k][0]);
        }
        let signed = beta[0] * gamma[1] - beta[1] * gamma[0];
        let diameter = diameter(&vertices);
        if !(signed.abs() > 1e-14 * diameter * diameter) {
            return Err(Error::DegenerateElement {
                element: 0,
                area: 0.5 * signed,
            });
        }
        Ok(ElementGeometry {
            area: 0.5 * signed.abs(),
            beta,
            gamma,
            diameter,
            vertices,
            signed_double_area: signed,
        })
    }

    /// Constant gradient of shape function `i`.
    pub fn grad(&self, i: usize) -> [f64; 2] {
        [
            self.beta[i] / self.signed_double_area,
            self.gamma[i] / self.signed_double_area,
        ]
    }

    pub fn grads(&self) -> [[f64; 2]; 3] {
        [self.grad(0), self.grad(1), self.grad(2)]
    }

    pub fn shape(&self, i: usize, p: Point) -> f64 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let v = &self.vertices;
        let alpha = v[j][0] * v[k][1] - v[k][0] * v[j][1];
        (alpha + self.beta[i] * p[0] + self.gamma[i] * p[1]) / self.signed_double_area
    }

    /// Physical point for barycentric coordinates `lambda`.
    pub fn point(&self, lambda: [f64; 3]) -> Point {
        let v = &self.vertices;
        [
            lambda[0] * v[0][0] + lambda[1] * v[1][0] + lambda[2] * v[2][0],
            lambda[0] * v[0][1] + lambda[1] * v[1][1] + lambda[2] * v[2][1],
        ]
    }

    pub fn is_counter_clockwise(&self) -> bool {
        self.signed_double_area > 0.0
    }
}
