//! Nodal solution exports: `x y value` text and legacy VTK.

use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

fn check_len(mesh: &Mesh, solution: &[f64]) -> Result<()> {
    if solution.len() != mesh.n_pt() {
        return Err(Error::LengthMismatch {
            what: "solution",
            got: solution.len(),
            expected: mesh.n_pt(),
        });
    }
    Ok(())
}

/// One `x y value` line per node in node order. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_grid_text<W: Write>(mesh: &Mesh, solution: &[f64], mut out: W) -> Result<()> {
    check_len(mesh, solution)?;
    for (p, v) in mesh.nodes().iter().zip(solution) {
        writeln!(out, "{:e} {:e} {:e}", p[0], p[1], v)?;
    }
    Ok(())
}

/// Inverse of [`write_grid_text`]; `#` lines and blank lines are skipped.
pub fn read_grid_text<R: BufRead>(input: R) -> Result<Vec<[f64; 3]>> {
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|w| w.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        if vals.len() != 3 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected `x y value`, got {} numbers", vals.len()),
            });
        }
        rows.push([vals[0], vals[1], vals[2]]);
    }
    Ok(rows)
}

/// Legacy ASCII VTK unstructured grid with the solution as point data.
pub fn write_vtk<W: Write>(mesh: &Mesh, solution: &[f64], name: &str, mut out: W) -> Result<()> {
    check_len(mesh, solution)?;
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{name}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.n_pt())?;
    for p in mesh.nodes() {
        writeln!(out, "{:e} {:e} 0", p[0], p[1])?;
    }
    let ne = mesh.n_elements();
    writeln!(out, "CELLS {} {}", ne, 4 * ne)?;
    for t in mesh.triangles() {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(out, "CELL_TYPES {ne}")?;
    for _ in 0..ne {
        // VTK_TRIANGLE
        writeln!(out, "5")?;
    }
    writeln!(out, "POINT_DATA {}", mesh.n_pt())?;
    writeln!(out, "SCALARS {name} double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for v in solution {
        writeln!(out, "{v:e}")?;
    }
    Ok(())
}

/// Writes `path` as grid text and the same path with a `.vtk` extension.
/// Returns the two paths written.
pub fn export_solution(mesh: &Mesh, solution: &[f64], path: &Path) -> Result<(PathBuf, PathBuf)> {
    check_len(mesh, solution)?;
    let vtk = path.with_extension("vtk");
    if vtk == path {
        return Err(crate::error::invalid(
            "export path",
            "must not already end in .vtk",
        ));
    }
    let mut f = BufWriter::new(std::fs::File::create(path)?);
    write_grid_text(mesh, solution, &mut f)?;
    f.flush()?;
    let mut f = BufWriter::new(std::fs::File::create(&vtk)?);
    write_vtk(mesh, solution, "solution", &mut f)?;
    f.flush()?;
    Ok((path.to_path_buf(), vtk))
}
