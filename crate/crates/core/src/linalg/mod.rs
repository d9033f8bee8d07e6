//! Sparse storage and solvers for the (nonsymmetric) assembled systems.

mod gmres;
mod lu;
mod ordering;

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub use gmres::gmres;
pub use lu::LuFactors;
pub use ordering::{nested_dissection, Ordering};

/// Compressed sparse row matrix with sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let bad = |reason: &str| crate::error::invalid("csr", reason.to_string());
        if row_ptr.len() != nrows + 1 || row_ptr[0] != 0 {
            return Err(bad("row pointer has wrong length"));
        }
        if col_idx.len() != values.len() || *row_ptr.last().unwrap() != col_idx.len() {
            return Err(bad("index and value arrays disagree"));
        }
        for r in 0..nrows {
            let cols = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            if row_ptr[r] > row_ptr[r + 1]
                || cols.windows(2).any(|w| w[0] >= w[1])
                || cols.iter().any(|&c| c >= ncols)
            {
                return Err(bad("columns must be sorted, unique and in range"));
            }
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Sums duplicate entries in input order.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        Self::from_triplets_with_drop(nrows, ncols, triplets, 0.0)
    }

    /// As [`CsrMatrix::from_triplets`], then removes summed entries with
    /// `|value| < drop_tol`. A tolerance of zero keeps explicit zeros.
    pub fn from_triplets_with_drop(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
        drop_tol: f64,
    ) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for k in order {
            let (r, c, v) = triplets[k];
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of range");
            if rows.last() == Some(&r) && col_idx.last() == Some(&c) {
                *values.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                col_idx.push(c);
                values.push(v);
            }
        }
        let mut kept_cols = Vec::with_capacity(col_idx.len());
        let mut kept_vals = Vec::with_capacity(values.len());
        for ((r, c), v) in rows.into_iter().zip(col_idx).zip(values) {
            if v.abs() < drop_tol {
                continue;
            }
            row_ptr[r + 1] += 1;
            kept_cols.push(c);
            kept_vals.push(v);
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx: kept_cols,
            values: kept_vals,
        }
    }

    /// All-zero matrix with the given sparsity pattern (rows of sorted columns).
    pub fn from_pattern(ncols: usize, rows: &[Vec<usize>]) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for r in rows {
            debug_assert!(r.windows(2).all(|w| w[0] < w[1]));
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        CsrMatrix {
            nrows: rows.len(),
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        let triplets: Vec<_> = rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| {
                r.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(move |(j, &v)| (i, j, v))
            })
            .collect();
        Self::from_triplets(rows.len(), ncols, &triplets)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    fn position(&self, r: usize, c: usize) -> Option<usize> {
        let start = self.row_ptr[r];
        self.col_idx[start..self.row_ptr[r + 1]]
            .binary_search(&c)
            .ok()
            .map(|k| start + k)
    }

    /// Stored value, or zero outside the pattern.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |k| self.values[k])
    }

    /// Adds into an existing pattern entry. Panics if `(r, c)` is not stored.
    pub fn add_to(&mut self, r: usize, c: usize, v: f64) {
        let k = self
            .position(r, c)
            .unwrap_or_else(|| panic!("entry ({r}, {c}) not in sparsity pattern"));
        self.values[k] += v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                let k = next[c];
                col_idx[k] = r;
                values[k] = v;
                next[c] += 1;
            }
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Keeps the rows and columns listed (in that order), renumbered.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut scratch = Vec::new();
        for &r in rows {
            scratch.clear();
            scratch.extend(
                self.row(r)
                    .filter(|(c, _)| col_map[*c] != usize::MAX)
                    .map(|(c, v)| (col_map[c], v)),
            );
            scratch.sort_by_key(|e| e.0);
            for &(c, v) in &scratch {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            nrows: rows.len(),
            ncols: cols.len(),
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        d
    }

    /// `nrows ncols nnz` header, then one `row col value` line per entry (0-based).
    pub fn write_coordinate<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                writeln!(out, "{r} {c} {v:e}")?;
            }
        }
        Ok(())
    }

    pub fn read_coordinate<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = data_lines(input);
        let (line, header) = lines.next().ok_or(Error::Parse {
            line: 0,
            message: "empty matrix file".into(),
        })??;
        let dims = parse_fields::<usize>(&header, line)?;
        if dims.len() != 3 {
            return Err(Error::Parse {
                line,
                message: "expected `nrows ncols nnz`".into(),
            });
        }
        let (nrows, ncols, nnz) = (dims[0], dims[1], dims[2]);
        let mut triplets = Vec::with_capacity(nnz);
        for item in lines.by_ref().take(nnz) {
            let (line, text) = item?;
            let f: Vec<&str> = text.split_whitespace().collect();
            let parsed = (f.len() == 3)
                .then(|| Some((f[0].parse().ok()?, f[1].parse().ok()?, f[2].parse().ok()?)))
                .flatten();
            match parsed {
                Some((r, c, v)) if r < nrows && c < ncols => triplets.push((r, c, v)),
                _ => {
                    return Err(Error::Parse {
                        line,
                        message: format!("bad entry `{text}`"),
                    })
                }
            }
        }
        if triplets.len() != nnz {
            return Err(Error::Parse {
                line: 0,
                message: format!("expected {nnz} entries, found {}", triplets.len()),
            });
        }
        Ok(Self::from_triplets(nrows, ncols, &triplets))
    }
}

type NumberedLine = (usize, String);

fn data_lines<R: BufRead>(input: R) -> impl Iterator<Item = Result<NumberedLine>> {
    input
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|s| (i + 1, s)).map_err(Error::from))
        .filter(|r| match r {
            Ok((_, s)) => {
                let t = s.trim();
                !t.is_empty() && !t.starts_with('#') && !t.starts_with('%')
            }
            Err(_) => true,
        })
}

fn parse_fields<T: std::str::FromStr>(text: &str, line: usize) -> Result<Vec<T>> {
    text.split_whitespace()
        .map(|s| {
            s.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad number `{s}`"),
            })
        })
        .collect()
}

/// Length header, then one value per line.
pub fn write_vector<W: Write>(v: &[f64], mut out: W) -> Result<()> {
    writeln!(out, "{}", v.len())?;
    for x in v {
        writeln!(out, "{x:e}")?;
    }
    Ok(())
}

pub fn read_vector<R: BufRead>(input: R) -> Result<Vec<f64>> {
    let mut lines = data_lines(input);
    let (line, header) = lines.next().ok_or(Error::Parse {
        line: 0,
        message: "empty vector file".into(),
    })??;
    let n: usize = header.trim().parse().map_err(|_| Error::Parse {
        line,
        message: "expected vector length".into(),
    })?;
    let v = lines
        .take(n)
        .map(|item| {
            let (line, text) = item?;
            text.trim().parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("bad number `{text}`"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if v.len() != n {
        return Err(Error::Parse {
            line: 0,
            message: format!("expected {n} values, found {}", v.len()),
        });
    }
    Ok(v)
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `b - A x` with each row accumulated in double-double arithmetic, so the
/// result is accurate even when it is far below `|A| |x|`.
pub fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    (0..a.nrows())
        .map(|r| {
            let (mut hi, mut lo) = (b[r], 0.0);
            for (c, v) in a.row(r) {
                let p = -v * x[c];
                let p_err = (-v).mul_add(x[c], -p);
                let s = hi + p;
                let bp = s - hi;
                let s_err = (hi - (s - bp)) + (p - bp);
                hi = s;
                lo += s_err + p_err;
            }
            hi + lo
        })
        .collect()
}

/// `||b - A x|| / ||b||`, or the absolute residual when `b = 0`.
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let r = residual(a, x, b);
    let nb = norm2(b);
    if nb > 0.0 {
        norm2(&r) / nb
    } else {
        norm2(&r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Sparse LU with threshold partial pivoting.
    Direct,
    /// Restarted GMRES with Jacobi preconditioning.
    Iterative,
}

impl std::fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveMethod::Direct => "direct",
            SolveMethod::Iterative => "iterative",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub method: SolveMethod,
    /// Required relative residual.
    pub tol: f64,
    /// A diagonal pivot is kept when `|a_kk| >= pivot_threshold * max_i |a_ik|`;
    /// 1.0 gives classical partial pivoting.
    pub pivot_threshold: f64,
    pub ordering: Ordering,
    /// Iterative refinement steps allowed after a direct solve.
    pub max_refinement: usize,
    pub max_iterations: usize,
    pub restart: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            method: SolveMethod::Direct,
            tol: 1e-12,
            pivot_threshold: 1e-3,
            ordering: Ordering::NestedDissection,
            max_refinement: 4,
            max_iterations: 10_000,
            restart: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub method: SolveMethod,
    /// Krylov iterations; zero for the direct method.
    pub iterations: usize,
    pub refinement_steps: usize,
    pub relative_residual: f64,
}

/// Solves `A x = b` to the requested relative residual or fails.
pub fn solve(a: &CsrMatrix, b: &[f64], opts: &SolveOptions) -> Result<(Vec<f64>, SolveReport)> {
    if !a.is_square() {
        return Err(crate::error::invalid(
            "matrix",
            format!("not square ({} x {})", a.nrows(), a.ncols()),
        ));
    }
    if b.len() != a.nrows() {
        return Err(Error::LengthMismatch {
            what: "right-hand side",
            got: b.len(),
            expected: a.nrows(),
        });
    }
    match opts.method {
        SolveMethod::Direct => solve_direct(a, b, opts),
        SolveMethod::Iterative => {
            let (x, iterations) = gmres(a, b, opts.tol, opts.restart, opts.max_iterations)?;
            let relative_residual = relative_residual(a, &x, b);
            if !(relative_residual <= opts.tol) {
                return Err(Error::NotConverged {
                    tol: opts.tol,
                    residual: relative_residual,
                    iterations,
                });
            }
            Ok((
                x,
                SolveReport {
                    method: SolveMethod::Iterative,
                    iterations,
                    refinement_steps: 0,
                    relative_residual,
                },
            ))
        }
    }
}

fn solve_direct(a: &CsrMatrix, b: &[f64], opts: &SolveOptions) -> Result<(Vec<f64>, SolveReport)> {
    let perm = opts.ordering.permutation(a);
    let lu = LuFactors::factor(a, &perm, opts.pivot_threshold)?;
    let mut x = lu.solve(b);
    let mut res = relative_residual(a, &x, b);
    let mut steps = 0;
    while !(res <= opts.tol) && steps < opts.max_refinement {
        let dx = lu.solve(&residual(a, &x, b));
        let candidate: Vec<f64> = x.iter().zip(&dx).map(|(p, q)| p + q).collect();
        let cand_res = relative_residual(a, &candidate, b);
        steps += 1;
        if !(cand_res < res) {
            break;
        }
        x = candidate;
        res = cand_res;
    }
    if !(res <= opts.tol) {
        return Err(Error::NotConverged {
            tol: opts.tol,
            residual: res,
            iterations: steps,
        });
    }
    Ok((
        x,
        SolveReport {
            method: SolveMethod::Direct,
            iterations: 0,
            refinement_steps: steps,
            relative_residual: res,
        },
    ))
}
