//! Left-looking sparse LU (Gilbert-Peierls) with threshold partial pivoting.
//!
//! Computes `P A Q = L U` where `Q` is a fill-reducing column order chosen up
//! front and `P` is chosen column by column during elimination.

use super::CsrMatrix;
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    /// Unit lower factor by columns; the diagonal is stored first.
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    /// Upper factor by columns; the diagonal is stored last.
    u_ptr: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    /// Original row -> pivot step.
    pinv: Vec<usize>,
    /// Pivot step -> original column.
    q: Vec<usize>,
}

impl LuFactors {
    /// Factors a square matrix. `q` is the column order; `threshold` in (0, 1]
    /// controls how strongly the diagonal of the permuted matrix is preferred.
    pub fn factor(a: &CsrMatrix, q: &[usize], threshold: f64) -> Result<Self> {
        let n = a.nrows();
        assert!(a.is_square());
        assert_eq!(q.len(), n);
        let threshold = threshold.clamp(f64::MIN_POSITIVE, 1.0);
        // Rows of A^T are the columns of A.
        let cols = a.transpose();

        let mut f = LuFactors {
            n,
            l_ptr: Vec::with_capacity(n + 1),
            l_idx: Vec::with_capacity(4 * a.nnz()),
            l_val: Vec::with_capacity(4 * a.nnz()),
            u_ptr: Vec::with_capacity(n + 1),
            u_idx: Vec::with_capacity(4 * a.nnz()),
            u_val: Vec::with_capacity(4 * a.nnz()),
            pinv: vec![NONE; n],
            q: q.to_vec(),
        };

        let mut x = vec![0.0; n];
        let mut reach = Reach::new(n);

        for (k, &col) in q.iter().enumerate() {
            f.l_ptr.push(f.l_idx.len());
            f.u_ptr.push(f.u_idx.len());

            let col_norm = cols.row(col).map(|(_, v)| v.abs()).fold(0.0, f64::max);
            let top = reach.compute(&cols, col, &f, k);
            let pattern = &reach.xi[top..];

            for (r, v) in cols.row(col) {
                x[r] = v;
            }
            // Sparse triangular solve in topological order.
            for &j in pattern {
                let jj = f.pinv[j];
                if jj == NONE {
                    continue;
                }
                let xj = x[j];
                for p in f.l_ptr[jj] + 1..f.l_ptr[jj + 1] {
                    x[f.l_idx[p]] -= f.l_val[p] * xj;
                }
            }

            let mut ipiv = NONE;
            let mut amax = -1.0f64;
            for &i in pattern {
                if f.pinv[i] == NONE {
                    let v = x[i].abs();
                    if v > amax {
                        amax = v;
                        ipiv = i;
                    }
                } else {
                    f.u_idx.push(f.pinv[i]);
                    f.u_val.push(x[i]);
                }
            }
            if ipiv == NONE || !(amax > f64::EPSILON * col_norm) || !amax.is_finite() {
                return Err(Error::Singular(format!(
                    "no acceptable pivot in column {col} (step {k}): largest candidate {:e}, column norm {col_norm:e}",
                    amax.max(0.0)
                )));
            }
            if f.pinv[col] == NONE && x[col].abs() >= threshold * amax {
                ipiv = col;
            }

            let pivot = x[ipiv];
            f.u_idx.push(k);
            f.u_val.push(pivot);
            f.pinv[ipiv] = k;
            f.l_idx.push(ipiv);
            f.l_val.push(1.0);
            for &i in pattern {
                if f.pinv[i] == NONE {
                    f.l_idx.push(i);
                    f.l_val.push(x[i] / pivot);
                }
                x[i] = 0.0;
            }
        }
        f.l_ptr.push(f.l_idx.len());
        f.u_ptr.push(f.u_idx.len());
        for r in f.l_idx.iter_mut() {
            *r = f.pinv[*r];
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries in `L` and `U` together.
    pub fn fill(&self) -> usize {
        self.l_idx.len() + self.u_idx.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut y = vec![0.0; self.n];
        for (i, &bi) in b.iter().enumerate() {
            y[self.pinv[i]] = bi;
        }
        for j in 0..self.n {
            let yj = y[j];
            if yj != 0.0 {
                for p in self.l_ptr[j] + 1..self.l_ptr[j + 1] {
                    y[self.l_idx[p]] -= self.l_val[p] * yj;
                }
            }
        }
        for j in (0..self.n).rev() {
            let diag = self.u_ptr[j + 1] - 1;
            y[j] /= self.u_val[diag];
            let yj = y[j];
            if yj != 0.0 {
                for p in self.u_ptr[j]..diag {
                    y[self.u_idx[p]] -= self.u_val[p] * yj;
                }
            }
        }
        let mut x = vec![0.0; self.n];
        for (k, &c) in self.q.iter().enumerate() {
            x[c] = y[k];
        }
        x
    }
}

/// Depth-first search workspace for the nonzero pattern of `L \ A(:, col)`.
struct Reach {
    xi: Vec<usize>,
    stack: Vec<usize>,
    pstack: Vec<usize>,
    mark: Vec<usize>,
}

impl Reach {
    fn new(n: usize) -> Self {
        Reach {
            xi: vec![0; n],
            stack: vec![0; n],
            pstack: vec![0; n],
            mark: vec![NONE; n],
        }
    }

    /// Fills `xi[top..]` with the reach in topological order and returns `top`.
    fn compute(&mut self, cols: &CsrMatrix, col: usize, f: &LuFactors, step: usize) -> usize {
        let mut top = f.n;
        for (r, _) in cols.row(col) {
            if self.mark[r] != step {
                top = self.dfs(r, top, f, step);
            }
        }
        top
    }

    fn dfs(&mut self, start: usize, mut top: usize, f: &LuFactors, step: usize) -> usize {
        let mut head = 0usize;
        self.stack[0] = start;
        loop {
            let j = self.stack[head];
            let jj = f.pinv[j];
            if self.mark[j] != step {
                self.mark[j] = step;
                self.pstack[head] = if jj == NONE { 0 } else { f.l_ptr[jj] + 1 };
            }
            let end = if jj == NONE { 0 } else { f.l_ptr[jj + 1] };
            let mut descended = false;
            let mut p = self.pstack[head];
            while p < end {
                let i = f.l_idx[p];
                p += 1;
                if self.mark[i] != step {
                    self.pstack[head] = p;
                    head += 1;
                    self.stack[head] = i;
                    descended = true;
                    break;
                }
            }
            if !descended {
                top -= 1;
                self.xi[top] = j;
                if head == 0 {
                    return top;
                }
                head -= 1;
            }
        }
    }
}
