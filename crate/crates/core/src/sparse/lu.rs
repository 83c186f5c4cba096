//! Left-looking sparse LU (Gilbert–Peierls) with threshold partial pivoting.
//!
//! Column `k` of the factorization is column `order[k]` of `A`. Row pivots
//! prefer the row with the same original index (the "diagonal") whenever its
//! magnitude is within `pivot_tol` of the largest candidate, so a good
//! symmetric ordering survives pivoting.

use super::SparseMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LuFactor {
    n: usize,
    /// Unit lower factor, by columns; row indices are pivot positions.
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    /// Upper factor, by columns; the diagonal is stored last in each column.
    up: Vec<usize>,
    ui: Vec<usize>,
    ux: Vec<f64>,
    /// Original row -> pivot position.
    pinv: Vec<usize>,
    /// Pivot position -> original column.
    order: Vec<usize>,
}

const UNSET: usize = usize::MAX;

impl LuFactor {
    pub fn new(a: &SparseMatrix, order: &[usize], pivot_tol: f64) -> Result<Self> {
        let n = a.nrows();
        assert_eq!(a.ncols(), n, "LU needs a square matrix");
        assert_eq!(order.len(), n);
        // column access to A
        let at = a.transpose();
        let (ap, ai, ax) = (at.indptr(), at.indices(), at.values());

        let mut lu = LuFactor {
            n,
            lp: Vec::with_capacity(n + 1),
            li: Vec::with_capacity(4 * a.nnz()),
            lx: Vec::with_capacity(4 * a.nnz()),
            up: Vec::with_capacity(n + 1),
            ui: Vec::with_capacity(4 * a.nnz()),
            ux: Vec::with_capacity(4 * a.nnz()),
            pinv: vec![UNSET; n],
            order: order.to_vec(),
        };
        let mut x = vec![0.0; n];
        let mut xi = vec![0usize; n];
        let mut mark = vec![UNSET; n];
        let mut stack = vec![0usize; n];
        let mut pstack = vec![0usize; n];
        let mut max_pivot: f64 = 0.0;

        for k in 0..n {
            lu.lp.push(lu.li.len());
            lu.up.push(lu.ui.len());
            let col = order[k];
            let rows = &ai[ap[col]..ap[col + 1]];
            let vals = &ax[ap[col]..ap[col + 1]];

            // nonzero pattern of L \ A(:, col), in topological order xi[top..n]
            let mut top = n;
            for &r in rows {
                if mark[r] != k {
                    top = lu.dfs(r, k, top, &mut xi, &mut mark, &mut stack, &mut pstack);
                }
            }
            for &r in &xi[top..n] {
                x[r] = 0.0;
            }
            for (&r, &v) in rows.iter().zip(vals) {
                x[r] = v;
            }
            for p in top..n {
                let j = xi[p];
                let jcol = lu.pinv[j];
                if jcol == UNSET {
                    continue;
                }
                let xj = x[j];
                for q in lu.lp[jcol] + 1..lu.lp[jcol + 1] {
                    x[lu.li[q]] -= lu.lx[q] * xj;
                }
            }

            // choose the pivot
            let mut ipiv = UNSET;
            let mut best = -1.0;
            for p in top..n {
                let i = xi[p];
                if lu.pinv[i] == UNSET {
                    let t = x[i].abs();
                    if t > best {
                        best = t;
                        ipiv = i;
                    }
                } else {
                    lu.ui.push(lu.pinv[i]);
                    lu.ux.push(x[i]);
                }
            }
            if ipiv == UNSET || !(best > 0.0) || !best.is_finite() {
                return Err(Error::Singular {
                    column: k,
                    pivot: if ipiv == UNSET { 0.0 } else { best },
                    max_pivot,
                });
            }
            if lu.pinv[col] == UNSET && mark[col] == k && x[col].abs() >= pivot_tol * best {
                ipiv = col;
            }
            let pivot = x[ipiv];
            max_pivot = max_pivot.max(pivot.abs());
            lu.ui.push(k);
            lu.ux.push(pivot);
            lu.pinv[ipiv] = k;
            lu.li.push(ipiv);
            lu.lx.push(1.0);
            for p in top..n {
                let i = xi[p];
                if lu.pinv[i] == UNSET {
                    lu.li.push(i);
                    lu.lx.push(x[i] / pivot);
                }
                x[i] = 0.0;
            }
            // tiny pivots relative to the running scale are numerically singular
            if pivot.abs() <= 1e-14 * max_pivot {
                return Err(Error::Singular {
                    column: k,
                    pivot: pivot.abs(),
                    max_pivot,
                });
            }
        }
        lu.lp.push(lu.li.len());
        lu.up.push(lu.ui.len());
        for i in lu.li.iter_mut() {
            *i = lu.pinv[*i];
        }
        Ok(lu)
    }

    /// Non-recursive depth-first search from row `j` through the columns of
    /// `L` computed so far; pushes finished nodes onto `xi[..top]`.
    #[allow(clippy::too_many_arguments)]
    fn dfs(
        &self,
        j: usize,
        k: usize,
        mut top: usize,
        xi: &mut [usize],
        mark: &mut [usize],
        stack: &mut [usize],
        pstack: &mut [usize],
    ) -> usize {
        let mut head = 0usize;
        stack[0] = j;
        loop {
            let j = stack[head];
            let jcol = self.pinv[j];
            if mark[j] != k {
                mark[j] = k;
                pstack[head] = if jcol == UNSET { 0 } else { self.lp[jcol] };
            }
            let end = if jcol == UNSET { 0 } else { self.lp[jcol + 1] };
            let mut done = true;
            let mut p = pstack[head];
            while p < end {
                let i = self.li[p];
                p += 1;
                if mark[i] != k {
                    pstack[head] = p;
                    head += 1;
                    stack[head] = i;
                    done = false;
                    break;
                }
            }
            if done {
                top -= 1;
                xi[top] = j;
                if head == 0 {
                    return top;
                }
                head -= 1;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Nonzeros in L and U.
    pub fn fill(&self) -> usize {
        self.li.len() + self.ui.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = vec![0.0; self.n];
        for (i, &bi) in b.iter().enumerate() {
            x[self.pinv[i]] = bi;
        }
        for j in 0..self.n {
            let xj = x[j];
            if xj != 0.0 {
                for p in self.lp[j] + 1..self.lp[j + 1] {
                    x[self.li[p]] -= self.lx[p] * xj;
                }
            }
        }
        for j in (0..self.n).rev() {
            let last = self.up[j + 1] - 1;
            x[j] /= self.ux[last];
            let xj = x[j];
            if xj != 0.0 {
                for p in self.up[j]..last {
                    x[self.ui[p]] -= self.ux[p] * xj;
                }
            }
        }
        let mut out = vec![0.0; self.n];
        for (k, &c) in self.order.iter().enumerate() {
            out[c] = x[k];
        }
        out
    }

    /// Solve followed by one step of iterative refinement against `a`.
    pub fn solve_refined(&self, a: &SparseMatrix, b: &[f64]) -> Vec<f64> {
        let mut x = self.solve(b);
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let dx = self.solve(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        x
    }
}
