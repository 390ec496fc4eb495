//! Dense LU factorization with partial pivoting, sized for the gain
//! system (a few hundred unknowns). Factor once per prepared embedder,
//! solve once per message.

use crate::error::{Error, Result};

/// Relative pivot floor: pivots below this fraction of the matrix's
/// largest initial entry count as rank deficiency.
const PIVOT_CUSHION: f64 = 1e-10;

pub(crate) struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl LuFactors {
    /// Factors a row-major n x n matrix. Returns `DegenerateKey` when the
    /// matrix is numerically singular beyond the pivot cushion.
    pub(crate) fn factor(mut a: Vec<f64>, n: usize) -> Result<Self> {
        assert_eq!(a.len(), n * n, "matrix buffer must be n*n");
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return Err(Error::DegenerateKey);
        }
        let floor = scale * PIVOT_CUSHION;
        let mut perm = Vec::with_capacity(n);

        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_abs = a[col * n + col].abs();
            for row in col + 1..n {
                let v = a[row * n + col].abs();
                if v > pivot_abs {
                    pivot_abs = v;
                    pivot_row = row;
                }
            }
            if pivot_abs < floor {
                return Err(Error::DegenerateKey);
            }
            if pivot_row != col {
                for k in 0..n {
                    a.swap(col * n + k, pivot_row * n + k);
                }
            }
            perm.push(pivot_row);

            let pivot = a[col * n + col];
            for row in col + 1..n {
                let factor = a[row * n + col] / pivot;
                a[row * n + col] = factor;
                if factor != 0.0 {
                    let (upper, lower) = a.split_at_mut(row * n);
                    let src = &upper[col * n + col + 1..col * n + n];
                    let dst = &mut lower[col + 1..n];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d -= factor * s;
                    }
                }
            }
        }
        Ok(LuFactors { n, lu: a, perm })
    }

    pub(crate) fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let n = self.n;
        let mut x = rhs.to_vec();
        for col in 0..n {
            x.swap(col, self.perm[col]);
        }
        // Forward substitution with unit lower factor.
        for row in 1..n {
            let mut acc = x[row];
            for col in 0..row {
                acc -= self.lu[row * n + col] * x[col];
            }
            x[row] = acc;
        }
        // Back substitution.
        for row in (0..n).rev() {
            let mut acc = x[row];
            for col in row + 1..n {
                acc -= self.lu[row * n + col] * x[col];
            }
            x[row] = acc / self.lu[row * n + row];
        }
        x
    }
}

/// One-shot solve of `a x = b` for a row-major n x n matrix.
#[cfg(test)]
pub(crate) fn solve_dense(a: Vec<f64>, n: usize, b: &[f64]) -> Result<Vec<f64>> {
    Ok(LuFactors::factor(a, n)?.solve(b))
}
