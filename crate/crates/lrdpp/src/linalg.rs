//! Dense symmetric factorizations shared by the kernel and conditioning code.
//!
//! Everything here works on small Gram matrices (at most K x K or |Y| x |Y|),
//! so a straightforward O(n^3) pivoted Cholesky is plenty.

use ndarray::{Array2, ArrayView2};

/// Pivot acceptance threshold, relative to the largest initial diagonal entry.
pub(crate) const PIVOT_RTOL: f64 = 1e-12;

/// Diagonal-pivoted Cholesky factorization P A P^T = L L^T.
///
/// `perm[j]` is the original index of the row/column chosen at step `j`.
/// Only the first `rank` columns of `lower` are meaningful; a pivot that
/// falls below `PIVOT_RTOL * max_initial_diagonal` stops the factorization
/// and the matrix is reported as rank-deficient rather than an error.
pub(crate) struct PivotedCholesky {
    lower: Array2<f64>,
    perm: Vec<usize>,
    rank: usize,
    n: usize,
}

impl PivotedCholesky {
    pub(crate) fn decompose(a: ArrayView2<'_, f64>) -> Self {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "pivoted Cholesky needs a square matrix");

        let mut work = a.to_owned();
        let mut perm: Vec<usize> = (0..n).collect();

        let max_diag = (0..n).map(|j| work[[j, j]]).fold(0.0_f64, f64::max);
        let tol = PIVOT_RTOL * max_diag.max(0.0);

        let mut rank = n;
        for j in 0..n {
            // Largest remaining diagonal entry becomes the next pivot.
            let mut p = j;
            for i in j + 1..n {
                if work[[i, i]] > work[[p, p]] {
                    p = i;
                }
            }
            let piv = work[[p, p]];
            if piv <= tol {
                rank = j;
                break;
            }
            if p != j {
                swap_symmetric(&mut work, j, p);
                perm.swap(j, p);
            }

            let root = piv.sqrt();
            work[[j, j]] = root;
            for i in j + 1..n {
                work[[i, j]] /= root;
            }
            for i in j + 1..n {
                let lij = work[[i, j]];
                for k in j + 1..=i {
                    work[[i, k]] -= lij * work[[k, j]];
                    // Later pivot swaps move whole rows and columns, so the
                    // trailing block must stay symmetric, not just lower.
                    work[[k, i]] = work[[i, k]];
                }
            }
        }

        // Zero the upper triangle so `lower` is a clean factor.
        for i in 0..n {
            for k in i + 1..n {
                work[[i, k]] = 0.0;
            }
        }

        PivotedCholesky { lower: work, perm, rank, n }
    }

    pub(crate) fn is_full_rank(&self) -> bool {
        self.rank == self.n
    }

    /// log det A, or `None` when the factorization stopped early.
    pub(crate) fn log_det(&self) -> Option<f64> {
        if !self.is_full_rank() {
            return None;
        }
        let mut acc = 0.0;
        for j in 0..self.n {
            acc += self.lower[[j, j]].ln();
        }
        Some(2.0 * acc)
    }

    /// Solves A X = B for full-rank A; `None` when rank-deficient.
    pub(crate) fn solve(&self, b: ArrayView2<'_, f64>) -> Option<Array2<f64>> {
        if !self.is_full_rank() {
            return None;
        }
        let n = self.n;
        assert_eq!(b.nrows(), n, "right-hand side has wrong row count");
        let cols = b.ncols();

        // A = P^T L L^T P, so X = P^T (L^T \ (L \ (P B))).
        let mut y = Array2::<f64>::zeros((n, cols));
        for i in 0..n {
            for c in 0..cols {
                y[[i, c]] = b[[self.perm[i], c]];
            }
        }
        for c in 0..cols {
            for i in 0..n {
                let mut s = y[[i, c]];
                for k in 0..i {
                    s -= self.lower[[i, k]] * y[[k, c]];
                }
                y[[i, c]] = s / self.lower[[i, i]];
            }
            for i in (0..n).rev() {
                let mut s = y[[i, c]];
                for k in i + 1..n {
                    s -= self.lower[[k, i]] * y[[k, c]];
                }
                y[[i, c]] = s / self.lower[[i, i]];
            }
        }

        let mut x = Array2::<f64>::zeros((n, cols));
        for i in 0..n {
            for c in 0..cols {
                x[[self.perm[i], c]] = y[[i, c]];
            }
        }
        Some(x)
    }
}

fn swap_symmetric(a: &mut Array2<f64>, i: usize, j: usize) {
    let n = a.nrows();
    for c in 0..n {
        let tmp = a[[i, c]];
        a[[i, c]] = a[[j, c]];
        a[[j, c]] = tmp;
    }
    for r in 0..n {
        let tmp = a[[r, i]];
        a[[r, i]] = a[[r, j]];
        a[[r, j]] = tmp;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn det_cofactor(a: &Array2<f64>) -> f64 {
        let n = a.nrows();
        if n == 0 {
            return 1.0;
        }
        if n == 1 {
            return a[[0, 0]];
        }
        let mut acc = 0.0;
        for j in 0..n {
            let mut minor = Array2::<f64>::zeros((n - 1, n - 1));
            for r in 1..n {
                let mut cc = 0;
                for c in 0..n {
                    if c == j {
                        continue;
                    }
                    minor[[r - 1, cc]] = a[[r, c]];
                    cc += 1;
                }
            }
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * a[[0, j]] * det_cofactor(&minor);
        }
        acc
    }

    #[test]
    fn identity_log_det_is_zero() {
        let fact = PivotedCholesky::decompose(Array2::<f64>::eye(5).view());
        assert!(fact.is_full_rank());
        assert!(fact.log_det().unwrap().abs() < 1e-14);
    }

    #[test]
    fn log_det_matches_cofactor_expansion() {
        let a = array![
            [4.0, 1.2, 0.5, 0.0],
            [1.2, 3.0, 0.3, 0.7],
            [0.5, 0.3, 2.5, 0.1],
            [0.0, 0.7, 0.1, 1.8],
        ];
        let fact = PivotedCholesky::decompose(a.view());
        let expected = det_cofactor(&a).ln();
        assert!((fact.log_det().unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn rank_one_matrix_is_detected() {
        let v = array![[1.0], [2.0], [-0.5]];
        let a = v.dot(&v.t());
        let fact = PivotedCholesky::decompose(a.view());
        assert_eq!(fact.rank, 1);
        assert!(fact.log_det().is_none());
        assert!(fact.solve(Array2::eye(3).view()).is_none());
    }

    #[test]
    fn solve_inverts_with_pivoting() {
        // Leading diagonal entry is the smallest, forcing a permutation.
        let a = array![[1.0, 5.0], [5.0, 100.0]];
        let fact = PivotedCholesky::decompose(a.view());
        assert_eq!(fact.perm, vec![1, 0]);
        let inv = fact.solve(Array2::eye(2).view()).unwrap();
        let prod = a.dot(&inv);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[[i, j]] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let fact = PivotedCholesky::decompose(Array2::<f64>::zeros((3, 3)).view());
        assert_eq!(fact.rank, 0);
        assert!(fact.log_det().is_none());
    }

    #[test]
    fn empty_matrix_is_trivially_full_rank() {
        let fact = PivotedCholesky::decompose(Array2::<f64>::zeros((0, 0)).view());
        assert!(fact.is_full_rank());
        assert_eq!(fact.log_det(), Some(0.0));
    }
}
