//! The equality-constrained least squares problem and its uniqueness assumptions.
//!
//! The problem is `min ||rhs - A x||_2` subject to `B x = d`, with `A` of size
//! m x n and `B` of size s x n. A unique solution exists iff `rank(B) = s` and
//! the stacked matrix `[A; B]` has full column rank n. `s = 0` (no constraint)
//! is allowed and reduces everything to ordinary linear least squares.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{LseError, Result};

/// Data of one LSE instance: matrices `a` (m x n), `b` (s x n), the least
/// squares right-hand side `rhs` (length m) and the constraint value `d`
/// (length s).
#[derive(Debug, Clone)]
pub struct LseProblem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub d: DVector<f64>,
}

impl LseProblem {
    /// Builds a problem after checking that all shapes are conformant and the
    /// dimension ordering m + s >= n >= s holds.
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        rhs: DVector<f64>,
        d: DVector<f64>,
    ) -> Result<Self> {
        let (m, n) = a.shape();
        let (s, nb) = b.shape();
        if nb != n {
            return Err(LseError::ShapeMismatch(format!(
                "A has {n} columns but B has {nb}"
            )));
        }
        if rhs.len() != m {
            return Err(LseError::ShapeMismatch(format!(
                "A has {m} rows but rhs has length {}",
                rhs.len()
            )));
        }
        if d.len() != s {
            return Err(LseError::ShapeMismatch(format!(
                "B has {s} rows but d has length {}",
                d.len()
            )));
        }
        if n > m + s || s > n {
            return Err(LseError::ShapeMismatch(format!(
                "need m + s >= n >= s, got m = {m}, n = {n}, s = {s}"
            )));
        }
        Ok(Self { a, b, rhs, d })
    }

    /// Unconstrained problem (s = 0): ordinary linear least squares.
    pub fn lls(a: DMatrix<f64>, rhs: DVector<f64>) -> Result<Self> {
        let n = a.ncols();
        Self::new(a, DMatrix::zeros(0, n), rhs, DVector::zeros(0))
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn s(&self) -> usize {
        self.b.nrows()
    }

    /// Runs [`check_assumptions`] with the default rank tolerance.
    pub fn check(&self) -> Result<AssumptionReport> {
        check_assumptions(&self.a, &self.b, default_rank_tol(&self.a, &self.b))
    }
}

/// Measured ranks of `B` and of the stacked matrix `[A; B]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AssumptionReport {
    pub rank_b: usize,
    pub rank_stacked: usize,
    pub ok: bool,
}

/// Default relative rank threshold: singular values below
/// `max(rows, cols) * eps` times the largest singular value count as zero.
pub fn default_rank_tol(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let rows = a.nrows() + b.nrows();
    let cols = a.ncols();
    rows.max(cols) as f64 * f64::EPSILON
}

/// Verifies the uniqueness assumptions: `rank(B) = s` and
/// `rank([A; B]) = n`, with ranks measured by SVD at relative tolerance
/// `tol` (a singular value sigma counts as nonzero iff
/// `sigma > tol * sigma_max`).
pub fn check_assumptions(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    tol: f64,
) -> Result<AssumptionReport> {
    if a.ncols() != b.ncols() {
        return Err(LseError::ShapeMismatch(format!(
            "A has {} columns but B has {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let s = b.nrows();
    let n = a.ncols();
    let rank_b = numerical_rank(b, tol)?;
    let stacked = stack_rows(a, b);
    let rank_stacked = numerical_rank(&stacked, tol)?;
    Ok(AssumptionReport {
        rank_b,
        rank_stacked,
        ok: rank_b == s && rank_stacked == n,
    })
}

/// Number of singular values above `tol * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> Result<usize> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0);
    }
    let sv = crate::svd::singular_values(m)?;
    let max = sv.first().copied().unwrap_or(0.0);
    if max == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&x| x > tol * max).count())
}

/// Stacks `a` on top of `b` (they must share a column count).
pub fn stack_rows(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), n);
    out.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    out.view_mut((a.nrows(), 0), (b.nrows(), n)).copy_from(b);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_blocks_pass() {
        let a = DMatrix::identity(2, 2);
        let b = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let rep = check_assumptions(&a, &b, 1e-12).unwrap();
        assert!(rep.ok);
        assert_eq!(rep.rank_b, 1);
        assert_eq!(rep.rank_stacked, 2);
    }

    #[test]
    fn zero_constraint_row_fails() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(1, 2, &[0.0, 0.0]);
        let rep = check_assumptions(&a, &b, 1e-12).unwrap();
        assert!(!rep.ok);
        assert_eq!(rep.rank_b, 0);
    }

    #[test]
    fn random_gaussian_full_rank() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut norm = || rng.sample::<f64, _>(rand_distr::StandardNormal);
        let a = DMatrix::from_fn(100, 80, |_, _| norm());
        let b = DMatrix::from_fn(50, 80, |_, _| norm());
        let rep = check_assumptions(&a, &b, default_rank_tol(&a, &b)).unwrap();
        assert!(rep.ok);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = DMatrix::identity(2, 2);
        let b = DMatrix::zeros(1, 3);
        assert!(check_assumptions(&a, &b, 1e-12).is_err());
    }

    #[test]
    fn dimension_ordering_enforced() {
        // n > m + s
        let a = DMatrix::zeros(1, 3);
        let b = DMatrix::zeros(1, 3);
        assert!(LseProblem::new(a, b, DVector::zeros(1), DVector::zeros(1)).is_err());
    }
}
