//! LSE solution through the generalized SVD: x = (AP)^+ rhs + B_A^+ d.

use nalgebra::DVector;

use crate::error::Result;
use crate::gsvd::{gsvd, GsvdFactors};
use crate::operators::{apply_ap_pinv, apply_ba_pinv};
use crate::problem::LseProblem;

/// Solution of one LSE instance: the minimizer `x`, the least squares
/// residual `r = rhs - A x`, and the factorization used to compute them.
#[derive(Debug, Clone)]
pub struct LseSolution {
    pub x: DVector<f64>,
    pub r: DVector<f64>,
    pub factors: GsvdFactors,
}

impl LseSolution {
    pub fn residual_norm(&self) -> f64 {
        self.r.norm()
    }
}

/// Solves the problem; propagates a rank-deficiency error when the
/// uniqueness assumptions fail.
pub fn solve_lse(problem: &LseProblem) -> Result<LseSolution> {
    let factors = gsvd(&problem.a, &problem.b)?;
    solve_with_factors(problem, factors)
}

/// Same as [`solve_lse`] but reuses an existing factorization of (A, B).
pub fn solve_with_factors(problem: &LseProblem, factors: GsvdFactors) -> Result<LseSolution> {
    let mut x = apply_ap_pinv(&factors, &problem.rhs)?;
    if problem.s() > 0 {
        x += apply_ba_pinv(&factors, &problem.d)?;
    }
    let r = &problem.rhs - &problem.a * &x;
    Ok(LseSolution { x, r, factors })
}
