//! Explicit assembly of the derivative matrix of (A, B, rhs, d) -> L^T x.
//!
//! The Frechet derivative, flattened column-major with the weighted data
//! norm, is the k x (mn + sn + m + s) matrix `M = [M1, M2, M3, M4]` whose
//! spectral norm is the partial condition number. This module builds the four
//! blocks densely; the vec-transposition permutations are realized as index
//! maps during assembly, never as stored matrices. Intended as the ground
//! truth at moderate sizes and as the carrier of the structured formula.

use nalgebra::DMatrix;

use crate::error::{LseError, Result};
use crate::operators::{ap_pinv, ba_pinv, normal_pinv};
use crate::problem::LseProblem;
use crate::solve::{solve_lse, LseSolution};
use crate::weights::ConditionWeights;

/// Maximum number of stored elements across the four blocks (about 400 MB of
/// f64). Square problems up to n ~ 250 fit comfortably.
pub const ORACLE_ELEMENT_CAP: usize = 50_000_000;

/// The four dense blocks of the derivative matrix, ordered (vec A, vec B,
/// rhs, d).
#[derive(Debug, Clone)]
pub struct KroneckerBlocks {
    pub m1: DMatrix<f64>,
    pub m2: DMatrix<f64>,
    pub m3: DMatrix<f64>,
    pub m4: DMatrix<f64>,
}

impl KroneckerBlocks {
    pub fn ncols(&self) -> usize {
        self.m1.ncols() + self.m2.ncols() + self.m3.ncols() + self.m4.ncols()
    }

    /// Concatenates the blocks into the full k x (mn + sn + m + s) matrix.
    pub fn full_matrix(&self) -> DMatrix<f64> {
        let k = self.m1.nrows();
        let mut out = DMatrix::zeros(k, self.ncols());
        let mut off = 0;
        for block in [&self.m1, &self.m2, &self.m3, &self.m4] {
            out.view_mut((0, off), (k, block.ncols())).copy_from(block);
            off += block.ncols();
        }
        out
    }
}

/// Solves the problem and builds the derivative blocks.
pub fn kron_oracle(
    problem: &LseProblem,
    weights: &ConditionWeights,
) -> Result<KroneckerBlocks> {
    let sol = solve_lse(problem)?;
    kron_oracle_with(problem, &sol, weights)
}

/// Builds the blocks for an already solved problem. Fails with
/// [`LseError::OracleTooLarge`] when the dense representation would exceed
/// [`ORACLE_ELEMENT_CAP`].
pub fn kron_oracle_with(
    problem: &LseProblem,
    sol: &LseSolution,
    weights: &ConditionWeights,
) -> Result<KroneckerBlocks> {
    let f = &sol.factors;
    let (m, n, s) = (f.m(), f.n(), f.s());
    weights.validate(Some(n))?;
    let k = weights.l.k(n);
    let elements = k
        .checked_mul(m * n + s * n + m + s)
        .ok_or_else(|| LseError::Domain("oracle size overflow".into()))?;
    if elements > ORACLE_ELEMENT_CAP {
        return Err(LseError::OracleTooLarge {
            elements,
            cap: ORACLE_ELEMENT_CAP,
        });
    }

    // k x n and k x m carriers: L^T ((AP)^T AP)^+, L^T (AP)^+, L^T B_A^+.
    let k_normal = normal_pinv(f);
    let kl = weights.l.lt_mul(&k_normal);
    let ap = ap_pinv(f);
    let h = weights.l.lt_mul(&ap);
    let ba = ba_pinv(f);
    let ba_l = weights.l.lt_mul(&ba);
    // Row vector r^T A B_A^+, evaluated literally from the problem data.
    let w_row = (&problem.a * &ba).transpose() * &sol.r;

    let x = &sol.x;
    let r = &sol.r;
    let inv_a = 1.0 / weights.alpha_mat_a;
    let inv_b = 1.0 / weights.alpha_mat_b;

    // vec(dA) is column-major: entry (i, j) sits at column j*m + i. The
    // transposed factor in the r-term lands at the same column as r_i times
    // column j of the normal-equations carrier.
    let mut m1 = DMatrix::zeros(k, m * n);
    for j in 0..n {
        for i in 0..m {
            let col = j * m + i;
            for p in 0..k {
                m1[(p, col)] = (r[i] * kl[(p, j)] - x[j] * h[(p, i)]) * inv_a;
            }
        }
    }
    let mut m2 = DMatrix::zeros(k, s * n);
    for j in 0..n {
        for i in 0..s {
            let col = j * s + i;
            for p in 0..k {
                m2[(p, col)] = -(w_row[i] * kl[(p, j)] + x[j] * ba_l[(p, i)]) * inv_b;
            }
        }
    }
    let m3 = h / weights.alpha_vec_b;
    let m4 = ba_l / weights.alpha_vec_d;
    Ok(KroneckerBlocks { m1, m2, m3, m4 })
}
