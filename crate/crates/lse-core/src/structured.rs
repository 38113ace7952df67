//! Linear matrix structures and the structured partial condition number.
//!
//! A structure is encoded by the 0/1 incidence map `Phi` from independent
//! parameters to matrix entries, `vec(A) = Phi s`, stored sparsely as one
//! entry-index list per parameter. Each entry belongs to exactly one
//! parameter, so the columns of `Phi` are orthogonal and `Phi D^-1` is column
//! orthonormal when `D` holds the column norms `sqrt(#entries)`. The
//! structured condition number compresses the explicit derivative matrix by
//! the block diagonal of `Phi_1 D_1^-1`, `Phi_2 D_2^-1` and identities on the
//! vector data; column orthonormality makes it never exceed the unstructured
//! value.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::condition::{spectral_norm, ConditionReport, Method};
use crate::error::{LseError, Result};
use crate::kron::{kron_oracle_with, KroneckerBlocks};
use crate::problem::LseProblem;
use crate::solve::{solve_lse, LseSolution};
use crate::weights::ConditionWeights;

/// Supported linear structures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureKind {
    Toeplitz,
    Hankel,
    Symmetric,
    Full,
}

impl std::str::FromStr for StructureKind {
    type Err = LseError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "toeplitz" => Ok(Self::Toeplitz),
            "hankel" => Ok(Self::Hankel),
            "symmetric" => Ok(Self::Symmetric),
            "full" => Ok(Self::Full),
            other => Err(LseError::Domain(format!("unknown structure kind `{other}`"))),
        }
    }
}

/// A structure kind applied to a concrete shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StructureSpec {
    pub kind: StructureKind,
    pub rows: usize,
    pub cols: usize,
}

impl StructureSpec {
    pub fn new(kind: StructureKind, rows: usize, cols: usize) -> Self {
        Self { kind, rows, cols }
    }

    /// Number of independent parameters.
    pub fn params(&self) -> usize {
        match self.kind {
            StructureKind::Toeplitz | StructureKind::Hankel => self.rows + self.cols - 1,
            StructureKind::Symmetric => self.rows * (self.rows + 1) / 2,
            StructureKind::Full => self.rows * self.cols,
        }
    }
}

/// Sparse incidence map of a structure: `supports[p]` lists the column-major
/// entry indices bound to parameter p, and `d[p] = sqrt(supports[p].len())`.
#[derive(Debug, Clone)]
pub struct StructureMatrix {
    pub spec: StructureSpec,
    pub supports: Vec<Vec<usize>>,
    pub d: Vec<f64>,
}

impl StructureMatrix {
    pub fn k(&self) -> usize {
        self.supports.len()
    }

    /// Dense mn x k incidence matrix (test and small-scale use).
    pub fn phi_dense(&self) -> DMatrix<f64> {
        let mn = self.spec.rows * self.spec.cols;
        let mut phi = DMatrix::zeros(mn, self.k());
        for (p, support) in self.supports.iter().enumerate() {
            for &e in support {
                phi[(e, p)] = 1.0;
            }
        }
        phi
    }
}

/// Parameter index of entry (i, j) under a structure; diagonals are indexed
/// from the bottom-left corner upward for Toeplitz, anti-diagonals from the
/// top-left for Hankel.
fn param_index(kind: StructureKind, m: usize, i: usize, j: usize) -> usize {
    match kind {
        StructureKind::Toeplitz => j + (m - 1) - i,
        StructureKind::Hankel => i + j,
        StructureKind::Symmetric => {
            let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
            // row-major upper triangle
            lo * m - lo * (lo + 1) / 2 + hi
        }
        StructureKind::Full => j * m + i,
    }
}

/// Builds the incidence map of a structure.
pub fn build_structure(spec: StructureSpec) -> Result<StructureMatrix> {
    let (m, n) = (spec.rows, spec.cols);
    if m == 0 || n == 0 {
        return Err(LseError::ShapeMismatch("empty structure shape".into()));
    }
    if spec.kind == StructureKind::Symmetric && m != n {
        return Err(LseError::ShapeMismatch(format!(
            "symmetric structure needs a square shape, got {m} x {n}"
        )));
    }
    let k = spec.params();
    let mut supports = vec![Vec::new(); k];
    for j in 0..n {
        for i in 0..m {
            supports[param_index(spec.kind, m, i, j)].push(j * m + i);
        }
    }
    let d = supports.iter().map(|s| (s.len() as f64).sqrt()).collect();
    Ok(StructureMatrix { spec, supports, d })
}

/// Recovers the parameter vector of a structured matrix; errors when the
/// matrix is not in the structure subspace (relative residual above 1e-10).
pub fn extract_params(structure: &StructureMatrix, a: &DMatrix<f64>) -> Result<DVector<f64>> {
    let (m, n) = (structure.spec.rows, structure.spec.cols);
    if a.shape() != (m, n) {
        return Err(LseError::ShapeMismatch(format!(
            "matrix is {:?}, structure wants ({m}, {n})",
            a.shape()
        )));
    }
    let mut params = DVector::zeros(structure.k());
    for (p, support) in structure.supports.iter().enumerate() {
        let sum: f64 = support.iter().map(|&e| a[(e % m, e / m)]).sum();
        params[p] = sum / support.len() as f64;
    }
    let back = embed_params(structure, &params);
    let residual = (a - &back).norm();
    if residual > 1e-10 * a.norm().max(1.0) {
        return Err(LseError::StructureViolation { residual });
    }
    Ok(params)
}

/// vec^-1(Phi s): the structured matrix with the given parameters.
pub fn embed_params(structure: &StructureMatrix, params: &DVector<f64>) -> DMatrix<f64> {
    let (m, n) = (structure.spec.rows, structure.spec.cols);
    let mut a = DMatrix::zeros(m, n);
    for (p, support) in structure.supports.iter().enumerate() {
        for &e in support {
            a[(e % m, e / m)] = params[p];
        }
    }
    a
}

/// Right-multiplies a k x (dim*c) block by `Phi D^-1`, accumulating the
/// sparse columns of `Phi` (each touches `support.len()` columns of the
/// block).
fn compress_block(block: &DMatrix<f64>, structure: &StructureMatrix) -> DMatrix<f64> {
    let kr = block.nrows();
    let mut out = DMatrix::zeros(kr, structure.k());
    for (p, support) in structure.supports.iter().enumerate() {
        let inv_d = 1.0 / structure.d[p];
        for &e in support {
            for r in 0..kr {
                out[(r, p)] += block[(r, e)] * inv_d;
            }
        }
    }
    out
}

/// Structured partial condition number: spectral norm of the derivative
/// matrix compressed by blockdiag(Phi_1 D_1^-1, Phi_2 D_2^-1, I_m, I_s).
pub fn cond_structured(
    problem: &LseProblem,
    weights: &ConditionWeights,
    spec_a: StructureSpec,
    spec_b: StructureSpec,
) -> Result<ConditionReport> {
    let sol = solve_lse(problem)?;
    cond_structured_with(problem, &sol, weights, spec_a, spec_b)
}

pub fn cond_structured_with(
    problem: &LseProblem,
    sol: &LseSolution,
    weights: &ConditionWeights,
    spec_a: StructureSpec,
    spec_b: StructureSpec,
) -> Result<ConditionReport> {
    let start = Instant::now();
    let st_a = build_structure(spec_a)?;
    let st_b = build_structure(spec_b)?;
    extract_params(&st_a, &problem.a)?;
    extract_params(&st_b, &problem.b)?;
    let blocks = kron_oracle_with(problem, sol, weights)?;
    let kappa = spectral_norm(&structured_matrix(&blocks, Some(&st_a), Some(&st_b)))?;
    Ok(ConditionReport {
        kappa,
        method: Method::Structured,
        c_norm: Some(kappa * kappa),
        elapsed: start.elapsed(),
    })
}

/// [M1 Phi1 D1^-1, M2 Phi2 D2^-1, M3, M4]; a missing structure keeps the raw
/// block. Public so the compressed operator can feed the spectral-norm
/// estimator without recomputation.
pub fn structured_matrix(
    blocks: &KroneckerBlocks,
    st_a: Option<&StructureMatrix>,
    st_b: Option<&StructureMatrix>,
) -> DMatrix<f64> {
    let c1 = match st_a {
        Some(st) => compress_block(&blocks.m1, st),
        None => blocks.m1.clone(),
    };
    let c2 = match st_b {
        Some(st) => compress_block(&blocks.m2, st),
        None => blocks.m2.clone(),
    };
    let k = blocks.m1.nrows();
    let total = c1.ncols() + c2.ncols() + blocks.m3.ncols() + blocks.m4.ncols();
    let mut out = DMatrix::zeros(k, total);
    let mut off = 0;
    for b in [&c1, &c2, &blocks.m3, &blocks.m4] {
        out.view_mut((0, off), (k, b.ncols())).copy_from(b);
        off += b.ncols();
    }
    out
}

/// Structured condition number of the unconstrained problem and its upper
/// bound (the unstructured value).
#[derive(Debug, Clone, Serialize)]
pub struct StructuredLls {
    pub kappa_s: f64,
    pub kappa_bound: f64,
}

pub fn cond_structured_lls(
    a: &DMatrix<f64>,
    rhs: &DVector<f64>,
    weights: &ConditionWeights,
    spec_a: StructureSpec,
) -> Result<StructuredLls> {
    let st_a = build_structure(spec_a)?;
    extract_params(&st_a, a)?;
    let problem = LseProblem::lls(a.clone(), rhs.clone())?;
    let sol = solve_lse(&problem)?;
    let blocks = kron_oracle_with(&problem, &sol, weights)?;
    let kappa_s = spectral_norm(&structured_matrix(&blocks, Some(&st_a), None))?;
    let kappa_bound = spectral_norm(&blocks.full_matrix())?;
    Ok(StructuredLls {
        kappa_s,
        kappa_bound,
    })
}
