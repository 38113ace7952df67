//! Parameters of the weighted data norm and the solution projector L.
//!
//! Perturbations of the four data items are measured by
//! `sqrt(aA^2 ||dA||_F^2 + aB^2 ||dB||_F^2 + ab^2 ||db||^2 + ad^2 ||dd||^2)`,
//! and the condition number targets the linear function `L^T x` of the
//! solution. Sending a weight to infinity freezes the corresponding datum.

use nalgebra::{DMatrix, DVector};

use crate::error::{LseError, Result};

/// Projector onto the solution functional of interest.
#[derive(Debug, Clone)]
pub enum LMap {
    /// L = I_n: condition number of the whole solution.
    Identity,
    /// Explicit n x k matrix with k <= n.
    Columns(DMatrix<f64>),
}

impl LMap {
    /// Single coordinate functional: L = e_i (0-based index).
    pub fn coordinate(n: usize, i: usize) -> Self {
        let mut l = DMatrix::zeros(n, 1);
        l[(i, 0)] = 1.0;
        LMap::Columns(l)
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, LMap::Identity)
    }

    /// Number of columns k given the ambient dimension n.
    pub fn k(&self, n: usize) -> usize {
        match self {
            LMap::Identity => n,
            LMap::Columns(l) => l.ncols(),
        }
    }

    /// L^T M for an n x c matrix M, without materializing an identity.
    pub fn lt_mul(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            LMap::Identity => m.clone(),
            LMap::Columns(l) => l.transpose() * m,
        }
    }

    /// L^T y for a vector of length n.
    pub fn lt_mul_vec(&self, y: &DVector<f64>) -> DVector<f64> {
        match self {
            LMap::Identity => y.clone(),
            LMap::Columns(l) => l.transpose() * y,
        }
    }
}

/// Weights (aA, aB, ab, ad) of the data norm plus the projector L.
#[derive(Debug, Clone)]
pub struct ConditionWeights {
    pub alpha_mat_a: f64,
    pub alpha_mat_b: f64,
    pub alpha_vec_b: f64,
    pub alpha_vec_d: f64,
    pub l: LMap,
}

impl ConditionWeights {
    /// All weights one, L = I: the setting used throughout the experiments.
    pub fn unit() -> Self {
        Self {
            alpha_mat_a: 1.0,
            alpha_mat_b: 1.0,
            alpha_vec_b: 1.0,
            alpha_vec_d: 1.0,
            l: LMap::Identity,
        }
    }

    pub fn new(alpha_mat_a: f64, alpha_mat_b: f64, alpha_vec_b: f64, alpha_vec_d: f64) -> Result<Self> {
        let w = Self {
            alpha_mat_a,
            alpha_mat_b,
            alpha_vec_b,
            alpha_vec_d,
            l: LMap::Identity,
        };
        w.validate(None)?;
        Ok(w)
    }

    pub fn with_l(mut self, l: LMap) -> Self {
        self.l = l;
        self
    }

    /// All four weights must be strictly positive and finite; L must have n
    /// rows when n is known.
    pub fn validate(&self, n: Option<usize>) -> Result<()> {
        for (name, v) in [
            ("alpha_A", self.alpha_mat_a),
            ("alpha_B", self.alpha_mat_b),
            ("alpha_b", self.alpha_vec_b),
            ("alpha_d", self.alpha_vec_d),
        ] {
            if v <= 0.0 || !v.is_finite() {
                return Err(LseError::Domain(format!(
                    "weight {name} must be a positive finite real, got {v}"
                )));
            }
        }
        if let (Some(n), LMap::Columns(l)) = (n, &self.l) {
            if l.nrows() != n {
                return Err(LseError::ShapeMismatch(format!(
                    "L must have {n} rows, got {}",
                    l.nrows()
                )));
            }
            if l.ncols() > n {
                return Err(LseError::ShapeMismatch(format!(
                    "L may have at most {n} columns, got {}",
                    l.ncols()
                )));
            }
        }
        Ok(())
    }

    pub fn is_unit(&self) -> bool {
        self.alpha_mat_a == 1.0
            && self.alpha_mat_b == 1.0
            && self.alpha_vec_b == 1.0
            && self.alpha_vec_d == 1.0
    }
}

impl Default for ConditionWeights {
    fn default() -> Self {
        Self::unit()
    }
}
