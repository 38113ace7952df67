//! Pseudo-inverse operators derived from the generalized SVD.
//!
//! With P = I - B^+ B (orthogonal projector onto null(B)), the two operators
//! that compose the LSE solution are
//!
//! ```text
//! (AP)^+  = X [ D^-1  0 ]  U^T        B_A^+ = X Lambda^+ V^T
//!             [ 0     0 ]
//! ```
//!
//! where D is the leading diagonal block of Sigma (identity when s > 0, the
//! singular values when s = 0). Everything here works directly on the factors
//! and never forms a dense pseudo-inverse of A or B.

use nalgebra::{DMatrix, DVector};

use crate::error::{LseError, Result};
use crate::gsvd::GsvdFactors;
use crate::svd::jacobi_svd;

/// Orthogonal projector onto null(B): P = I - B^+ B. For s = 0 this is the
/// identity. Computed from the SVD of B with the standard rank cutoff.
pub fn null_projector(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = b.ncols();
    if b.nrows() == 0 {
        return Ok(DMatrix::identity(n, n));
    }
    let svd = jacobi_svd(b)?;
    let max_sv = svd.sigma.first().copied().unwrap_or(0.0);
    let tol = b.nrows().max(n) as f64 * f64::EPSILON * max_sv;
    let mut p = DMatrix::identity(n, n);
    for (i, &sv) in svd.sigma.iter().enumerate() {
        if sv > tol {
            let vi = svd.v.column(i);
            for r in 0..n {
                for c in 0..n {
                    p[(r, c)] -= vi[r] * vi[c];
                }
            }
        }
    }
    Ok(p)
}

/// Applies (AP)^+ to a vector of length m.
pub fn apply_ap_pinv(f: &GsvdFactors, y: &DVector<f64>) -> Result<DVector<f64>> {
    if y.len() != f.m() {
        return Err(LseError::ShapeMismatch(format!(
            "expected length {}, got {}",
            f.m(),
            y.len()
        )));
    }
    let lead = f.leading.len();
    let mut w = DVector::zeros(lead);
    for j in 0..lead {
        w[j] = f.u.column(j).dot(y) / f.leading[j];
    }
    Ok(f.x.columns(0, lead) * w)
}

/// Dense n x m matrix form of (AP)^+.
pub fn ap_pinv(f: &GsvdFactors) -> DMatrix<f64> {
    let lead = f.leading.len();
    let mut scaled = f.x.columns(0, lead).into_owned();
    for j in 0..lead {
        let mut col = scaled.column_mut(j);
        col /= f.leading[j];
    }
    scaled * f.u.columns(0, lead).transpose()
}

/// Applies B_A^+ = X Lambda^+ V^T to a vector of length s.
pub fn apply_ba_pinv(f: &GsvdFactors, y: &DVector<f64>) -> Result<DVector<f64>> {
    let s = f.s();
    if y.len() != s {
        return Err(LseError::ShapeMismatch(format!(
            "expected length {s}, got {}",
            y.len()
        )));
    }
    let n = f.n();
    let mut w = DVector::zeros(s);
    for i in 0..s {
        let li = if i < f.t { f.beta[i] } else { 1.0 };
        w[i] = f.v.column(i).dot(y) / li;
    }
    Ok(f.x.columns(n - s, s) * w)
}

/// Dense n x s matrix form of B_A^+.
pub fn ba_pinv(f: &GsvdFactors) -> DMatrix<f64> {
    let s = f.s();
    let n = f.n();
    let mut scaled = f.x.columns(n - s, s).into_owned();
    for i in 0..s {
        let li = if i < f.t { f.beta[i] } else { 1.0 };
        let mut col = scaled.column_mut(i);
        col /= li;
    }
    scaled * f.v.transpose()
}

/// ((AP)^T AP)^+ = (AP)^+ ((AP)^+)^T = X1 D^-2 X1^T, formed without squaring
/// any factor.
pub fn normal_pinv(f: &GsvdFactors) -> DMatrix<f64> {
    let lead = f.leading.len();
    let mut scaled = f.x.columns(0, lead).into_owned();
    for j in 0..lead {
        let mut col = scaled.column_mut(j);
        col /= f.leading[j];
    }
    &scaled * scaled.transpose()
}

/// B_A^+ (B_A^+)^T = X2 Lambda1^-2 X2^T.
pub fn constraint_gram(f: &GsvdFactors) -> DMatrix<f64> {
    let s = f.s();
    let n = f.n();
    if s == 0 {
        return DMatrix::zeros(n, n);
    }
    let mut scaled = f.x.columns(n - s, s).into_owned();
    for i in 0..s {
        let li = if i < f.t { f.beta[i] } else { 1.0 };
        let mut col = scaled.column_mut(i);
        col /= li;
    }
    &scaled * scaled.transpose()
}

/// Residual coupling terms shared by the condition formulas:
/// `rho = || r^T A B_A^+ ||_2` and the vector
/// `g = (A B_A^+ (B_A^+)^T)^T r = X2 [S_A S_B^-2; 0] U2^T r`, both evaluated
/// through the factors.
pub fn residual_coupling(f: &GsvdFactors, r: &DVector<f64>) -> (f64, DVector<f64>) {
    let n = f.n();
    let s = f.s();
    let lead = f.leading.len();
    if s == 0 || f.t == 0 {
        return (0.0, DVector::zeros(n));
    }
    let mut rho_sq = 0.0;
    let mut g = DVector::zeros(n);
    for i in 0..f.t {
        let ui_r = f.u.column(lead + i).dot(r);
        let ratio = f.alpha[i] / f.beta[i];
        rho_sq += (ratio * ui_r) * (ratio * ui_r);
        let coeff = f.alpha[i] / (f.beta[i] * f.beta[i]) * ui_r;
        g.axpy(coeff, &f.x.column(n - s + i).into_owned(), 1.0);
    }
    (rho_sq.sqrt(), g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gsvd::gsvd;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};

    fn random_pair(m: usize, n: usize, s: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut norm = || rng.sample::<f64, _>(rand_distr::StandardNormal);
        (
            DMatrix::from_fn(m, n, |_, _| norm()),
            DMatrix::from_fn(s, n, |_, _| norm()),
        )
    }

    #[test]
    fn projector_properties() {
        let b = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let p = null_projector(&b).unwrap();
        assert!((p.clone() - DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])).norm() < 1e-14);

        let (_, b) = random_pair(10, 80, 50, 21);
        let p = null_projector(&b).unwrap();
        assert!((&p * &p - &p).norm() <= 1e-12);
        assert!((&p - p.transpose()).norm() <= 1e-13);
        assert!((&b * &p).norm() <= 1e-12 * b.norm());

        let empty = DMatrix::zeros(0, 4);
        assert_eq!(null_projector(&empty).unwrap(), DMatrix::identity(4, 4));
    }

    #[test]
    fn matrix_forms_match_dense_pseudo_inverses() {
        for seed in 0..8u64 {
            let (a, b) = random_pair(12, 8, 4, 100 + seed);
            let f = gsvd(&a, &b).unwrap();
            let p = null_projector(&b).unwrap();
            // rank(AP) = n - s exactly; a loose relative cutoff separates the
            // genuine spectrum from product roundoff at ~1e-14
            let dense_ap = crate::svd::jacobi_svd(&(&a * &p)).unwrap().pinv(1e-8);
            let ours = ap_pinv(&f);
            assert!(
                (&ours - &dense_ap).norm() <= 1e-10 * dense_ap.norm(),
                "(AP)^+ mismatch {:.3e}",
                (&ours - &dense_ap).norm() / dense_ap.norm()
            );
            // B_A^+ = (I - (AP)^+ A) B^+
            let dense_ba =
                (DMatrix::identity(8, 8) - &dense_ap * &a) * crate::svd::jacobi_svd(&b).unwrap().pinv(1e-8);
            let ours_ba = ba_pinv(&f);
            assert!(
                (&ours_ba - &dense_ba).norm() <= 1e-10 * dense_ba.norm().max(1.0),
                "B_A^+ mismatch {:.3e}",
                (&ours_ba - &dense_ba).norm() / dense_ba.norm().max(1.0)
            );
        }
    }

    #[test]
    fn resolution_of_identity() {
        let (a, b) = random_pair(12, 8, 4, 200);
        let f = gsvd(&a, &b).unwrap();
        let sum = ba_pinv(&f) * &b + ap_pinv(&f) * &a;
        assert!((sum - DMatrix::identity(8, 8)).norm() <= 1e-10 * 8.0);
    }

    #[test]
    fn unconstrained_identity_case() {
        let a = DMatrix::identity(5, 5);
        let b = DMatrix::zeros(0, 5);
        let f = gsvd(&a, &b).unwrap();
        assert!((ap_pinv(&f) - DMatrix::identity(5, 5)).norm() <= 1e-13);
        assert_eq!(ba_pinv(&f).shape(), (5, 0));
    }
}
