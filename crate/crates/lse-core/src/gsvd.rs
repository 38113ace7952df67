//! Generalized SVD of a matrix pair (A, B) sharing a column space.
//!
//! For A (m x n) and B (s x n) satisfying rank(B) = s and rank([A; B]) = n,
//! there are orthogonal U (m x m), V (s x s) and a nonsingular X (n x n) with
//!
//! ```text
//! A = U * Sigma * X^-1,    B = V * Lambda * X^-1,
//!
//! Sigma  = [ I_{n-s}  0    0 ]        Lambda = [ 0  S_B  0       ]
//!          [ 0        S_A  0 ]                 [ 0  0    I_{s-t} ]
//!          [ 0        0    0 ]
//! ```
//!
//! where `S_A = diag(alpha_1..alpha_t)`, `S_B = diag(beta_1..beta_t)`,
//! `alpha_i, beta_i > 0`, `alpha_i^2 + beta_i^2 = 1` and
//! `t = rank(A) + s - n`. When s = 0 the factorization degrades to the plain
//! SVD `A = U * Sigma * X^T` with orthogonal X and the singular values on the
//! leading diagonal.
//!
//! The construction is a two-stage orthogonal reduction: a QR factorization of
//! the stacked pair yields the cosine/sine classification (via the spectrum of
//! Q2^T Q2), and orthogonal factors are then extracted and refined by a polar
//! polish that keeps U and V exactly orthogonal while driving the measured
//! reconstruction residuals of both A and B to machine level. Small cosines
//! (ill-conditioned A on the constraint complement) and small sines
//! (ill-conditioned B) are handled by the polish rather than by normalizing
//! noisy columns, so the factors stay usable far beyond kappa ~ 1e6.

use nalgebra::{DMatrix, DVector};

use crate::error::{LseError, Result};
use crate::problem::{check_assumptions, default_rank_tol, stack_rows};
use crate::svd::jacobi_svd;

/// Result of [`gsvd`]. `leading` holds the diagonal of the leading
/// `(n-s) x (n-s)` block of Sigma: all ones when s > 0, the singular values of
/// A when s = 0.
#[derive(Debug, Clone)]
pub struct GsvdFactors {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub x_inv: DMatrix<f64>,
    pub leading: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub t: usize,
    m: usize,
    n: usize,
    s: usize,
}

impl GsvdFactors {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.s
    }

    /// rank(A) recovered from the factorization: size of the leading block
    /// plus the number of interior pairs.
    pub fn rank_a(&self) -> usize {
        self.leading.len() + self.t
    }

    /// Dense Sigma (m x n) with the exact block layout.
    pub fn sigma(&self) -> DMatrix<f64> {
        let mut sig = DMatrix::zeros(self.m, self.n);
        for (j, &c) in self.leading.iter().enumerate() {
            sig[(j, j)] = c;
        }
        let off = self.leading.len();
        for (i, &a) in self.alpha.iter().enumerate() {
            sig[(off + i, off + i)] = a;
        }
        sig
    }

    /// Dense Lambda (s x n) with the exact block layout.
    pub fn lambda(&self) -> DMatrix<f64> {
        let mut lam = DMatrix::zeros(self.s, self.n);
        let off = self.n - self.s;
        for (i, &b) in self.beta.iter().enumerate() {
            lam[(i, off + i)] = b;
        }
        for i in self.t..self.s {
            lam[(i, off + i)] = 1.0;
        }
        lam
    }

    /// Columns of X spanning the leading block (n-s of them; n when s = 0).
    pub fn x1(&self) -> DMatrix<f64> {
        self.x.columns(0, self.leading.len()).into_owned()
    }

    /// Columns of X spanning the constrained block (the trailing s).
    pub fn x2(&self) -> DMatrix<f64> {
        self.x.columns(self.n - self.s, self.s).into_owned()
    }

    pub fn u1(&self) -> DMatrix<f64> {
        self.u.columns(0, self.leading.len()).into_owned()
    }

    pub fn u2(&self) -> DMatrix<f64> {
        let off = self.leading.len();
        self.u.columns(off, self.m - off).into_owned()
    }
}

/// Computes the generalized SVD of the pair. Fails with
/// [`LseError::RankDeficient`] when the uniqueness assumptions do not hold at
/// the default rank tolerance.
pub fn gsvd(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<GsvdFactors> {
    let (m, n) = a.shape();
    let s = b.nrows();
    let report = check_assumptions(a, b, default_rank_tol(a, b))?;
    if !report.ok {
        return Err(LseError::RankDeficient {
            rank_b: report.rank_b,
            rank_stacked: report.rank_stacked,
            s,
            n,
        });
    }
    if s == 0 {
        return gsvd_unconstrained(a);
    }

    // Orthonormal columns for the stacked pair; Q2's Gram spectrum carries the
    // sine values of the pair.
    let stacked = stack_rows(a, b);
    let qr = stacked.qr();
    let q = qr.q();
    let q1 = q.rows(0, m).into_owned();
    let q2 = q.rows(m, s).into_owned();

    let gram = q2.transpose() * &q2;
    let eig = nalgebra::SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut w = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        w.set_column(dst, &eig.eigenvectors.column(src));
    }

    let a_cols = &q1 * &w;
    let b_cols = &q2 * &w;

    // Group the pair directions by counting, not by thresholding: rank(B) = s
    // fixes the null-sine block at n - s columns (the smallest sines), and
    // rank(A) fixes the zero-cosine block at n - rank(A) columns (the
    // smallest cosines among the rest). Thresholds would misclassify
    // directions whose true sine or cosine sits near roundoff.
    let svd_a = jacobi_svd(a)?;
    let rank_a = svd_a.rank(m.max(n) as f64 * f64::EPSILON);
    if rank_a + s < n {
        return Err(LseError::Numerical(format!(
            "rank(A) = {rank_a} inconsistent with verified stacked rank"
        )));
    }
    let t = rank_a + s - n;
    let p = (n - s) + t;

    // columns are already sine-sorted ascending
    let lead_idx: Vec<usize> = (0..n - s).collect();
    let mut rest: Vec<(usize, f64)> = (n - s..n)
        .map(|j| (j, a_cols.column(j).norm()))
        .collect();
    rest.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap_or(std::cmp::Ordering::Equal));
    let mut tail_idx: Vec<usize> = rest[..s - t].iter().map(|x| x.0).collect();
    tail_idx.sort_unstable();
    let mut interior: Vec<usize> = rest[s - t..].iter().map(|x| x.0).collect();
    interior.sort_unstable(); // ascending sine within the interior block

    // Initial left factors: normalized pair columns, re-orthogonalized.
    let mut u_cand = DMatrix::zeros(m, p);
    for (dst, &j) in lead_idx.iter().chain(interior.iter()).enumerate() {
        let col = a_cols.column(j) / a_cols.column(j).norm().max(f64::MIN_POSITIVE);
        u_cand.set_column(dst, &col);
    }
    let mut v_cand = DMatrix::zeros(s, s);
    for (dst, &j) in interior.iter().chain(tail_idx.iter()).enumerate() {
        let col = b_cols.column(j) / b_cols.column(j).norm().max(f64::MIN_POSITIVE);
        v_cand.set_column(dst, &col);
    }

    // Align an exactly orthonormal basis of range(A) with the candidate
    // columns, then complete to all of R^m.
    let mut u = if p > 0 {
        let ua = svd_a.u.columns(0, p).into_owned();
        let aligned = &ua * polar_orthogonal(&(ua.transpose() * &u_cand))?;
        orthonormal_completion(&aligned)
    } else {
        DMatrix::identity(m, m)
    };
    let mut v = orthonormal_completion(&v_cand);

    let debug = std::env::var("LSE_GSVD_DEBUG").is_ok();
    let mut best: Option<(f64, GsvdFactors)> = None;
    let mut stalls = 0usize;
    for it in 0..12 {
        let (factors, defect) = assemble(a, b, &u, &v, m, n, s, t)?;
        if debug {
            eprintln!("  gsvd polish it {it}: defect {defect:.3e}");
        }
        let improved = best.as_ref().is_none_or(|(d, _)| defect < 0.5 * *d);
        if best.as_ref().is_none_or(|(d, _)| defect < *d) {
            best = Some((defect, factors));
        }
        stalls = if improved { 0 } else { stalls + 1 };
        let (d, f) = best.as_ref().unwrap();
        if *d <= 64.0 * f64::EPSILON || stalls >= 2 {
            break;
        }
        // Tilt polish. Writing U = U_true (I + K) with skew K, the measured
        // S_hat = U^T A X satisfies S_hat[j,k] ~ -K[j,k] * d_k off the
        // diagonal, so every plane (j,k) yields two estimates of the same
        // angle; the one scaled by the larger diagonal entry carries the
        // smaller noise amplification. The assembled skew is re-orthogonalized
        // through a polar factor and applied to U (same construction for V).
        let ra = u.transpose() * a;
        let rb = v.transpose() * b;
        let dscale = |j: usize| -> f64 {
            if j < n - s {
                f.leading[j]
            } else {
                f.alpha[j - (n - s)]
            }
        };
        let sig_hat = ra.rows(0, p) * f.x.columns(0, p);
        let mut ru = DMatrix::<f64>::identity(p, p);
        for j in 0..p {
            for k in j + 1..p {
                let (dj, dk) = (dscale(j), dscale(k));
                let theta = if dk >= dj {
                    -sig_hat[(j, k)] / dk
                } else {
                    sig_hat[(k, j)] / dj
                }
                .clamp(-0.5, 0.5);
                // R = I - K with K[j,k] = theta
                ru[(j, k)] = -theta;
                ru[(k, j)] = theta;
            }
        }
        let pu = polar_orthogonal(&ru)?;
        let u_head = u.columns(0, p) * pu;
        u.columns_mut(0, p).copy_from(&u_head);

        let lam_hat = &rb * f.x.columns(n - s, s);
        let bscale = |j: usize| -> f64 { if j < t { f.beta[j] } else { 1.0 } };
        let mut rv = DMatrix::<f64>::identity(s, s);
        for j in 0..s {
            for k in j + 1..s {
                let (dj, dk) = (bscale(j), bscale(k));
                let theta = if dk >= dj {
                    -lam_hat[(j, k)] / dk
                } else {
                    lam_hat[(k, j)] / dj
                }
                .clamp(-0.5, 0.5);
                rv[(j, k)] = -theta;
                rv[(k, j)] = theta;
            }
        }
        let pv = polar_orthogonal(&rv)?;
        v = &v * pv;
    }

    let (defect, factors) = best.expect("at least one assembly");
    if defect > 1e-6 {
        return Err(LseError::Numerical(format!(
            "gsvd refinement stalled at relative residual {defect:.3e}"
        )));
    }
    Ok(factors)
}

/// Builds the factor set for fixed orthogonal U, V and reports the combined
/// relative reconstruction residual of A and B.
#[allow(clippy::too_many_arguments)]
fn assemble(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    u: &DMatrix<f64>,
    v: &DMatrix<f64>,
    m: usize,
    n: usize,
    s: usize,
    t: usize,
) -> Result<(GsvdFactors, f64)> {
    let ra = u.transpose() * a;
    let rb = v.transpose() * b;
    let p = (n - s) + t;

    let mut v = v.clone();
    let mut x_inv = DMatrix::zeros(n, n);
    let mut alpha = vec![0.0; t];
    let mut beta = vec![0.0; t];
    let mut defect_sq = 0.0;

    for j in 0..n - s {
        x_inv.row_mut(j).copy_from(&ra.row(j));
    }
    for i in 0..t {
        let rho = ra.row(n - s + i).transpose();
        let mut tau = rb.row(i).transpose();
        if rho.dot(&tau) < 0.0 {
            tau = -tau;
            let flipped = -v.column(i);
            v.set_column(i, &flipped);
        }
        let nr = rho.norm();
        let nt = tau.norm();
        let h = nr.hypot(nt);
        let (al, be) = (nr / h, nt / h);
        alpha[i] = al;
        beta[i] = be;
        let z = &rho * al + &tau * be;
        defect_sq += (&rho - &z * al).norm_squared() + (&tau - &z * be).norm_squared();
        x_inv.row_mut(n - s + i).copy_from(&z.transpose());
    }
    for i in t..s {
        x_inv.row_mut(n - s + i).copy_from(&rb.row(i));
    }
    // Rows of U^T A below rank(A) belong to the zero block of Sigma.
    for j in p..m {
        defect_sq += ra.row(j).norm_squared();
    }
    let scale = a.norm().hypot(b.norm()).max(f64::MIN_POSITIVE);
    let defect = defect_sq.sqrt() / scale;

    let mut x = x_inv
        .clone()
        .try_inverse()
        .ok_or_else(|| LseError::Numerical("X factor is singular".into()))?;
    // one Newton correction on the inverse; the polish measurements divide by
    // weak diagonal entries and need X beyond plain LU accuracy
    let e = DMatrix::identity(n, n) - &x_inv * &x;
    x = &x + &x * e;
    let factors = GsvdFactors {
        u: u.clone(),
        v,
        x,
        x_inv,
        leading: vec![1.0; n - s],
        alpha,
        beta,
        t,
        m,
        n,
        s,
    };
    Ok((factors, defect))
}

/// s = 0: plain SVD with an orthogonal X.
fn gsvd_unconstrained(a: &DMatrix<f64>) -> Result<GsvdFactors> {
    let (m, n) = a.shape();
    let svd = jacobi_svd(a)?;
    let x = svd.v.clone();
    let u = orthonormal_completion(&svd.u);
    let leading = svd.sigma;
    Ok(GsvdFactors {
        u,
        v: DMatrix::zeros(0, 0),
        x_inv: x.transpose(),
        x,
        leading,
        alpha: Vec::new(),
        beta: Vec::new(),
        t: 0,
        m,
        n,
        s: 0,
    })
}

/// Orthogonal polar factor of a square matrix, via SVD (independent of
/// singular-value ordering).
pub(crate) fn polar_orthogonal(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.is_empty() {
        return Ok(m.clone());
    }
    let svd = jacobi_svd(m)?;
    Ok(&svd.u * svd.v.transpose())
}

/// Extends `head` (m x p, near-orthonormal columns, p <= m) to an exactly
/// orthogonal m x m matrix whose first p columns match `head` up to roundoff.
pub(crate) fn orthonormal_completion(head: &DMatrix<f64>) -> DMatrix<f64> {
    let m = head.nrows();
    if m == 0 {
        return DMatrix::zeros(0, 0);
    }
    let (q, _) = householder_qr_full(head);
    q
}

/// Full Householder QR: returns (Q m x m, R m x p) with the diagonal of R
/// forced nonnegative, so the factorization is unique for full-rank input.
pub(crate) fn householder_qr_full(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, p) = a.shape();
    let mut r = a.clone();
    let mut q = DMatrix::<f64>::identity(m, m);
    for k in 0..p.min(m) {
        let mut norm_sq = 0.0;
        for i in k..m {
            norm_sq += r[(i, k)] * r[(i, k)];
        }
        let nx = norm_sq.sqrt();
        if nx <= f64::MIN_POSITIVE {
            continue;
        }
        let sign = if r[(k, k)] >= 0.0 { 1.0 } else { -1.0 };
        let mut v = DVector::<f64>::zeros(m - k);
        for i in k..m {
            v[i - k] = r[(i, k)];
        }
        v[0] += sign * nx;
        let nv = v.norm();
        if nv <= f64::MIN_POSITIVE {
            continue;
        }
        v /= nv;
        for j in k..p {
            let mut dot = 0.0;
            for i in k..m {
                dot += v[i - k] * r[(i, j)];
            }
            dot *= 2.0;
            for i in k..m {
                r[(i, j)] -= dot * v[i - k];
            }
        }
        for i in 0..m {
            let mut dot = 0.0;
            for j in k..m {
                dot += q[(i, j)] * v[j - k];
            }
            dot *= 2.0;
            for j in k..m {
                q[(i, j)] -= dot * v[j - k];
            }
        }
    }
    for k in 0..p.min(m) {
        if r[(k, k)] < 0.0 {
            for j in 0..p {
                r[(k, j)] = -r[(k, j)];
            }
            for i in 0..m {
                q[(i, k)] = -q[(i, k)];
            }
        }
    }
    (q, r)
}
