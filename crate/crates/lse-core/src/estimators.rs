//! Statistical estimates of the partial condition number.
//!
//! Two estimators are implemented:
//!
//! - `pce_estimate`: a probabilistic spectral-norm estimate of ||C||_2 for a
//!   symmetric positive semidefinite operator C. A Lanczos process with a
//!   uniform random start yields a guaranteed lower bound alpha1 (the largest
//!   Ritz value) and an upper bound alpha2 that holds with probability at
//!   least 1 - eps, obtained from the largest zero of the monic Lanczos
//!   polynomial equation |p_k(t)| = (beta_1 ... beta_k) / delta_eps, where
//!   delta_eps is an eps-quantile of the start vector's component along the
//!   dominant eigenvector. Iteration stops once alpha2/alpha1 <= 1 + delta.
//!   The estimate is kappa_hat = sqrt((alpha1 + alpha2) / 2).
//!
//! - `ssce_estimate`: small-sample statistical condition estimation. q
//!   orthonormalized uniform directions are combined through the directional
//!   condition numbers and rescaled by Wallis factors.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::condition::closed_c_matrix;
use crate::error::{LseError, Result};
use crate::gsvd::householder_qr_full;
use crate::operators::residual_coupling;
use crate::problem::LseProblem;
use crate::solve::{solve_lse, LseSolution};
use crate::wallis::{wallis, WallisMode};
use crate::weights::ConditionWeights;

/// Symmetric positive semidefinite operator accessed by matrix-vector
/// products.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &DVector<f64>) -> DVector<f64>;
}

/// Dense symmetric matrix operator.
pub struct DenseSymOp(pub DMatrix<f64>);

impl SymmetricOperator for DenseSymOp {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.0 * v
    }
}

/// Operator C = G G^T given a rectangular G (used for the explicit derivative
/// matrix and its structured compression).
pub struct GramOp(pub DMatrix<f64>);

impl SymmetricOperator for GramOp {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.0 * (self.0.transpose() * v)
    }
}

/// Matrix-free application of the condition matrix C through the GSVD
/// factors; C is never materialized.
pub struct CondOperator<'a> {
    sol: &'a LseSolution,
    weights: &'a ConditionWeights,
    coef_sq: f64,
    coef_k: f64,
    coef_w: f64,
    inv_b_sq: f64,
    kx: DVector<f64>,
    g: DVector<f64>,
}

impl<'a> CondOperator<'a> {
    pub fn new(sol: &'a LseSolution, weights: &'a ConditionWeights) -> Result<Self> {
        let f = &sol.factors;
        weights.validate(Some(f.n()))?;
        let (rho, g) = residual_coupling(f, &sol.r);
        let r_sq = sol.r.norm_squared();
        let x_sq = sol.x.norm_squared();
        let a2 = weights.alpha_mat_a * weights.alpha_mat_a;
        let b2 = weights.alpha_mat_b * weights.alpha_mat_b;
        let kx = apply_normal_pinv(sol, &sol.x);
        Ok(Self {
            sol,
            weights,
            coef_sq: r_sq / a2 + rho * rho / b2,
            coef_k: x_sq / a2 + 1.0 / (weights.alpha_vec_b * weights.alpha_vec_b),
            coef_w: x_sq / b2 + 1.0 / (weights.alpha_vec_d * weights.alpha_vec_d),
            inv_b_sq: 1.0 / b2,
            kx,
            g,
        })
    }
}

/// K z = X1 D^-2 X1^T z without forming K.
fn apply_normal_pinv(sol: &LseSolution, z: &DVector<f64>) -> DVector<f64> {
    let f = &sol.factors;
    let lead = f.leading.len();
    let mut w = f.x.columns(0, lead).transpose() * z;
    for j in 0..lead {
        w[j] /= f.leading[j] * f.leading[j];
    }
    f.x.columns(0, lead) * w
}

/// W z = X2 Lambda1^-2 X2^T z.
fn apply_constraint_gram(sol: &LseSolution, z: &DVector<f64>) -> DVector<f64> {
    let f = &sol.factors;
    let s = f.s();
    let n = f.n();
    if s == 0 {
        return DVector::zeros(n);
    }
    let mut w = f.x.columns(n - s, s).transpose() * z;
    for i in 0..s {
        let li = if i < f.t { f.beta[i] } else { 1.0 };
        w[i] /= li * li;
    }
    f.x.columns(n - s, s) * w
}

impl SymmetricOperator for CondOperator<'_> {
    fn dim(&self) -> usize {
        self.weights.l.k(self.sol.factors.n())
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let z = match &self.weights.l {
            crate::weights::LMap::Identity => v.clone(),
            crate::weights::LMap::Columns(l) => l * v,
        };
        let kz = apply_normal_pinv(self.sol, &z);
        let mut out = apply_normal_pinv(self.sol, &kz) * self.coef_sq;
        out.axpy(self.coef_k, &kz, 1.0);
        out.axpy(self.coef_w, &apply_constraint_gram(self.sol, &z), 1.0);
        let gz = self.g.dot(&z);
        let kxz = self.kx.dot(&z);
        out.axpy(self.inv_b_sq * gz, &self.kx, 1.0);
        out.axpy(self.inv_b_sq * kxz, &self.g, 1.0);
        self.weights.l.lt_mul_vec(&out)
    }
}

/// Report of the probabilistic spectral-norm estimator. `alpha1 <= ||C||_2`
/// always; `||C||_2 <= alpha2` with probability at least `1 - eps`;
/// `kappa_hat = sqrt((alpha1 + alpha2) / 2)`.
#[derive(Debug, Clone, Serialize)]
pub struct PceReport {
    pub alpha1: f64,
    pub alpha2: f64,
    pub kappa_hat: f64,
    pub eps: f64,
    pub delta: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// eps-quantile lower bound for |v_1| of a uniform vector on S^{q-1}: a
/// delta with P(|v_1| <= delta) <= eps. Uses the density bound
/// f(0) = (q - 1) w_q / 2 for q >= 3 and the arcsine law for q = 2.
fn start_component_quantile(q: usize, eps: f64) -> Result<f64> {
    Ok(match q {
        0 | 1 => 1.0,
        2 => (std::f64::consts::FRAC_PI_2 * eps).sin(),
        q => {
            let wq = wallis(q, WallisMode::Exact)?;
            (eps / ((q - 1) as f64 * wq)).min(1.0)
        }
    })
}

/// Largest t > theta_max with prod_i (t - theta_i) = pi_k / delta_eps, in
/// log form. Monotone for t > theta_max, so bisection is safe.
fn polynomial_upper_bound(ritz: &[f64], log_pi: f64, delta_eps: f64) -> f64 {
    let theta_max = ritz.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let target = log_pi - delta_eps.ln();
    let f = |t: f64| -> f64 { ritz.iter().map(|&th| (t - th).max(f64::MIN_POSITIVE).ln()).sum() };
    let scale = theta_max.abs().max(1.0);
    let mut hi = theta_max + scale * f64::EPSILON;
    let mut step = scale * f64::EPSILON;
    while f(hi) < target {
        step *= 4.0;
        hi = theta_max + step;
        if !hi.is_finite() {
            return f64::INFINITY;
        }
    }
    let mut lo = theta_max;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Probabilistic spectral-norm estimate of a symmetric PSD operator.
///
/// Runs Lanczos with full reorthogonalization from a uniform random start
/// until the certified interval satisfies `alpha2/alpha1 <= 1 + delta` (the
/// interval keeps tightening for a few more steps once reached, which costs
/// little and sharpens the estimate), or a dimension cap is hit, in which
/// case the report is flagged non-converged with the best interval found.
pub fn pce_estimate<O: SymmetricOperator + ?Sized>(
    op: &O,
    eps: f64,
    delta: f64,
    rng_seed: u64,
) -> Result<PceReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(LseError::Domain(format!("eps must be in (0, 1), got {eps}")));
    }
    if delta <= 0.0 || !delta.is_finite() {
        return Err(LseError::Domain(format!("delta must be positive, got {delta}")));
    }
    let q = op.dim();
    if q == 0 {
        return Ok(PceReport {
            alpha1: 0.0,
            alpha2: 0.0,
            kappa_hat: 0.0,
            eps,
            delta,
            iterations: 0,
            converged: true,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut v = DVector::from_fn(q, |_, _| rng.sample::<f64, _>(StandardNormal));
    let nv = v.norm();
    if nv == 0.0 {
        v[0] = 1.0;
    } else {
        v /= nv;
    }

    let delta_eps = start_component_quantile(q, eps)?;
    let cap = q.min(200);
    let mut basis: Vec<DVector<f64>> = vec![v.clone()];
    let mut diag: Vec<f64> = Vec::new();
    let mut offdiag: Vec<f64> = Vec::new();
    let mut log_pi = 0.0;
    let mut alpha1 = 0.0;
    let mut alpha2 = f64::INFINITY;
    let mut converged = false;
    let mut extra = 0usize;
    let mut iterations = 0usize;

    for step in 0..cap {
        let vj = basis[step].clone();
        let mut w = op.apply(&vj);
        if step > 0 {
            w.axpy(-offdiag[step - 1], &basis[step - 1], 1.0);
        }
        let a_j = vj.dot(&w);
        w.axpy(-a_j, &vj, 1.0);
        // full reorthogonalization, twice
        for _ in 0..2 {
            for u in &basis {
                let c = u.dot(&w);
                w.axpy(-c, u, 1.0);
            }
        }
        diag.push(a_j);
        iterations = step + 1;

        let ritz = tridiag_eigenvalues(&diag, &offdiag);
        alpha1 = ritz.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0);

        let b_j = w.norm();
        let breakdown = b_j <= 1e3 * f64::EPSILON * a_j.abs().max(1.0);
        if breakdown {
            // Krylov space is invariant: the largest Ritz value is exact
            // (up to the start vector missing an eigenvector, probability 0).
            alpha2 = alpha1;
            converged = true;
            break;
        }
        log_pi += b_j.ln();
        alpha2 = polynomial_upper_bound(&ritz, log_pi, delta_eps).max(alpha1);

        if alpha1 > 0.0 && alpha2 <= (1.0 + delta) * alpha1 {
            converged = true;
            // keep tightening briefly; the bound collapses geometrically
            if alpha2 <= (1.0 + delta / 16.0) * alpha1 || extra >= 8 {
                break;
            }
            extra += 1;
        }
        offdiag.push(b_j);
        basis.push(&w / b_j);
    }

    if alpha2.is_infinite() {
        alpha2 = alpha1;
    }
    Ok(PceReport {
        alpha1,
        alpha2,
        kappa_hat: ((alpha1 + alpha2) * 0.5).sqrt(),
        eps,
        delta,
        iterations,
        converged,
    })
}

/// Eigenvalues of the symmetric tridiagonal matrix with the given diagonal
/// and off-diagonal.
fn tridiag_eigenvalues(diag: &[f64], offdiag: &[f64]) -> Vec<f64> {
    let k = diag.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = diag[i];
        if i + 1 < k {
            t[(i, i + 1)] = offdiag[i];
            t[(i + 1, i)] = offdiag[i];
        }
    }
    let eig = nalgebra::SymmetricEigen::new(t);
    eig.eigenvalues.iter().copied().collect()
}

/// How `estimate_condition_pce` realizes the operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorMode {
    /// Materialize the k x k matrix C (cheap when k is small).
    Materialized,
    /// Apply C through the factors without forming it.
    MatVec,
}

/// Estimates the partial condition number of a problem by the probabilistic
/// spectral-norm estimator applied to the condition matrix C.
pub fn estimate_condition_pce(
    problem: &LseProblem,
    weights: &ConditionWeights,
    eps: f64,
    delta: f64,
    rng_seed: u64,
    mode: OperatorMode,
) -> Result<PceReport> {
    let sol = solve_lse(problem)?;
    estimate_condition_pce_with(&sol, weights, eps, delta, rng_seed, mode)
}

pub fn estimate_condition_pce_with(
    sol: &LseSolution,
    weights: &ConditionWeights,
    eps: f64,
    delta: f64,
    rng_seed: u64,
    mode: OperatorMode,
) -> Result<PceReport> {
    match mode {
        OperatorMode::Materialized => {
            let c = closed_c_matrix(sol, weights)?;
            let sym = (&c + c.transpose()) * 0.5;
            pce_estimate(&DenseSymOp(sym), eps, delta, rng_seed)
        }
        OperatorMode::MatVec => {
            let op = CondOperator::new(sol, weights)?;
            pce_estimate(&op, eps, delta, rng_seed)
        }
    }
}

/// Report of the small-sample statistical condition estimator.
#[derive(Debug, Clone, Serialize)]
pub struct SsceReport {
    pub q: usize,
    pub kappa_i_sq: Vec<f64>,
    pub kappa_hat: f64,
    pub wallis_q: f64,
    pub wallis_n: f64,
}

/// Directional condition number squared along the unit vector z: the
/// quadratic form z^T C z evaluated through the factors with L = I.
pub fn kappa_dir_sq(
    sol: &LseSolution,
    weights: &ConditionWeights,
    z: &DVector<f64>,
) -> Result<f64> {
    let n = sol.factors.n();
    if z.len() != n {
        return Err(LseError::ShapeMismatch(format!(
            "direction has length {}, expected {n}",
            z.len()
        )));
    }
    if (z.norm() - 1.0).abs() > 1e-8 {
        return Err(LseError::Domain(format!(
            "direction must be a unit vector, got norm {}",
            z.norm()
        )));
    }
    let f = &sol.factors;
    let (rho, g) = residual_coupling(f, &sol.r);
    let r_sq = sol.r.norm_squared();
    let x_sq = sol.x.norm_squared();
    let a2 = weights.alpha_mat_a * weights.alpha_mat_a;
    let b2 = weights.alpha_mat_b * weights.alpha_mat_b;

    let kz = apply_normal_pinv(sol, z);
    let wz = apply_constraint_gram(sol, z);
    let kx = apply_normal_pinv(sol, &sol.x);

    let term_sq = (r_sq / a2 + rho * rho / b2) * kz.norm_squared();
    let term_k = (x_sq / a2 + 1.0 / (weights.alpha_vec_b * weights.alpha_vec_b)) * z.dot(&kz);
    let term_w = (x_sq / b2 + 1.0 / (weights.alpha_vec_d * weights.alpha_vec_d)) * z.dot(&wz);
    let cross = 2.0 / b2 * z.dot(&kx) * g.dot(z);
    Ok(term_sq + term_k + term_w + cross)
}

/// SSCE with the approximated Wallis factors, as in the reference algorithm.
pub fn ssce_estimate(
    problem: &LseProblem,
    weights: &ConditionWeights,
    q: usize,
    rng_seed: u64,
) -> Result<SsceReport> {
    let sol = solve_lse(problem)?;
    ssce_estimate_with(&sol, weights, q, rng_seed, WallisMode::Approx)
}

/// SSCE with an explicit Wallis mode; draws q standard normal directions,
/// orthonormalizes them by a sign-fixed QR, and combines the directional
/// condition numbers. Deterministic for a fixed seed.
pub fn ssce_estimate_with(
    sol: &LseSolution,
    weights: &ConditionWeights,
    q: usize,
    rng_seed: u64,
    mode: WallisMode,
) -> Result<SsceReport> {
    let n = sol.factors.n();
    if q == 0 || q > n {
        return Err(LseError::Domain(format!(
            "sample count q must satisfy 1 <= q <= n = {n}, got {q}"
        )));
    }
    if !weights.l.is_identity() {
        return Err(LseError::Domain(
            "SSCE estimates the full-solution condition number; L must be the identity".into(),
        ));
    }
    weights.validate(Some(n))?;

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let draws = DMatrix::from_fn(n, q, |_, _| rng.sample::<f64, _>(StandardNormal));
    let (qmat, _) = householder_qr_full(&draws);

    let mut kappa_i_sq = Vec::with_capacity(q);
    for j in 0..q {
        let z = qmat.column(j).into_owned();
        kappa_i_sq.push(kappa_dir_sq(sol, weights, &z)?);
    }
    let wallis_q = wallis(q, mode)?;
    let wallis_n = wallis(n, mode)?;
    let kappa_hat = wallis_q / wallis_n * kappa_i_sq.iter().sum::<f64>().sqrt();
    Ok(SsceReport {
        q,
        kappa_i_sq,
        kappa_hat,
        wallis_q,
        wallis_n,
    })
}
