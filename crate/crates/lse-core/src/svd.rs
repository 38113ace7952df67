//! Dense SVD by one-sided Jacobi rotations.
//!
//! Every factor-producing decomposition in this crate goes through this
//! routine. One-sided Jacobi orthogonalizes the columns of the working matrix
//! with plane rotations until all column pairs are orthogonal relative to
//! their norms; the right rotations accumulate into V, the column norms are
//! the singular values and the normalized columns form U. The method attains
//! high relative accuracy and, unlike shift-based bidiagonal solvers, cannot
//! silently misconverge: the stopping test is the factorization property
//! itself.

use nalgebra::DMatrix;

use crate::error::{LseError, Result};
use crate::gsvd::householder_qr_full;

/// Thin SVD `a = u * diag(sigma) * v^T` with `u` of size m x min(m, n),
/// `v` of size n x min(m, n) and `sigma` descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<f64>,
}

impl Svd {
    pub fn rank(&self, rel_tol: f64) -> usize {
        let max = self.sigma.first().copied().unwrap_or(0.0);
        self.sigma.iter().filter(|&&s| s > rel_tol * max).count()
    }

    /// Pseudo-inverse with the given relative cutoff on singular values.
    pub fn pinv(&self, rel_tol: f64) -> DMatrix<f64> {
        let max = self.sigma.first().copied().unwrap_or(0.0);
        let mut out = DMatrix::zeros(self.v.nrows(), self.u.nrows());
        for (k, &s) in self.sigma.iter().enumerate() {
            if s > rel_tol * max && s > 0.0 {
                let vk = self.v.column(k);
                let uk = self.u.column(k);
                for i in 0..out.nrows() {
                    for j in 0..out.ncols() {
                        out[(i, j)] += vk[i] * uk[j] / s;
                    }
                }
            }
        }
        out
    }
}

const MAX_SWEEPS: usize = 64;

/// One-sided Jacobi SVD. Wide inputs are handled by factoring the transpose.
pub fn jacobi_svd(a: &DMatrix<f64>) -> Result<Svd> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(Svd {
            u: DMatrix::identity(m, m.min(n)),
            sigma: vec![0.0; m.min(n)],
            v: DMatrix::identity(n, m.min(n)),
        });
    }
    if m < n {
        let t = jacobi_svd(&a.transpose())?;
        return Ok(Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        });
    }

    let mut work = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let mut norms_sq: Vec<f64> = (0..n).map(|j| work.column(j).norm_squared()).collect();
    let scale = norms_sq.iter().copied().fold(0.0, f64::max);
    if scale == 0.0 {
        // zero matrix
        let (q, _) = householder_qr_full(&DMatrix::<f64>::zeros(m, 0));
        return Ok(Svd {
            u: q.columns(0, n.min(m)).into_owned(),
            sigma: vec![0.0; n],
            v,
        });
    }
    let tol = 1e2 * f64::EPSILON;
    // columns this small are structural zeros; rotating them only stirs noise
    let dead_sq = (f64::EPSILON * f64::EPSILON) * scale * (m.max(n) as f64).powi(2);

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n - 1 {
            for j in i + 1..n {
                let p = norms_sq[i];
                let q = norms_sq[j];
                if p <= dead_sq && q <= dead_sq {
                    continue;
                }
                let mut d = 0.0;
                for r in 0..m {
                    d += work[(r, i)] * work[(r, j)];
                }
                if d.abs() <= tol * (p * q).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (q - p) / (2.0 * d);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..m {
                    let wi = work[(r, i)];
                    let wj = work[(r, j)];
                    work[(r, i)] = c * wi - s * wj;
                    work[(r, j)] = s * wi + c * wj;
                }
                for r in 0..n {
                    let vi = v[(r, i)];
                    let vj = v[(r, j)];
                    v[(r, i)] = c * vi - s * vj;
                    v[(r, j)] = s * vi + c * vj;
                }
                norms_sq[i] = work.column(i).norm_squared();
                norms_sq[j] = work.column(j).norm_squared();
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LseError::Numerical(
            "one-sided Jacobi SVD did not converge".into(),
        ));
    }

    // sort descending by column norm
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms_sq[j].partial_cmp(&norms_sq[i]).unwrap());
    let mut sigma = Vec::with_capacity(n);
    let mut u = DMatrix::zeros(m, n);
    let mut v_sorted = DMatrix::zeros(n, n);
    let mut live = 0usize;
    for (dst, &src) in order.iter().enumerate() {
        let s = norms_sq[src].sqrt();
        sigma.push(s);
        v_sorted.set_column(dst, &v.column(src));
        if norms_sq[src] > dead_sq {
            let col = work.column(src) / s;
            u.set_column(dst, &col);
            live = dst + 1;
        }
    }
    if live < n {
        // deterministic orthonormal fill for the null directions
        let head = u.columns(0, live).into_owned();
        let (q, _) = householder_qr_full(&head);
        for dst in live..n {
            u.set_column(dst, &q.column(dst));
        }
    }
    Ok(Svd {
        u,
        sigma,
        v: v_sorted,
    })
}

/// Singular values only (descending).
pub fn singular_values(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(jacobi_svd(a)?.sigma)
}

/// Spectral norm. Wide or tall matrices are first compressed by a Householder
/// QR of the longer side, so only a min-dimension square Jacobi SVD runs.
pub fn spectral_norm_reliable(a: &DMatrix<f64>) -> Result<f64> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(0.0);
    }
    let small = if n > m {
        let (_, r) = householder_qr_full(&a.transpose());
        r.rows(0, m.min(n)).into_owned()
    } else if m > n {
        let (_, r) = householder_qr_full(a);
        r.rows(0, n).into_owned()
    } else {
        a.clone()
    };
    Ok(jacobi_svd(&small)?.sigma.first().copied().unwrap_or(0.0))
}

/// Dense pseudo-inverse with the standard relative cutoff; the test oracles
/// and the projector construction rely on it.
pub fn pinv(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let tol = a.nrows().max(a.ncols()) as f64 * f64::EPSILON;
    Ok(jacobi_svd(a)?.pinv(tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn reconstruct(svd: &Svd) -> DMatrix<f64> {
        let k = svd.sigma.len();
        let mut s = DMatrix::zeros(k, k);
        for (i, &x) in svd.sigma.iter().enumerate() {
            s[(i, i)] = x;
        }
        &svd.u * s * svd.v.transpose()
    }

    #[test]
    fn random_and_rank_deficient_matrices() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for case in 0..200u64 {
            let m = 2 + (rng.random::<u32>() % 14) as usize;
            let n = 2 + (rng.random::<u32>() % 14) as usize;
            let mut a =
                DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
            if case % 3 == 0 && n >= 3 {
                let combo = a.column(0).into_owned() * 0.5 - a.column(1).into_owned() * 2.0;
                a.set_column(n - 1, &combo);
            }
            if case % 5 == 0 {
                // widely spread scales exercise the tiny-column path
                for j in 0..n {
                    let f = 10f64.powi(-((j % 14) as i32));
                    let col = a.column(j) * f;
                    a.set_column(j, &col);
                }
            }
            let svd = jacobi_svd(&a).unwrap();
            let err = (reconstruct(&svd) - &a).norm() / a.norm();
            assert!(err <= 1e-13, "reconstruction {err:.3e} at case {case}");
            let k = svd.sigma.len();
            let utu = svd.u.transpose() * &svd.u - DMatrix::identity(k, k);
            let vtv = svd.v.transpose() * &svd.v - DMatrix::identity(k, k);
            assert!(utu.norm() <= 1e-13 * k as f64, "U defect {:.3e}", utu.norm());
            assert!(vtv.norm() <= 1e-13 * k as f64);
            for w in svd.sigma.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn known_case_nalgebra_misconverges_on() {
        // a rank-deficient product that defeats the bidiagonal solver
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(105);
        let mut norm = || rng.sample::<f64, _>(rand_distr::StandardNormal);
        let a = DMatrix::from_fn(12, 8, |_, _| norm());
        let b = DMatrix::from_fn(4, 8, |_, _| norm());
        let p = DMatrix::identity(8, 8) - pinv(&b).unwrap() * &b;
        let m = &a * &p;
        let svd = jacobi_svd(&m).unwrap();
        let err = (reconstruct(&svd) - &m).norm() / m.norm();
        assert!(err <= 1e-14, "reconstruction {err:.3e}");
    }

    #[test]
    fn pinv_satisfies_moore_penrose() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let a = DMatrix::from_fn(9, 5, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let g = pinv(&a).unwrap();
        assert!((&a * &g * &a - &a).norm() <= 1e-13 * a.norm());
        assert!((&g * &a * &g - &g).norm() <= 1e-13 * g.norm());
        let ag = &a * &g;
        assert!((&ag - ag.transpose()).norm() <= 1e-13);
        let ga = &g * &a;
        assert!((&ga - ga.transpose()).norm() <= 1e-13);
    }

    #[test]
    fn spectral_norm_of_wide_matrix() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let a = DMatrix::from_fn(6, 400, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let direct = jacobi_svd(&a).unwrap().sigma[0];
        let compressed = spectral_norm_reliable(&a).unwrap();
        assert!((direct - compressed).abs() <= 1e-12 * direct);
    }

    #[test]
    fn empty_and_zero() {
        let z = DMatrix::<f64>::zeros(4, 3);
        let svd = jacobi_svd(&z).unwrap();
        assert!(svd.sigma.iter().all(|&s| s == 0.0));
        let utu = svd.u.transpose() * &svd.u - DMatrix::identity(3, 3);
        assert!(utu.norm() <= 1e-14);
    }
}
