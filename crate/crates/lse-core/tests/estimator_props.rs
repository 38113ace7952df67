//! Contract tests for the statistical estimators.

use lse_core::*;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};

fn gaussian_problem(m: usize, n: usize, s: usize, seed: u64) -> LseProblem {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut g = || rng.sample::<f64, _>(rand_distr::StandardNormal);
    LseProblem::new(
        DMatrix::from_fn(m, n, |_, _| g()),
        DMatrix::from_fn(s, n, |_, _| g()),
        DVector::from_fn(m, |_, _| g()),
        DVector::from_fn(s, |_, _| g()),
    )
    .unwrap()
}

#[test]
fn pce_interval_on_known_spectrum() {
    // diag(1, ..., 1, 4): the norm is 4; over many seeds the interval must
    // cover it with at most the promised failure rate (plus sampling slack),
    // and the lower bound may never exceed it.
    let n = 30;
    let mut diag = DMatrix::identity(n, n);
    diag[(n - 1, n - 1)] = 4.0;
    let op = DenseSymOp(diag);
    let (eps, delta) = (0.05, 0.01);
    let mut covered = 0;
    let trials = 200;
    for seed in 0..trials {
        let rep = pce_estimate(&op, eps, delta, seed).unwrap();
        assert!(rep.alpha1 <= 4.0 * (1.0 + 1e-12), "alpha1 {}", rep.alpha1);
        if rep.converged {
            assert!(rep.alpha2 <= (1.0 + delta) * rep.alpha1 * (1.0 + 1e-12));
        }
        if rep.alpha2 >= 4.0 * (1.0 - 1e-12) {
            covered += 1;
        }
        let lo = 2.0 * (1.0 - delta);
        let hi = 2.0 * (1.0 + delta);
        if rep.converged && rep.alpha2 >= 4.0 {
            assert!(rep.kappa_hat >= lo && rep.kappa_hat <= hi);
        }
    }
    let miss_rate = 1.0 - covered as f64 / trials as f64;
    assert!(
        miss_rate <= eps + 0.02,
        "upper bound missed the norm too often: {miss_rate}"
    );
}

#[test]
fn pce_isotropic_operator_converges_immediately() {
    let op = DenseSymOp(DMatrix::identity(12, 12) * 3.0);
    let rep = pce_estimate(&op, 1e-3, 1e-2, 7).unwrap();
    assert!(rep.converged);
    assert_eq!(rep.iterations, 1);
    assert!((rep.alpha1 - 3.0).abs() <= 1e-12);
    assert!((rep.kappa_hat - 3f64.sqrt()).abs() <= 1e-6);
}

#[test]
fn pce_zero_and_empty_operators() {
    let rep = pce_estimate(&DenseSymOp(DMatrix::zeros(5, 5)), 1e-3, 1e-2, 3).unwrap();
    assert!(rep.converged);
    assert_eq!(rep.kappa_hat, 0.0);
    let rep = pce_estimate(&DenseSymOp(DMatrix::zeros(0, 0)), 1e-3, 1e-2, 3).unwrap();
    assert!(rep.converged);
    assert_eq!(rep.kappa_hat, 0.0);
}

#[test]
fn pce_parameter_validation() {
    let op = DenseSymOp(DMatrix::identity(3, 3));
    assert!(pce_estimate(&op, 0.0, 1e-2, 1).is_err());
    assert!(pce_estimate(&op, 1.5, 1e-2, 1).is_err());
    assert!(pce_estimate(&op, 1e-3, 0.0, 1).is_err());
}

#[test]
fn materialized_and_matvec_paths_agree() {
    let p = gaussian_problem(12, 8, 3, 100);
    let w = ConditionWeights::unit();
    let a = estimate_condition_pce(&p, &w, 1e-3, 1e-2, 42, OperatorMode::Materialized).unwrap();
    let b = estimate_condition_pce(&p, &w, 1e-3, 1e-2, 42, OperatorMode::MatVec).unwrap();
    // same seed, same operator: the Lanczos scalars agree to roundoff
    assert_eq!(a.iterations, b.iterations);
    assert!((a.kappa_hat - b.kappa_hat).abs() <= 1e-9 * a.kappa_hat);
    // and the estimate brackets the exact value
    let exact = cond_exact_closed(&p, &w).unwrap().kappa;
    assert!(a.kappa_hat >= exact * (1.0 - 1e-2));
    assert!(a.kappa_hat <= exact * (1.0 + 1e-2));
}

#[test]
fn pce_estimates_structured_operator() {
    let (p, _, _) = gen_toeplitz_pair(16, 1.0, 3).unwrap();
    let w = ConditionWeights::unit();
    let spec = StructureSpec::new(StructureKind::Toeplitz, 16, 16);
    let exact = cond_structured(&p, &w, spec, spec).unwrap().kappa;
    // operator C = G G^T with G the compressed derivative matrix
    let sol = solve_lse(&p).unwrap();
    let blocks = kron_oracle_with(&p, &sol, &w).unwrap();
    let st = build_structure(spec).unwrap();
    let g = structured_matrix(&blocks, Some(&st), Some(&st));
    let rep = pce_estimate(&GramOp(g), 1e-3, 1e-2, 11).unwrap();
    assert!(rep.converged);
    assert!(rep.kappa_hat >= exact * (1.0 - 1e-2) && rep.kappa_hat <= exact * (1.0 + 1e-2));
}

#[test]
fn kappa_dir_matches_quadratic_form() {
    let p = gaussian_problem(10, 7, 3, 55);
    let sol = solve_lse(&p).unwrap();
    let w = ConditionWeights::unit();
    let op = CondOperator::new(&sol, &w).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let mut trace_from_basis = 0.0;
    let exact_sq = cond_exact_closed(&p, &w).unwrap().c_norm.unwrap();
    // random unit directions
    for _ in 0..10 {
        let mut z = DVector::from_fn(7, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        z /= z.norm();
        let quad = z.dot(&op.apply(&z));
        let dir = kappa_dir_sq(&sol, &w, &z).unwrap();
        assert!((dir - quad).abs() <= 1e-12 * quad.abs().max(1.0));
        assert!(dir >= -1e-12 && dir <= exact_sq * (1.0 + 1e-10));
    }
    // orthonormal basis sums to the trace
    for i in 0..7 {
        let mut e = DVector::zeros(7);
        e[i] = 1.0;
        trace_from_basis += kappa_dir_sq(&sol, &w, &e).unwrap();
    }
    let mut trace = 0.0;
    for i in 0..7 {
        let mut e = DVector::zeros(7);
        e[i] = 1.0;
        trace += op.apply(&e)[i];
    }
    assert!((trace_from_basis - trace).abs() <= 1e-11 * trace.abs().max(1.0));
}

#[test]
fn kappa_dir_maximizer_is_the_norm() {
    let p = gaussian_problem(9, 6, 2, 77);
    let sol = solve_lse(&p).unwrap();
    let w = ConditionWeights::unit();
    let op = CondOperator::new(&sol, &w).unwrap();
    let mut c = DMatrix::zeros(6, 6);
    for j in 0..6 {
        let mut e = DVector::zeros(6);
        e[j] = 1.0;
        c.set_column(j, &op.apply(&e));
    }
    let eig = nalgebra::SymmetricEigen::new((&c + c.transpose()) * 0.5);
    let (mut best, mut best_idx) = (f64::NEG_INFINITY, 0);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > best {
            best = l;
            best_idx = i;
        }
    }
    let z = eig.eigenvectors.column(best_idx).into_owned();
    let dir = kappa_dir_sq(&sol, &w, &z).unwrap();
    let exact_sq = cond_exact_closed(&p, &w).unwrap().c_norm.unwrap();
    assert!((dir - exact_sq).abs() <= 1e-10 * exact_sq);
}

#[test]
fn kappa_dir_rejects_non_unit_input() {
    let p = gaussian_problem(8, 5, 2, 88);
    let sol = solve_lse(&p).unwrap();
    let w = ConditionWeights::unit();
    let z = DVector::from_element(5, 1.0);
    assert!(matches!(
        kappa_dir_sq(&sol, &w, &z),
        Err(LseError::Domain(_))
    ));
}

#[test]
fn ssce_is_deterministic_and_validates() {
    let p = gaussian_problem(12, 8, 3, 99);
    let w = ConditionWeights::unit();
    let a = ssce_estimate(&p, &w, 2, 1234).unwrap();
    let b = ssce_estimate(&p, &w, 2, 1234).unwrap();
    assert_eq!(a.kappa_hat, b.kappa_hat);
    assert_eq!(a.kappa_i_sq, b.kappa_i_sq);
    let c = ssce_estimate(&p, &w, 2, 1235).unwrap();
    assert_ne!(a.kappa_hat, c.kappa_hat);

    assert!(ssce_estimate(&p, &w, 0, 1).is_err());
    assert!(ssce_estimate(&p, &w, 9, 1).is_err());
    let wl = ConditionWeights::unit().with_l(LMap::coordinate(8, 0));
    let sol = solve_lse(&p).unwrap();
    assert!(ssce_estimate_with(&sol, &wl, 2, 1, WallisMode::Approx).is_err());
}

#[test]
fn ssce_full_basis_with_exact_wallis_is_the_trace() {
    let p = gaussian_problem(10, 6, 2, 111);
    let sol = solve_lse(&p).unwrap();
    let w = ConditionWeights::unit();
    let rep = ssce_estimate_with(&sol, &w, 6, 2024, WallisMode::Exact).unwrap();
    // q = n: the Wallis ratio is one and the estimate is sqrt(trace(C))
    let op = CondOperator::new(&sol, &w).unwrap();
    let mut trace = 0.0;
    for i in 0..6 {
        let mut e = DVector::zeros(6);
        e[i] = 1.0;
        trace += op.apply(&e)[i];
    }
    assert!((rep.kappa_hat - trace.sqrt()).abs() <= 1e-10 * trace.sqrt());
    assert!((rep.wallis_q - rep.wallis_n).abs() <= 1e-15);
}

#[test]
fn ssce_report_combination_identity() {
    let p = gaussian_problem(12, 8, 3, 131);
    let w = ConditionWeights::unit();
    let rep = ssce_estimate(&p, &w, 3, 7).unwrap();
    let sum: f64 = rep.kappa_i_sq.iter().sum();
    assert!((rep.kappa_hat - rep.wallis_q / rep.wallis_n * sum.sqrt()).abs() <= 1e-13 * rep.kappa_hat);
    assert!(rep.kappa_i_sq.iter().all(|&k| k >= 0.0));
    assert_eq!(rep.q, 3);
}
