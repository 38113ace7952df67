//! Seeded problem generators and experiment runners.
//!
//! Two generator families are provided: Householder-transformed diagonal
//! pairs with prescribed condition numbers kappa(A) = n^l1, kappa(B) = s^l2,
//! and square Gaussian Toeplitz pairs. Both plant the solution
//! x = (1, 4, ..., n^2) and a residual of prescribed norm that is projected
//! onto the orthogonal complement of range(A P), so the planted x is exactly
//! optimal and the residual norm entering the condition formulas is exact.
//!
//! The runners reproduce the reference statistics: estimator-to-exact ratio
//! tables over a conditioning grid, structured-vs-unstructured ratio scatter
//! for Toeplitz pairs, and the growth of that ratio with dimension. Trials
//! run in parallel; every trial derives its own generator stream from
//! (seed, index), so output is schedule independent and byte reproducible.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::condition::cond_exact_gsvd_with;
use crate::error::{LseError, Result};
use crate::estimators::{estimate_condition_pce_with, ssce_estimate_with, OperatorMode};
use crate::gsvd::gsvd;
use crate::problem::LseProblem;
use crate::solve::solve_lse;
use crate::structured::{cond_structured_with, StructureKind, StructureSpec};
use crate::wallis::WallisMode;
use crate::weights::ConditionWeights;

/// Configuration of the prescribed-conditioning generator.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PaigeConfig {
    pub m: usize,
    pub n: usize,
    pub s: usize,
    /// kappa(A) = n^l1
    pub l1: u32,
    /// kappa(B) = s^l2
    pub l2: u32,
    /// target residual norm
    pub rnorm: f64,
    pub seed: u64,
}

/// Splits one base seed into independent per-trial seeds (splitmix64).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn unit_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 0.0 {
            return v / n;
        }
    }
}

/// Applies the Householder reflection I - 2 u u^T to the rows of `m`.
fn reflect_rows(u: &DVector<f64>, m: &mut DMatrix<f64>) {
    let proj = u.transpose() * &*m;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            m[(i, j)] -= 2.0 * u[i] * proj[(0, j)];
        }
    }
}

/// Planted solution (1, 2^2, ..., n^2).
fn planted_x(n: usize) -> DVector<f64> {
    DVector::from_fn(n, |i, _| ((i + 1) * (i + 1)) as f64)
}

/// Draws a residual of the requested norm in the orthogonal complement of
/// range(A P), so that the planted x is exactly optimal. Returns zero when
/// the complement is trivial or the target norm is zero.
fn planted_residual(
    factors: &crate::gsvd::GsvdFactors,
    rng: &mut ChaCha8Rng,
    rnorm: f64,
) -> DVector<f64> {
    let m = factors.m();
    if rnorm == 0.0 {
        return DVector::zeros(m);
    }
    let lead = factors.leading.len();
    let mut r = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
    if lead > 0 {
        let u1 = factors.u.columns(0, lead);
        let coeffs = u1.transpose() * &r;
        r -= u1 * coeffs;
    }
    let nr = r.norm();
    if nr <= 1e-12 {
        return DVector::zeros(m);
    }
    r * (rnorm / nr)
}

/// Generates one prescribed-conditioning problem; returns the problem, the
/// planted solution and the planted residual.
pub fn gen_paige(cfg: &PaigeConfig) -> Result<(LseProblem, DVector<f64>, DVector<f64>)> {
    let (m, n, s) = (cfg.m, cfg.n, cfg.s);
    if !(m >= n && n >= s && s >= 1) {
        return Err(LseError::Generator(format!(
            "need m >= n >= s >= 1, got ({m}, {n}, {s})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let u1 = unit_vector(&mut rng, m);
    let u2 = unit_vector(&mut rng, s);
    let v1 = unit_vector(&mut rng, n);
    let v2 = unit_vector(&mut rng, n);

    // A = (I - 2 u1 u1^T) [D1; 0] (I - 2 v1 v1^T), D1 geometric in (k/n)^l1.
    let mut a = DMatrix::zeros(m, n);
    for i in 0..n {
        let scale = (((n - i) as f64) / n as f64).powi(cfg.l1 as i32);
        for j in 0..n {
            let refl = if i == j { 1.0 } else { 0.0 } - 2.0 * v1[i] * v1[j];
            a[(i, j)] = scale * refl;
        }
    }
    reflect_rows(&u1, &mut a);

    let mut b = DMatrix::zeros(s, n);
    for i in 0..s {
        let scale = (((s - i) as f64) / s as f64).powi(cfg.l2 as i32);
        for j in 0..n {
            let refl = if i == j { 1.0 } else { 0.0 } - 2.0 * v2[i] * v2[j];
            b[(i, j)] = scale * refl;
        }
    }
    reflect_rows(&u2, &mut b);

    let factors = gsvd(&a, &b)?;
    let x = planted_x(n);
    let r = planted_residual(&factors, &mut rng, cfg.rnorm);
    let rhs = &a * &x + &r;
    let d = &b * &x;
    Ok((LseProblem::new(a, b, rhs, d)?, x, r))
}

/// Dense Toeplitz matrix from its 2n-1 diagonal parameters, ordered from the
/// bottom-left diagonal upward.
fn toeplitz_from_params(n: usize, params: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| params[j + (n - 1) - i])
}

/// Generates a square Gaussian Toeplitz pair (m = s = n) with planted
/// solution and residual. Draws failing the rank assumptions are redrawn on
/// a fresh substream, up to ten times.
pub fn gen_toeplitz_pair(
    n: usize,
    rnorm: f64,
    seed: u64,
) -> Result<(LseProblem, DVector<f64>, DVector<f64>)> {
    if n < 2 {
        return Err(LseError::Generator(format!("need n >= 2, got {n}")));
    }
    for attempt in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt);
        let pa: Vec<f64> = (0..2 * n - 1)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let pb: Vec<f64> = (0..2 * n - 1)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let a = toeplitz_from_params(n, &pa);
        let b = toeplitz_from_params(n, &pb);
        let factors = match gsvd(&a, &b) {
            Ok(f) => f,
            Err(LseError::RankDeficient { .. }) => continue,
            Err(e) => return Err(e),
        };
        let x = planted_x(n);
        let r = planted_residual(&factors, &mut rng, rnorm);
        let rhs = &a * &x + &r;
        let d = &b * &x;
        return Ok((LseProblem::new(a, b, rhs, d)?, x, r));
    }
    Err(LseError::Generator(
        "10 consecutive Toeplitz draws violated the rank assumptions".into(),
    ))
}

/// Summary statistics of one experiment cell.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExperimentStats {
    pub mean: f64,
    pub variance: f64,
    pub samples: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl ExperimentStats {
    pub fn from_samples(xs: &[f64]) -> Self {
        let nsamp = xs.len();
        let mean = xs.iter().sum::<f64>() / nsamp.max(1) as f64;
        let variance = if nsamp > 1 {
            xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nsamp - 1) as f64
        } else {
            0.0
        };
        let mut sorted = xs.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let median = if nsamp == 0 {
            f64::NAN
        } else if nsamp % 2 == 1 {
            sorted[nsamp / 2]
        } else {
            0.5 * (sorted[nsamp / 2 - 1] + sorted[nsamp / 2])
        };
        Self {
            mean,
            variance,
            samples: nsamp,
            min: sorted.first().copied().unwrap_or(f64::NAN),
            median,
            max: sorted.last().copied().unwrap_or(f64::NAN),
        }
    }
}

/// 17-significant-digit float formatting shared by all CSV writers.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// One row of the estimator-ratio table.
#[derive(Debug, Clone, Serialize)]
pub struct Table1Row {
    pub l1: u32,
    pub l2: u32,
    pub rnorm: f64,
    pub estimator: &'static str,
    pub stats: ExperimentStats,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1Output {
    pub rows: Vec<Table1Row>,
}

impl Table1Output {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("l1,l2,rnorm,estimator,mean,variance\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.l1,
                row.l2,
                fmt(row.rnorm),
                row.estimator,
                fmt(row.stats.mean),
                fmt(row.stats.variance)
            ));
        }
        out
    }
}

/// Paper-scale parameters of the ratio experiments.
const TABLE1_DIMS: (usize, usize, usize) = (100, 80, 50);
const TABLE1_LEVELS: [u32; 3] = [0, 3, 5];
const TABLE1_RNORMS: [f64; 3] = [1e-4, 1.0, 1e4];
const PCE_EPS: f64 = 1e-3;
const PCE_DELTA: f64 = 1e-2;
const SSCE_Q: usize = 2;

/// Ratio of both estimators to the exact condition number over the
/// conditioning grid l1, l2 in {0, 3, 5} and residual norms
/// {1e-4, 1, 1e4}, with `trials` problems per cell at m=100, n=80, s=50.
pub fn run_table1(trials: usize, seed: u64) -> Result<Table1Output> {
    if trials == 0 {
        return Err(LseError::Domain("need at least one trial".into()));
    }
    let (m, n, s) = TABLE1_DIMS;
    let mut rows = Vec::new();
    let mut cell = 0u64;
    for &rnorm in &TABLE1_RNORMS {
        for &l1 in &TABLE1_LEVELS {
            for &l2 in &TABLE1_LEVELS {
                let base = derive_seed(seed, cell);
                let ratios: Result<Vec<(f64, f64)>> = (0..trials)
                    .into_par_iter()
                    .map(|trial| {
                        let cfg = PaigeConfig {
                            m,
                            n,
                            s,
                            l1,
                            l2,
                            rnorm,
                            seed: derive_seed(base, trial as u64),
                        };
                        let (problem, _, _) = gen_paige(&cfg)?;
                        let sol = solve_lse(&problem)?;
                        let weights = ConditionWeights::unit();
                        let exact = cond_exact_gsvd_with(&sol, &weights)?.kappa;
                        let ssce = ssce_estimate_with(
                            &sol,
                            &weights,
                            SSCE_Q,
                            derive_seed(base ^ 0x55ce, trial as u64),
                            WallisMode::Approx,
                        )?
                        .kappa_hat;
                        let pce = estimate_condition_pce_with(
                            &sol,
                            &weights,
                            PCE_EPS,
                            PCE_DELTA,
                            derive_seed(base ^ 0x9ce, trial as u64),
                            OperatorMode::Materialized,
                        )?
                        .kappa_hat;
                        Ok((ssce / exact, pce / exact))
                    })
                    .collect();
                let ratios = ratios?;
                let ssce: Vec<f64> = ratios.iter().map(|r| r.0).collect();
                let pce: Vec<f64> = ratios.iter().map(|r| r.1).collect();
                rows.push(Table1Row {
                    l1,
                    l2,
                    rnorm,
                    estimator: "ssce",
                    stats: ExperimentStats::from_samples(&ssce),
                });
                rows.push(Table1Row {
                    l1,
                    l2,
                    rnorm,
                    estimator: "pce",
                    stats: ExperimentStats::from_samples(&pce),
                });
                cell += 1;
            }
        }
    }
    Ok(Table1Output { rows })
}

/// Per-trial structured-vs-unstructured ratio for Toeplitz pairs.
#[derive(Debug, Clone, Serialize)]
pub struct RatioRow {
    pub trial: usize,
    pub rnorm: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioOutput {
    pub n: usize,
    pub rows: Vec<RatioRow>,
}

impl RatioOutput {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,rnorm,ratio\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{}\n",
                row.trial,
                fmt(row.rnorm),
                fmt(row.ratio)
            ));
        }
        out
    }
}

/// Ratio kappa / kappa_structured for one Toeplitz pair.
fn toeplitz_ratio(n: usize, rnorm: f64, seed: u64) -> Result<f64> {
    let (problem, _, _) = gen_toeplitz_pair(n, rnorm, seed)?;
    let sol = solve_lse(&problem)?;
    let weights = ConditionWeights::unit();
    let exact = cond_exact_gsvd_with(&sol, &weights)?.kappa;
    let spec = StructureSpec::new(StructureKind::Toeplitz, n, n);
    let structured = cond_structured_with(&problem, &sol, &weights, spec, spec)?.kappa;
    Ok(exact / structured)
}

/// Structured-vs-unstructured comparison at fixed n over several residual
/// norms.
pub fn run_ratio_experiment(
    n: usize,
    rnorms: &[f64],
    trials: usize,
    seed: u64,
) -> Result<RatioOutput> {
    let mut rows = Vec::new();
    for (ri, &rnorm) in rnorms.iter().enumerate() {
        let base = derive_seed(seed, ri as u64);
        let ratios: Result<Vec<f64>> = (0..trials)
            .into_par_iter()
            .map(|trial| toeplitz_ratio(n, rnorm, derive_seed(base, trial as u64)))
            .collect();
        for (trial, ratio) in ratios?.into_iter().enumerate() {
            rows.push(RatioRow {
                trial,
                rnorm,
                ratio,
            });
        }
    }
    Ok(RatioOutput { n, rows })
}

/// Mean and variance of the ratio per dimension.
#[derive(Debug, Clone, Serialize)]
pub struct DimSweepRow {
    pub n: usize,
    pub stats: ExperimentStats,
}

#[derive(Debug, Clone, Serialize)]
pub struct DimSweepOutput {
    pub rows: Vec<DimSweepRow>,
}

impl DimSweepOutput {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,mean,variance\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{}\n",
                row.n,
                fmt(row.stats.mean),
                fmt(row.stats.variance)
            ));
        }
        out
    }
}

/// Growth of the structured-vs-unstructured ratio with dimension.
pub fn run_dimension_sweep(
    sizes: &[usize],
    trials: usize,
    rnorm: f64,
    seed: u64,
) -> Result<DimSweepOutput> {
    let mut rows = Vec::new();
    for (si, &n) in sizes.iter().enumerate() {
        let base = derive_seed(seed, 1000 + si as u64);
        let ratios: Result<Vec<f64>> = (0..trials)
            .into_par_iter()
            .map(|trial| toeplitz_ratio(n, rnorm, derive_seed(base, trial as u64)))
            .collect();
        rows.push(DimSweepRow {
            n,
            stats: ExperimentStats::from_samples(&ratios?),
        });
    }
    Ok(DimSweepOutput { rows })
}

/// The dimension grid used by the reference sweep: 10, 30, ..., 210.
pub fn default_sweep_sizes() -> Vec<usize> {
    (1..=11).map(|i| 20 * i - 10).collect()
}
