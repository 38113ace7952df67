//! Equality-constrained linear least squares: solver, exact and structured
//! partial condition numbers, and statistical condition estimators.
//!
//! The library solves `min ||rhs - A x||_2` subject to `B x = d` through the
//! generalized SVD of the pair (A, B) and provides:
//!
//! - three algebraically independent routes to the exact partial condition
//!   number of `L^T x` under a weighted Frobenius data norm (an explicit
//!   Kronecker-structured derivative matrix, a closed k x k formula, and a
//!   GSVD-partitioned formula),
//! - structured condition numbers restricted to linear matrix structures
//!   (Toeplitz, Hankel, symmetric),
//! - a probabilistic spectral-norm estimate with a guaranteed lower bound and
//!   a probabilistic upper bound, and small-sample statistical condition
//!   estimation with Wallis-factor calibration,
//! - seeded generators and experiment runners that reproduce the reference
//!   statistics, emitting deterministic CSV.

pub mod condition;
pub mod error;
pub mod estimators;
pub mod gsvd;
pub mod harness;
pub mod io;
pub mod kron;
pub mod operators;
pub mod problem;
pub mod solve;
pub mod structured;
pub mod svd;
pub mod wallis;
pub mod weights;

pub use condition::{
    cond_exact_closed, cond_exact_closed_with, cond_exact_gsvd, cond_exact_gsvd_with,
    cond_exact_kron, cond_exact_kron_with, cond_lls_closed, cond_upper_bound,
    cond_upper_bound_with, ConditionReport, Method,
};
pub use error::{LseError, Result};
pub use estimators::{
    estimate_condition_pce, estimate_condition_pce_with, kappa_dir_sq, pce_estimate,
    ssce_estimate, ssce_estimate_with, CondOperator, DenseSymOp, GramOp, OperatorMode, PceReport,
    SsceReport, SymmetricOperator,
};
pub use gsvd::{gsvd, GsvdFactors};
pub use harness::{
    default_sweep_sizes, derive_seed, gen_paige, gen_toeplitz_pair, run_dimension_sweep,
    run_ratio_experiment, run_table1, DimSweepOutput, ExperimentStats, PaigeConfig, RatioOutput,
    Table1Output,
};
pub use io::{
    load_bundle, read_matrix_market, read_matrix_market_vector, write_matrix_market,
    write_matrix_market_vector, BundleManifest,
};
pub use kron::{kron_oracle, kron_oracle_with, KroneckerBlocks, ORACLE_ELEMENT_CAP};
pub use operators::{
    ap_pinv, apply_ap_pinv, apply_ba_pinv, ba_pinv, null_projector,
};
pub use problem::{check_assumptions, default_rank_tol, AssumptionReport, LseProblem};
pub use solve::{solve_lse, solve_with_factors, LseSolution};
pub use svd::{jacobi_svd, pinv, Svd};
pub use structured::{
    build_structure, cond_structured, cond_structured_lls, cond_structured_with, embed_params,
    extract_params, structured_matrix, StructureKind, StructureMatrix, StructureSpec,
    StructuredLls,
};
pub use wallis::{wallis, WallisMode};
pub use weights::{ConditionWeights, LMap};
