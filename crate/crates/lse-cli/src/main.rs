//! `lse-cond`: solve equality-constrained least squares problems and compute,
//! estimate, and compare condition numbers of their solutions.
//!
//! Subcommands: `solve`, `cond`, `structured`, `estimate`, `bench`. Problems
//! are read from Matrix Market bundles (a directory with `A.mtx`, `b.mtx` and
//! optional `B.mtx`, `d.mtx`, or a JSON manifest). Reports are JSON on
//! stdout; experiment tables are CSV files. Every randomized command either
//! takes `--seed` or draws one and prints it, and a run manifest accompanies
//! every output for provenance.
//!
//! Exit codes: 0 success, 2 I/O or parse failure, 3 violated rank or
//! structure assumptions, 4 non-convergence, 5 bad flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rand::Rng;
use serde::Serialize;

use lse_core::*;

#[derive(Parser)]
#[command(name = "lse-cond", version, about = "Condition numbers of equality-constrained least squares solutions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problem and write x, r and a JSON summary.
    Solve(SolveArgs),
    /// Exact partial condition number of the solution.
    Cond(CondArgs),
    /// Structured partial condition number (Toeplitz/Hankel/symmetric/full).
    Structured(StructuredArgs),
    /// Statistical condition estimates.
    Estimate(EstimateArgs),
    /// Reproduce the reference experiments; writes CSV files.
    Bench(BenchArgs),
}

#[derive(Args)]
struct ProblemArg {
    /// Problem bundle: a directory or a JSON manifest naming A, B, b, d.
    #[arg(long)]
    problem: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArg,
    /// Output directory for x.mtx, r.mtx, summary.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum CondMethod {
    Kron,
    Closed,
    Gsvd,
    Upper,
}

#[derive(Args)]
struct CondArgs {
    #[command(flatten)]
    problem: ProblemArg,
    #[arg(long, value_enum, default_value = "gsvd")]
    method: CondMethod,
    /// Weights alpha_A,alpha_B,alpha_b,alpha_d of the data norm.
    #[arg(long, default_value = "1,1,1,1")]
    weights: String,
    /// Solution projector: `identity`, `e<i>` (1-based coordinate), or a
    /// Matrix Market file with n rows.
    #[arg(long, default_value = "identity")]
    l: String,
}

#[derive(Args)]
struct StructuredArgs {
    #[command(flatten)]
    problem: ProblemArg,
    /// Structure of A: toeplitz, hankel, symmetric, full.
    #[arg(long = "struct-a")]
    struct_a: String,
    /// Structure of B.
    #[arg(long = "struct-b")]
    struct_b: String,
    #[arg(long, default_value = "1,1,1,1")]
    weights: String,
    #[arg(long, default_value = "identity")]
    l: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimateMethod {
    Pce,
    Ssce,
}

#[derive(Clone, Copy, ValueEnum)]
enum PceOperator {
    Materialized,
    Matvec,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    problem: ProblemArg,
    #[arg(long, value_enum)]
    method: EstimateMethod,
    /// Failure probability of the upper bound (pce).
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    /// Target relative width of the bound interval (pce).
    #[arg(long, default_value_t = 1e-2)]
    delta: f64,
    /// Sample count (ssce).
    #[arg(long, default_value_t = 2)]
    q: usize,
    /// How the pce operator is applied.
    #[arg(long, value_enum, default_value = "materialized")]
    operator: PceOperator,
    /// Also compute the exact value and report the ratio.
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "1,1,1,1")]
    weights: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Table1,
    Ratio,
    Dimsweep,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    experiment: Experiment,
    /// Trials per cell (table1, ratio) or per size (dimsweep).
    #[arg(long)]
    trials: Option<usize>,
    /// Problem order for the ratio experiment.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Comma-separated residual norms (ratio experiment).
    #[arg(long, default_value = "1e-4,1,1e4")]
    rnorms: String,
    /// Residual norm (dimsweep).
    #[arg(long, default_value_t = 1.0)]
    rnorm: f64,
    /// Comma-separated sizes (dimsweep); default 10,30,...,210.
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

/// Provenance record serialized alongside every output.
#[derive(Serialize, Clone)]
struct RunManifest {
    command: String,
    inputs: Vec<String>,
    params: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    version: String,
}

impl RunManifest {
    fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            inputs: Vec::new(),
            params: BTreeMap::new(),
            seed: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    fn input(mut self, p: &Path) -> Self {
        self.inputs.push(p.display().to_string());
        self
    }

    fn param(mut self, k: &str, v: impl ToString) -> Self {
        self.params.insert(k.to_string(), v.to_string());
        self
    }
}

#[derive(Serialize)]
struct Envelope<T: Serialize> {
    manifest: RunManifest,
    #[serde(flatten)]
    body: T,
}

fn emit<T: Serialize>(manifest: RunManifest, body: T) -> Result<()> {
    let env = Envelope { manifest, body };
    println!("{}", serde_json::to_string_pretty(&env).expect("serializable report"));
    Ok(())
}

fn parse_weights(spec: &str) -> Result<ConditionWeights> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 4 {
        return Err(LseError::Domain(format!(
            "--weights wants four comma-separated positive reals, got `{spec}`"
        )));
    }
    let mut vals = [0.0f64; 4];
    for (v, p) in vals.iter_mut().zip(&parts) {
        *v = p
            .trim()
            .parse()
            .map_err(|e| LseError::Domain(format!("bad weight `{p}`: {e}")))?;
    }
    ConditionWeights::new(vals[0], vals[1], vals[2], vals[3])
}

fn parse_l(spec: &str, n: usize) -> Result<LMap> {
    if spec.eq_ignore_ascii_case("identity") {
        return Ok(LMap::Identity);
    }
    if let Some(rest) = spec.strip_prefix('e') {
        if let Ok(i) = rest.parse::<usize>() {
            if i == 0 || i > n {
                return Err(LseError::Domain(format!(
                    "coordinate e{i} out of range 1..={n}"
                )));
            }
            return Ok(LMap::coordinate(n, i - 1));
        }
    }
    let l = read_matrix_market(Path::new(spec))?;
    Ok(LMap::Columns(l))
}

fn parse_list<T: std::str::FromStr>(spec: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    spec.split(',')
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|e| LseError::Domain(format!("bad {what} `{p}`: {e}")))
        })
        .collect()
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    match seed {
        Some(s) => s,
        None => {
            let s: u64 = rand::rng().random();
            eprintln!("seed: {s}");
            s
        }
    }
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let problem = load_bundle(&args.problem.problem)?;
    let sol = solve_lse(&problem)?;
    std::fs::create_dir_all(&args.out)?;
    write_matrix_market_vector(&args.out.join("x.mtx"), &sol.x)?;
    write_matrix_market_vector(&args.out.join("r.mtx"), &sol.r)?;

    let manifest = RunManifest::new("solve").input(&args.problem.problem);
    #[derive(Serialize)]
    struct Summary {
        m: usize,
        n: usize,
        s: usize,
        residual_norm: f64,
        constraint_residual: f64,
        optimality_residual: f64,
    }
    let constraint = if problem.s() > 0 {
        (&problem.b * &sol.x - &problem.d).norm()
    } else {
        0.0
    };
    let summary = Summary {
        m: problem.m(),
        n: problem.n(),
        s: problem.s(),
        residual_norm: sol.r.norm(),
        constraint_residual: constraint,
        optimality_residual: apply_ap_pinv(&sol.factors, &sol.r)?.norm(),
    };
    let env = Envelope {
        manifest,
        body: summary,
    };
    let text = serde_json::to_string_pretty(&env).expect("serializable summary");
    let tmp = args.out.join("summary.json.tmp");
    std::fs::write(&tmp, &text)?;
    std::fs::rename(&tmp, args.out.join("summary.json"))?;
    println!("{text}");
    Ok(())
}

fn cmd_cond(args: CondArgs) -> Result<()> {
    let problem = load_bundle(&args.problem.problem)?;
    let mut weights = parse_weights(&args.weights)?;
    weights.l = parse_l(&args.l, problem.n())?;
    let report = match args.method {
        CondMethod::Kron => cond_exact_kron(&problem, &weights)?,
        CondMethod::Closed => cond_exact_closed(&problem, &weights)?,
        CondMethod::Gsvd => cond_exact_gsvd(&problem, &weights)?,
        CondMethod::Upper => {
            if !weights.is_unit() || !weights.l.is_identity() {
                return Err(LseError::Domain(
                    "the upper bound is defined for unit weights and L = identity".into(),
                ));
            }
            cond_upper_bound(&problem)?
        }
    };
    let method_name = serde_json::to_value(report.method)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default();
    let manifest = RunManifest::new("cond")
        .input(&args.problem.problem)
        .param("method", method_name)
        .param("weights", &args.weights)
        .param("L", &args.l);
    emit(manifest, report)
}

fn cmd_structured(args: StructuredArgs) -> Result<()> {
    let problem = load_bundle(&args.problem.problem)?;
    let mut weights = parse_weights(&args.weights)?;
    weights.l = parse_l(&args.l, problem.n())?;
    let kind_a: StructureKind = args.struct_a.parse()?;
    let kind_b: StructureKind = args.struct_b.parse()?;
    let spec_a = StructureSpec::new(kind_a, problem.m(), problem.n());
    let spec_b = StructureSpec::new(kind_b, problem.s(), problem.n());
    let report = cond_structured(&problem, &weights, spec_a, spec_b)?;
    let manifest = RunManifest::new("structured")
        .input(&args.problem.problem)
        .param("struct_a", &args.struct_a)
        .param("struct_b", &args.struct_b)
        .param("weights", &args.weights)
        .param("L", &args.l);
    emit(manifest, report)
}

fn cmd_estimate(args: EstimateArgs) -> Result<()> {
    let problem = load_bundle(&args.problem.problem)?;
    let weights = parse_weights(&args.weights)?;
    let seed = resolve_seed(args.seed);
    let sol = solve_lse(&problem)?;
    let exact = if args.exact {
        Some(cond_exact_gsvd_with(&sol, &weights)?.kappa)
    } else {
        None
    };

    #[derive(Serialize)]
    struct EstimateBody<R: Serialize> {
        #[serde(flatten)]
        report: R,
        #[serde(skip_serializing_if = "Option::is_none")]
        exact: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        ratio: Option<f64>,
    }

    let manifest = RunManifest::new("estimate")
        .input(&args.problem.problem)
        .param("weights", &args.weights);
    match args.method {
        EstimateMethod::Pce => {
            let mode = match args.operator {
                PceOperator::Materialized => OperatorMode::Materialized,
                PceOperator::Matvec => OperatorMode::MatVec,
            };
            let report = estimate_condition_pce_with(&sol, &weights, args.eps, args.delta, seed, mode)?;
            let manifest = manifest
                .param("method", "pce")
                .param("eps", args.eps)
                .param("delta", args.delta);
            let manifest = RunManifest {
                seed: Some(seed),
                ..manifest
            };
            let converged = report.converged;
            let ratio = exact.map(|e| report.kappa_hat / e);
            emit(
                manifest,
                EstimateBody {
                    report,
                    exact,
                    ratio,
                },
            )?;
            if !converged {
                return Err(LseError::NonConverged(
                    "the bound interval did not reach the requested width".into(),
                ));
            }
            Ok(())
        }
        EstimateMethod::Ssce => {
            let report = ssce_estimate_with(&sol, &weights, args.q, seed, WallisMode::Approx)?;
            let manifest = manifest.param("method", "ssce").param("q", args.q);
            let manifest = RunManifest {
                seed: Some(seed),
                ..manifest
            };
            let ratio = exact.map(|e| report.kappa_hat / e);
            emit(
                manifest,
                EstimateBody {
                    report,
                    exact,
                    ratio,
                },
            )
        }
    }
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let seed = resolve_seed(args.seed);
    std::fs::create_dir_all(&args.out)?;
    let mut manifest = RunManifest::new("bench");
    manifest.seed = Some(seed);
    let csv_path;
    match args.experiment {
        Experiment::Table1 => {
            let trials = args.trials.unwrap_or(500);
            manifest = manifest.param("experiment", "table1").param("trials", trials);
            let out = run_table1(trials, seed)?;
            csv_path = args.out.join("table1.csv");
            write_atomic(&csv_path, &out.to_csv())?;
        }
        Experiment::Ratio => {
            let trials = args.trials.unwrap_or(200);
            let rnorms: Vec<f64> = parse_list(&args.rnorms, "residual norm")?;
            manifest = manifest
                .param("experiment", "ratio")
                .param("trials", trials)
                .param("n", args.n)
                .param("rnorms", &args.rnorms);
            let out = run_ratio_experiment(args.n, &rnorms, trials, seed)?;
            csv_path = args.out.join(format!("ratio_n{}.csv", args.n));
            write_atomic(&csv_path, &out.to_csv())?;
        }
        Experiment::Dimsweep => {
            let trials = args.trials.unwrap_or(50);
            let sizes = match &args.sizes {
                Some(s) => parse_list(s, "size")?,
                None => default_sweep_sizes(),
            };
            manifest = manifest
                .param("experiment", "dimsweep")
                .param("trials", trials)
                .param("rnorm", args.rnorm)
                .param("sizes", format!("{sizes:?}"));
            let out = run_dimension_sweep(&sizes, trials, args.rnorm, seed)?;
            csv_path = args.out.join("dimsweep.csv");
            write_atomic(&csv_path, &out.to_csv())?;
        }
    }
    let manifest_text =
        serde_json::to_string_pretty(&manifest).expect("serializable manifest");
    let mpath = args.out.join("manifest.json");
    std::fs::write(args.out.join("manifest.json.tmp"), &manifest_text)?;
    std::fs::rename(args.out.join("manifest.json.tmp"), &mpath)?;
    eprintln!("wrote {}", csv_path.display());
    Ok(())
}

fn error_kind(e: &LseError) -> (&'static str, u8) {
    match e {
        LseError::Io(_) => ("io", 2),
        LseError::Parse { .. } => ("parse", 2),
        LseError::RankDeficient { .. } => ("assumptions", 3),
        LseError::NotFullColumnRank { .. } => ("rank", 3),
        LseError::StructureViolation { .. } => ("structure", 3),
        LseError::ShapeMismatch(_) => ("shape", 3),
        LseError::Numerical(_) => ("numerical", 3),
        LseError::Generator(_) => ("generator", 3),
        LseError::NonConverged(_) => ("convergence", 4),
        LseError::OracleTooLarge { .. } => ("oracle_too_large", 5),
        LseError::Domain(_) => ("domain", 5),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprintln!(
                "{}",
                serde_json::json!({"error": {"kind": "flags", "message": e.to_string()}})
            );
            return ExitCode::from(5);
        }
    };

    if let Ok(threads) = std::env::var("LSE_COND_THREADS") {
        if let Ok(k) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
        }
    }

    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Cond(a) => cmd_cond(a),
        Command::Structured(a) => cmd_structured(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = error_kind(&e);
            eprintln!(
                "{}",
                serde_json::json!({"error": {"kind": kind, "message": e.to_string()}})
            );
            ExitCode::from(code)
        }
    }
}
