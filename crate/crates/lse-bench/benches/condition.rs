//! Benchmarks: factorization, the three exact condition routes at their
//! intended scales, the structured compression, and both estimators.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use lse_core::*;

fn paper_scale_problem(seed: u64) -> (LseProblem, LseSolution) {
    let cfg = PaigeConfig {
        m: 100,
        n: 80,
        s: 50,
        l1: 3,
        l2: 3,
        rnorm: 1.0,
        seed,
    };
    let (p, _, _) = gen_paige(&cfg).unwrap();
    let sol = solve_lse(&p).unwrap();
    (p, sol)
}

fn bench_gsvd(c: &mut Criterion) {
    let mut group = c.benchmark_group("gsvd");
    for &(l1, l2) in &[(0u32, 0u32), (3, 3)] {
        let cfg = PaigeConfig {
            m: 100,
            n: 80,
            s: 50,
            l1,
            l2,
            rnorm: 1.0,
            seed: 1,
        };
        let (p, _, _) = gen_paige(&cfg).unwrap();
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("m100_n80_s50_l{l1}{l2}")),
            &p,
            |b, p| b.iter(|| gsvd(black_box(&p.a), black_box(&p.b)).unwrap()),
        );
    }
    group.finish();
}

fn bench_exact_routes(c: &mut Criterion) {
    let (p, sol) = paper_scale_problem(2);
    let w = ConditionWeights::unit();
    let mut group = c.benchmark_group("exact_routes");
    group.bench_function("closed_m100", |b| {
        b.iter(|| cond_exact_closed_with(black_box(&sol), &w).unwrap())
    });
    group.bench_function("gsvd_m100", |b| {
        b.iter(|| cond_exact_gsvd_with(black_box(&sol), &w).unwrap())
    });
    // the explicit derivative matrix is meant for small sizes; benchmark it there
    let small = {
        let cfg = PaigeConfig {
            m: 12,
            n: 8,
            s: 4,
            l1: 0,
            l2: 0,
            rnorm: 1.0,
            seed: 3,
        };
        let (p, _, _) = gen_paige(&cfg).unwrap();
        p
    };
    let small_sol = solve_lse(&small).unwrap();
    group.bench_function("kron_m12", |b| {
        b.iter(|| cond_exact_kron_with(black_box(&small), &small_sol, &w).unwrap())
    });
    group.finish();
    let _ = p;
}

fn bench_structured(c: &mut Criterion) {
    let (p, _, _) = gen_toeplitz_pair(100, 1.0, 5).unwrap();
    let sol = solve_lse(&p).unwrap();
    let w = ConditionWeights::unit();
    let spec = StructureSpec::new(StructureKind::Toeplitz, 100, 100);
    c.bench_function("structured_toeplitz_n100", |b| {
        b.iter(|| cond_structured_with(black_box(&p), &sol, &w, spec, spec).unwrap())
    });
}

fn bench_estimators(c: &mut Criterion) {
    let (_, sol) = paper_scale_problem(7);
    let w = ConditionWeights::unit();
    let mut group = c.benchmark_group("estimators");
    group.bench_function("pce_materialized", |b| {
        b.iter(|| {
            estimate_condition_pce_with(
                black_box(&sol),
                &w,
                1e-3,
                1e-2,
                11,
                OperatorMode::Materialized,
            )
            .unwrap()
        })
    });
    group.bench_function("pce_matvec", |b| {
        b.iter(|| {
            estimate_condition_pce_with(black_box(&sol), &w, 1e-3, 1e-2, 11, OperatorMode::MatVec)
                .unwrap()
        })
    });
    group.bench_function("ssce_q2", |b| {
        b.iter(|| ssce_estimate_with(black_box(&sol), &w, 2, 13, WallisMode::Approx).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_gsvd,
    bench_exact_routes,
    bench_structured,
    bench_estimators
);
criterion_main!(benches);
