//! Benchmark-only crate; see `benches/condition.rs`.
