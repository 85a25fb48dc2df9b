//! Criterion benchmarks for the core solvers; see `benches/solvers.rs`.
//!
//! Run with `cargo bench -p tvflow-bench`.
