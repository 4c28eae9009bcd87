//! Criterion benchmarks for the core algorithms live in `benches/algorithms.rs`.
//! Run them with `cargo bench -p cpguard-bench`.
