//! Criterion benchmarks for the `fluctuation` crate; see `benches/`.
