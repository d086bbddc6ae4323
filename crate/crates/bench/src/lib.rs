//! Criterion benchmarks for the dimesim hot paths live in `benches/`.
