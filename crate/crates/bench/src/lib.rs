//! Criterion benchmarks for the moment-problem pipeline; see `benches/`.
