//! Criterion benchmarks for the synthesis and simulation kernels; see `benches/`.
