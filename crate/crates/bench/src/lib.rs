//! Criterion benchmarks for the operators and solvers; see `benches/`.
