//! Criterion benchmarks for the solvers and simulations; see `benches/`.
