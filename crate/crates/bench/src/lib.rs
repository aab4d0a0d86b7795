//! Benchmarks for carnot-core live in `benches/`.
