//! Criterion benchmarks for csikit-core live in `benches/`.
