//! Criterion benchmarks for the morphing hot paths live under `benches/`.
