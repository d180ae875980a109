//! Benchmarks for `scalemat-core`; see `benches/`.
