//! Criterion benchmarks for the HKRR core live in `benches/`.
