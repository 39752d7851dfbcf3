//! Criterion benchmarks for the counting, extraction and thermodynamics
//! kernels live in `benches/`.
