//! Criterion benchmarks for the MuPIR simulator live in `benches/`.
