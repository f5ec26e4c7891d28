//! Benchmarks for the analysis routines; see `benches/core.rs`.
