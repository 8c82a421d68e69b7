//! Benchmark-only crate: see `benches/kernels.rs`.
//!
//! Run with `cargo bench -p polspec-bench`.  The three benchmarks cover the
//! costs that dominate real scans: the equation-of-motion propagation, the
//! padded detection transform, and one full scan point (propagation plus
//! spectral assembly).
