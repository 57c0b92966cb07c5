//! Criterion benchmarks for the linear-algebra, SDP and local-bound kernels.
//! Run with `cargo bench -p lochier-bench`.
