//! Benchmarks live in `benches/`; run them with `cargo bench -p prolate-ewald-bench`.
