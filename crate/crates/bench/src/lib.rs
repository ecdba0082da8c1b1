//! Criterion benchmarks for the speccodec pipeline live in `benches/`.
