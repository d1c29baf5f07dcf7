//! Criterion benchmarks for the dbv hot paths live in `benches/`.
