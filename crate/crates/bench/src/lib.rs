//! Criterion benchmarks for the training and prior hot paths live in `benches/`.
