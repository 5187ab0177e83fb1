//! Criterion benchmarks for `vinequant`; see `benches/`.
