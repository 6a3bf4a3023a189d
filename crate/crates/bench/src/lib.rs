//! Criterion benchmarks for `cvepr-core`; see `benches/`.
