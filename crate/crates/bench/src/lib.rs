//! Criterion benchmarks for the estimator, prox, envelope and switching-method hot paths.
