//! Benchmark and verification harness for the `ips-core` estimator.
//!
//! A [`scenario::Scenario`] bundles a ground-truth intensity, a covariate
//! design, a candidate-collection recipe, a selection config and a benchmark
//! grid into one JSON document, so every run is reproducible from a file
//! plus a seed. On top of that the crate provides
//!
//! * Monte-Carlo risk benchmarks with exact Hellinger risks per sample size
//!   ([`benchmark::run_benchmark`]) and log-log rate fits
//!   ([`benchmark::rate_slope`]),
//! * change-point recovery reports ([`benchmark::changepoint_report`]),
//! * numerical self-verification suites reported as pass/fail tables
//!   ([`verify::verify`]),
//! * ready-made scenarios ([`presets`]) and the `ips-harness` CLI.

pub mod benchmark;
pub mod presets;
pub mod scenario;
pub mod verify;

pub use benchmark::{
    changepoint_report, rate_slope, run_benchmark, ChangepointReport, RiskReport,
};
pub use scenario::Scenario;
pub use verify::{verify, Suite, Tolerances, VerifyReport};
