//! Latency and quality metrics, the scaling benchmark, equivalence suites
//! and the command-line front end.

mod bench;
mod bleu;
pub mod cli;
pub mod equiv;
mod fit;
mod metrics;

pub use bench::{bench_scaling, noise_segments, series, write_bench_csv, BenchConfig, BenchRecord, BENCH_CSV_HEADER};
pub use bleu::bleu_lite;
pub use fit::{poly_fit, PolyFit};
pub use metrics::{delays_from_log, laal, DelayMode, DelayProfile, MetricsReport};
