//! Configuration files, output formats and drivers around `iga-core`.

pub mod config;
pub mod output;
pub mod run;
pub mod study;

/// Thread count for study runs; unset means one per core.
pub const THREADS_ENV: &str = "IGA_THREADS";
