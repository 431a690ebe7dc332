//! File formats, parallel certification, the experiment harness and the
//! `omp-rip` command line, built on [`omp_rip_core`].

pub mod certify;
pub mod cli;
pub mod error;
pub mod formats;
pub mod harness;
pub mod parallel;
pub mod suites;

pub use error::{AppError, AppResult};
