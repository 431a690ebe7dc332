//! Fully corrective greedy sparse recovery (generalized orthogonal matching
//! pursuit) for smooth convex objectives, together with exact computation of
//! restricted strong convexity / restricted isometry constants and numerical
//! checks of the recovery guarantees that hinge on them.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line, parallel enumeration and the Monte-Carlo harness live in the
//! companion `omp-rip` crate.
//!
//! ```
//! use omp_rip_core::{linalg::DenseMatrix, objective::SensingProblem, omp::{omp_run, OmpConfig}};
//!
//! let a = DenseMatrix::identity(4);
//! let problem = SensingProblem::new(a, vec![0.0, 0.0, 7.0, 0.0].into()).unwrap();
//! let result = omp_run(&problem, &OmpConfig::new(1)).unwrap();
//! assert_eq!(result.selected, vec![2]);
//! assert_eq!(result.final_objective(), 0.0);
//! ```
#![no_std]
// Dense kernels read more clearly with explicit indices.
#![allow(clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod linalg;
mod math;
pub mod objective;
pub mod omp;
pub mod rsc;
pub mod theory;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, DenseVector, SupportSet};
pub use objective::{LogisticObjective, Objective, SensingProblem};
pub use omp::{omp_run, select_coordinate, OmpConfig, OmpResult, StopRule};
pub use rsc::{Mode, RscLevel, RscLookup, RscProfile};
pub use theory::{TargetSignal, TheoryReport};
