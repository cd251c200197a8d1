//! Exact steady-state analysis of single-server queues (and, by duality,
//! Sparre Andersen risk processes) in which the service requirement is
//! correlated with the adjacent inter-arrival time through a bivariate
//! matrix-exponential law.
//!
//! The pipeline is: build a [`models::DependenceModel`], factorize the
//! rational transform of the per-customer increment
//! ([`wienerhopf::factorize_model`]), invert the resulting transforms
//! ([`inversion::invert_tail`]), and read off waiting-time, workload,
//! idle-period, and ruin quantities from [`queuerisk::analyze`]. The
//! [`montecarlo`] module is an independent simulation oracle for all of it.

pub mod error;
pub mod inversion;
pub mod models;
pub mod montecarlo;
pub mod polyrat;
pub mod queuerisk;
pub mod wienerhopf;

pub use error::{Error, Result};
pub use inversion::{invert_tail, ExpPolyMix};
pub use models::{DependenceModel, Family, MixingDistribution, MomentReport, ScenarioKind};
pub use montecarlo::{SimConfig, SimEstimate};
pub use queuerisk::{analyze, Analysis, ScenarioReport};
pub use wienerhopf::{factorize, factorize_model, Factorization};
