//! Bayesian stochastic linear bandits under general prior and noise laws.
//!
//! The crate has two jobs:
//!
//! * check the general elliptical potential inequality and the matrix lemmas
//!   it rests on, either exactly (outcome-tree enumeration for finite-support
//!   priors with Bernoulli rewards) or by fuzzing;
//! * simulate linear Thompson sampling with changing action sets and compare
//!   the Monte Carlo Bayes regret against its `sqrt(d T log det(I + T Γ₁))`
//!   bound.
//!
//! Module map:
//!
//! | module          | contents                                               |
//! |-----------------|--------------------------------------------------------|
//! | [`kernel`]      | dense symmetric linear algebra, log-det potential      |
//! | [`distributions`] | prior and noise catalogs                             |
//! | [`posterior`]   | conjugate, finite-support and particle belief engines  |
//! | [`potential`]   | classical and posterior-covariance potential tracking  |
//! | [`bandit`]      | action sets, LinTS, episodes                           |
//! | [`harness`]     | seeded Monte Carlo runs and summaries                  |
//! | [`verify`]      | lemma fuzzers and exact checks                         |
//! | [`report`]      | config schema, JSON and CSV rendering                  |
//! | [`acceptance`]  | the full acceptance matrix                             |

pub mod acceptance;
pub mod bandit;
pub mod distributions;
mod error;
pub mod harness;
pub mod kernel;
pub mod posterior;
pub mod potential;
pub mod report;
mod tolerance;
pub mod verify;

pub use error::{Error, Result};
pub use kernel::{Matrix, PsdMatrix, Vector};
pub use tolerance::Tolerances;
