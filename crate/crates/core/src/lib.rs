//! Random-forest estimators of individual treatment effects.
//!
//! The crate is organised bottom-up: [`forest`] grows bagged CART
//! regression forests with first-class out-of-bag prediction,
//! [`synthetic`] stacks a grid of forests into a synthetic forest,
//! [`bivariate`] imputes the unobserved potential outcome, and
//! [`estimators`] builds the individual treatment effect estimators on top.
//! [`simbench`] reproduces the confounded simulation study and its
//! propensity-stratified metrics, while [`inference`], [`ingest`] and
//! [`coplot`] serve the command-line workflow.

pub mod bivariate;
pub mod coplot;
pub mod data;
pub mod error;
pub mod estimators;
pub mod forest;
pub mod inference;
pub mod ingest;
pub mod par;
pub mod rng;
pub mod simbench;
pub mod synthetic;

pub use data::{Dataset, Matrix};
pub use error::{Error, Result};
pub use forest::{Forest, ForestSpec, Mtry};
