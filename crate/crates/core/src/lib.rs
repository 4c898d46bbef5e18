//! Banding estimators for large covariance matrices.
//!
//! The crate covers the sample covariance and its banded and tapered
//! versions, unbiased-risk (Sure) and cross-validation bandwidth selectors,
//! a reproducible simulation harness, and a set of numerical oracles for the
//! moment identities and concentration bounds behind the estimator.

pub mod bandwidth;
pub mod datagen;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod verify;

pub use error::{Error, Result};
