//! celkit: computational toolkit for unitary paths over [0,1] with values
//! in complex matrix algebras.
//!
//! The crate provides:
//! - a dense complex matrix kernel (eigendecompositions, exp/log) in [`matcore`],
//! - sampled unitary paths, homotopies and exponential factorizations in [`pathalg`],
//! - trace-winding determinants and rotation numbers in [`determinant`],
//! - continuous eigenvalue tracking and spectral measures in [`spectral`],
//! - trace-zero logarithm construction for determinant-one paths in [`logfactory`],
//! - exponential-length lower-bound certificates and the trace-window
//!   obstruction machinery in [`celcert`],
//! - generators for the two-cluster example families in [`families`],
//! - JSON/CSV serialization and run manifests in [`io`].

pub mod error;
pub mod matcore;
pub mod assign;
pub mod determinant;
pub mod pathalg;
pub mod spectral;

pub use error::{CelError, Result};
