//! Secret-key cost of merging and exchanging private classical
//! distributions.
//!
//! * [`dist`]: exact finite joint distributions and Shannon quantities.
//! * [`structure`]: bi-disjointness, purification, the cloning criterion.
//! * [`rates`]: merging rates, exchange bounds, Wyner common information.
//! * [`protocol`]: finite-length simulation of the binning protocol.
//! * [`covering`]: empirical check of the covering (sampling) lemma.

pub mod builtins;
pub mod covering;
pub mod dist;
pub mod error;
pub mod protocol;
pub mod rates;
pub mod roles;
pub mod seed;
pub mod sequences;
pub mod structure;

pub use error::{Error, Result};
pub use roles::Roles;
