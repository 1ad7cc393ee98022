//! Perturbative mean force Gibbs states of finite quantum systems coupled to a
//! bosonic bath, with exact-diagonalization and master-equation cross-checks.

pub mod comparator;
pub mod error;
pub mod linalg;
pub mod mfgs;
pub mod oracle;
pub mod quadrature;
pub mod special;
pub mod spectral;
pub mod spinboson;

pub use error::{Error, Result};
