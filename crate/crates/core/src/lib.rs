//! Composite quasibosons assembled from two families of (q-)fermions.
//!
//! The crate builds truncated Fock spaces and their ladder operators as
//! sparse matrices, assembles the composite operators
//! `A^dag = sum Phi^{mu nu} a^dag_mu b^dag_nu`, and checks, numerically or in
//! exact arithmetic, the conditions under which they realize a deformed
//! oscillator with structure function `phi`.

pub mod dsf;
pub mod error;
pub mod expansion;
pub mod fock;
pub mod phi;
pub mod quasiboson;
pub mod residual;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
pub use residual::{Residual, ResidualSet, DEFAULT_TOL};
