//! Dressed-state Hamiltonian engineering for dipolar-coupled spin-1 ensembles.
//!
//! The crate is layered bottom-up:
//!
//! - [`spin`]: operators, states and exact propagation.
//! - [`dressed`]: the single-NV Hamiltonian under a perpendicular field, the
//!   dressed qubit and its effective dipolar couplings.
//! - [`ensemble`]: orientation groups, positional sampling, coupling matrices
//!   and on-site disorder.
//! - [`sequence`]: pulse sequences, toggling frames and zeroth-order averaging.
//! - [`manybody`]: exact simulation of the measurement protocols.
//! - [`analysis`]: normalization, fits and sensitivity reports.

pub mod error;
pub mod manybody;
mod par;
pub mod spin;
pub mod dressed;
pub mod analysis;
pub mod ensemble;
pub mod rng;
pub mod sequence;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
