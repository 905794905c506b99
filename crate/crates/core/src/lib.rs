//! Numerical laboratory for contact Hamilton-Jacobi equations
//! `w_t + H(w_x, w) = 0` on the flat torus.

pub mod almost_periodic;
pub mod cli_io;
pub mod error;
pub mod geometry;
pub mod hamiltonian;
mod linalg;
pub mod oracle;
pub mod periodic;
pub mod periods;
pub mod semigroup;

pub use error::{Error, Result};
