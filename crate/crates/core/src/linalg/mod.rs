//! Dense matrices, seeded random streams and matrix file formats.

pub mod io;
mod matrix;
mod rng;

pub use matrix::{psd_max_eigenvalue_upper, DenseMatrix};
pub(crate) use matrix::axpy;
pub use rng::RngStream;
