//! Near-convex archetypal analysis (NCAA).
//!
//! Factorizes a nonnegative data matrix `X ≈ Y A H` where `Y` holds a few
//! anchor columns selected from `X`, the columns of `A` sum to one with
//! entries bounded below by `-ε`, and the columns of `H` lie in the unit
//! simplex. The archetypes `W = YA` are therefore near-convex combinations of
//! data points: interpretable like archetypal analysis, but allowed to leave
//! the convex hull of the data by an amount controlled by `ε`, which the
//! solver tunes automatically.
//!
//! Modules:
//! - [`linalg`]: dense column-major matrices, RNG streams, file formats.
//! - [`projections`]: simplex and ε-simplex projections.
//! - [`fpgm`]: accelerated projected gradient for the block subproblems.
//! - [`solver`]: block coordinate descent, ε tuning and per-column fine tuning.
//! - [`selection`]: SNPA and hierarchical-clustering anchor selection.
//! - [`baselines`]: minimum-volume NMF and SNPA unmixing.
//! - [`evaluation`]: MRSA, Hungarian matching, reports.
//! - [`synthdata`]: synthetic benchmark instances.

pub mod baselines;
pub mod error;
pub mod evaluation;
pub mod fpgm;
pub mod linalg;
pub mod projections;
pub mod selection;
pub mod solver;
pub mod synthdata;

pub use error::{NcaaError, Result};
pub use linalg::{DenseMatrix, RngStream};
