//! Spectra of the conformal Laplacian `Y_g = −Δ_g + c R_g` on discretized
//! flat tori, first-order eigenvalue perturbation under metric deformation,
//! and spectral arithmetic for product manifolds with many negative
//! eigenvalues.

pub mod eigen;
pub mod error;
pub mod field;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod operators;
pub mod perturbation;
pub mod product;
pub mod recipes;
pub mod sparse;

pub use error::{Error, Result};
pub use field::{ChristoffelField, CovectorField, MetricField, ScalarField, SymTensorField};
pub use grid::{DiffScheme, Grid};
