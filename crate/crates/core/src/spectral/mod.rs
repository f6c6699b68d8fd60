//! Periodic grids, transforms, spectral differentiation, dealiasing, Poisson
//! solves and Sobolev norms.

mod field;
mod grid;
pub mod ops;
pub mod transform;

pub use field::FourierField;
pub use grid::{GridSpec, MAX_POINTS};
pub use ops::{
    curl, dealias, derivative, divergence, gradient, laplacian, sobolev_norm, solenoidal_projection,
    solve_poisson, transform_roundtrip,
};
