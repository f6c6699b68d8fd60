//! Pseudo-spectral 2D/3D incompressible Euler solvers on periodic domains,
//! co-evolution of Lax-pair auxiliary fields, and spectral analysis of the
//! frozen-coefficient Lax operator.

pub mod csv;
pub mod error;
pub mod euler2d;
pub mod euler3d;
pub mod lax;
pub mod par;
pub mod snapshot;
pub mod spectral;
pub mod spectrum;

pub use error::{ElaxError, Result};
pub use num_complex::Complex64;
