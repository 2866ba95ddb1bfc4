//! Newton methods for invariant tori, invariant splittings and whiskers of
//! exact symplectic maps, with every step diagonal on a grid or in Fourier
//! space.

pub mod error;
pub mod fourier;
pub mod geometry;
pub mod noncst;
pub mod splitting;
pub mod torus;
pub mod whisker;

pub use error::{Error, Result};
pub use fourier::{FourierSeries, Grid, RotationVector};
