//! Periodic functions on `T^l` held on a regular grid and as Fourier
//! coefficients, with the operators that are diagonal in one of the two
//! representations.

mod cohomology;
mod grid;
mod io;
mod rotation;
mod series;

pub use cohomology::{
    solve_cohomology_constant, solve_cohomology_scaled, CohomologyKind, CohomologyOptions, CohomologySolution,
};
pub use grid::Grid;
pub use io::{read_all_fts, read_fts, write_fts, FtsBlock, FTS_MAGIC};
pub use rotation::{parse_frequency, DiophantineReport, RotationVector, GOLDEN, SQRT2};
pub use series::{row_major, FourierSeries};

#[cfg(test)]
mod tests;
