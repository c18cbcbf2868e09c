//! Shared fixtures for the kernel benchmarks.

use mixlab_core::covariance::sample_generators;
use mixlab_core::{Grid, VectorField};

/// A smooth random vector field on a periodic cube of `n` nodes per side.
pub fn vector_fixture(n: usize) -> VectorField {
    let grid = Grid::periodic_cube(n, std::f64::consts::TAU).expect("valid grid");
    sample_generators(&grid, 7, 1).remove(0)
}
