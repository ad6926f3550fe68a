//! Tensor grids in `(t, y)` and a backward solver for linear parabolic PDEs.

mod field;
mod grid;
mod solver;

pub use field::{d2_dy2_row, d_dy_row, hermite_cell, hermite_row, ScalarField2D};
pub use grid::Grid;
pub use solver::{
    solve_backward, solve_backward_fn, sweep_backward, thomas, Boundary, Coefficients, FnCoefficients,
    ThetaScheme,
};
