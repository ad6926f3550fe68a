//! The operator `F` and its fixed point `rho_bar`.

mod iteration;
mod operator;

pub use iteration::{iterate, IterationSettings, RhoField};
pub use operator::{
    apply_f, delta_slice, kappa_default, solve_delta_family, DeltaFamily, DeltaSlice, OperatorContext,
};
