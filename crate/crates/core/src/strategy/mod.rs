//! `p_bar`, the feedback controls, the marginal value and the value function.

mod bounds;
mod feedback;
mod pbar;
mod value;

pub use bounds::{gaussian_tail_lower, log_slope_envelope, pi_envelope, PBarBounds};
pub use feedback::{Controls, FeedbackMap};
pub use pbar::{compute_pbar, controls_from_pbar, PBarField, StrategySurface};
pub use value::{ValueRow, ValueSurface};
