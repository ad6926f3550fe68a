//! Market, discount and utility inputs.

mod discount;
mod market;
mod utility;

pub use discount::{DiscountFn, DiscountKind, DiscountModel};
pub use market::MarketModel;
pub use utility::{elasticity_bounds, UtilityKind, UtilityModel, Y_LIMIT};
