use crate::model::{elasticity_bounds, MarketModel, UtilityModel};

/// Explicit envelope functions for `p_bar / I0` and the controls.
///
/// `r3(t) <= p_bar(t, y) / I0(y) <= r4(t)`, obtained by integrating exponential bounds on
/// `E[I0(Y_s)] / I0(y)` against the discount `e^{-r (s - t)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PBarBounds {
    r: f64,
    a: f64,
    b: f64,
    horizon: f64,
}

/// Lower bound `N(-x) >= e^{-2 x^2} / 4` for the standard normal tail, `x >= 0`.
pub fn gaussian_tail_lower(x: f64) -> f64 {
    0.25 * (-2.0 * x * x).exp()
}

impl PBarBounds {
    pub fn new(market: &MarketModel, utility: &UtilityModel, rho_norm: f64) -> Self {
        let th2 = market.theta() * market.theta();
        let r = market.r();
        let r1 = utility.r1();
        let base = (r + 0.5 * th2 + rho_norm) / r1;
        Self {
            r,
            a: base + 1.5 * th2 / (r1 * r1),
            b: base + 0.5 * th2 / (r1 * r1),
            horizon: market.horizon(),
        }
    }

    /// `r3(t) = (1/2) [ (1 - e^{-(r+a) tau}) / (r+a) + e^{-(r+a) tau} ]`.
    pub fn r3(&self, t: f64) -> f64 {
        let tau = self.horizon - t;
        let k = self.r + self.a;
        let e = (-k * tau).exp();
        0.5 * ((1.0 - e) / k + e)
    }

    /// `r4(t) = 2 [ (e^{(b-r) tau} - 1) / (b-r) + e^{(b-r) tau} ]`.
    pub fn r4(&self, t: f64) -> f64 {
        let tau = self.horizon - t;
        let k = self.b - self.r;
        let e = (k * tau).exp();
        let integral = if k.abs() < 1e-12 { tau } else { (e - 1.0) / k };
        2.0 * (integral + e)
    }
}

/// Node-wise envelopes for `pi*`: `(theta / (sigma r2(t)), theta / (sigma r1(t)))`.
pub fn pi_envelope(market: &MarketModel, utility: &UtilityModel, kappa: f64, t: f64) -> (f64, f64) {
    let (r1t, r2t) = elasticity_bounds(utility, kappa, t, market.horizon());
    let k = market.theta() / market.sigma();
    (k / r2t, k / r1t)
}

/// Node-wise envelopes for `-p_bar_y / p_bar`: `(e^{-kappa tau} / r2, e^{kappa tau} / r1)`.
pub fn log_slope_envelope(market: &MarketModel, utility: &UtilityModel, kappa: f64, t: f64) -> (f64, f64) {
    let (r1t, r2t) = elasticity_bounds(utility, kappa, t, market.horizon());
    (1.0 / r2t, 1.0 / r1t)
}
