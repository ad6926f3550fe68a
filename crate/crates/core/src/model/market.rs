use crate::error::{Error, Result};

/// One riskless asset and one geometric-Brownian stock over a fixed horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketModel {
    r: f64,
    mu: f64,
    sigma: f64,
    horizon: f64,
}

impl MarketModel {
    pub fn new(r: f64, mu: f64, sigma: f64, horizon: f64) -> Result<Self> {
        for (name, v) in [
            ("market.r", r),
            ("market.mu", mu),
            ("market.sigma", sigma),
            ("market.horizon", horizon),
        ] {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        if sigma <= 0.0 {
            return Err(Error::param("market.sigma", "must be > 0"));
        }
        if horizon <= 0.0 {
            return Err(Error::param("market.horizon", "must be > 0"));
        }
        if r <= 0.0 {
            return Err(Error::param("market.r", "must be > 0"));
        }
        Ok(Self {
            r,
            mu,
            sigma,
            horizon,
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Market price of risk `(mu - r) / sigma`, recomputed on every call.
    pub fn theta(&self) -> f64 {
        (self.mu - self.r) / self.sigma
    }

    /// `theta^2 / 2`, the diffusion coefficient of the log-marginal-value dynamics.
    pub fn half_theta_sq(&self) -> f64 {
        let th = self.theta();
        0.5 * th * th
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_is_derived() {
        let m = MarketModel::new(0.03, 0.09, 0.2, 1.0).unwrap();
        assert!((m.theta() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            MarketModel::new(0.03, 0.09, 0.0, 1.0),
            Err(Error::InvalidParameter { ref name, .. }) if name == "market.sigma"
        ));
        assert!(MarketModel::new(0.03, 0.09, 0.2, 0.0).is_err());
        assert!(MarketModel::new(0.0, 0.09, 0.2, 1.0).is_err());
        assert!(MarketModel::new(0.03, f64::NAN, 0.2, 1.0).is_err());
    }
}
