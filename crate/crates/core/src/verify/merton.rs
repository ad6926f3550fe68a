use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::MarketModel;

/// Closed-form Merton solution for CRRA utility `x^gamma / gamma` under exponential discounting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MertonOracle {
    pub gamma: f64,
    pub rho0: f64,
    pub r: f64,
    pub theta: f64,
    pub sigma: f64,
    pub horizon: f64,
}

impl MertonOracle {
    pub fn new(market: &MarketModel, gamma: f64, rho0: f64) -> Result<Self> {
        if !(gamma < 1.0 && gamma != 0.0 && gamma.is_finite()) {
            return Err(Error::param("gamma", "must be finite, < 1 and non-zero"));
        }
        if !rho0.is_finite() {
            return Err(Error::param("rho0", "must be finite"));
        }
        Ok(Self {
            gamma,
            rho0,
            r: market.r(),
            theta: market.theta(),
            sigma: market.sigma(),
            horizon: market.horizon(),
        })
    }

    /// `nu = (rho0 - gamma r - gamma theta^2 / (2 (1 - gamma))) / (1 - gamma)`.
    pub fn nu(&self) -> f64 {
        let g = self.gamma;
        (self.rho0 - g * self.r - g * self.theta * self.theta / (2.0 * (1.0 - g))) / (1.0 - g)
    }

    /// Constant stock fraction `theta / (sigma (1 - gamma))`.
    pub fn pi(&self) -> f64 {
        self.theta / (self.sigma * (1.0 - self.gamma))
    }

    /// Annuity factor solving `A' = nu A - 1`, `A(T) = 1`.
    pub fn annuity(&self, t: f64) -> f64 {
        let nu = self.nu();
        let tau = self.horizon - t;
        if (nu * tau).abs() < 1e-8 {
            // series of (1 + (nu - 1) e^{-nu tau}) / nu around nu = 0
            1.0 + tau - nu * tau * (1.0 + 0.5 * tau) + nu * nu * tau * tau * (0.5 + tau / 6.0)
        } else {
            (1.0 + (nu - 1.0) * (-nu * tau).exp()) / nu
        }
    }

    /// The same ODE integrated backward from `T` by classical RK4 with `steps` steps.
    pub fn annuity_rk4(&self, t: f64, steps: usize) -> f64 {
        let nu = self.nu();
        let f = |a: f64| nu * a - 1.0;
        let h = (t - self.horizon) / steps as f64;
        let mut a = 1.0;
        for _ in 0..steps {
            let k1 = f(a);
            let k2 = f(a + 0.5 * h * k1);
            let k3 = f(a + 0.5 * h * k2);
            let k4 = f(a + h * k3);
            a += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        a
    }

    /// Consumption-to-wealth ratio `1 / A(t)`.
    pub fn c(&self, t: f64) -> f64 {
        1.0 / self.annuity(t)
    }

    /// Value function `A(t)^{1-gamma} x^gamma / gamma`.
    pub fn value(&self, t: f64, x: f64) -> f64 {
        self.annuity(t).powf(1.0 - self.gamma) * x.powf(self.gamma) / self.gamma
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle(gamma: f64, rho0: f64) -> MertonOracle {
        let m = MarketModel::new(0.03, 0.09, 0.2, 1.0).unwrap();
        MertonOracle::new(&m, gamma, rho0).unwrap()
    }

    #[test]
    fn reference_nu() {
        let o = oracle(0.5, 0.1);
        assert!((o.nu() - 0.08).abs() < 1e-15);
        assert!((o.pi() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_rk4() {
        for (g, rho) in [(0.5, 0.1), (-1.0, 0.05), (0.3, 0.0)] {
            let o = oracle(g, rho);
            for t in [0.0, 0.3, 0.77, 1.0] {
                assert!((o.annuity(t) - o.annuity_rk4(t, 1000)).abs() < 1e-10);
            }
            assert_eq!(o.c(1.0), 1.0);
            assert!(o.annuity(0.0) > 0.0);
        }
    }

    #[test]
    fn degenerate_nu_is_linear() {
        // choose rho0 so that nu = 0 exactly
        let base = oracle(0.5, 0.0);
        let rho0 = -base.nu() * 0.5;
        let o = oracle(0.5, rho0);
        assert!(o.nu().abs() < 1e-15);
        for t in [0.0, 0.5, 1.0] {
            assert!((o.annuity(t) - (1.0 + (1.0 - t))).abs() < 1e-14);
            assert!((o.annuity(t) - o.annuity_rk4(t, 200)).abs() < 1e-10);
        }
        let near = oracle(0.5, rho0 + 1e-10);
        assert!((near.annuity(0.0) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn high_risk_aversion_pi() {
        let o = oracle(-1.0, 0.1);
        assert!((o.pi() - o.theta / (2.0 * o.sigma)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_gamma() {
        let m = MarketModel::new(0.03, 0.09, 0.2, 1.0).unwrap();
        assert!(MertonOracle::new(&m, 1.0, 0.1).is_err());
        assert!(MertonOracle::new(&m, 0.0, 0.1).is_err());
    }
}
