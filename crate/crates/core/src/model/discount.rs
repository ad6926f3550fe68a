use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Shared closure type for user-supplied discount functions of `(t, s)`.
pub type DiscountFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Families of discount functions `h(t, s)`, `0 <= t <= s <= T`.
#[derive(Clone)]
pub enum DiscountKind {
    /// `h(t,s) = exp(-rate (s - t))`.
    Exponential { rate: f64 },
    /// `h(t,s) = (1 + beta (s - t))^(-alpha)`.
    Hyperbolic { alpha: f64, beta: f64 },
    /// Normalized mixture `sum_i w_i exp(-rate_i (s - t)) / sum_i w_i`.
    PseudoExponential { weights: Vec<f64>, rates: Vec<f64> },
    /// A user-supplied pair `(h, dh/dt)`.
    Custom { h: DiscountFn, dh_dt: DiscountFn },
}

impl fmt::Debug for DiscountKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiscountKind::Exponential { rate } => f.debug_struct("Exponential").field("rate", rate).finish(),
            DiscountKind::Hyperbolic { alpha, beta } => f
                .debug_struct("Hyperbolic")
                .field("alpha", alpha)
                .field("beta", beta)
                .finish(),
            DiscountKind::PseudoExponential { weights, rates } => f
                .debug_struct("PseudoExponential")
                .field("weights", weights)
                .field("rates", rates)
                .finish(),
            DiscountKind::Custom { .. } => f.write_str("Custom"),
        }
    }
}

/// A discount function on `D = {0 <= t <= s <= T}` together with its rate bounds.
#[derive(Debug, Clone)]
pub struct DiscountModel {
    kind: DiscountKind,
    horizon: f64,
    rho_norm: f64,
    rho_min: f64,
    rho_max: f64,
}

const SAMPLES: usize = 101;
const DOMAIN_SLACK: f64 = 1e-12;

impl DiscountModel {
    pub fn exponential(rate: f64, horizon: f64) -> Result<Self> {
        Self::new(DiscountKind::Exponential { rate }, horizon)
    }

    pub fn hyperbolic(alpha: f64, beta: f64, horizon: f64) -> Result<Self> {
        Self::new(DiscountKind::Hyperbolic { alpha, beta }, horizon)
    }

    /// No discounting at all, `h == 1`.
    pub fn none(horizon: f64) -> Result<Self> {
        Self::exponential(0.0, horizon)
    }

    pub fn pseudo_exponential(weights: Vec<f64>, rates: Vec<f64>, horizon: f64) -> Result<Self> {
        Self::new(DiscountKind::PseudoExponential { weights, rates }, horizon)
    }

    pub fn custom<H, D>(h: H, dh_dt: D, horizon: f64) -> Result<Self>
    where
        H: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(
            DiscountKind::Custom {
                h: Arc::new(h),
                dh_dt: Arc::new(dh_dt),
            },
            horizon,
        )
    }

    pub fn new(kind: DiscountKind, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::param("horizon", "must be finite and > 0"));
        }
        let (rho_min, rho_max, rho_norm) = match &kind {
            DiscountKind::Exponential { rate } => {
                if !rate.is_finite() {
                    return Err(Error::param("discount.rate", "must be finite"));
                }
                (*rate, *rate, rate.abs())
            }
            DiscountKind::Hyperbolic { alpha, beta } => {
                if !(alpha.is_finite() && *alpha >= 0.0) {
                    return Err(Error::param("discount.alpha", "must be finite and >= 0"));
                }
                if !(beta.is_finite() && *beta >= 0.0) {
                    return Err(Error::param("discount.beta", "must be finite and >= 0"));
                }
                let hi = alpha * beta;
                let lo = hi / (1.0 + beta * horizon);
                (lo, hi, hi)
            }
            DiscountKind::PseudoExponential { weights, rates } => {
                if weights.is_empty() || weights.len() != rates.len() {
                    return Err(Error::param(
                        "discount.weights",
                        "must be non-empty and match discount.rates in length",
                    ));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                    return Err(Error::param("discount.weights", "entries must be > 0"));
                }
                if rates.iter().any(|r| !r.is_finite()) {
                    return Err(Error::param("discount.rates", "entries must be finite"));
                }
                // the rate is a weighted mean whose weights drift toward the smallest rate,
                // so it is monotone decreasing in s - t
                let at = |tau: f64| mixture_rate(weights, rates, tau);
                let (lo, hi) = (at(horizon), at(0.0));
                (lo, hi, lo.abs().max(hi.abs()))
            }
            DiscountKind::Custom { h, dh_dt } => {
                let (lo, hi, sup) = sample_custom(h.as_ref(), dh_dt.as_ref(), horizon)?;
                let pad = 0.05 * sup;
                (lo - pad, hi + pad, 1.05 * sup)
            }
        };
        Ok(Self {
            kind,
            horizon,
            rho_norm,
            rho_min,
            rho_max,
        })
    }

    pub fn kind(&self) -> &DiscountKind {
        &self.kind
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `||rho|| = sup_D |rho_h|`.
    pub fn rho_norm(&self) -> f64 {
        self.rho_norm
    }

    /// `(min_D rho_h, max_D rho_h)`.
    pub fn rho_range(&self) -> (f64, f64) {
        (self.rho_min, self.rho_max)
    }

    /// The constant rate when the discount function is exponential.
    pub fn exponential_rate(&self) -> Option<f64> {
        match self.kind {
            DiscountKind::Exponential { rate } => Some(rate),
            _ => None,
        }
    }

    /// Discount factor `h(t, s)`. No domain check.
    #[inline]
    pub fn h(&self, t: f64, s: f64) -> f64 {
        let tau = s - t;
        match &self.kind {
            DiscountKind::Exponential { rate } => (-rate * tau).exp(),
            DiscountKind::Hyperbolic { alpha, beta } => (1.0 + beta * tau).powf(-alpha),
            DiscountKind::PseudoExponential { weights, rates } => {
                let total: f64 = weights.iter().sum();
                weights
                    .iter()
                    .zip(rates)
                    .map(|(w, r)| w * (-r * tau).exp())
                    .sum::<f64>()
                    / total
            }
            DiscountKind::Custom { h, .. } => h(t, s),
        }
    }

    /// `dh/dt (t, s)`. No domain check.
    #[inline]
    pub fn dh_dt(&self, t: f64, s: f64) -> f64 {
        let tau = s - t;
        match &self.kind {
            DiscountKind::Exponential { rate } => rate * (-rate * tau).exp(),
            DiscountKind::Hyperbolic { alpha, beta } => alpha * beta * (1.0 + beta * tau).powf(-alpha - 1.0),
            DiscountKind::PseudoExponential { weights, rates } => {
                let total: f64 = weights.iter().sum();
                weights
                    .iter()
                    .zip(rates)
                    .map(|(w, r)| w * r * (-r * tau).exp())
                    .sum::<f64>()
                    / total
            }
            DiscountKind::Custom { dh_dt, .. } => dh_dt(t, s),
        }
    }

    /// Instantaneous discount rate `rho_h(t,s) = (dh/dt)(t,s) / h(t,s)`.
    pub fn rho_h(&self, t: f64, s: f64) -> Result<f64> {
        if !(t >= -DOMAIN_SLACK && t <= s + DOMAIN_SLACK && s <= self.horizon + DOMAIN_SLACK) {
            return Err(Error::Domain(format!(
                "(t, s) = ({t}, {s}) outside 0 <= t <= s <= {}",
                self.horizon
            )));
        }
        Ok(self.rho_h_unchecked(t, s))
    }

    #[inline]
    pub(crate) fn rho_h_unchecked(&self, t: f64, s: f64) -> f64 {
        match &self.kind {
            DiscountKind::Exponential { rate } => *rate,
            DiscountKind::Hyperbolic { alpha, beta } => alpha * beta / (1.0 + beta * (s - t)),
            _ => self.dh_dt(t, s) / self.h(t, s),
        }
    }
}

fn mixture_rate(weights: &[f64], rates: &[f64], tau: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (w, r) in weights.iter().zip(rates) {
        let e = w * (-r * tau).exp();
        num += r * e;
        den += e;
    }
    num / den
}

fn sample_custom(
    h: &(dyn Fn(f64, f64) -> f64 + Send + Sync),
    dh_dt: &(dyn Fn(f64, f64) -> f64 + Send + Sync),
    horizon: f64,
) -> Result<(f64, f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut sup = 0.0_f64;
    for a in 0..SAMPLES {
        let t = horizon * a as f64 / (SAMPLES - 1) as f64;
        let diag = h(t, t);
        if (diag - 1.0).abs() > 1e-12 {
            return Err(Error::param(
                "discount.h",
                format!("h(t,t) must equal 1, got h({t},{t}) = {diag}"),
            ));
        }
        for b in 0..SAMPLES {
            let s = t + (horizon - t) * b as f64 / (SAMPLES - 1) as f64;
            let hv = h(t, s);
            let dv = dh_dt(t, s);
            if !(hv.is_finite() && hv > 0.0) {
                return Err(Error::param(
                    "discount.h",
                    format!("h must be positive and finite, got h({t},{s}) = {hv}"),
                ));
            }
            if !dv.is_finite() {
                return Err(Error::param(
                    "discount.dh_dt",
                    format!("dh/dt not finite at ({t},{s})"),
                ));
            }
            let rho = dv / hv;
            lo = lo.min(rho);
            hi = hi.max(rho);
            sup = sup.max(rho.abs());
        }
    }
    Ok((lo, hi, sup))
}
