use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed_point::{IterationSettings, OperatorContext};
use crate::grid_pde::{Boundary, Grid, ThetaScheme};
use crate::model::{DiscountModel, MarketModel, UtilityKind, UtilityModel};
use crate::montecarlo::SimSpec;
use crate::verify::VerifySettings;

/// Number of Gaussian standard deviations of `theta W_T` covered by the derived `y`-range.
pub const Y_SIGMAS: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub r: f64,
    pub mu: f64,
    pub sigma: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiscountSection {
    Exponential { rate: f64 },
    Hyperbolic { alpha: f64, beta: f64 },
    PseudoExponential { weights: Vec<f64>, rates: Vec<f64> },
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilitySection {
    Crra {
        gamma: f64,
        r1: Option<f64>,
        r2: Option<f64>,
    },
    Log {
        r1: Option<f64>,
        r2: Option<f64>,
    },
    MixedPower {
        alpha: f64,
        gamma1: f64,
        gamma2: f64,
        r1: Option<f64>,
        r2: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_t: usize,
    pub n_y: usize,
    /// Wealth range that the `y`-grid must cover.
    pub x_lo: f64,
    pub x_hi: f64,
    /// Initial wealth for `simulate` and the Monte Carlo checks.
    pub x0: f64,
    /// Explicit `y` limits; both or neither.
    pub y_min: Option<f64>,
    pub y_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySetting {
    LogLinear,
    Linear,
    ZeroGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub boundary: BoundarySetting,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = IterationSettings::default();
        Self {
            tol: s.tol,
            max_iter: s.max_iter,
            damping: s.damping,
            boundary: BoundarySetting::LogLinear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub antithetic: bool,
    /// Paths written to `paths.csv`.
    pub export_paths: usize,
    /// Time-step stride of `paths.csv`.
    pub stride: usize,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            dt: 1e-3,
            seed: 42,
            antithetic: false,
            export_paths: 100,
            stride: 10,
        }
    }
}

/// Sizes of the verification checks; defaults follow [`VerifySettings::new`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub j_paths: Option<usize>,
    pub identity_paths: Option<usize>,
    pub f_paths: Option<usize>,
    pub perturbation_paths: Option<usize>,
    pub perturbation_dt: Option<f64>,
    pub epsilons: Option<Vec<f64>>,
    pub refinement: Option<bool>,
    pub skip_mc: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// Times of the `(t, x)` value table.
    pub value_times: usize,
    /// Wealth levels of the `(t, x)` value table.
    pub value_wealths: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            value_times: 11,
            value_wealths: 21,
        }
    }
}

/// A complete run configuration as read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub market: MarketSection,
    pub discount: DiscountSection,
    pub utility: UtilitySection,
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub outputs: OutputSection,
}

/// Validated model objects built from a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Resolved {
    pub market: MarketModel,
    pub discount: DiscountModel,
    pub utility: UtilityModel,
    pub grid: Arc<Grid>,
    pub scheme: ThetaScheme,
    pub iteration: IterationSettings,
}

impl Resolved {
    pub fn context(&self) -> Result<OperatorContext> {
        OperatorContext::new(
            self.market,
            self.discount.clone(),
            self.utility,
            self.grid.clone(),
            self.scheme,
        )
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::param(name, "must be finite and > 0"));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn utility(&self) -> Result<UtilityModel> {
        let (kind, r1, r2) = match self.utility {
            UtilitySection::Crra { gamma, r1, r2 } => (UtilityKind::Crra { gamma }, r1, r2),
            UtilitySection::Log { r1, r2 } => (UtilityKind::Log, r1, r2),
            UtilitySection::MixedPower {
                alpha,
                gamma1,
                gamma2,
                r1,
                r2,
            } => (
                UtilityKind::MixedPower {
                    alpha,
                    gamma1,
                    gamma2,
                },
                r1,
                r2,
            ),
        };
        let base = match kind {
            UtilityKind::Crra { gamma } => UtilityModel::crra(gamma)?,
            UtilityKind::Log => UtilityModel::log()?,
            UtilityKind::MixedPower {
                alpha,
                gamma1,
                gamma2,
            } => UtilityModel::mixed_power(alpha, gamma1, gamma2)?,
        };
        match (r1, r2) {
            (None, None) => Ok(base),
            (a, b) => UtilityModel::with_bounds(kind, a.unwrap_or(base.r1()), b.unwrap_or(base.r2())),
        }
    }

    fn discount(&self) -> Result<DiscountModel> {
        let t = self.market.horizon;
        match &self.discount {
            DiscountSection::Exponential { rate } => DiscountModel::exponential(*rate, t),
            DiscountSection::Hyperbolic { alpha, beta } => DiscountModel::hyperbolic(*alpha, *beta, t),
            DiscountSection::PseudoExponential { weights, rates } => {
                DiscountModel::pseudo_exponential(weights.clone(), rates.clone(), t)
            }
            DiscountSection::None => DiscountModel::none(t),
        }
    }

    /// `[ln U'(x_hi) - w, ln U'(x_lo) + w]` with
    /// `w = 6 theta sqrt(T) + (|rho| + r + theta^2 / 2) T`, unless given explicitly.
    pub fn y_limits(
        &self,
        market: &MarketModel,
        discount: &DiscountModel,
        utility: &UtilityModel,
    ) -> Result<(f64, f64)> {
        let g = &self.grid;
        match (g.y_min, g.y_max) {
            (Some(a), Some(b)) => return Ok((a, b)),
            (None, None) => {}
            _ => return Err(Error::param("grid.y_min", "give both y_min and y_max or neither")),
        }
        let t = market.horizon();
        let th = market.theta().abs();
        let w = Y_SIGMAS * th * t.sqrt() + (discount.rho_norm() + market.r() + market.half_theta_sq()) * t;
        let lo = utility.u_prime(g.x_hi)?.ln() - w;
        let hi = utility.u_prime(g.x_lo)?.ln() + w;
        Ok((lo, hi))
    }

    /// Re-validates every numeric constraint and builds the model objects.
    pub fn resolve(&self) -> Result<Resolved> {
        let m = &self.market;
        let market = MarketModel::new(m.r, m.mu, m.sigma, m.horizon)?;
        let discount = self.discount()?;
        let utility = self.utility()?;
        let g = &self.grid;
        positive("grid.x_lo", g.x_lo)?;
        positive("grid.x0", g.x0)?;
        if !(g.x_hi.is_finite() && g.x_hi > g.x_lo) {
            return Err(Error::param("grid.x_hi", "must be finite and > x_lo"));
        }
        if !(g.x0 >= g.x_lo && g.x0 <= g.x_hi) {
            return Err(Error::param("grid.x0", "must lie in [x_lo, x_hi]"));
        }
        let (y_min, y_max) = self.y_limits(&market, &discount, &utility)?;
        let grid = Arc::new(Grid::uniform(m.horizon, g.n_t, y_min, y_max, g.n_y)?);
        let s = &self.solver;
        positive("solver.tol", s.tol)?;
        if !(s.damping > 0.0 && s.damping <= 1.0) {
            return Err(Error::param("solver.damping", "must lie in (0, 1]"));
        }
        if s.max_iter == 0 {
            return Err(Error::param("solver.max_iter", "must be > 0"));
        }
        let mc = &self.mc;
        positive("mc.dt", mc.dt)?;
        if mc.n_paths == 0 {
            return Err(Error::param("mc.n_paths", "must be > 0"));
        }
        if mc.stride == 0 {
            return Err(Error::param("mc.stride", "must be > 0"));
        }
        let boundary = match s.boundary {
            BoundarySetting::LogLinear => Boundary::LogLinear,
            BoundarySetting::Linear => Boundary::Linear,
            BoundarySetting::ZeroGradient => Boundary::ZeroGradient,
        };
        Ok(Resolved {
            market,
            discount,
            utility,
            grid,
            scheme: ThetaScheme {
                boundary,
                ..ThetaScheme::default()
            },
            iteration: IterationSettings {
                tol: s.tol,
                max_iter: s.max_iter,
                damping: s.damping,
            },
        })
    }

    pub fn sim_spec(&self, t0: f64) -> SimSpec {
        SimSpec {
            t0,
            dt: self.mc.dt,
            n_paths: self.mc.n_paths,
            seed: self.mc.seed,
            antithetic: self.mc.antithetic,
        }
    }

    pub fn verify_settings(&self) -> VerifySettings {
        let g = &self.grid;
        let v = &self.verify;
        let mut s = VerifySettings::new((g.x_lo, g.x_hi), g.x0, self.mc.seed);
        s.j_paths = v.j_paths.unwrap_or(self.mc.n_paths);
        s.j_dt = self.mc.dt;
        if let Some(n) = v.identity_paths {
            s.identity_paths = n;
        }
        if let Some(n) = v.f_paths {
            s.f_paths = n;
        }
        if let Some(n) = v.perturbation_paths {
            s.perturbation_paths = n;
        }
        if let Some(dt) = v.perturbation_dt {
            s.perturbation_dt = dt;
        }
        if let Some(e) = &v.epsilons {
            s.epsilons = e.clone();
        }
        if let Some(r) = v.refinement {
            s.refinement = r;
        }
        if let Some(k) = v.skip_mc {
            s.skip_mc = k;
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
        [market]
        r = 0.03
        mu = 0.09
        sigma = 0.2
        horizon = 1.0

        [discount]
        kind = "hyperbolic"
        alpha = 1.0
        beta = 2.0

        [utility]
        kind = "crra"
        gamma = 0.5

        [grid]
        n_t = 41
        n_y = 41
        x_lo = 0.2
        x_hi = 5.0
        x0 = 1.0
    "#;

    #[test]
    fn parses_and_resolves_with_defaults() {
        let c = RunConfig::from_toml(BASE).unwrap();
        assert_eq!(c.solver, SolverSection::default());
        let r = c.resolve().unwrap();
        let (lo, hi) = (r.grid.y_min(), r.grid.y_max());
        let w = 6.0 * 0.3 + (2.0 + 0.03 + 0.045);
        assert!((lo - (-0.5 * 5f64.ln() - w)).abs() < 1e-12);
        assert!((hi - (-0.5 * 0.2f64.ln() + w)).abs() < 1e-12);
        assert_eq!(c.verify_settings().j_paths, 100_000);
    }

    #[test]
    fn round_trips_through_toml() {
        let c = RunConfig::from_toml(BASE).unwrap();
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = BASE.replace("gamma = 0.5", "gamma = 0.5\nbogus = 1");
        assert!(matches!(RunConfig::from_toml(&bad), Err(Error::Config(_))));
        let bad = format!("{BASE}\n[extra]\na = 1\n");
        assert!(RunConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn names_the_invalid_field() {
        let bad = BASE.replace("sigma = 0.2", "sigma = 0.0");
        let err = RunConfig::from_toml(&bad).unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("market.sigma"), "{err}");
        let bad = BASE.replace("x0 = 1.0", "x0 = 9.0");
        let err = RunConfig::from_toml(&bad).unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("grid.x0"), "{err}");
    }

    #[test]
    fn overstated_risk_aversion_bound_fails_validation() {
        let bad = BASE.replace("gamma = 0.5", "gamma = 0.5\nr1 = 0.6\nr2 = 0.7");
        let err = RunConfig::from_toml(&bad).unwrap().resolve().unwrap_err();
        assert!(
            matches!(err, Error::InvalidParameter { .. } | Error::Domain(_)),
            "{err}"
        );
    }
}
