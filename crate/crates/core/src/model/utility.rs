use crate::error::{Error, Result};

/// Largest |y| for which `e^y` is evaluated.
pub const Y_LIMIT: f64 = 700.0;

const NEWTON_TOL: f64 = 1e-14;
const VALIDATION_POINTS: usize = 1000;

/// Supported utility families. All satisfy the Inada conditions with bounded relative risk aversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UtilityKind {
    /// `U(x) = x^gamma / gamma`, `gamma < 1`, `gamma != 0`.
    Crra { gamma: f64 },
    /// `U(x) = ln x`.
    Log,
    /// `U(x) = alpha x^g1 / g1 + (1 - alpha) x^g2 / g2`.
    MixedPower { alpha: f64, gamma1: f64, gamma2: f64 },
}

/// A utility function with declared relative-risk-aversion bounds `r1 <= -x U''/U' <= r2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityModel {
    kind: UtilityKind,
    r1: f64,
    r2: f64,
}

fn check_exponent(name: &str, g: f64) -> Result<()> {
    if !(g.is_finite() && g < 1.0 && g != 0.0) {
        return Err(Error::param(name, "must be finite, < 1 and != 0"));
    }
    Ok(())
}

impl UtilityModel {
    pub fn crra(gamma: f64) -> Result<Self> {
        check_exponent("utility.gamma", gamma)?;
        Self::with_bounds(UtilityKind::Crra { gamma }, 1.0 - gamma, 1.0 - gamma)
    }

    pub fn log() -> Result<Self> {
        Self::with_bounds(UtilityKind::Log, 1.0, 1.0)
    }

    pub fn mixed_power(alpha: f64, gamma1: f64, gamma2: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param("utility.alpha", "must lie in (0, 1)"));
        }
        check_exponent("utility.gamma1", gamma1)?;
        check_exponent("utility.gamma2", gamma2)?;
        let (a, b) = (1.0 - gamma1, 1.0 - gamma2);
        Self::with_bounds(
            UtilityKind::MixedPower {
                alpha,
                gamma1,
                gamma2,
            },
            a.min(b),
            a.max(b),
        )
    }

    /// Builds a model with explicitly declared bounds and validates it on a sample grid.
    pub fn with_bounds(kind: UtilityKind, r1: f64, r2: f64) -> Result<Self> {
        if !(r1.is_finite() && r1 > 0.0) {
            return Err(Error::param("utility.r1", "must be finite and > 0"));
        }
        if !(r2.is_finite() && r2 >= r1) {
            return Err(Error::param("utility.r2", "must be finite and >= r1"));
        }
        let m = Self { kind, r1, r2 };
        m.validate()?;
        Ok(m)
    }

    pub fn kind(&self) -> UtilityKind {
        self.kind
    }

    pub fn r1(&self) -> f64 {
        self.r1
    }

    pub fn r2(&self) -> f64 {
        self.r2
    }

    /// The CRRA exponent when the utility is a pure power (log counts as `gamma = 0`).
    pub fn crra_gamma(&self) -> Option<f64> {
        match self.kind {
            UtilityKind::Crra { gamma } => Some(gamma),
            UtilityKind::Log => Some(0.0),
            UtilityKind::MixedPower { .. } => None,
        }
    }

    /// Checks positivity, concavity, the elasticity bounds and inverse consistency on
    /// a log-spaced grid of `x` in `[1e-6, 1e6]`.
    pub fn validate(&self) -> Result<()> {
        let slack = 1e-12;
        for k in 0..VALIDATION_POINTS {
            let lx = (1e-6_f64).ln() + (1e12_f64).ln() * k as f64 / (VALIDATION_POINTS - 1) as f64;
            let x = lx.exp();
            let up = self.u_prime(x)?;
            let upp = self.u_second(x)?;
            if !(up > 0.0 && up.is_finite()) {
                return Err(Error::param("utility", format!("U'({x:e}) = {up} is not > 0")));
            }
            if !(upp < 0.0 && upp.is_finite()) {
                return Err(Error::param("utility", format!("U''({x:e}) = {upp} is not < 0")));
            }
            let rra = -x * upp / up;
            if rra < self.r1 * (1.0 - slack) {
                return Err(Error::param(
                    "utility.r1",
                    format!("risk aversion {rra} at x={x:e} is below r1 = {}", self.r1),
                ));
            }
            if rra > self.r2 * (1.0 + slack) {
                return Err(Error::param(
                    "utility.r2",
                    format!("risk aversion {rra} at x={x:e} exceeds r2 = {}", self.r2),
                ));
            }
            let back = self.u_prime(self.inv_marginal(up)?)?;
            if ((back - up) / up).abs() > 1e-10 {
                return Err(Error::param(
                    "utility",
                    format!("U'(I(w)) != w at w={up:e} (got {back:e})"),
                ));
            }
        }
        Ok(())
    }

    fn positive(x: f64) -> Result<()> {
        if x > 0.0 && x.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "utility evaluated at x = {x}; requires 0 < x < inf"
            )))
        }
    }

    pub fn u(&self, x: f64) -> Result<f64> {
        Self::positive(x)?;
        Ok(match self.kind {
            UtilityKind::Crra { gamma } => x.powf(gamma) / gamma,
            UtilityKind::Log => x.ln(),
            UtilityKind::MixedPower {
                alpha,
                gamma1,
                gamma2,
            } => alpha * x.powf(gamma1) / gamma1 + (1.0 - alpha) * x.powf(gamma2) / gamma2,
        })
    }

    pub fn u_prime(&self, x: f64) -> Result<f64> {
        Self::positive(x)?;
        Ok(match self.kind {
            UtilityKind::Crra { gamma } => x.powf(gamma - 1.0),
            UtilityKind::Log => 1.0 / x,
            UtilityKind::MixedPower {
                alpha,
                gamma1,
                gamma2,
            } => alpha * x.powf(gamma1 - 1.0) + (1.0 - alpha) * x.powf(gamma2 - 1.0),
        })
    }

    pub fn u_second(&self, x: f64) -> Result<f64> {
        Self::positive(x)?;
        Ok(match self.kind {
            UtilityKind::Crra { gamma } => (gamma - 1.0) * x.powf(gamma - 2.0),
            UtilityKind::Log => -1.0 / (x * x),
            UtilityKind::MixedPower {
                alpha,
                gamma1,
                gamma2,
            } => {
                alpha * (gamma1 - 1.0) * x.powf(gamma1 - 2.0)
                    + (1.0 - alpha) * (gamma2 - 1.0) * x.powf(gamma2 - 2.0)
            }
        })
    }

    /// Relative risk aversion `-x U''(x) / U'(x)`.
    pub fn rra(&self, x: f64) -> Result<f64> {
        Ok(-x * self.u_second(x)? / self.u_prime(x)?)
    }

    /// `I = (U')^{-1}`.
    pub fn inv_marginal(&self, w: f64) -> Result<f64> {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::Domain(format!("I evaluated at {w}; requires 0 < w < inf")));
        }
        self.i_from_log(w.ln())
    }

    /// `I(e^y)`, evaluated in log space.
    fn i_from_log(&self, y: f64) -> Result<f64> {
        let z = match self.kind {
            UtilityKind::Crra { gamma } => (y / (gamma - 1.0)).exp(),
            UtilityKind::Log => (-y).exp(),
            UtilityKind::MixedPower {
                alpha,
                gamma1,
                gamma2,
            } => mixed_inverse_log(alpha, gamma1, gamma2, y).exp(),
        };
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::Domain(format!(
                "I(e^{y}) = {z} is not representable; shrink the y-range"
            )));
        }
        Ok(z)
    }

    fn check_y(y: f64) -> Result<()> {
        if y.is_finite() && y.abs() <= Y_LIMIT {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "e^y overflows for y = {y}; |y| must stay below {Y_LIMIT}"
            )))
        }
    }

    /// `I0(y) = I(e^y)`.
    pub fn i0(&self, y: f64) -> Result<f64> {
        Self::check_y(y)?;
        self.i_from_log(y)
    }

    /// `U0(y) = U(I0(y))`.
    pub fn u0(&self, y: f64) -> Result<f64> {
        self.u(self.i0(y)?)
    }

    /// `I0'(y) = e^y / U''(I0(y))`.
    pub fn i0_prime(&self, y: f64) -> Result<f64> {
        let z = self.i0(y)?;
        match self.kind {
            UtilityKind::Crra { gamma } => Ok(z / (gamma - 1.0)),
            UtilityKind::Log => Ok(-z),
            UtilityKind::MixedPower { .. } => Ok(y.exp() / self.u_second(z)?),
        }
    }

    /// `U0'(y) = U'(I0(y)) I0'(y) = e^y I0'(y)`, strictly negative.
    pub fn u0_prime(&self, y: f64) -> Result<f64> {
        Ok(y.exp() * self.i0_prime(y)?)
    }
}

/// Solves `ln U'(e^l) = y` for `l` with a bracketed Newton iteration.
fn mixed_inverse_log(alpha: f64, g1: f64, g2: f64, y: f64) -> f64 {
    let (la, lb) = (alpha.ln(), (1.0 - alpha).ln());
    let (e1, e2) = (g1 - 1.0, g2 - 1.0);
    // single-term roots: a z^e = w  and  a z^e = w / 2
    let root = |lc: f64, e: f64, lw: f64| (lw - lc) / e;
    let mut lo = root(la, e1, y).max(root(lb, e2, y));
    let mut hi = root(la, e1, y - 2f64.ln()).max(root(lb, e2, y - 2f64.ln()));
    // f(l) = ln U'(e^l) - y, decreasing; f'(l) is the negative elasticity
    let eval = |l: f64| {
        let (a, b) = (la + e1 * l, lb + e2 * l);
        let m = a.max(b);
        let (ea, eb) = ((a - m).exp(), (b - m).exp());
        let s = ea + eb;
        (m + s.ln() - y, (e1 * ea + e2 * eb) / s)
    };
    let mut l = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (f, df) = eval(l);
        if f == 0.0 {
            return l;
        }
        if f > 0.0 {
            lo = l;
        } else {
            hi = l;
        }
        let mut next = l - f / df;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - l).abs() <= NEWTON_TOL * (1.0 + l.abs()) || hi - lo <= NEWTON_TOL {
            return next;
        }
        l = next;
    }
    l
}

/// Time-dependent elasticity bounds `(r1 e^{-kappa (T-t)}, r2 e^{kappa (T-t)})`.
pub fn elasticity_bounds(u: &UtilityModel, kappa: f64, t: f64, horizon: f64) -> (f64, f64) {
    let g = (kappa * (horizon - t)).exp();
    (u.r1() / g, u.r2() * g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mixed() -> UtilityModel {
        UtilityModel::mixed_power(0.5, 0.3, -1.0).unwrap()
    }

    #[test]
    fn crra_transforms() {
        let u = UtilityModel::crra(0.5).unwrap();
        for y in [-3.0_f64, -0.5, 0.0, 1.7] {
            let expect = (-2.0 * y).exp();
            assert!((u.i0(y).unwrap() / expect - 1.0).abs() < 1e-14);
        }
        assert!((u.i0(0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((u.u0(0.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(u.u0_prime(0.3).unwrap() < 0.0);
        assert_eq!((u.r1(), u.r2()), (0.5, 0.5));
    }

    #[test]
    fn mixed_power_inverse_consistency() {
        let u = mixed();
        assert_eq!((u.r1(), u.r2()), (0.7, 2.0));
        for k in 0..=200 {
            let y = -20.0 + 40.0 * k as f64 / 200.0;
            let z = u.i0(y).unwrap();
            let back = u.u_prime(z).unwrap();
            assert!((back / y.exp() - 1.0).abs() < 1e-10, "y={y}");
        }
    }

    #[test]
    fn u0_prime_matches_finite_difference() {
        for u in [
            UtilityModel::crra(-1.0).unwrap(),
            mixed(),
            UtilityModel::log().unwrap(),
        ] {
            for y in [-2.0, 0.0, 1.5] {
                let step = 1e-5;
                let fd = (u.u0(y + step).unwrap() - u.u0(y - step).unwrap()) / (2.0 * step);
                let an = u.u0_prime(y).unwrap();
                assert!((fd / an - 1.0).abs() < 1e-7, "{:?} y={y}", u.kind());
            }
        }
    }

    #[test]
    fn elasticity_bound_examples() {
        let u = UtilityModel::crra(0.5).unwrap();
        assert_eq!(elasticity_bounds(&u, 1.0, 1.0, 1.0), (0.5, 0.5));
        let (a, b) = elasticity_bounds(&u, 1.0, 0.0, 1.0);
        assert!((a - 0.18394).abs() < 1e-5);
        assert!((b - 0.5 * 1f64.exp()).abs() < 1e-14);
        assert_eq!(elasticity_bounds(&u, 0.0, 0.2, 1.0), (0.5, 0.5));
    }

    #[test]
    fn rejects_bad_inputs() {
        let u = UtilityModel::crra(0.5).unwrap();
        assert!(matches!(u.u(0.0), Err(Error::Domain(_))));
        assert!(matches!(u.u(-1.0), Err(Error::Domain(_))));
        assert!(matches!(u.i0(800.0), Err(Error::Domain(_))));
        assert!(UtilityModel::crra(1.0).is_err());
        assert!(UtilityModel::crra(0.0).is_err());
        assert!(UtilityModel::mixed_power(1.2, 0.3, -1.0).is_err());
        // declared r1 above the true elasticity
        let bad = UtilityModel::with_bounds(UtilityKind::Crra { gamma: 0.5 }, 0.6, 0.7);
        assert!(matches!(bad, Err(Error::InvalidParameter { ref name, .. }) if name == "utility.r1"));
    }

    #[test]
    fn i0_log_derivative_bounds() {
        for u in [mixed(), UtilityModel::crra(0.5).unwrap()] {
            for k in 0..=100 {
                let y = -10.0 + 0.2 * k as f64;
                let q = -u.i0_prime(y).unwrap() / u.i0(y).unwrap();
                assert!(q >= 1.0 / u.r2() - 1e-12 && q <= 1.0 / u.r1() + 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn i0_growth_is_bounded(y in -15.0f64..15.0, d in -5.0f64..5.0) {
            let u = mixed();
            let z = y + d;
            let ratio = u.i0(z).unwrap() / u.i0(y).unwrap();
            prop_assert!(ratio <= (d.abs() / u.r1()).exp() * (1.0 + 1e-12));
        }

        #[test]
        fn mixed_inverse_round_trip(lx in -13.0f64..13.0) {
            let u = mixed();
            let x = lx.exp();
            let w = u.u_prime(x).unwrap();
            let back = u.inv_marginal(w).unwrap();
            prop_assert!((back / x - 1.0).abs() < 1e-10);
        }
    }
}
