use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid_pde::{d_dy_row, sweep_backward, Coefficients, Grid, ScalarField2D, ThetaScheme};
use crate::model::{DiscountModel, MarketModel, UtilityModel};

/// Models, grid and the discount tables shared by every operator evaluation.
#[derive(Debug, Clone)]
pub struct OperatorContext {
    market: MarketModel,
    discount: DiscountModel,
    utility: UtilityModel,
    grid: Arc<Grid>,
    scheme: ThetaScheme,
    /// `h(t_n, s_j)` at `n * n_t + j`, filled for `j >= n`.
    h: Vec<f64>,
    dh: Vec<f64>,
    u0: Vec<f64>,
    u0_prime: Vec<f64>,
}

fn same_horizon(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(1.0)
}

impl OperatorContext {
    pub fn new(
        market: MarketModel,
        discount: DiscountModel,
        utility: UtilityModel,
        grid: Arc<Grid>,
        scheme: ThetaScheme,
    ) -> Result<Self> {
        if !same_horizon(market.horizon(), grid.horizon())
            || !same_horizon(market.horizon(), discount.horizon())
        {
            return Err(Error::param(
                "horizon",
                "market, discount and grid horizons must agree",
            ));
        }
        if market.theta() == 0.0 {
            return Err(Error::param(
                "market.mu",
                "theta = (mu - r)/sigma must be non-zero",
            ));
        }
        let nt = grid.n_t();
        let mut h = vec![0.0; nt * nt];
        let mut dh = vec![0.0; nt * nt];
        for n in 0..nt {
            for j in n..nt {
                h[n * nt + j] = discount.h(grid.t(n), grid.t(j));
                dh[n * nt + j] = discount.dh_dt(grid.t(n), grid.t(j));
            }
        }
        let u0 = grid
            .y_nodes()
            .iter()
            .map(|&y| utility.u0(y))
            .collect::<Result<Vec<_>>>()?;
        let u0_prime = grid
            .y_nodes()
            .iter()
            .map(|&y| utility.u0_prime(y))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            market,
            discount,
            utility,
            grid,
            scheme,
            h,
            dh,
            u0,
            u0_prime,
        })
    }

    pub fn market(&self) -> &MarketModel {
        &self.market
    }

    pub fn discount(&self) -> &DiscountModel {
        &self.discount
    }

    pub fn utility(&self) -> &UtilityModel {
        &self.utility
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn scheme(&self) -> &ThetaScheme {
        &self.scheme
    }

    /// `h(t_n, s_j)` from the precomputed table.
    #[inline]
    pub fn h_at(&self, n: usize, j: usize) -> f64 {
        self.h[n * self.grid.n_t() + j]
    }

    #[inline]
    pub fn dh_at(&self, n: usize, j: usize) -> f64 {
        self.dh[n * self.grid.n_t() + j]
    }

    /// `U0` on the y-nodes.
    pub fn u0_row(&self) -> &[f64] {
        &self.u0
    }

    /// `U0'` on the y-nodes.
    pub fn u0_prime_row(&self) -> &[f64] {
        &self.u0_prime
    }

    /// Trapezoid weight of node `s_j` in `int_{t_n}^T ds`, plus 1 for the bequest term at `j = N-1`.
    #[inline]
    pub fn weight(&self, n: usize, j: usize) -> f64 {
        let last = self.grid.n_t() - 1;
        let dt = self.grid.dt();
        let quad = if n == last {
            0.0
        } else if j == n || j == last {
            0.5 * dt
        } else {
            dt
        };
        if j == last {
            quad + 1.0
        } else {
            quad
        }
    }

    fn check_phi(&self, phi: &ScalarField2D) -> Result<()> {
        if phi.grid().as_ref() != self.grid.as_ref() {
            return Err(Error::param("phi", "field grid differs from the operator grid"));
        }
        Ok(())
    }
}

/// Coefficients of `delta_t + (theta^2/2) delta_yy + (phi - r - theta^2/2) delta_y = 0`.
struct DeltaCoefficients<'a> {
    phi: &'a ScalarField2D,
    diffusion: f64,
    shift: f64,
}

impl Coefficients for DeltaCoefficients<'_> {
    fn diffusion(&self) -> f64 {
        self.diffusion
    }

    fn fill_row(&self, j: usize, _y: &[f64], b: &mut [f64], c: &mut [f64], f: &mut [f64]) {
        for (bi, &p) in b.iter_mut().zip(self.phi.row(j)) {
            *bi = p + self.shift;
        }
        c.fill(0.0);
        f.fill(0.0);
    }
}

fn delta_coefficients<'a>(ctx: &OperatorContext, phi: &'a ScalarField2D) -> DeltaCoefficients<'a> {
    let m = ctx.market();
    DeltaCoefficients {
        phi,
        diffusion: m.half_theta_sq(),
        shift: -m.r() - m.half_theta_sq(),
    }
}

/// Reduced sums over the terminal times `s_j`, each an `N_t x N_y` field.
#[derive(Debug, Clone)]
pub struct DeltaFamily {
    /// `sum_s w dh/dt(t,s) delta_y(t,s,y) + dh/dt(t,T) delta_y(t,T,y)`.
    pub numerator: ScalarField2D,
    /// `sum_s w h(t,s) delta_y(t,s,y) + h(t,T) delta_y(t,T,y)`, negative.
    pub denominator: ScalarField2D,
    /// `sum_s w h(t,s) delta(t,s,y) + h(t,T) delta(t,T,y)`: the value in `y`-coordinates.
    pub value: ScalarField2D,
    /// As `value` with `dh/dt` in place of `h`: the non-local term of the extended HJB.
    pub nonlocal: ScalarField2D,
}

/// Solves the delta PDE for every terminal node `s_j` and reduces the results on the fly,
/// keeping memory at `O(N_t N_y)`.
pub fn solve_delta_family(ctx: &OperatorContext, phi: &ScalarField2D) -> Result<DeltaFamily> {
    ctx.check_phi(phi)?;
    let grid = ctx.grid().clone();
    let (nt, ny) = (grid.n_t(), grid.n_y());
    let mut num = vec![0.0; nt * ny];
    let mut den = vec![0.0; nt * ny];
    let mut val = vec![0.0; nt * ny];
    let mut nonloc = vec![0.0; nt * ny];
    let mut dy_row = vec![0.0; ny];
    let coeffs = delta_coefficients(ctx, phi);

    for j in 0..nt {
        let s = grid.t(j);
        sweep_backward(&grid, &coeffs, ctx.u0_row(), j, ctx.scheme(), |n, row| {
            let deriv: &[f64] = if n == j {
                ctx.u0_prime_row()
            } else {
                d_dy_row(row, grid.dy(), &mut dy_row);
                &dy_row
            };
            let w = ctx.weight(n, j);
            if w == 0.0 {
                return Ok(());
            }
            let (wh, wd) = (w * ctx.h_at(n, j), w * ctx.dh_at(n, j));
            let k = n * ny;
            for i in 0..ny {
                num[k + i] += wd * deriv[i];
                den[k + i] += wh * deriv[i];
                val[k + i] += wh * row[i];
                nonloc[k + i] += wd * row[i];
            }
            Ok(())
        })
        .map_err(|e| annotate(e, s))?;
    }
    Ok(DeltaFamily {
        numerator: ScalarField2D::new(grid.clone(), num)?,
        denominator: ScalarField2D::new(grid.clone(), den)?,
        value: ScalarField2D::new(grid.clone(), val)?,
        nonlocal: ScalarField2D::new(grid, nonloc)?,
    })
}

fn annotate(e: Error, s: f64) -> Error {
    match e {
        Error::Solver { step, reason } => Error::Solver {
            step,
            reason: format!("{reason} (delta family, terminal s = {s})"),
        },
        other => other,
    }
}

impl DeltaFamily {
    /// `F[phi] = numerator / denominator`; a non-negative denominator is an integrity error.
    pub fn ratio(&self) -> Result<ScalarField2D> {
        let grid = self.numerator.grid().clone();
        let ny = grid.n_y();
        let mut out = Vec::with_capacity(self.numerator.values().len());
        for (k, (&a, &b)) in self
            .numerator
            .values()
            .iter()
            .zip(self.denominator.values())
            .enumerate()
        {
            if !(b < 0.0) {
                return Err(Error::Integrity(format!(
                    "denominator of F is {b:e} (must be < 0) at t = {}, y = {}",
                    grid.t(k / ny),
                    grid.y(k % ny)
                )));
            }
            out.push(a / b);
        }
        ScalarField2D::new(grid, out)
    }
}

/// Evaluates the operator `F[phi]` on the grid.
pub fn apply_f(ctx: &OperatorContext, phi: &ScalarField2D) -> Result<ScalarField2D> {
    solve_delta_family(ctx, phi)?.ratio()
}

/// `delta(t, s_j, y)` and `delta_y` for a single terminal node, rows `0..=end`.
#[derive(Debug, Clone)]
pub struct DeltaSlice {
    pub end: usize,
    n_y: usize,
    delta: Vec<f64>,
    delta_y: Vec<f64>,
}

impl DeltaSlice {
    pub fn delta(&self, n: usize, i: usize) -> f64 {
        self.delta[n * self.n_y + i]
    }

    pub fn delta_y(&self, n: usize, i: usize) -> f64 {
        self.delta_y[n * self.n_y + i]
    }

    pub fn delta_row(&self, n: usize) -> &[f64] {
        &self.delta[n * self.n_y..(n + 1) * self.n_y]
    }

    pub fn delta_y_row(&self, n: usize) -> &[f64] {
        &self.delta_y[n * self.n_y..(n + 1) * self.n_y]
    }
}

/// Solves the delta PDE for the single terminal node `s_end`.
pub fn delta_slice(ctx: &OperatorContext, phi: &ScalarField2D, end: usize) -> Result<DeltaSlice> {
    ctx.check_phi(phi)?;
    let grid = ctx.grid().clone();
    let ny = grid.n_y();
    if end >= grid.n_t() {
        return Err(Error::param("end", "terminal index out of range"));
    }
    let mut delta = vec![0.0; (end + 1) * ny];
    let mut delta_y = vec![0.0; (end + 1) * ny];
    let coeffs = delta_coefficients(ctx, phi);
    sweep_backward(&grid, &coeffs, ctx.u0_row(), end, ctx.scheme(), |n, row| {
        delta[n * ny..(n + 1) * ny].copy_from_slice(row);
        let out = &mut delta_y[n * ny..(n + 1) * ny];
        if n == end {
            out.copy_from_slice(ctx.u0_prime_row());
        } else {
            d_dy_row(row, grid.dy(), out);
        }
        Ok(())
    })
    .map_err(|e| annotate(e, grid.t(end)))?;
    Ok(DeltaSlice {
        end,
        n_y: ny,
        delta,
        delta_y,
    })
}

/// `kappa = max(||rho||, 2 C0)` with `C0 = 2 max |d/dy F[0]|` estimated on the grid.
pub fn kappa_default(ctx: &OperatorContext) -> Result<f64> {
    let f0 = apply_f(ctx, &ScalarField2D::zeros(ctx.grid().clone()))?;
    Ok(kappa_from_f0(ctx.discount(), &f0))
}

pub(crate) fn kappa_from_f0(discount: &DiscountModel, f0: &ScalarField2D) -> f64 {
    let c0 = 2.0 * f0.d_dy().max_abs();
    discount.rho_norm().max(2.0 * c0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_pde::Boundary;

    fn market() -> MarketModel {
        MarketModel::new(0.03, 0.09, 0.2, 1.0).unwrap()
    }

    fn ctx(discount: DiscountModel, utility: UtilityModel, n: usize) -> OperatorContext {
        let grid = Arc::new(Grid::uniform(1.0, n, -6.0, 6.0, n).unwrap());
        OperatorContext::new(market(), discount, utility, grid, ThetaScheme::default()).unwrap()
    }

    fn crra() -> UtilityModel {
        UtilityModel::crra(0.5).unwrap()
    }

    fn mixed() -> UtilityModel {
        UtilityModel::mixed_power(0.5, 0.3, -1.0).unwrap()
    }

    #[test]
    fn trapezoid_weights_sum_to_interval() {
        let c = ctx(DiscountModel::none(1.0).unwrap(), crra(), 11);
        for n in 0..11 {
            let total: f64 = (n..11).map(|j| c.weight(n, j)).sum();
            let expect = 1.0 - c.grid().t(n) + 1.0;
            assert!((total - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn exponential_collapses_for_any_phi() {
        let c = ctx(DiscountModel::exponential(0.1, 1.0).unwrap(), mixed(), 41);
        for k in 0..20 {
            let a = 0.1 * (k as f64 / 19.0 - 0.5);
            let phi = ScalarField2D::from_fn(c.grid().clone(), |t, y| {
                a * (1.0 + (t * 3.0 + y * 0.7 * k as f64).sin())
            })
            .unwrap();
            let f = apply_f(&c, &phi).unwrap();
            let err = f.values().iter().fold(0.0_f64, |m, v| m.max((v - 0.1).abs()));
            assert!(err < 1e-10, "k={k} err={err}");
        }
    }

    #[test]
    fn terminal_row_is_terminal_rate() {
        let d = DiscountModel::hyperbolic(1.0, 2.0, 1.0).unwrap();
        let c = ctx(d, mixed(), 41);
        let f = apply_f(&c, &ScalarField2D::zeros(c.grid().clone())).unwrap();
        for &v in f.row(40) {
            assert!((v - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn hyperbolic_mixed_range() {
        let d = DiscountModel::hyperbolic(1.0, 2.0, 1.0).unwrap();
        let (lo, hi) = d.rho_range();
        let c = ctx(d, mixed(), 61);
        let phi = ScalarField2D::from_fn(c.grid().clone(), |t, y| 1.0 + 0.3 * (t + 0.2 * y).sin()).unwrap();
        let f = apply_f(&c, &phi).unwrap();
        let (fmin, fmax) = f.min_max();
        assert!(fmin >= lo - 1e-12 && fmax <= hi + 1e-12, "{fmin} {fmax}");
    }

    #[test]
    fn zero_interval_slice_is_u0_prime() {
        let c = ctx(DiscountModel::hyperbolic(1.0, 2.0, 1.0).unwrap(), mixed(), 21);
        let s = delta_slice(&c, &ScalarField2D::zeros(c.grid().clone()), 12).unwrap();
        assert_eq!(s.delta_y_row(12), c.u0_prime_row());
    }

    #[test]
    fn no_dynamics_keeps_terminal_utility() {
        // theta -> 0 is not admissible, so use a tiny theta with phi = r + theta^2/2
        let m = MarketModel::new(0.03, 0.03 + 1e-9 * 0.2, 0.2, 1.0).unwrap();
        let grid = Arc::new(Grid::uniform(1.0, 21, -3.0, 3.0, 31).unwrap());
        let c = OperatorContext::new(
            m,
            DiscountModel::none(1.0).unwrap(),
            crra(),
            grid.clone(),
            ThetaScheme::default(),
        )
        .unwrap();
        let phi = ScalarField2D::constant(grid, m.r() + m.half_theta_sq());
        let s = delta_slice(&c, &phi, 20).unwrap();
        for n in 0..=20 {
            for (a, b) in s.delta_row(n).iter().zip(c.u0_row()) {
                assert!((a / b - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn crra_ratio_is_y_free_for_time_only_phi() {
        let grid = Arc::new(Grid::uniform(1.0, 101, -6.0, 6.0, 401).unwrap());
        let d = DiscountModel::hyperbolic(1.0, 2.0, 1.0).unwrap();
        let c = OperatorContext::new(market(), d, crra(), grid, ThetaScheme::default()).unwrap();
        let phi = ScalarField2D::from_fn(c.grid().clone(), |t, _| 0.7 + 0.5 * t).unwrap();
        let s = delta_slice(&c, &phi, 100).unwrap();
        let ny = c.grid().n_y();
        for n in [0, 25, 75, 99] {
            let ratios: Vec<f64> = (0..ny).map(|i| s.delta_y(n, i) / c.u0_prime_row()[i]).collect();
            let mid = ratios[ny / 2];
            for r in &ratios {
                assert!((r / mid - 1.0).abs() < 1e-6, "n={n} {r} vs {mid}");
            }
        }
    }

    #[test]
    fn kappa_for_exponential_is_rho0() {
        let c = ctx(DiscountModel::exponential(0.1, 1.0).unwrap(), crra(), 41);
        let k = kappa_default(&c).unwrap();
        assert!((k - 0.1).abs() < 1e-9);
    }

    #[test]
    fn kappa_for_hyperbolic_crra_is_finite() {
        let c = ctx(DiscountModel::hyperbolic(1.0, 2.0, 1.0).unwrap(), crra(), 81);
        let k = kappa_default(&c).unwrap();
        assert!(k.is_finite() && k >= 2.0);
    }

    #[test]
    fn boundary_choice_is_respected() {
        let grid = Arc::new(Grid::uniform(1.0, 21, -6.0, 6.0, 41).unwrap());
        let scheme = ThetaScheme {
            boundary: Boundary::Linear,
            ..Default::default()
        };
        let c = OperatorContext::new(
            market(),
            DiscountModel::exponential(0.1, 1.0).unwrap(),
            crra(),
            grid,
            scheme,
        )
        .unwrap();
        assert_eq!(c.scheme().boundary, Boundary::Linear);
    }
}
