use crate::error::{Error, Result};
use crate::fixed_point::OperatorContext;
use crate::grid_pde::{solve_backward, Coefficients, ScalarField2D};

/// `p_bar(t, y)`, the wealth at which the marginal value equals `e^y`, and its derivatives.
#[derive(Debug, Clone)]
pub struct PBarField {
    pub pbar: ScalarField2D,
    pub pbar_y: ScalarField2D,
    /// `ln p_bar` and its `y`-derivative; the interpolation basis for off-grid evaluation.
    pub log_pbar: ScalarField2D,
    pub log_pbar_y: ScalarField2D,
    /// `I0` on the y-nodes.
    pub i0: Vec<f64>,
}

/// Coefficients of `p_t + (theta^2/2) p_yy + (theta^2/2 + rho_bar - r) p_y - r p + I0 = 0`.
struct PBarCoefficients<'a> {
    rho_bar: &'a ScalarField2D,
    diffusion: f64,
    shift: f64,
    r: f64,
    i0: &'a [f64],
}

impl Coefficients for PBarCoefficients<'_> {
    fn diffusion(&self) -> f64 {
        self.diffusion
    }

    fn fill_row(&self, j: usize, _y: &[f64], b: &mut [f64], c: &mut [f64], f: &mut [f64]) {
        for (bi, &p) in b.iter_mut().zip(self.rho_bar.row(j)) {
            *bi = p + self.shift;
        }
        c.fill(-self.r);
        f.copy_from_slice(self.i0);
    }
}

/// Solves the `p_bar` PDE backward from `p_bar(T, .) = I0` and checks positivity and
/// strict monotonicity node by node.
pub fn compute_pbar(ctx: &OperatorContext, rho_bar: &ScalarField2D) -> Result<PBarField> {
    let grid = ctx.grid().clone();
    if rho_bar.grid().as_ref() != grid.as_ref() {
        return Err(Error::param(
            "rho_bar",
            "field grid differs from the operator grid",
        ));
    }
    let m = ctx.market();
    let u = ctx.utility();
    let i0 = grid
        .y_nodes()
        .iter()
        .map(|&y| u.i0(y))
        .collect::<Result<Vec<_>>>()?;
    let i0_prime = grid
        .y_nodes()
        .iter()
        .map(|&y| u.i0_prime(y))
        .collect::<Result<Vec<_>>>()?;
    let coeffs = PBarCoefficients {
        rho_bar,
        diffusion: m.half_theta_sq(),
        shift: m.half_theta_sq() - m.r(),
        r: m.r(),
        i0: &i0,
    };
    let pbar = solve_backward(&grid, &coeffs, &i0, ctx.scheme())?;
    let ny = grid.n_y();
    let last = grid.n_t() - 1;
    for (k, &v) in pbar.values().iter().enumerate() {
        if !(v > 0.0) {
            return Err(Error::Integrity(format!(
                "p_bar = {v:e} is not positive at t = {}, y = {}",
                grid.t(k / ny),
                grid.y(k % ny)
            )));
        }
    }
    let log_pbar = pbar.map(f64::ln)?;
    let mut log_pbar_y = log_pbar.d_dy();
    for (i, d) in log_pbar_y.row_mut(last).iter_mut().enumerate() {
        *d = i0_prime[i] / i0[i];
    }
    let pbar_y = pbar.zip_map(&log_pbar_y, |p, d| p * d)?;
    for (k, &v) in pbar_y.values().iter().enumerate() {
        if !(v < 0.0) {
            return Err(Error::Integrity(format!(
                "p_bar_y = {v:e} is not negative at t = {}, y = {}",
                grid.t(k / ny),
                grid.y(k % ny)
            )));
        }
    }
    Ok(PBarField {
        pbar,
        pbar_y,
        log_pbar,
        log_pbar_y,
        i0,
    })
}

/// The feedback surfaces `pi*(t, y)` and `c*(t, y)` on the grid.
#[derive(Debug, Clone)]
pub struct StrategySurface {
    pub pi_star: ScalarField2D,
    pub c_star: ScalarField2D,
}

/// `pi* = -theta p_bar_y / (sigma p_bar)` and `c* = I0 / p_bar`.
pub fn controls_from_pbar(ctx: &OperatorContext, pb: &PBarField) -> Result<StrategySurface> {
    let m = ctx.market();
    let k = -m.theta() / m.sigma();
    let pi_star = pb.log_pbar_y.map(|d| k * d)?;
    let grid = pb.pbar.grid().clone();
    let ny = grid.n_y();
    let c: Vec<f64> = pb
        .pbar
        .values()
        .iter()
        .enumerate()
        .map(|(idx, &p)| pb.i0[idx % ny] / p)
        .collect();
    Ok(StrategySurface {
        pi_star,
        c_star: ScalarField2D::new(grid, c)?,
    })
}
