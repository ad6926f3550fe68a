use std::time::Instant;

use log::{info, warn};

use crate::error::{Error, Result};
use crate::grid_pde::ScalarField2D;

use super::operator::{kappa_from_f0, solve_delta_family, DeltaFamily, OperatorContext};

/// Settings for the successive-approximation loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationSettings {
    pub tol: f64,
    pub max_iter: usize,
    /// Initial relaxation weight in `(0, 1]`; halved whenever the residual grows.
    pub damping: f64,
}

impl Default for IterationSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
            damping: 1.0,
        }
    }
}

/// The converged discount-rate field and its diagnostics.
#[derive(Debug, Clone)]
pub struct RhoField {
    /// The fixed point `rho_bar(t, y)`.
    pub phi: ScalarField2D,
    /// `F[phi]` at the returned iterate.
    pub f_phi: ScalarField2D,
    /// `sup|F[phi] - phi| + sup|d/dy (F[phi] - phi)|` at the returned iterate.
    pub residual_sup: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
    pub kappa: f64,
    /// `max |d phi / dy|`, compared against `kappa`.
    pub phi_y_max: f64,
    pub damping_final: f64,
    /// The delta family solved with `phi`: supplies the value field and the non-local term.
    pub family: DeltaFamily,
}

impl RhoField {
    pub fn kappa_respected(&self) -> bool {
        self.phi_y_max <= self.kappa
    }

    /// Whether the residuals are non-increasing after the first iteration.
    pub fn monotone_residuals(&self) -> bool {
        self.history.windows(2).skip(1).all(|w| w[1] <= w[0])
    }
}

/// Iterates `phi <- (1 - d) phi + d F[phi]` from `phi = 0` until the contraction-norm residual
/// falls below `tol`.
pub fn iterate(ctx: &OperatorContext, settings: &IterationSettings) -> Result<RhoField> {
    if !(settings.tol > 0.0) {
        return Err(Error::param("solver.tol", "must be > 0"));
    }
    if !(settings.damping > 0.0 && settings.damping <= 1.0) {
        return Err(Error::param("solver.damping", "must lie in (0, 1]"));
    }
    let grid = ctx.grid().clone();
    let mut phi = ScalarField2D::zeros(grid);
    let mut history = Vec::new();
    let mut damping = settings.damping;
    let mut kappa = f64::NAN;
    let start = Instant::now();

    for n in 0..=settings.max_iter {
        let family = solve_delta_family(ctx, &phi)?;
        let f = family.ratio()?;
        if n == 0 {
            kappa = kappa_from_f0(ctx.discount(), &f);
        }
        let diff = f.zip_map(&phi, |a, b| a - b)?;
        let residual = diff.max_abs() + diff.d_dy().max_abs();
        history.push(residual);
        info!(
            "iteration {n}: residual {residual:.3e} ({:.2}s)",
            start.elapsed().as_secs_f64()
        );
        if residual <= settings.tol {
            let phi_y_max = phi.d_dy().max_abs();
            if phi_y_max > kappa {
                warn!("|d rho_bar/dy| = {phi_y_max:.3e} exceeds kappa = {kappa:.3e}");
            }
            return Ok(RhoField {
                phi,
                f_phi: f,
                residual_sup: residual,
                iterations: n,
                history,
                kappa,
                phi_y_max,
                damping_final: damping,
                family,
            });
        }
        if n == settings.max_iter {
            break;
        }
        if n >= 1 && residual > history[n - 1] {
            damping *= 0.5;
            warn!("residual increased; damping reduced to {damping}");
        }
        phi = phi.zip_map(&diff, |p, d| p + damping * d)?;
    }
    Err(Error::NoConvergence {
        iterations: settings.max_iter,
        last: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}
