use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid_pde::{hermite_cell, hermite_row, Grid};
use crate::model::{MarketModel, UtilityModel};

use super::PBarField;

/// Off-grid view of `p_bar`: cubic Hermite in `y` on `ln p_bar`, linear in `t`.
///
/// `v(t, x) = exp(y)` with `p_bar(t, y) = x`; `v` and its inverse `p` are never stored.
#[derive(Debug, Clone)]
pub struct FeedbackMap {
    grid: Arc<Grid>,
    market: MarketModel,
    utility: UtilityModel,
    log_p: Vec<f64>,
    log_p_y: Vec<f64>,
}

/// Controls at a state `(t, x)` together with the log marginal value `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controls {
    pub y: f64,
    pub pi: f64,
    /// Consumption rate per unit wealth.
    pub c: f64,
}

const NEWTON_TOL: f64 = 1e-13;

impl FeedbackMap {
    pub fn new(pb: &PBarField, market: MarketModel, utility: UtilityModel) -> Self {
        Self {
            grid: pb.log_pbar.grid().clone(),
            market,
            utility,
            log_p: pb.log_pbar.values().to_vec(),
            log_p_y: pb.log_pbar_y.values().to_vec(),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn market(&self) -> &MarketModel {
        &self.market
    }

    pub fn utility(&self) -> &UtilityModel {
        &self.utility
    }

    #[inline]
    fn rows(&self, j: usize) -> (&[f64], &[f64]) {
        let n = self.grid.n_y();
        (&self.log_p[j * n..(j + 1) * n], &self.log_p_y[j * n..(j + 1) * n])
    }

    /// `(ln p_bar, d ln p_bar / dy)` at `(t, y)`, clamped to the grid.
    #[inline]
    pub fn log_pbar(&self, t: f64, y: f64) -> (f64, f64) {
        let (j, a) = self.grid.locate_t(t);
        let (y0, h) = (self.grid.y_min(), self.grid.dy());
        let (v0, d0) = self.rows(j);
        let (v1, d1) = self.rows(j + 1);
        let (p0, q0) = hermite_row(v0, d0, y0, h, y);
        let (p1, q1) = hermite_row(v1, d1, y0, h, y);
        (p0 + a * (p1 - p0), q0 + a * (q1 - q0))
    }

    pub fn pbar(&self, t: f64, y: f64) -> f64 {
        self.log_pbar(t, y).0.exp()
    }

    /// Wealth range `[p_bar(t, y_max), p_bar(t, y_min)]` covered at time `t`.
    pub fn covered_range(&self, t: f64) -> (f64, f64) {
        let (j, a) = self.grid.locate_t(t);
        let n = self.grid.n_y();
        let (v0, _) = self.rows(j);
        let (v1, _) = self.rows(j + 1);
        let lo = v0[n - 1] + a * (v1[n - 1] - v0[n - 1]);
        let hi = v0[0] + a * (v1[0] - v0[0]);
        (lo.exp(), hi.exp())
    }

    /// Solves `p_bar(t, y) = x` for `y`.
    pub fn invert(&self, t: f64, x: f64) -> Result<f64> {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::Domain(format!("wealth must be positive, got {x}")));
        }
        let (j, a) = self.grid.locate_t(t);
        let n = self.grid.n_y();
        let (v0, d0) = self.rows(j);
        let (v1, d1) = self.rows(j + 1);
        let node = |i: usize| v0[i] + a * (v1[i] - v0[i]);
        let lx = x.ln();
        let (top, bottom) = (node(0), node(n - 1));
        if !(lx <= top && lx >= bottom) {
            return Err(Error::OutOfRange {
                t,
                x,
                lo: bottom.exp(),
                hi: top.exp(),
            });
        }
        // node values decrease in i
        let (mut lo, mut hi) = (0usize, n - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if node(mid) >= lx {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let i = lo;
        let h = self.grid.dy();
        let eval = |s: f64| {
            let (p0, q0) = hermite_cell(v0, d0, i, s, h);
            let (p1, q1) = hermite_cell(v1, d1, i, s, h);
            (p0 + a * (p1 - p0) - lx, (q0 + a * (q1 - q0)) * h)
        };
        let (f_lo, f_hi) = (node(i) - lx, node(i + 1) - lx);
        if f_lo == 0.0 {
            return Ok(self.grid.y(i));
        }
        if f_hi == 0.0 {
            return Ok(self.grid.y(i + 1));
        }
        let (mut s_lo, mut s_hi) = (0.0_f64, 1.0_f64);
        let mut s = f_lo / (f_lo - f_hi);
        for _ in 0..100 {
            let (f, df) = eval(s);
            if f.abs() <= NEWTON_TOL {
                break;
            }
            if f > 0.0 {
                s_lo = s;
            } else {
                s_hi = s;
            }
            let mut next = s - f / df;
            if !(next > s_lo && next < s_hi) {
                next = 0.5 * (s_lo + s_hi);
            }
            if (next - s).abs() < 1e-16 {
                s = next;
                break;
            }
            s = next;
        }
        Ok(self.grid.y(i) + s * h)
    }

    /// Marginal value `v(t, x) = exp(y(t, x))`.
    pub fn marginal_value(&self, t: f64, x: f64) -> Result<f64> {
        Ok(self.invert(t, x)?.exp())
    }

    /// `pi*` and `c*` at a known `y`, with wealth `p_bar(t, y)`.
    pub fn controls_at_y(&self, t: f64, y: f64) -> Result<Controls> {
        let (lp, dlp) = self.log_pbar(t, y);
        let i0 = self.utility.i0(y)?;
        Ok(Controls {
            y,
            pi: -self.market.theta() / self.market.sigma() * dlp,
            c: i0 / lp.exp(),
        })
    }

    /// `pi*` and `c*` at wealth `x`, via inversion; `c = I(v) / x`.
    pub fn controls(&self, t: f64, x: f64) -> Result<Controls> {
        let y = self.invert(t, x)?;
        let (_, dlp) = self.log_pbar(t, y);
        let i0 = self.utility.i0(y)?;
        Ok(Controls {
            y,
            pi: -self.market.theta() / self.market.sigma() * dlp,
            c: i0 / x,
        })
    }
}
