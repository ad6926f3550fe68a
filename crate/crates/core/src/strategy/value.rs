use crate::error::{Error, Result};
use crate::fixed_point::DeltaFamily;
use crate::grid_pde::{hermite_row, ScalarField2D};

use super::FeedbackMap;

/// The value function `G(t, x) = L(t, y(t, x))`, where `L` is the discounted sum of
/// `delta_bar` over the terminal times and `y(t, x)` inverts `p_bar`.
#[derive(Debug, Clone)]
pub struct ValueSurface {
    /// `L(t, y)`.
    pub value: ScalarField2D,
    pub value_y: ScalarField2D,
    /// The non-local term `R(t, y)` of the extended HJB.
    pub nonlocal: ScalarField2D,
    feedback: FeedbackMap,
}

/// One `(t, x)` probe of the value table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub g: f64,
    pub v: f64,
}

impl ValueSurface {
    pub fn new(family: &DeltaFamily, feedback: FeedbackMap) -> Result<Self> {
        if family.value.grid().as_ref() != feedback.grid().as_ref() {
            return Err(Error::param("value", "grids differ"));
        }
        Ok(Self {
            value: family.value.clone(),
            value_y: family.value.d_dy(),
            nonlocal: family.nonlocal.clone(),
            feedback,
        })
    }

    pub fn feedback(&self) -> &FeedbackMap {
        &self.feedback
    }

    /// `(L, L_y)` at `(t, y)`: Hermite in `y`, linear in `t`.
    pub fn at_y(&self, t: f64, y: f64) -> (f64, f64) {
        let grid = self.value.grid();
        let (j, a) = grid.locate_t(t);
        let (y0, h) = (grid.y_min(), grid.dy());
        let (p0, q0) = hermite_row(self.value.row(j), self.value_y.row(j), y0, h, y);
        let (p1, q1) = hermite_row(self.value.row(j + 1), self.value_y.row(j + 1), y0, h, y);
        (p0 + a * (p1 - p0), q0 + a * (q1 - q0))
    }

    /// `G(t, x)`.
    pub fn g(&self, t: f64, x: f64) -> Result<f64> {
        let y = self.feedback.invert(t, x)?;
        Ok(self.at_y(t, y).0)
    }

    /// `G_x = L_y / p_bar_y` evaluated through the interpolants.
    pub fn g_x(&self, t: f64, x: f64) -> Result<f64> {
        let y = self.feedback.invert(t, x)?;
        let (_, ly) = self.at_y(t, y);
        let (lp, dlp) = self.feedback.log_pbar(t, y);
        Ok(ly / (lp.exp() * dlp))
    }

    /// `G` and `v` on every combination of `ts` and `xs`.
    pub fn probe_table(&self, ts: &[f64], xs: &[f64]) -> Result<Vec<ValueRow>> {
        let mut rows = Vec::with_capacity(ts.len() * xs.len());
        for &t in ts {
            for &x in xs {
                let y = self.feedback.invert(t, x)?;
                rows.push(ValueRow {
                    t,
                    x,
                    y,
                    g: self.at_y(t, y).0,
                    v: y.exp(),
                });
            }
        }
        Ok(rows)
    }
}
