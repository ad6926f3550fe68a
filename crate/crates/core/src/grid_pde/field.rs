use std::sync::Arc;

use crate::error::{Error, Result};

use super::Grid;

/// Values of a function of `(t, y)` on a [`Grid`], stored row-major by time index.
#[derive(Debug, Clone)]
pub struct ScalarField2D {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField2D {
    /// Wraps `values` (length `n_t * n_y`), rejecting non-finite entries.
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_t() * grid.n_y() {
            return Err(Error::param(
                "field",
                format!(
                    "expected {} values, got {}",
                    grid.n_t() * grid.n_y(),
                    values.len()
                ),
            ));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let (j, i) = (k / grid.n_y(), k % grid.n_y());
            return Err(Error::Integrity(format!(
                "non-finite value {} at node (t={}, y={})",
                values[k],
                grid.t(j),
                grid.y(i)
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.n_t() * grid.n_y();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let n = grid.n_t() * grid.n_y();
        Self {
            grid,
            values: vec![c; n],
        }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.n_t() * grid.n_y());
        for &t in grid.t_nodes() {
            for &y in grid.y_nodes() {
                values.push(f(t, y));
            }
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.values[j * self.grid.n_y() + i]
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[f64] {
        let n = self.grid.n_y();
        &self.values[j * n..(j + 1) * n]
    }

    pub fn row_mut(&mut self, j: usize) -> &mut [f64] {
        let n = self.grid.n_y();
        &mut self.values[j * n..(j + 1) * n]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Pointwise `f(self, other)`; both fields must share the grid.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid.as_ref() != other.grid.as_ref() {
            return Err(Error::param("field", "grids differ"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::new(self.grid.clone(), values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// Fourth-order finite-difference `d/dy`, row by row.
    pub fn d_dy(&self) -> Self {
        self.rowwise(d_dy_row)
    }

    /// Fourth-order finite-difference `d^2/dy^2`, row by row.
    pub fn d2_dy2(&self) -> Self {
        self.rowwise(d2_dy2_row)
    }

    fn rowwise(&self, op: fn(&[f64], f64, &mut [f64])) -> Self {
        let n = self.grid.n_y();
        let mut out = vec![0.0; self.values.len()];
        for (src, dst) in self.values.chunks(n).zip(out.chunks_mut(n)) {
            op(src, self.grid.dy(), dst);
        }
        Self {
            grid: self.grid.clone(),
            values: out,
        }
    }

    /// Bilinear interpolation; arguments outside the grid are clamped.
    #[inline]
    pub fn bilinear(&self, t: f64, y: f64) -> f64 {
        let (j, a) = self.grid.locate_t(t);
        let (i, b) = self.grid.locate_y(y);
        let n = self.grid.n_y();
        let v = &self.values;
        let k = j * n + i;
        let lo = v[k] + b * (v[k + 1] - v[k]);
        let hi = v[k + n] + b * (v[k + n + 1] - v[k + n]);
        lo + a * (hi - lo)
    }

    /// Linear interpolation in `y` on time row `j`, clamped at the ends.
    #[inline]
    pub fn row_linear(&self, j: usize, y: f64) -> f64 {
        let (i, b) = self.grid.locate_y(y);
        let r = self.row(j);
        r[i] + b * (r[i + 1] - r[i])
    }
}

/// Cubic Hermite interpolation of `(values, derivs)` sampled on a uniform row starting at
/// `y0` with spacing `h`. Returns the value and its `y`-derivative; `y` is clamped to the row.
#[inline]
pub fn hermite_row(values: &[f64], derivs: &[f64], y0: f64, h: f64, y: f64) -> (f64, f64) {
    let n = values.len();
    let s = ((y - y0) / h).clamp(0.0, (n - 1) as f64);
    let i = (s.floor() as usize).min(n - 2);
    hermite_cell(values, derivs, i, s - i as f64, h)
}

/// Hermite interpolation on cell `[i, i+1]` at fraction `s`.
#[inline]
pub fn hermite_cell(values: &[f64], derivs: &[f64], i: usize, s: f64, h: f64) -> (f64, f64) {
    let (v0, v1) = (values[i], values[i + 1]);
    let (d0, d1) = (derivs[i] * h, derivs[i + 1] * h);
    let s2 = s * s;
    let s3 = s2 * s;
    let v = (2.0 * s3 - 3.0 * s2 + 1.0) * v0
        + (s3 - 2.0 * s2 + s) * d0
        + (-2.0 * s3 + 3.0 * s2) * v1
        + (s3 - s2) * d1;
    let dv = ((6.0 * s2 - 6.0 * s) * v0
        + (3.0 * s2 - 4.0 * s + 1.0) * d0
        + (-6.0 * s2 + 6.0 * s) * v1
        + (3.0 * s2 - 2.0 * s) * d1)
        / h;
    (v, dv)
}

/// `du/dy` with 5-point central stencils inside and one-sided 5-point stencils at the ends.
pub fn d_dy_row(u: &[f64], h: f64, out: &mut [f64]) {
    let n = u.len();
    debug_assert!(n >= 5 && out.len() == n);
    let s = 1.0 / (12.0 * h);
    out[0] = (-25.0 * u[0] + 48.0 * u[1] - 36.0 * u[2] + 16.0 * u[3] - 3.0 * u[4]) * s;
    out[1] = (-3.0 * u[0] - 10.0 * u[1] + 18.0 * u[2] - 6.0 * u[3] + u[4]) * s;
    for i in 2..n - 2 {
        out[i] = (u[i - 2] - 8.0 * u[i - 1] + 8.0 * u[i + 1] - u[i + 2]) * s;
    }
    let m = n - 1;
    out[m - 1] = -(-3.0 * u[m] - 10.0 * u[m - 1] + 18.0 * u[m - 2] - 6.0 * u[m - 3] + u[m - 4]) * s;
    out[m] = -(-25.0 * u[m] + 48.0 * u[m - 1] - 36.0 * u[m - 2] + 16.0 * u[m - 3] - 3.0 * u[m - 4]) * s;
}

/// `d2u/dy2` with 5-point stencils, one-sided at the ends.
pub fn d2_dy2_row(u: &[f64], h: f64, out: &mut [f64]) {
    let n = u.len();
    debug_assert!(n >= 5 && out.len() == n);
    let s = 1.0 / (12.0 * h * h);
    out[0] = (35.0 * u[0] - 104.0 * u[1] + 114.0 * u[2] - 56.0 * u[3] + 11.0 * u[4]) * s;
    out[1] = (11.0 * u[0] - 20.0 * u[1] + 6.0 * u[2] + 4.0 * u[3] - u[4]) * s;
    for i in 2..n - 2 {
        out[i] = (-u[i - 2] + 16.0 * u[i - 1] - 30.0 * u[i] + 16.0 * u[i + 1] - u[i + 2]) * s;
    }
    let m = n - 1;
    out[m - 1] = (11.0 * u[m] - 20.0 * u[m - 1] + 6.0 * u[m - 2] + 4.0 * u[m - 3] - u[m - 4]) * s;
    out[m] = (35.0 * u[m] - 104.0 * u[m - 1] + 114.0 * u[m - 2] - 56.0 * u[m - 3] + 11.0 * u[m - 4]) * s;
}
