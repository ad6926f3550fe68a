use crate::error::{Error, Result};

/// Uniform tensor grid on `[0, T] x [y_min, y_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    t: Vec<f64>,
    y: Vec<f64>,
    dt: f64,
    dy: f64,
}

impl Grid {
    pub fn uniform(horizon: f64, n_t: usize, y_min: f64, y_max: f64, n_y: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::param("horizon", "must be finite and > 0"));
        }
        if n_t < 3 {
            return Err(Error::param("grid.n_t", "must be >= 3"));
        }
        if n_y < 5 {
            return Err(Error::param("grid.n_y", "must be >= 5"));
        }
        if !(y_min.is_finite() && y_max.is_finite() && y_min < y_max) {
            return Err(Error::param("grid.y_min", "requires finite y_min < y_max"));
        }
        let dt = horizon / (n_t - 1) as f64;
        let dy = (y_max - y_min) / (n_y - 1) as f64;
        let mut t: Vec<f64> = (0..n_t).map(|j| j as f64 * dt).collect();
        t[n_t - 1] = horizon;
        let mut y: Vec<f64> = (0..n_y).map(|i| y_min + i as f64 * dy).collect();
        y[n_y - 1] = y_max;
        Ok(Self { t, y, dt, dy })
    }

    pub fn n_t(&self) -> usize {
        self.t.len()
    }

    pub fn n_y(&self) -> usize {
        self.y.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn horizon(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    pub fn y_min(&self) -> f64 {
        self.y[0]
    }

    pub fn y_max(&self) -> f64 {
        self.y[self.y.len() - 1]
    }

    pub fn t_nodes(&self) -> &[f64] {
        &self.t
    }

    pub fn y_nodes(&self) -> &[f64] {
        &self.y
    }

    #[inline]
    pub fn t(&self, j: usize) -> f64 {
        self.t[j]
    }

    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        self.y[i]
    }

    /// Cell index `j` and fraction in `[0, 1]` with `t` clamped to `[0, T]`.
    #[inline]
    pub fn locate_t(&self, t: f64) -> (usize, f64) {
        locate(t, 0.0, self.dt, self.t.len())
    }

    /// Cell index `i` and fraction in `[0, 1]` with `y` clamped to the grid.
    #[inline]
    pub fn locate_y(&self, y: f64) -> (usize, f64) {
        locate(y, self.y[0], self.dy, self.y.len())
    }

    /// Index of the time node nearest to `t`.
    pub fn nearest_t(&self, t: f64) -> usize {
        let k = (t / self.dt).round();
        (k.max(0.0) as usize).min(self.t.len() - 1)
    }

    /// A coarser grid keeping every `stride`-th node in both directions.
    pub fn coarsen(&self, stride: usize) -> Result<Self> {
        if stride == 0 || !(self.n_t() - 1).is_multiple_of(stride) || !(self.n_y() - 1).is_multiple_of(stride)
        {
            return Err(Error::param("grid", format!("cannot coarsen by {stride}")));
        }
        Self::uniform(
            self.horizon(),
            (self.n_t() - 1) / stride + 1,
            self.y_min(),
            self.y_max(),
            (self.n_y() - 1) / stride + 1,
        )
    }
}

#[inline]
fn locate(v: f64, start: f64, h: f64, n: usize) -> (usize, f64) {
    let s = ((v - start) / h).clamp(0.0, (n - 1) as f64);
    let k = (s.floor() as usize).min(n - 2);
    (k, s - k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_are_exact() {
        let g = Grid::uniform(1.0, 401, -8.0, 8.0, 401).unwrap();
        assert_eq!(g.t(0), 0.0);
        assert_eq!(g.t(400), 1.0);
        assert_eq!(g.y(0), -8.0);
        assert_eq!(g.y(400), 8.0);
        assert!((g.dy() - 0.04).abs() < 1e-15);
    }

    #[test]
    fn rejects_small_grids() {
        assert!(Grid::uniform(1.0, 2, 0.0, 1.0, 5).is_err());
        assert!(Grid::uniform(1.0, 3, 0.0, 1.0, 4).is_err());
        assert!(Grid::uniform(1.0, 3, 1.0, 1.0, 5).is_err());
    }

    #[test]
    fn locate_clamps() {
        let g = Grid::uniform(1.0, 11, 0.0, 1.0, 11).unwrap();
        assert_eq!(g.locate_y(-1.0), (0, 0.0));
        let (i, f) = g.locate_y(1.0);
        assert_eq!(i, 9);
        assert!((f - 1.0).abs() < 1e-12);
        let (i, f) = g.locate_y(0.35);
        assert_eq!(i, 3);
        assert!((f - 0.5).abs() < 1e-12);
        assert_eq!(g.nearest_t(0.52), 5);
    }

    #[test]
    fn coarsen_halves() {
        let g = Grid::uniform(1.0, 401, -8.0, 8.0, 401).unwrap();
        let c = g.coarsen(2).unwrap();
        assert_eq!((c.n_t(), c.n_y()), (201, 201));
        assert!(g.coarsen(3).is_err());
    }
}
