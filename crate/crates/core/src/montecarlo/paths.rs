use crate::error::{Error, Result};
use crate::grid_pde::ScalarField2D;
use crate::model::MarketModel;
use crate::strategy::FeedbackMap;

use super::NoiseSource;

/// Time discretization and sampling parameters of a simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSpec {
    pub t0: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl SimSpec {
    /// Number of steps covering `[t0, horizon]`; `dt` must divide the interval.
    pub fn n_steps(&self, horizon: f64) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param("mc.dt", "must be finite and > 0"));
        }
        if !(self.t0 >= 0.0 && self.t0 < horizon) {
            return Err(Error::param("t0", format!("must lie in [0, {horizon})")));
        }
        if self.n_paths == 0 {
            return Err(Error::param("mc.n_paths", "must be > 0"));
        }
        if self.antithetic && !self.n_paths.is_multiple_of(2) {
            return Err(Error::param(
                "mc.n_paths",
                "must be even with antithetic sampling",
            ));
        }
        let span = horizon - self.t0;
        let k = (span / self.dt).round();
        if k < 1.0 || (k * self.dt - span).abs() > 1e-9 * span.max(1.0) {
            return Err(Error::param(
                "mc.dt",
                format!("{} does not divide the interval length {span}", self.dt),
            ));
        }
        Ok(k as usize)
    }

    pub fn noise(&self) -> NoiseSource {
        NoiseSource::new(self.seed, self.antithetic)
    }
}

/// Which controls drive the wealth process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    /// The equilibrium feedback `(pi*, c*)` evaluated at the current wealth.
    Equilibrium,
    /// Constant `(pi, c)` on `[t0, until)`, equilibrium feedback afterwards.
    Perturbed { until: f64, pi: f64, c: f64 },
    /// Constant `(pi, c)` throughout.
    Constant { pi: f64, c: f64 },
}

/// One simulated path; reused between paths.
#[derive(Debug, Clone, Default)]
pub struct PathBuffers {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub pi: Vec<f64>,
    pub c: Vec<f64>,
    /// Set when the path left the grid or the covered wealth range.
    pub exited: bool,
}

/// Simulates `Y_bar` and, when a feedback map is present, the wealth under a [`Policy`],
/// driven by the same Brownian increments.
pub struct Simulator<'a> {
    market: MarketModel,
    rho_bar: &'a ScalarField2D,
    feedback: Option<&'a FeedbackMap>,
    spec: SimSpec,
    n_steps: usize,
}

/// Counts of paths flagged for leaving the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunStats {
    pub flagged: usize,
    pub total: usize,
}

impl RunStats {
    /// Errors when more than 1% of paths were flagged.
    pub fn check(&self) -> Result<()> {
        if self.flagged * 100 > self.total {
            return Err(Error::Coverage {
                flagged: self.flagged,
                total: self.total,
            });
        }
        Ok(())
    }
}

impl<'a> Simulator<'a> {
    pub fn new(
        market: MarketModel,
        rho_bar: &'a ScalarField2D,
        feedback: Option<&'a FeedbackMap>,
        spec: SimSpec,
    ) -> Result<Self> {
        let horizon = rho_bar.grid().horizon();
        let n_steps = spec.n_steps(horizon)?;
        Ok(Self {
            market,
            rho_bar,
            feedback,
            spec,
            n_steps,
        })
    }

    pub fn spec(&self) -> &SimSpec {
        &self.spec
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.rho_bar.grid().horizon()
        } else {
            self.spec.t0 + k as f64 * self.spec.dt
        }
    }

    fn controls(&self, policy: Policy, t: f64, x: f64, exited: &mut bool) -> Result<(f64, f64)> {
        match policy {
            Policy::Constant { pi, c } => Ok((pi, c)),
            Policy::Perturbed { until, pi, c } if t < until - 1e-12 => Ok((pi, c)),
            _ => {
                let fm = self
                    .feedback
                    .ok_or_else(|| Error::param("feedback", "feedback policy needs a feedback map"))?;
                match fm.controls(t, x) {
                    Ok(c) => Ok((c.pi, c.c)),
                    Err(Error::OutOfRange { lo, hi, .. }) => {
                        *exited = true;
                        let xc = x.clamp(lo, hi);
                        let y = fm.invert(t, xc)?;
                        let ctl = fm.controls_at_y(t, y)?;
                        Ok((ctl.pi, ctl.c))
                    }
                    Err(e) => Err(e),
                }
            }
        }
    }

    /// Runs every path, handing each to `visit`. Wealth is simulated when `wealth` is given.
    ///
    /// `Y_bar` follows `dY = (-theta^2/2 - r + rho_bar(s, Y)) ds - theta dW` (Euler-Maruyama);
    /// wealth follows `dX = (r + sigma theta pi - c) X ds + sigma pi X dW` (log-Euler).
    pub fn run<V>(&self, y0: f64, wealth: Option<(f64, Policy)>, mut visit: V) -> Result<RunStats>
    where
        V: FnMut(usize, &PathBuffers) -> Result<()>,
    {
        let m = &self.market;
        let (theta, sigma, r) = (m.theta(), m.sigma(), m.r());
        let shift = -m.half_theta_sq() - r;
        let grid = self.rho_bar.grid();
        let (y_lo, y_hi) = (grid.y_min(), grid.y_max());
        let n = self.n_steps;
        let noise = self.spec.noise();
        if let Some((x0, _)) = wealth {
            if !(x0 > 0.0 && x0.is_finite()) {
                return Err(Error::param("x0", "must be positive"));
            }
        }

        let mut buf = PathBuffers {
            t: (0..=n).map(|k| self.time(k)).collect(),
            y: vec![0.0; n + 1],
            x: if wealth.is_some() {
                vec![0.0; n + 1]
            } else {
                Vec::new()
            },
            pi: if wealth.is_some() {
                vec![0.0; n + 1]
            } else {
                Vec::new()
            },
            c: if wealth.is_some() {
                vec![0.0; n + 1]
            } else {
                Vec::new()
            },
            exited: false,
        };
        let mut flagged = 0usize;
        for p in 0..self.spec.n_paths {
            let mut z = noise.path(p);
            buf.exited = false;
            let mut y = y0;
            buf.y[0] = y;
            let mut lx = 0.0;
            if let Some((x0, _)) = wealth {
                lx = x0.ln();
                buf.x[0] = x0;
            }
            for k in 0..n {
                let t = buf.t[k];
                let dt = buf.t[k + 1] - t;
                let dw = dt.sqrt() * z.next_normal();
                if let Some((_, policy)) = wealth {
                    let x = buf.x[k];
                    let (pi, c) = self.controls(policy, t, x, &mut buf.exited)?;
                    buf.pi[k] = pi;
                    buf.c[k] = c;
                    let sp = sigma * pi;
                    lx += (r + sp * theta - c - 0.5 * sp * sp) * dt + sp * dw;
                    let xn = lx.exp();
                    if !(xn > 0.0 && xn.is_finite()) {
                        return Err(Error::Integrity(format!(
                            "wealth {xn} on path {p} at t = {}",
                            buf.t[k + 1]
                        )));
                    }
                    buf.x[k + 1] = xn;
                }
                y += (shift + self.rho_bar.bilinear(t, y)) * dt - theta * dw;
                if y < y_lo || y > y_hi {
                    buf.exited = true;
                }
                buf.y[k + 1] = y;
            }
            if let Some((_, policy)) = wealth {
                let (pi, c) = self.controls(policy, buf.t[n], buf.x[n], &mut buf.exited)?;
                buf.pi[n] = pi;
                buf.c[n] = c;
            }
            if buf.exited {
                flagged += 1;
            }
            visit(p, &buf)?;
        }
        Ok(RunStats {
            flagged,
            total: self.spec.n_paths,
        })
    }
}

/// Materialized paths, row-major by path.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub seed: u64,
    pub t0: f64,
    pub y0: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub antithetic: bool,
    pub times: Vec<f64>,
    pub y_paths: Vec<f64>,
    pub x_paths: Option<Vec<f64>>,
    pub pi_paths: Option<Vec<f64>>,
    pub c_paths: Option<Vec<f64>>,
    pub flagged: usize,
}

impl PathEnsemble {
    pub fn y_path(&self, p: usize) -> &[f64] {
        let w = self.n_steps + 1;
        &self.y_paths[p * w..(p + 1) * w]
    }

    pub fn x_path(&self, p: usize) -> Option<&[f64]> {
        let w = self.n_steps + 1;
        self.x_paths.as_ref().map(|v| &v[p * w..(p + 1) * w])
    }

    pub fn c_path(&self, p: usize) -> Option<&[f64]> {
        let w = self.n_steps + 1;
        self.c_paths.as_ref().map(|v| &v[p * w..(p + 1) * w])
    }

    pub fn pi_path(&self, p: usize) -> Option<&[f64]> {
        let w = self.n_steps + 1;
        self.pi_paths.as_ref().map(|v| &v[p * w..(p + 1) * w])
    }
}

fn materialize(sim: &Simulator<'_>, y0: f64, wealth: Option<(f64, Policy)>) -> Result<PathEnsemble> {
    let spec = *sim.spec();
    let n = sim.n_steps();
    let cap = spec.n_paths * (n + 1);
    let mut times = Vec::new();
    let mut ys = Vec::with_capacity(cap);
    let (mut xs, mut pis, mut cs) = (Vec::new(), Vec::new(), Vec::new());
    let stats = sim.run(y0, wealth, |p, b| {
        if p == 0 {
            times = b.t.clone();
        }
        ys.extend_from_slice(&b.y);
        if wealth.is_some() {
            xs.extend_from_slice(&b.x);
            pis.extend_from_slice(&b.pi);
            cs.extend_from_slice(&b.c);
        }
        Ok(())
    })?;
    stats.check()?;
    let has_x = wealth.is_some();
    Ok(PathEnsemble {
        seed: spec.seed,
        t0: spec.t0,
        y0,
        dt: spec.dt,
        n_paths: spec.n_paths,
        n_steps: n,
        antithetic: spec.antithetic,
        times,
        y_paths: ys,
        x_paths: has_x.then_some(xs),
        pi_paths: has_x.then_some(pis),
        c_paths: has_x.then_some(cs),
        flagged: stats.flagged,
    })
}

/// Simulates and stores `Y_bar` paths from `(spec.t0, y0)`.
pub fn simulate_y(
    market: MarketModel,
    rho_bar: &ScalarField2D,
    spec: SimSpec,
    y0: f64,
) -> Result<PathEnsemble> {
    let sim = Simulator::new(market, rho_bar, None, spec)?;
    materialize(&sim, y0, None)
}

/// Simulates and stores paired `(Y_bar, X_bar)` paths from wealth `x0` at `spec.t0`,
/// starting `Y_bar` at the inverted `y0 = y(t0, x0)`.
pub fn simulate_wealth(
    market: MarketModel,
    rho_bar: &ScalarField2D,
    feedback: &FeedbackMap,
    spec: SimSpec,
    x0: f64,
    policy: Policy,
) -> Result<PathEnsemble> {
    let y0 = feedback.invert(spec.t0, x0)?;
    let sim = Simulator::new(market, rho_bar, Some(feedback), spec)?;
    materialize(&sim, y0, Some((x0, policy)))
}
