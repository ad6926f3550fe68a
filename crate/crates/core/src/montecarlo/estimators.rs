use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixed_point::OperatorContext;
use crate::grid_pde::ScalarField2D;
use crate::model::{DiscountModel, MarketModel, UtilityModel};
use crate::pipeline::Solution;

use super::paths::{PathBuffers, PathEnsemble, Policy, SimSpec, Simulator};

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

/// Welford running mean and variance; deterministic for a fixed push order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    pub fn estimate(&self) -> Estimate {
        let var = if self.n > 1 {
            self.m2 / (self.n - 1) as f64
        } else {
            0.0
        };
        Estimate {
            mean: self.mean,
            se: (var / self.n.max(1) as f64).sqrt(),
            n: self.n,
        }
    }
}

/// Trapezoid weights on the (possibly non-uniform last step) time vector.
fn trapezoid(t: &[f64], k: usize) -> f64 {
    let n = t.len() - 1;
    if n == 0 {
        0.0
    } else if k == 0 {
        0.5 * (t[1] - t[0])
    } else if k == n {
        0.5 * (t[n] - t[n - 1])
    } else {
        0.5 * (t[k + 1] - t[k - 1])
    }
}

/// Realized intertemporal utility of one path:
/// `int_t0^T h(t0,s) U(c_s X_s) ds + h(t0,T) U(X_T)`, trapezoid in `s`.
pub fn path_utility(
    discount: &DiscountModel,
    utility: &UtilityModel,
    t: &[f64],
    x: &[f64],
    c: &[f64],
) -> Result<f64> {
    let t0 = t[0];
    let n = t.len() - 1;
    let mut acc = 0.0;
    for k in 0..=n {
        let w = trapezoid(t, k);
        if w > 0.0 && c[k] > 0.0 {
            acc += w * discount.h(t0, t[k]) * utility.u(c[k] * x[k])?;
        } else if w > 0.0 && c[k] == 0.0 {
            // U(0) is singular; a zero consumption rate only arises in perturbation tests
            return Err(Error::Domain("zero consumption has no finite utility".into()));
        }
    }
    acc += discount.h(t0, t[n]) * utility.u(x[n])?;
    Ok(acc)
}

/// `J` estimated from a materialized ensemble with wealth.
pub fn estimate_j_ensemble(
    ensemble: &PathEnsemble,
    discount: &DiscountModel,
    utility: &UtilityModel,
) -> Result<Estimate> {
    let mut acc = Accumulator::default();
    for p in 0..ensemble.n_paths {
        let (x, c) = match (ensemble.x_path(p), ensemble.c_path(p)) {
            (Some(x), Some(c)) => (x, c),
            _ => return Err(Error::param("ensemble", "wealth paths are required")),
        };
        acc.push(path_utility(discount, utility, &ensemble.times, x, c)?);
    }
    Ok(acc.estimate())
}

/// `J(t0, x0)` under `policy`, streaming over paths.
pub fn estimate_j(solution: &Solution, spec: SimSpec, x0: f64, policy: Policy) -> Result<Estimate> {
    let ctx = &solution.ctx;
    let fm = solution.feedback();
    let y0 = fm.invert(spec.t0, x0)?;
    let sim = Simulator::new(*ctx.market(), &solution.rho.phi, Some(fm), spec)?;
    let mut acc = Accumulator::default();
    let stats = sim.run(y0, Some((x0, policy)), |_, b| {
        acc.push(path_utility(ctx.discount(), ctx.utility(), &b.t, &b.x, &b.c)?);
        Ok(())
    })?;
    stats.check()?;
    Ok(acc.estimate())
}

/// Pathwise gap statistics for `max_s |X_s - p_bar(s, Y_s)| / X_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityGap {
    pub median: f64,
    pub mean: f64,
    pub p90: f64,
    pub max: f64,
    pub flagged: usize,
    pub n_paths: usize,
    pub dt: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (pos - i as f64) * (sorted[j] - sorted[i])
}

/// Simulates `(Y_bar, X_bar)` under common noise and measures the wealth identity gap.
pub fn wealth_identity_gap(solution: &Solution, spec: SimSpec, x0: f64) -> Result<IdentityGap> {
    let fm = solution.feedback();
    let y0 = fm.invert(spec.t0, x0)?;
    let sim = Simulator::new(*solution.ctx.market(), &solution.rho.phi, Some(fm), spec)?;
    let mut gaps = Vec::with_capacity(spec.n_paths);
    let stats = sim.run(y0, Some((x0, Policy::Equilibrium)), |_, b: &PathBuffers| {
        let mut worst = 0.0_f64;
        for k in 0..b.t.len() {
            let p = fm.pbar(b.t[k], b.y[k]);
            worst = worst.max((b.x[k] - p).abs() / b.x[k]);
        }
        gaps.push(worst);
        Ok(())
    })?;
    stats.check()?;
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    gaps.sort_by(f64::total_cmp);
    Ok(IdentityGap {
        median: quantile(&gaps, 0.5),
        mean,
        p90: quantile(&gaps, 0.9),
        max: *gaps.last().unwrap_or(&0.0),
        flagged: stats.flagged,
        n_paths: spec.n_paths,
        dt: spec.dt,
    })
}

/// Mean and standard error of a ratio of means, by the delta method.
#[derive(Debug, Clone, Copy, Default)]
struct RatioAccumulator {
    n: usize,
    sa: f64,
    sb: f64,
    saa: f64,
    sbb: f64,
    sab: f64,
}

impl RatioAccumulator {
    fn push(&mut self, a: f64, b: f64) {
        self.n += 1;
        self.sa += a;
        self.sb += b;
        self.saa += a * a;
        self.sbb += b * b;
        self.sab += a * b;
    }

    fn estimate(&self) -> Result<Estimate> {
        let n = self.n as f64;
        let (ma, mb) = (self.sa / n, self.sb / n);
        if !(mb < 0.0) {
            return Err(Error::Integrity(format!(
                "Monte Carlo denominator of F is {mb:e}; increase n_paths or check the model"
            )));
        }
        let f = ma / mb;
        // Var(a - f b) from raw moments
        let va = self.saa / n - ma * ma;
        let vb = self.sbb / n - mb * mb;
        let cab = self.sab / n - ma * mb;
        let v = (va - 2.0 * f * cab + f * f * vb).max(0.0) * n / (n - 1.0).max(1.0);
        Ok(Estimate {
            mean: f,
            se: (v / n).sqrt() / mb.abs(),
            n: self.n,
        })
    }
}

/// Monte Carlo estimate of `F[phi](t, y)` from the pathwise representation
/// `delta_y(t, s, y) = E[U0'(Y_s) exp(int_t^s phi_y(u, Y_u) du)]`,
/// with `dY = (phi - r - theta^2/2) du - theta dW`.
///
/// The drift is integrated with a predictor-corrector (Heun) step.
pub fn estimate_f_mc(
    ctx: &OperatorContext,
    phi: &ScalarField2D,
    t: f64,
    y: f64,
    spec: SimSpec,
) -> Result<Estimate> {
    let d = ctx.discount();
    let u = ctx.utility();
    let horizon = ctx.grid().horizon();
    if (horizon - t).abs() < 1e-14 {
        return Ok(Estimate {
            mean: d.rho_h(horizon, horizon)?,
            se: 0.0,
            n: spec.n_paths,
        });
    }
    let spec = SimSpec { t0: t, ..spec };
    let n = spec.n_steps(horizon)?;
    let m = ctx.market();
    let (theta, shift) = (m.theta(), -m.r() - m.half_theta_sq());
    let phi_y = phi.d_dy();
    let times: Vec<f64> = (0..=n)
        .map(|k| if k == n { horizon } else { t + k as f64 * spec.dt })
        .collect();
    let wh: Vec<f64> = (0..=n).map(|k| trapezoid(&times, k) * d.h(t, times[k])).collect();
    let wd: Vec<f64> = (0..=n)
        .map(|k| trapezoid(&times, k) * d.dh_dt(t, times[k]))
        .collect();
    let (h_t, dh_t) = (d.h(t, horizon), d.dh_dt(t, horizon));
    let noise = spec.noise();
    let mut acc = RatioAccumulator::default();
    for p in 0..spec.n_paths {
        let mut z = noise.path(p);
        let (mut yk, mut log_e) = (y, 0.0);
        let mut g = u.u0_prime(yk)?;
        let (mut a, mut b) = (wd[0] * g, wh[0] * g);
        for k in 0..n {
            let (s0, s1) = (times[k], times[k + 1]);
            let dt = s1 - s0;
            let dw = dt.sqrt() * z.next_normal();
            let b0 = phi.bilinear(s0, yk) + shift;
            let pred = yk + b0 * dt - theta * dw;
            let b1 = phi.bilinear(s1, pred) + shift;
            let yn = yk + 0.5 * (b0 + b1) * dt - theta * dw;
            log_e += 0.5 * (phi_y.bilinear(s0, yk) + phi_y.bilinear(s1, yn)) * dt;
            yk = yn;
            g = u.u0_prime(yk)? * log_e.exp();
            a += wd[k + 1] * g;
            b += wh[k + 1] * g;
        }
        a += dh_t * g;
        b += h_t * g;
        acc.push(a, b);
    }
    acc.estimate()
}

/// Two Monte Carlo estimates of `p_bar(t, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PBarMcEstimate {
    /// Process with drift `theta^2/2 + rho_bar - r`, matching the `p_bar` PDE.
    pub pde_form: Estimate,
    /// `Y_bar` with `I0` evaluated at `Y_bar_s + theta^2 (s - t)`.
    pub shifted_form: Estimate,
}

/// Feynman-Kac estimates of `p_bar(t, y)` under common noise.
pub fn estimate_pbar_mc(
    market: &MarketModel,
    utility: &UtilityModel,
    rho_bar: &ScalarField2D,
    t: f64,
    y: f64,
    spec: SimSpec,
) -> Result<PBarMcEstimate> {
    let horizon = rho_bar.grid().horizon();
    let spec = SimSpec { t0: t, ..spec };
    let n = spec.n_steps(horizon)?;
    let (theta, r) = (market.theta(), market.r());
    let half = market.half_theta_sq();
    let times: Vec<f64> = (0..=n)
        .map(|k| if k == n { horizon } else { t + k as f64 * spec.dt })
        .collect();
    let w: Vec<f64> = (0..=n)
        .map(|k| trapezoid(&times, k) * (-r * (times[k] - t)).exp())
        .collect();
    let bequest = (-r * (horizon - t)).exp();
    let noise = spec.noise();
    let (mut fk, mut sh) = (Accumulator::default(), Accumulator::default());
    for p in 0..spec.n_paths {
        let mut z = noise.path(p);
        let (mut zk, mut yk) = (y, y);
        let i0 = utility.i0(y)?;
        let (mut a, mut b) = (w[0] * i0, w[0] * i0);
        for k in 0..n {
            let (s0, s1) = (times[k], times[k + 1]);
            let dt = s1 - s0;
            let dw = dt.sqrt() * z.next_normal();
            let d0 = rho_bar.bilinear(s0, zk) + half - r;
            let pred = zk + d0 * dt + theta * dw;
            let d1 = rho_bar.bilinear(s1, pred) + half - r;
            zk += 0.5 * (d0 + d1) * dt + theta * dw;
            let e0 = rho_bar.bilinear(s0, yk) - half - r;
            let pred = yk + e0 * dt - theta * dw;
            let e1 = rho_bar.bilinear(s1, pred) - half - r;
            yk += 0.5 * (e0 + e1) * dt - theta * dw;
            a += w[k + 1] * utility.i0(zk)?;
            b += w[k + 1] * utility.i0(yk + 2.0 * half * (s1 - t))?;
        }
        a += bequest * utility.i0(zk)?;
        b += bequest * utility.i0(yk + 2.0 * half * (horizon - t))?;
        fk.push(a);
        sh.push(b);
    }
    Ok(PBarMcEstimate {
        pde_form: fk.estimate(),
        shifted_form: sh.estimate(),
    })
}

/// One deviation of the perturbation test at one `epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationEntry {
    pub label: String,
    pub epsilon: f64,
    pub pi: f64,
    pub c: f64,
    /// `D = J(equilibrium) - J(deviation)`.
    pub d: Estimate,
    /// `D / epsilon` and its standard error.
    pub ratio: f64,
    pub ratio_se: f64,
}

impl PerturbationEntry {
    /// True when `D / epsilon` lies more than three standard errors below zero.
    pub fn flagged(&self) -> bool {
        self.ratio < -3.0 * self.ratio_se
    }
}

/// The fixed family of constant deviations `(label, pi, c)` around the equilibrium controls
/// `(pi0, c0)` at the starting state.
pub fn deviation_family(pi0: f64, c0: f64) -> Vec<(String, f64, f64)> {
    vec![
        ("pi+0.5".into(), pi0 + 0.5, c0),
        ("pi-0.5".into(), pi0 - 0.5, c0),
        ("pi=0".into(), 0.0, c0),
        ("c*2".into(), pi0, 2.0 * c0),
        ("c/2".into(), pi0, 0.5 * c0),
    ]
}

/// Estimates `D(eps) = J(pi_bar, c_bar) - J(pi_eps, c_eps)` with common random numbers.
pub fn perturbation_test(
    solution: &Solution,
    spec: SimSpec,
    x0: f64,
    epsilons: &[f64],
) -> Result<Vec<PerturbationEntry>> {
    let ctx = &solution.ctx;
    let fm = solution.feedback();
    let y0 = fm.invert(spec.t0, x0)?;
    let sim = Simulator::new(*ctx.market(), &solution.rho.phi, Some(fm), spec)?;
    let (d, u) = (ctx.discount(), ctx.utility());

    let mut base = Vec::with_capacity(spec.n_paths);
    sim.run(y0, Some((x0, Policy::Equilibrium)), |_, b| {
        base.push(path_utility(d, u, &b.t, &b.x, &b.c)?);
        Ok(())
    })?
    .check()?;

    let start = fm.controls(spec.t0, x0)?;
    let mut out = Vec::new();
    for &eps in epsilons {
        for (label, pi, c) in deviation_family(start.pi, start.c) {
            let policy = Policy::Perturbed {
                until: spec.t0 + eps,
                pi,
                c,
            };
            let mut acc = Accumulator::default();
            sim.run(y0, Some((x0, policy)), |p, b| {
                acc.push(base[p] - path_utility(d, u, &b.t, &b.x, &b.c)?);
                Ok(())
            })?
            .check()?;
            let e = acc.estimate();
            out.push(PerturbationEntry {
                label,
                epsilon: eps,
                pi,
                c,
                d: e,
                ratio: e.mean / eps,
                ratio_se: e.se / eps,
            });
        }
    }
    Ok(out)
}
