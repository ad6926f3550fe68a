use serde::Serialize;

use crate::error::{Error, Result};
use crate::montecarlo::{
    estimate_f_mc, estimate_j, perturbation_test, wealth_identity_gap, Estimate, IdentityGap,
    PerturbationEntry, Policy, SimSpec,
};
use crate::pipeline::Solution;
use crate::strategy::{log_slope_envelope, pi_envelope, PBarBounds};

use super::MertonOracle;

/// Grid nodes `(n, i)` whose wealth `p_bar(t_n, y_i)` lies in `x_range`, at least `pad`
/// nodes away from the `y` boundaries.
pub fn probe_nodes(sol: &Solution, x_range: (f64, f64), pad: usize) -> Vec<(usize, usize)> {
    let g = sol.pbar.pbar.grid();
    let mut out = Vec::new();
    for n in 0..g.n_t() {
        for i in pad..g.n_y() - pad {
            let x = sol.pbar.pbar.get(n, i);
            if x >= x_range.0 && x <= x_range.1 {
                out.push((n, i));
            }
        }
    }
    out
}

/// `count` wealth levels spaced geometrically over `[lo, hi]`.
pub fn geometric_probes(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![(lo * hi).sqrt()];
    }
    let k = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|j| lo * (k * j as f64).exp()).collect()
}

/// Discrete residual of the extended HJB equation on grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HjbResidual {
    /// `max |G_t + H - R| / max(|G_t|, floor)` over interior probe nodes.
    pub max_normalized: f64,
    pub nodes: usize,
    /// `max |G(T, x) - U(x)| / max(|U(x)|, 1)` over the terminal row.
    pub terminal_error: f64,
}

/// Evaluates `G_t + H(pi*, c*) - R` at every interior probe node.
///
/// With `x = p_bar(t, y)`: `G_x = e^y`, `G_xx = e^y / p_bar_y`, and
/// `G_t = L_t - L_y p_bar_t / p_bar_y` from central differences in `t` at fixed `y`.
/// `H = (r + sigma theta pi - c) x G_x + sigma^2 pi^2 x^2 G_xx / 2 + U(c x)` and `R` is the
/// non-local term.
pub fn hjb_residual(sol: &Solution, x_range: (f64, f64)) -> Result<HjbResidual> {
    let m = sol.ctx.market();
    let u = sol.ctx.utility();
    let (r, sigma, theta) = (m.r(), m.sigma(), m.theta());
    let g = sol.pbar.pbar.grid().clone();
    let (nt, dt) = (g.n_t(), g.dt());
    let (l, ly, rr) = (&sol.value.value, &sol.value.value_y, &sol.value.nonlocal);
    let (p, py) = (&sol.pbar.pbar, &sol.pbar.pbar_y);

    let mut raw = Vec::new();
    for (n, i) in probe_nodes(sol, x_range, 2) {
        // two nodes from each time boundary, so no difference spans the startup step
        if n < 2 || n + 2 >= nt {
            continue;
        }
        let y = g.y(i);
        let x = p.get(n, i);
        let lt = (l.get(n + 1, i) - l.get(n - 1, i)) / (2.0 * dt);
        let pt = (p.get(n + 1, i) - p.get(n - 1, i)) / (2.0 * dt);
        let gt = lt - ly.get(n, i) * pt / py.get(n, i);
        let v = y.exp();
        let vx = v / py.get(n, i);
        let pi = sol.strategy.pi_star.get(n, i);
        let c = sol.strategy.c_star.get(n, i);
        let sp = sigma * pi;
        let h = (r + sp * theta - c) * x * v + 0.5 * sp * sp * x * x * vx + u.u(c * x)?;
        raw.push((gt, (gt + h - rr.get(n, i)).abs()));
    }
    if raw.is_empty() {
        return Err(Error::param(
            "x_range",
            "no interior grid node maps into the wealth range",
        ));
    }
    let scale = raw.iter().map(|(gt, _)| gt.abs()).fold(0.0, f64::max);
    let floor = 1e-3 * scale;
    let max_normalized = raw
        .iter()
        .map(|(gt, res)| res / gt.abs().max(floor))
        .fold(0.0, f64::max);

    let last = nt - 1;
    let mut terminal_error = 0.0_f64;
    for i in 0..g.n_y() {
        let uu = u.u(p.get(last, i))?;
        terminal_error = terminal_error.max((l.get(last, i) - uu).abs() / uu.abs().max(1.0));
    }
    Ok(HjbResidual {
        max_normalized,
        nodes: raw.len(),
        terminal_error,
    })
}

/// Agreement of the `x`-form controls with the `p_bar`-form surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FocCheck {
    pub pi_rel: f64,
    pub c_rel: f64,
    /// `max |I(U'(x)) / x - 1|` and `max |c*(T, y) - 1|`.
    pub terminal: f64,
}

/// Compares `pi = -theta v / (sigma x v_x)` and `c = I(v) / x`, evaluated through
/// `p_bar` inversion at `x = p_bar(t, y)`, against the stored surfaces.
pub fn first_order_conditions(sol: &Solution, x_range: (f64, f64)) -> Result<FocCheck> {
    let fm = sol.feedback();
    let u = sol.ctx.utility();
    let m = sol.ctx.market();
    let g = sol.pbar.pbar.grid().clone();
    let (mut pi_rel, mut c_rel) = (0.0_f64, 0.0_f64);
    for (n, i) in probe_nodes(sol, x_range, 0) {
        let t = g.t(n);
        let x = sol.pbar.pbar.get(n, i);
        let v = fm.marginal_value(t, x)?;
        let (lp, dlp) = fm.log_pbar(t, v.ln());
        let vx = v / (lp.exp() * dlp);
        let pi = -m.theta() * v / (m.sigma() * x * vx);
        let c = u.inv_marginal(v)? / x;
        let (ps, cs) = (sol.strategy.pi_star.get(n, i), sol.strategy.c_star.get(n, i));
        pi_rel = pi_rel.max((pi / ps - 1.0).abs());
        c_rel = c_rel.max((c / cs - 1.0).abs());
    }
    let mut terminal = 0.0_f64;
    for x in geometric_probes(x_range.0, x_range.1, 25) {
        terminal = terminal.max((u.inv_marginal(u.u_prime(x)?)? / x - 1.0).abs());
    }
    for &c in sol.strategy.c_star.row(g.n_t() - 1) {
        terminal = terminal.max((c - 1.0).abs());
    }
    Ok(FocCheck {
        pi_rel,
        c_rel,
        terminal,
    })
}

/// Errors of the pipeline against the closed-form Merton solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MertonComparison {
    pub rho_sup: f64,
    pub pi_rel: f64,
    pub c_rel: f64,
    pub g_rel: f64,
}

/// `None` unless the configuration is exponential discounting with CRRA utility.
pub fn merton_oracle(sol: &Solution) -> Result<Option<MertonOracle>> {
    let d = sol.ctx.discount();
    match (d.exponential_rate(), sol.ctx.utility().crra_gamma()) {
        (Some(rho0), Some(gamma)) => Ok(Some(MertonOracle::new(sol.ctx.market(), gamma, rho0)?)),
        _ => Ok(None),
    }
}

/// `rho_bar` over all nodes; `pi*` and `c*` over probe nodes; `G(0, x)` at probe wealths.
pub fn merton_comparison(
    sol: &Solution,
    oracle: &MertonOracle,
    x_range: (f64, f64),
) -> Result<MertonComparison> {
    let rho_sup = sol
        .rho
        .phi
        .values()
        .iter()
        .map(|p| (p - oracle.rho0).abs())
        .fold(0.0, f64::max);
    let g = sol.pbar.pbar.grid().clone();
    let (mut pi_rel, mut c_rel) = (0.0_f64, 0.0_f64);
    for (n, i) in probe_nodes(sol, x_range, 0) {
        pi_rel = pi_rel.max((sol.strategy.pi_star.get(n, i) / oracle.pi() - 1.0).abs());
        c_rel = c_rel.max((sol.strategy.c_star.get(n, i) / oracle.c(g.t(n)) - 1.0).abs());
    }
    let mut g_rel = 0.0_f64;
    for x in geometric_probes(x_range.0, x_range.1, 9) {
        g_rel = g_rel.max((sol.value.g(0.0, x)? / oracle.value(0.0, x) - 1.0).abs());
    }
    Ok(MertonComparison {
        rho_sup,
        pi_rel,
        c_rel,
        g_rel,
    })
}

/// The worst margin of one inequality over the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundMargin {
    pub name: String,
    /// Smallest relative distance to the nearest bound; negative on violation.
    pub margin: f64,
    pub t: f64,
    pub y: f64,
    /// Reported only; not implied by the proofs for every utility.
    pub informational: bool,
}

struct MarginAcc {
    name: &'static str,
    margin: f64,
    at: (f64, f64),
    informational: bool,
}

impl MarginAcc {
    fn new(name: &'static str, informational: bool) -> Self {
        Self {
            name,
            margin: f64::INFINITY,
            at: (f64::NAN, f64::NAN),
            informational,
        }
    }

    fn between(&mut self, v: f64, lo: f64, hi: f64, t: f64, y: f64) {
        let m = ((v - lo) / lo.abs().max(1e-300)).min((hi - v) / hi.abs().max(1e-300));
        self.record(m, t, y);
    }

    fn record(&mut self, m: f64, t: f64, y: f64) {
        if m < self.margin || m.is_nan() {
            self.margin = m;
            self.at = (t, y);
        }
    }

    fn done(self) -> BoundMargin {
        BoundMargin {
            name: self.name.to_string(),
            margin: self.margin,
            t: self.at.0,
            y: self.at.1,
            informational: self.informational,
        }
    }
}

/// Node-by-node margins of every proved inequality on `rho_bar`, `p_bar` and the controls.
pub fn bounds_margins(sol: &Solution) -> Vec<BoundMargin> {
    let m = sol.ctx.market();
    let u = sol.ctx.utility();
    let d = sol.ctx.discount();
    let kappa = sol.rho.kappa;
    let (lo_rho, hi_rho) = d.rho_range();
    let pbb = PBarBounds::new(m, u, d.rho_norm());
    let g = sol.pbar.pbar.grid().clone();
    let phi_y = sol.rho.phi.d_dy();

    let mut rho = MarginAcc::new("rho_bar_range", false);
    let mut pos = MarginAcc::new("pbar_positive", false);
    let mut dec = MarginAcc::new("pbar_decreasing", false);
    let mut ratio = MarginAcc::new("pbar_over_i0", false);
    let mut slope = MarginAcc::new("pbar_log_slope", false);
    let mut pi = MarginAcc::new("pi_envelope", false);
    let mut c = MarginAcc::new("c_envelope", false);
    let mut lit = MarginAcc::new("pi_lower_literal", true);
    let mut kap = MarginAcc::new("phi_y_kappa", true);
    let lit_k = m.theta() / m.sigma();

    for n in 0..g.n_t() {
        let t = g.t(n);
        let (r3, r4) = (pbb.r3(t), pbb.r4(t));
        let (s_lo, s_hi) = log_slope_envelope(m, u, kappa, t);
        let (p_lo, p_hi) = pi_envelope(m, u, kappa, t);
        let (r1t, _) = crate::model::elasticity_bounds(u, kappa, t, m.horizon());
        for i in 0..g.n_y() {
            let y = g.y(i);
            let p = sol.pbar.pbar.get(n, i);
            rho.between(sol.rho.phi.get(n, i), lo_rho, hi_rho, t, y);
            pos.record(p, t, y);
            dec.record(-sol.pbar.pbar_y.get(n, i), t, y);
            ratio.between(p / sol.pbar.i0[i], r3, r4, t, y);
            slope.between(-sol.pbar.log_pbar_y.get(n, i), s_lo, s_hi, t, y);
            let pis = sol.strategy.pi_star.get(n, i);
            pi.between(pis, p_lo, p_hi, t, y);
            c.between(sol.strategy.c_star.get(n, i), 1.0 / r4, 1.0 / r3, t, y);
            lit.record((pis - lit_k * r1t) / (lit_k * r1t), t, y);
            if kappa > 0.0 {
                kap.record((kappa - phi_y.get(n, i).abs()) / kappa, t, y);
            } else {
                kap.record(-phi_y.get(n, i).abs(), t, y);
            }
        }
    }
    [rho, pos, dec, ratio, slope, pi, c, lit, kap]
        .into_iter()
        .map(MarginAcc::done)
        .collect()
}

/// Largest relative gap between a central difference of `G` in `x` and `v`.
pub fn gx_vs_v(sol: &Solution, ts: &[f64], xs: &[f64]) -> Result<f64> {
    let vs = &sol.value;
    let mut worst = 0.0_f64;
    for &t in ts {
        for &x in xs {
            let h = 1e-4 * x;
            let fd = (vs.g(t, x + h)? - vs.g(t, x - h)?) / (2.0 * h);
            let v = sol.feedback().marginal_value(t, x)?;
            worst = worst.max((fd / v - 1.0).abs());
        }
    }
    Ok(worst)
}

/// Monte Carlo `J(t0, x0)` under the equilibrium policy against `G(t0, x0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JvsG {
    pub j: Estimate,
    pub g: f64,
    /// `|J - G| / se`.
    pub z: f64,
}

pub fn j_vs_g(sol: &Solution, spec: SimSpec, x0: f64) -> Result<JvsG> {
    let j = estimate_j(sol, spec, x0, Policy::Equilibrium)?;
    let g = sol.value.g(spec.t0, x0)?;
    Ok(JvsG {
        j,
        g,
        z: (j.mean - g).abs() / j.se,
    })
}

/// Wealth identity gaps at successively smaller steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityOrder {
    pub gaps: Vec<IdentityGap>,
    /// Ratios of consecutive medians, coarse over fine.
    pub ratios: Vec<f64>,
}

pub fn wealth_identity_order(sol: &Solution, spec: SimSpec, x0: f64, dts: &[f64]) -> Result<IdentityOrder> {
    let mut gaps = Vec::with_capacity(dts.len());
    for &dt in dts {
        gaps.push(wealth_identity_gap(sol, SimSpec { dt, ..spec }, x0)?);
    }
    let ratios = gaps.windows(2).map(|w| w[0].median / w[1].median).collect();
    Ok(IdentityOrder { gaps, ratios })
}

/// One probe of the operator cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FProbe {
    pub t: f64,
    pub y: f64,
    pub pde: f64,
    pub mc: Estimate,
    /// `|mc - pde| / se`, with `se` floored at `1e-12` relative.
    pub z: f64,
}

/// Five probes: time nodes at fractions `{0, 1/4, 1/2, 3/4, 9/10}` of the horizon paired with
/// the `y` nodes nearest `y_center + {-1, -1/2, 0, 1/2, 1}`.
pub fn default_f_probes(sol: &Solution, y_center: f64) -> Vec<(usize, usize)> {
    let g = sol.rho.phi.grid();
    let fr = [0.0, 0.25, 0.5, 0.75, 0.9];
    let dy = [-1.0, -0.5, 0.0, 0.5, 1.0];
    fr.iter()
        .zip(dy)
        .map(|(&f, d)| {
            let n = g.nearest_t(f * g.horizon());
            let (i, a) = g.locate_y(y_center + d);
            (n, if a > 0.5 { i + 1 } else { i })
        })
        .collect()
}

/// Compares `F[rho_bar]` from the PDE route with the pathwise Monte Carlo estimator.
pub fn f_cross_validation(sol: &Solution, nodes: &[(usize, usize)], spec: SimSpec) -> Result<Vec<FProbe>> {
    let g = sol.rho.phi.grid().clone();
    let mut out = Vec::with_capacity(nodes.len());
    for &(n, i) in nodes {
        let (t, y) = (g.t(n), g.y(i));
        let pde = sol.rho.f_phi.get(n, i);
        let mc = estimate_f_mc(&sol.ctx, &sol.rho.phi, t, y, spec)?;
        // rounding floor for the exponential case, where the estimator is exact pathwise
        let se = mc.se.max(1e-12 * pde.abs().max(1.0));
        let z = (mc.mean - pde).abs() / se;
        out.push(FProbe { t, y, pde, mc, z });
    }
    Ok(out)
}

/// Perturbation results with the worst standardized ratio.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationSummary {
    pub entries: Vec<PerturbationEntry>,
    /// `min (D / eps) / se` over all deviations and epsilons.
    pub worst_z: f64,
    /// Least-squares slope of `D(eps) / eps` against `eps`, per deviation label.
    pub slopes: Vec<(String, f64)>,
}

pub fn subgame_perturbation(
    sol: &Solution,
    spec: SimSpec,
    x0: f64,
    epsilons: &[f64],
) -> Result<PerturbationSummary> {
    let entries = perturbation_test(sol, spec, x0, epsilons)?;
    let worst_z = entries
        .iter()
        .map(|e| match (e.ratio_se > 0.0, e.ratio < 0.0) {
            (true, _) => e.ratio / e.ratio_se,
            (false, true) => f64::NEG_INFINITY,
            (false, false) => f64::INFINITY,
        })
        .fold(f64::INFINITY, f64::min);
    let mut labels: Vec<String> = entries.iter().map(|e| e.label.clone()).collect();
    labels.sort();
    labels.dedup();
    let slopes = labels
        .into_iter()
        .map(|l| {
            let pts: Vec<(f64, f64)> = entries
                .iter()
                .filter(|e| e.label == l)
                .map(|e| (e.epsilon, e.ratio))
                .collect();
            let k = pts.len() as f64;
            let (mx, my) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / k, a.1 + p.1 / k));
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            (l, if sxx > 0.0 { sxy / sxx } else { 0.0 })
        })
        .collect();
    Ok(PerturbationSummary {
        entries,
        worst_z,
        slopes,
    })
}
