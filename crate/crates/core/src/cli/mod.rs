//! Command-line front end: configuration, the `solve`, `simulate` and `verify` commands,
//! and CSV/JSON export.

mod config;
mod output;

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;

pub use config::{
    BoundarySetting, DiscountSection, GridSection, MarketSection, McSection, OutputSection, Resolved,
    RunConfig, SolverSection, UtilitySection, VerifySection, Y_SIGMAS,
};
pub use output::{fmt, write_csv, write_json, write_solution};

use crate::error::{Error, Result};
use crate::montecarlo::{path_utility, Accumulator, Estimate, Policy, Simulator};
use crate::pipeline::{solve, Solution, Timings};
use crate::verify::{coarse_solution, run_suite, VerificationReport};

#[derive(Debug, Parser)]
#[command(
    name = "tcmerton",
    version,
    about = "Time-consistent Merton strategies under non-constant discounting"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fixed point, p_bar, controls and value; writes CSV surfaces and meta.json.
    Solve(CommonArgs),
    /// Simulates wealth under the equilibrium strategy; writes paths.csv and summary.json.
    Simulate(CommonArgs),
    /// Runs the verification suite; writes report.json.
    Verify(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `outputs.directory`.
    #[arg(long, env = "TCMERTON_OUT_DIR")]
    pub out: Option<PathBuf>,
    /// Overrides `mc.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Treat verification warnings as failures.
    #[arg(long)]
    pub strict: bool,
    /// Start time for `simulate`.
    #[arg(long)]
    pub t0: Option<f64>,
    /// Start wealth for `simulate`; overrides `grid.x0`.
    #[arg(long)]
    pub x0: Option<f64>,
}

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const FAILURE: u8 = 1;
    pub const INVALID: u8 = 2;
    pub const NO_CONVERGENCE: u8 = 3;
    pub const CHECKS_FAILED: u8 = 4;
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidParameter { .. } | Error::Config(_) => exit::INVALID,
        Error::NoConvergence { .. } => exit::NO_CONVERGENCE,
        _ => exit::FAILURE,
    }
}

#[derive(Debug, Serialize)]
struct GridMeta {
    n_t: usize,
    n_y: usize,
    y_min: f64,
    y_max: f64,
    dt: f64,
    dy: f64,
}

#[derive(Debug, Serialize)]
struct Meta<'a> {
    version: &'static str,
    converged: bool,
    error: Option<String>,
    iterations: usize,
    residual: f64,
    residual_history: Vec<f64>,
    kappa: Option<f64>,
    phi_y_max: Option<f64>,
    damping_final: Option<f64>,
    grid: GridMeta,
    timings: Option<Timings>,
    config: &'a RunConfig,
}

struct Prepared {
    config: RunConfig,
    resolved: Resolved,
    out: PathBuf,
}

fn prepare(args: &CommonArgs) -> Result<Prepared> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.mc.seed = seed;
    }
    if let Some(x0) = args.x0 {
        config.grid.x0 = x0;
    }
    let resolved = config.resolve()?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| config.outputs.directory.clone());
    fs::create_dir_all(&out)?;
    // the effective configuration, re-runnable as is
    fs::write(out.join("config.toml"), config.to_toml()?)?;
    Ok(Prepared {
        config,
        resolved,
        out,
    })
}

fn grid_meta(r: &Resolved) -> GridMeta {
    let g = &r.grid;
    GridMeta {
        n_t: g.n_t(),
        n_y: g.n_y(),
        y_min: g.y_min(),
        y_max: g.y_max(),
        dt: g.dt(),
        dy: g.dy(),
    }
}

/// Solves, and records the residual history in `meta.json` when the iteration fails.
fn solve_logged(p: &Prepared) -> Result<Solution> {
    let ctx = p.resolved.context()?;
    match solve(ctx, &p.resolved.iteration) {
        Ok(sol) => Ok(sol),
        Err(err) => {
            let (iterations, residual, history) = match &err {
                Error::NoConvergence {
                    iterations,
                    last,
                    history,
                } => (*iterations, *last, history.clone()),
                _ => (0, f64::NAN, Vec::new()),
            };
            let meta = Meta {
                version: env!("CARGO_PKG_VERSION"),
                converged: false,
                error: Some(err.to_string()),
                iterations,
                residual,
                residual_history: history,
                kappa: None,
                phi_y_max: None,
                damping_final: None,
                grid: grid_meta(&p.resolved),
                timings: None,
                config: &p.config,
            };
            write_json(&p.out.join("meta.json"), &meta)?;
            Err(err)
        }
    }
}

/// `solve`: writes the four CSV surfaces and `meta.json`.
pub fn cmd_solve(args: &CommonArgs) -> Result<Solution> {
    let p = prepare(args)?;
    let sol = solve_logged(&p)?;
    let o = &p.config.outputs;
    write_solution(
        &p.out,
        &sol,
        (p.config.grid.x_lo, p.config.grid.x_hi),
        o.value_times,
        o.value_wealths,
    )?;
    if !sol.rho.kappa_respected() {
        warn!(
            "|d rho_bar / dy| reaches {:.3e}, above kappa = {:.3e}",
            sol.rho.phi_y_max, sol.rho.kappa
        );
    }
    let meta = Meta {
        version: env!("CARGO_PKG_VERSION"),
        converged: true,
        error: None,
        iterations: sol.rho.iterations,
        residual: sol.rho.residual_sup,
        residual_history: sol.rho.history.clone(),
        kappa: Some(sol.rho.kappa),
        phi_y_max: Some(sol.rho.phi_y_max),
        damping_final: Some(sol.rho.damping_final),
        grid: grid_meta(&p.resolved),
        timings: Some(sol.timings),
        config: &p.config,
    };
    write_json(&p.out.join("meta.json"), &meta)?;
    info!("wrote solve artifacts to {}", p.out.display());
    Ok(sol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quantiles {
    pub mean: f64,
    pub p05: f64,
    pub p50: f64,
    pub p95: f64,
}

impl Quantiles {
    fn of(mut v: Vec<f64>) -> Self {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let (i, a) = (pos.floor() as usize, pos.fract());
            let j = (i + 1).min(v.len() - 1);
            v[i] + a * (v[j] - v[i])
        };
        Self {
            mean,
            p05: q(0.05),
            p50: q(0.5),
            p95: q(0.95),
        }
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub t0: f64,
    pub x0: f64,
    pub y0: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub antithetic: bool,
    pub flagged: usize,
    pub j: Estimate,
    pub g: f64,
    /// `|J - G| / se`.
    pub z: f64,
    pub terminal_wealth: Quantiles,
    /// Consumption `c* X` at `t0` and at the horizon.
    pub consumption_t0: f64,
    pub consumption_terminal: Quantiles,
    pub pi_t0: f64,
    /// `max_s |X_s - p_bar(s, Y_s)| / X_s` over each path.
    pub identity_gap: Quantiles,
}

/// `simulate`: inverts `p_bar` at `(t0, x0)`, simulates, writes `paths.csv` and `summary.json`.
pub fn cmd_simulate(args: &CommonArgs) -> Result<SimulationSummary> {
    let p = prepare(args)?;
    let sol = solve_logged(&p)?;
    let t0 = args.t0.unwrap_or(0.0);
    let x0 = p.config.grid.x0;
    let spec = p.config.sim_spec(t0);
    let fm = sol.feedback();
    let y0 = fm.invert(t0, x0)?;
    info!("y0 = {y0:.6} at t0 = {t0}, x0 = {x0}");
    let sim = Simulator::new(*sol.ctx.market(), &sol.rho.phi, Some(fm), spec)?;
    let (d, u) = (sol.ctx.discount(), sol.ctx.utility());

    let export = p.config.mc.export_paths.min(spec.n_paths);
    let stride = p.config.mc.stride;
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut acc = Accumulator::default();
    let (mut xt, mut ct, mut gaps) = (Vec::new(), Vec::new(), Vec::new());
    let stats = sim.run(y0, Some((x0, Policy::Equilibrium)), |path, b| {
        acc.push(path_utility(d, u, &b.t, &b.x, &b.c)?);
        let last = b.t.len() - 1;
        xt.push(b.x[last]);
        ct.push(b.c[last] * b.x[last]);
        let mut gap = 0.0_f64;
        for k in 0..=last {
            let pb = fm.pbar(b.t[k], b.y[k]);
            gap = gap.max((b.x[k] - pb).abs() / b.x[k]);
            if path < export && (k % stride == 0 || k == last) {
                rows.push(vec![
                    path.to_string(),
                    fmt(b.t[k]),
                    fmt(b.y[k]),
                    fmt(b.x[k]),
                    fmt(b.c[k]),
                    fmt(b.pi[k]),
                    fmt(pb),
                ]);
            }
        }
        gaps.push(gap);
        Ok(())
    })?;
    if stats.flagged > 0 {
        warn!("{} of {} paths left the grid", stats.flagged, stats.total);
    }
    stats.check()?;
    write_csv(
        &p.out.join("paths.csv"),
        &["path", "t", "y", "x", "c", "pi", "pbar"],
        rows,
    )?;

    let j = acc.estimate();
    let g = sol.value.g(t0, x0)?;
    let start = fm.controls(t0, x0)?;
    let summary = SimulationSummary {
        t0,
        x0,
        y0,
        n_paths: spec.n_paths,
        dt: spec.dt,
        seed: spec.seed,
        antithetic: spec.antithetic,
        flagged: stats.flagged,
        j,
        g,
        z: (j.mean - g).abs() / j.se,
        terminal_wealth: Quantiles::of(xt),
        consumption_t0: start.c * x0,
        consumption_terminal: Quantiles::of(ct),
        pi_t0: start.pi,
        identity_gap: Quantiles::of(gaps),
    };
    write_json(&p.out.join("summary.json"), &summary)?;
    info!(
        "J = {:.6} +- {:.2e}, G = {:.6} ({:.2} standard errors)",
        j.mean, j.se, g, summary.z
    );
    Ok(summary)
}

/// `verify`: runs the full suite, writes `report.json` and prints the table.
pub fn cmd_verify(args: &CommonArgs) -> Result<VerificationReport> {
    let p = prepare(args)?;
    let sol = solve_logged(&p)?;
    let settings = p.config.verify_settings();
    let coarse = if settings.refinement {
        Some(coarse_solution(&sol, &p.resolved.iteration)?)
    } else {
        None
    };
    let report = run_suite(&sol, coarse.as_ref(), &settings)?;
    fs::write(p.out.join("report.json"), report.to_json()? + "\n")?;
    Ok(report)
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a).map(|_| exit::OK),
        Command::Simulate(a) => cmd_simulate(a).map(|_| exit::OK),
        Command::Verify(a) => cmd_verify(a).map(|r| {
            print!("{}", r.table());
            if r.success(a.strict) {
                exit::OK
            } else {
                exit::CHECKS_FAILED
            }
        }),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}
