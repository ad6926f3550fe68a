//! Steps 1-2 of the construction: fixed point, `p_bar`, controls and value.

use std::time::Instant;

use log::info;

use crate::error::Result;
use crate::fixed_point::{iterate, IterationSettings, OperatorContext, RhoField};
use crate::strategy::{
    compute_pbar, controls_from_pbar, FeedbackMap, PBarField, StrategySurface, ValueSurface,
};

/// Wall-clock seconds spent in each stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct Timings {
    pub fixed_point: f64,
    pub pbar: f64,
    pub total: f64,
}

/// Every field produced by a solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub ctx: OperatorContext,
    pub rho: RhoField,
    pub pbar: PBarField,
    pub strategy: StrategySurface,
    pub value: ValueSurface,
    pub timings: Timings,
}

impl Solution {
    pub fn feedback(&self) -> &FeedbackMap {
        self.value.feedback()
    }
}

/// Runs the fixed-point iteration, then the `p_bar` solve, then assembles controls and value.
pub fn solve(ctx: OperatorContext, settings: &IterationSettings) -> Result<Solution> {
    let start = Instant::now();
    let rho = iterate(&ctx, settings)?;
    let fixed_point = start.elapsed().as_secs_f64();
    info!(
        "fixed point: {} iterations, residual {:.3e}, kappa {:.4}",
        rho.iterations, rho.residual_sup, rho.kappa
    );
    let t1 = Instant::now();
    let pbar = compute_pbar(&ctx, &rho.phi)?;
    let strategy = controls_from_pbar(&ctx, &pbar)?;
    let feedback = FeedbackMap::new(&pbar, *ctx.market(), *ctx.utility());
    let value = ValueSurface::new(&rho.family, feedback)?;
    let pbar_time = t1.elapsed().as_secs_f64();
    Ok(Solution {
        ctx,
        rho,
        pbar,
        strategy,
        value,
        timings: Timings {
            fixed_point,
            pbar: pbar_time,
            total: start.elapsed().as_secs_f64(),
        },
    })
}
