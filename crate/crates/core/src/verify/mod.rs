//! Oracles and the invariant suite tying the numerical pipeline to the theory.

mod checks;
mod merton;
mod report;
mod suite;

pub use checks::{
    bounds_margins, default_f_probes, f_cross_validation, first_order_conditions, geometric_probes, gx_vs_v,
    hjb_residual, j_vs_g, merton_comparison, merton_oracle, probe_nodes, subgame_perturbation,
    wealth_identity_order, BoundMargin, FProbe, FocCheck, HjbResidual, IdentityOrder, JvsG, MertonComparison,
    PerturbationSummary,
};
pub use merton::MertonOracle;
pub use report::{CheckResult, Severity, Status, VerificationReport};
pub use suite::{coarse_solution, run_suite, VerifySettings, BOUND_SLACK};
