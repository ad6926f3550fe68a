//! Path simulation of `Y_bar` and wealth, and Monte Carlo estimators built on it.

mod estimators;
mod noise;
mod paths;

pub use estimators::{
    deviation_family, estimate_f_mc, estimate_j, estimate_j_ensemble, estimate_pbar_mc, path_utility,
    perturbation_test, wealth_identity_gap, Accumulator, Estimate, IdentityGap, PBarMcEstimate,
    PerturbationEntry,
};
pub use noise::{NoiseSource, PathNoise};
pub use paths::{
    simulate_wealth, simulate_y, PathBuffers, PathEnsemble, Policy, RunStats, SimSpec, Simulator,
};

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::fixed_point::{IterationSettings, OperatorContext};
    use crate::grid_pde::{Grid, ScalarField2D, ThetaScheme};
    use crate::model::{DiscountModel, MarketModel, UtilityModel};

    fn market() -> MarketModel {
        MarketModel::new(0.03, 0.09, 0.2, 1.0).unwrap()
    }

    fn flat(rate: f64) -> ScalarField2D {
        let g = Arc::new(Grid::uniform(1.0, 11, -20.0, 20.0, 11).unwrap());
        ScalarField2D::constant(g, rate)
    }

    fn spec(n_paths: usize, seed: u64, antithetic: bool) -> SimSpec {
        SimSpec {
            t0: 0.0,
            dt: 0.01,
            n_paths,
            seed,
            antithetic,
        }
    }

    #[test]
    fn terminal_law_is_gaussian_for_constant_rho() {
        let m = market();
        let rho = flat(0.1);
        let e = simulate_y(m, &rho, spec(20_000, 11, false), 0.5).unwrap();
        let last: Vec<f64> = (0..e.n_paths).map(|p| e.y_path(p)[e.n_steps]).collect();
        let n = last.len() as f64;
        let mean = last.iter().sum::<f64>() / n;
        let var = last.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let mu = 0.5 + 0.1 - 0.03 - m.half_theta_sq();
        let s2 = m.theta().powi(2);
        assert!((mean - mu).abs() < 4.0 * (s2 / n).sqrt());
        // sample variance has sd ~ s2 sqrt(2/n)
        assert!((var - s2).abs() < 4.0 * s2 * (2.0 / n).sqrt());
    }

    #[test]
    fn antithetic_pairs_straddle_the_drift_line() {
        let m = market();
        let rho = flat(0.1);
        let e = simulate_y(m, &rho, spec(10, 5, true), 0.0).unwrap();
        for k in (0..5).map(|k| 2 * k) {
            let (a, b) = (e.y_path(k), e.y_path(k + 1));
            for s in 0..=e.n_steps {
                let drift = (0.1 - 0.03 - m.half_theta_sq()) * e.times[s];
                assert!((0.5 * (a[s] + b[s]) - drift).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let rho = flat(0.07);
        let a = simulate_y(market(), &rho, spec(64, 9, false), 0.3).unwrap();
        let b = simulate_y(market(), &rho, spec(64, 9, false), 0.3).unwrap();
        let c = simulate_y(market(), &rho, spec(64, 10, false), 0.3).unwrap();
        assert_eq!(a.y_paths, b.y_paths);
        assert_ne!(a.y_paths, c.y_paths);
    }

    #[test]
    fn pure_savings_wealth_is_deterministic() {
        let m = market();
        let rho = flat(0.1);
        let sim = Simulator::new(m, &rho, None, spec(4, 1, false)).unwrap();
        let mut seen = 0;
        sim.run(0.0, Some((2.0, Policy::Constant { pi: 0.0, c: 0.4 })), |_, b| {
            for (t, x) in b.t.iter().zip(&b.x) {
                assert!((x / (2.0 * ((0.03 - 0.4) * t).exp()) - 1.0).abs() < 1e-12);
            }
            seen += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, 4);
        assert!(sim
            .run(0.0, Some((2.0, Policy::Equilibrium)), |_, _| Ok(()))
            .is_err());
    }

    #[test]
    fn spec_rejects_bad_steps() {
        let rho = flat(0.1);
        let bad = SimSpec {
            dt: 0.03,
            ..spec(4, 1, false)
        };
        assert!(simulate_y(market(), &rho, bad, 0.0).is_err());
        assert!(simulate_y(market(), &rho, spec(3, 1, true), 0.0).is_err());
    }

    #[test]
    fn standard_error_shrinks_like_root_n() {
        let mut a = Accumulator::default();
        let mut b = Accumulator::default();
        let src = NoiseSource::new(3, false);
        for p in 0..40_000 {
            let z = src.path(p).next_normal();
            if p < 20_000 {
                a.push(z);
            }
            b.push(z);
        }
        let r = a.estimate().se / b.estimate().se;
        assert!((r / 2f64.sqrt() - 1.0).abs() < 0.03, "ratio {r}");
    }

    fn context(d: DiscountModel) -> OperatorContext {
        let g = Arc::new(Grid::uniform(1.0, 101, -6.0, 6.0, 121).unwrap());
        OperatorContext::new(
            market(),
            d,
            UtilityModel::crra(0.5).unwrap(),
            g,
            ThetaScheme::default(),
        )
        .unwrap()
    }

    #[test]
    fn f_estimator_recovers_exponential_rate() {
        let ctx = context(DiscountModel::exponential(0.1, 1.0).unwrap());
        let phi = ScalarField2D::constant(ctx.grid().clone(), 0.1);
        let s = SimSpec {
            dt: 0.02,
            ..spec(200, 4, false)
        };
        let e = estimate_f_mc(&ctx, &phi, 0.0, 0.3, s).unwrap();
        assert!((e.mean - 0.1).abs() < 1e-12 && e.se < 1e-10);
        let at_t = estimate_f_mc(&ctx, &phi, 1.0, 0.3, s).unwrap();
        assert_eq!(at_t.mean, 0.1);
    }

    #[test]
    fn pbar_estimators_match_pde_for_merton() {
        let ctx = context(DiscountModel::exponential(0.1, 1.0).unwrap());
        let sol = crate::pipeline::solve(ctx, &IterationSettings::default()).unwrap();
        let s = SimSpec {
            dt: 0.01,
            ..spec(4000, 8, true)
        };
        let e = estimate_pbar_mc(sol.ctx.market(), sol.ctx.utility(), &sol.rho.phi, 0.0, 0.2, s).unwrap();
        let pde = sol.feedback().pbar(0.0, 0.2);
        for est in [e.pde_form, e.shifted_form] {
            assert!(
                (est.mean - pde).abs() < 4.0 * est.se + 2e-3 * pde,
                "{est:?} vs {pde}"
            );
        }
    }
}
