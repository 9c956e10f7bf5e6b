use dbsde_core::bsde::*;
use dbsde_core::claims::{Payoff, PayoffSpec};
use dbsde_core::default_model::IntensityModel;
use dbsde_core::hedging::{defaultable_driver, MeasureChange};
use dbsde_core::market::MarketParams;
use dbsde_core::regression::Basis;
use dbsde_core::scenario::ScenarioSet;
use dbsde_core::{Error, PiecewiseConstant, TimeGrid};

struct Setup {
    params: MarketParams,
    model: IntensityModel,
    grid: TimeGrid,
    scenarios: ScenarioSet,
}

fn setup(rate: f64, drift: f64, lambda: f64, steps: usize, paths: usize, seed: u64) -> Setup {
    let params = MarketParams::constant_1d(1.0, rate, drift, 0.2, 100.0).unwrap();
    let model = IntensityModel::constant(lambda).unwrap();
    let grid = TimeGrid::uniform(1.0, steps).unwrap();
    let scenarios = ScenarioSet::simulate(&params, &model, &grid, paths, seed).unwrap();
    Setup {
        params,
        model,
        grid,
        scenarios,
    }
}

fn survival_claim() -> PayoffSpec {
    PayoffSpec::zero_coupon()
}

#[test]
fn zero_claim_gives_zero_triple() {
    let s = setup(0.02, 0.06, 0.1, 10, 2_000, 1);
    let claim = PayoffSpec::new(Payoff::Constant(0.0), PiecewiseConstant::constant(0.0)).unwrap();
    let driver =
        defaultable_driver(&s.params, &s.model, &MeasureChange::new(0.5).unwrap()).unwrap();
    let problem = BsdeProblem {
        claim: &claim,
        driver: &driver,
        intensity: &s.model,
        grid: &s.grid,
    };
    let cfg = SolverConfig::default();
    assert!(solve_backward(&problem, &s.scenarios, &cfg)
        .unwrap()
        .is_identically_zero());
    let picard = picard_solve(&problem, &s.scenarios, &cfg).unwrap();
    assert!(picard.solution.is_identically_zero());
    assert!(picard.converged);
}

#[test]
fn survival_claim_without_driver_is_exact() {
    // V = 1 is in the span of every basis, so the regression adds no error
    // and Y_0 is the product of the one-step survival probabilities.
    let s = setup(0.0, 0.0, 0.1, 50, 5_000, 42);
    let claim = survival_claim();
    let driver = zero_driver(0.1);
    let problem = BsdeProblem {
        claim: &claim,
        driver: &driver,
        intensity: &s.model,
        grid: &s.grid,
    };
    for basis in [Basis::Polynomial(3), Basis::LinearSpline(10)] {
        let cfg = SolverConfig {
            basis,
            ..SolverConfig::default()
        };
        let sol = solve_backward(&problem, &s.scenarios, &cfg).unwrap();
        assert!((sol.y0() - (-0.1f64).exp()).abs() < 1e-12, "{basis:?}");
        assert!(sol.satisfies_stopped_convention(&claim, &s.scenarios));
        for path in 0..100 {
            for k in 0..50 {
                if s.scenarios.alive(path, k) {
                    assert!((sol.u(path, k) + sol.y(path, k)).abs() < 1e-15);
                }
            }
        }
    }
}

#[test]
fn linear_driver_discounts_a_constant() {
    let rate = 0.05;
    let s = setup(rate, rate, 0.0, 50, 2_000, 3);
    let claim = PayoffSpec::new(Payoff::Constant(1.0), PiecewiseConstant::constant(0.0)).unwrap();
    let driver = FnDriver::new(move |_, y, _, _, _| -rate * y, rate, 0.0);
    let problem = BsdeProblem {
        claim: &claim,
        driver: &driver,
        intensity: &s.model,
        grid: &s.grid,
    };
    let sol = solve_backward(&problem, &s.scenarios, &SolverConfig::default()).unwrap();
    // Predictor-corrector: local error r²Δt²/2, so r²TΔt/2 overall.
    assert!(
        (sol.y0() - (-rate).exp()).abs() < rate * rate * 0.02,
        "{}",
        sol.y0()
    );
    let picard = picard_solve(&problem, &s.scenarios, &SolverConfig::default()).unwrap();
    assert!((picard.solution.y0() - (-rate).exp()).abs() < 1e-4);
}

#[test]
fn driver_free_picard_stops_after_first_image() {
    let s = setup(0.0, 0.0, 0.1, 20, 4_000, 8);
    let claim = PayoffSpec::new(Payoff::Call(100.0), PiecewiseConstant::constant(0.4)).unwrap();
    let driver = zero_driver(0.1);
    let problem = BsdeProblem {
        claim: &claim,
        driver: &driver,
        intensity: &s.model,
        grid: &s.grid,
    };
    let out = picard_solve(&problem, &s.scenarios, &SolverConfig::default()).unwrap();
    // The first image is the fixed point; the second evaluation confirms it.
    assert_eq!(out.distances.len(), 2);
    assert_eq!(out.distances[1], 0.0);
    assert!(out.converged);
}

#[test]
fn hedging_driver_contracts() {
    let s = setup(0.02, 0.06, 0.1, 50, 20_000, 42);
    let claim = survival_claim();
    let driver = defaultable_driver(&s.params, &s.model, &MeasureChange::default()).unwrap();
    let problem = BsdeProblem {
        claim: &claim,
        driver: &driver,
        intensity: &s.model,
        grid: &s.grid,
    };
    let cfg = SolverConfig::default();
    let out = picard_solve(&problem, &s.scenarios, &cfg).unwrap();
    assert!(out.converged);
    assert!(
        out.ratios().iter().all(|r| *r <= 0.6),
        "{:?}",
        out.distances
    );
    assert_eq!(out.gamma, contraction_gamma(driver.constant()));

    let backward = solve_backward(&problem, &s.scenarios, &cfg).unwrap();
    let est = y0_estimate(&problem, &backward, &s.scenarios);
    let exact = (-0.12f64).exp();
    assert!((est.mean - exact).abs() < 5e-3);
    assert!((backward.y0() - out.solution.y0()).abs() < 2.0 * est.std_error);
    let cv = y0_control_variate(&problem, &backward, &s.scenarios);
    assert!(cv.std_error < est.std_error);
    assert!((cv.mean - exact).abs() < 5e-3);
}

#[test]
fn residuals_are_centred() {
    let s = setup(0.02, 0.06, 0.2, 20, 20_000, 5);
    let claim = PayoffSpec::new(Payoff::Put(100.0), PiecewiseConstant::constant(2.0)).unwrap();
    let driver =
        defaultable_driver(&s.params, &s.model, &MeasureChange::new(0.3).unwrap()).unwrap();
    let problem = BsdeProblem {
        claim: &claim,
        driver: &driver,
        intensity: &s.model,
        grid: &s.grid,
    };
    let cfg = SolverConfig {
        basis: Basis::LinearSpline(20),
        ..SolverConfig::default()
    };
    let sol = solve_backward(&problem, &s.scenarios, &cfg).unwrap();
    assert!(sol.satisfies_stopped_convention(&claim, &s.scenarios));
    for (k, r) in step_residuals(&problem, &sol, &s.scenarios)
        .iter()
        .enumerate()
    {
        assert!(r.mean.abs() <= 4.0 * r.std_error + 1e-12, "step {k}: {r:?}");
    }
}

#[test]
fn gamma_norm_examples() {
    let grid = TimeGrid::uniform(1.0, 10).unwrap();
    let params = MarketParams::constant_1d(1.0, 0.0, 0.0, 0.2, 100.0).unwrap();
    let model = IntensityModel::constant(0.0).unwrap();
    let sc = ScenarioSet::simulate(&params, &model, &grid, 3, 0).unwrap();
    let ones =
        BsdeSolution::from_raw(3, 11, 1, vec![1.0; 33], vec![0.0; 33], vec![0.0; 33]).unwrap();
    assert!((gamma_norm(&ones, &sc, 0.0, &model) - 1.0).abs() < 1e-12);
    assert!(gamma_norm(&ones, &sc, 0.1, &model) > 1.0);
    let zero =
        BsdeSolution::from_raw(3, 11, 1, vec![0.0; 33], vec![0.0; 33], vec![0.0; 33]).unwrap();
    assert_eq!(gamma_norm(&zero, &sc, 0.3, &model), 0.0);
}

#[test]
fn apriori_bound_holds_and_scales() {
    let s = setup(0.02, 0.06, 0.1, 20, 10_000, 4);
    let driver = defaultable_driver(&s.params, &s.model, &MeasureChange::default()).unwrap();
    let gamma = apriori_gamma_threshold(driver.constant()) + 0.1;
    let mut lhs = Vec::new();
    for scale in [1.0, 10.0] {
        let claim =
            PayoffSpec::new(Payoff::Constant(scale), PiecewiseConstant::constant(0.0)).unwrap();
        let problem = BsdeProblem {
            claim: &claim,
            driver: &driver,
            intensity: &s.model,
            grid: &s.grid,
        };
        let sol = solve_backward(&problem, &s.scenarios, &SolverConfig::default()).unwrap();
        let bound = apriori_bound_check(&problem, &sol, &s.scenarios, gamma).unwrap();
        assert!(bound.satisfied, "{bound:?}");
        lhs.push(bound.lhs);
        let err = apriori_bound_check(&problem, &sol, &s.scenarios, gamma - 0.2).unwrap_err();
        assert!(matches!(err, Error::GammaTooSmall { .. }));
    }
    assert!((lhs[1] / lhs[0] - 100.0).abs() < 1e-8);
}

#[test]
fn coarse_steps_are_rejected() {
    let s = setup(0.0, 0.0, 3.0, 2, 1_000, 1);
    let claim = survival_claim();
    let driver = zero_driver(3.0);
    let problem = BsdeProblem {
        claim: &claim,
        driver: &driver,
        intensity: &s.model,
        grid: &s.grid,
    };
    let err = solve_backward(&problem, &s.scenarios, &SolverConfig::default()).unwrap_err();
    assert!(matches!(err, Error::StepSize(_)));
}

#[test]
fn too_few_paths_are_rejected() {
    let s = setup(0.0, 0.0, 0.1, 5, 40, 1);
    let claim = survival_claim();
    let driver = zero_driver(0.1);
    let problem = BsdeProblem {
        claim: &claim,
        driver: &driver,
        intensity: &s.model,
        grid: &s.grid,
    };
    let err = solve_backward(&problem, &s.scenarios, &SolverConfig::default()).unwrap_err();
    assert!(matches!(err, Error::TooFewPaths { .. }));
}

#[test]
fn finer_grids_leave_less_unhedged_variance() {
    // λ = 0 call with r = 0 under common random numbers. Y_0 is the mean of
    // the payoff for every N, so the comparison isolates the Z estimate
    // through the control variate.
    let fine = setup(0.0, 0.0, 0.1, 40, 20_000, 17);
    let claim = PayoffSpec::new(Payoff::Call(100.0), PiecewiseConstant::constant(0.0)).unwrap();
    let driver = zero_driver(0.1);
    let exact = (-0.1f64).exp() * 7.965567455405804;
    let mut errors = Vec::new();
    for steps in [10, 40] {
        let grid = TimeGrid::uniform(1.0, steps).unwrap();
        let sc = fine.scenarios.restrict(&grid, 20_000, &fine.model).unwrap();
        let problem = BsdeProblem {
            claim: &claim,
            driver: &driver,
            intensity: &fine.model,
            grid: &grid,
        };
        let cfg = SolverConfig {
            basis: Basis::LinearSpline(20),
            ..SolverConfig::default()
        };
        let sol = solve_backward(&problem, &sc, &cfg).unwrap();
        let cv = y0_control_variate(&problem, &sol, &sc);
        assert!(
            (cv.mean - exact).abs() < 4.0 * cv.std_error + 0.01 * exact,
            "{steps}: {cv:?}"
        );
        errors.push(cv.std_error);
    }
    // Finer hedging grids leave less unhedged variance.
    assert!(errors[1] < errors[0], "{errors:?}");
}
