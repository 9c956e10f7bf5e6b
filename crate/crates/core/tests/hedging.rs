use dbsde_core::bsde::*;
use dbsde_core::claims::{Payoff, PayoffSpec};
use dbsde_core::closed_form::{black_scholes, lyon_value, lyon_vs_solver, LyonCase};
use dbsde_core::default_model::IntensityModel;
use dbsde_core::hedging::*;
use dbsde_core::market::MarketParams;
use dbsde_core::regression::Basis;
use dbsde_core::scenario::ScenarioSet;
use dbsde_core::{Error, PiecewiseConstant, TimeGrid};
use proptest::prelude::*;

const BS_CALL: f64 = 7.965567455405804;

fn market(rate: f64, drift: f64) -> MarketParams {
    MarketParams::constant_1d(1.0, rate, drift, 0.2, 100.0).unwrap()
}

fn call_claim(compensation: f64) -> PayoffSpec {
    PayoffSpec::new(
        Payoff::Call(100.0),
        PiecewiseConstant::constant(compensation),
    )
    .unwrap()
}

#[test]
fn driver_examples() {
    let model = IntensityModel::constant(0.1).unwrap();
    let flat = defaultable_driver(&market(0.0, 0.0), &model, &MeasureChange::default()).unwrap();
    assert_eq!(flat.eval(0.3, 2.0, &[1.5], 4.0, true), 0.0);

    let d = defaultable_driver(&market(0.02, 0.06), &model, &MeasureChange::default()).unwrap();
    assert!((d.eval(0.5, 1.0, &[1.0], 5.0, true) + 0.22).abs() < 1e-15);
    assert!(d.eval(0.0, 0.0, &[0.0], 0.0, true) == 0.0);

    let d =
        defaultable_driver(&market(0.0, 0.0), &model, &MeasureChange::new(1.0).unwrap()).unwrap();
    assert!((d.eval(0.0, 0.0, &[0.0], 1.0, true) - 0.1).abs() < 1e-15);
    assert_eq!(d.eval(0.0, 0.0, &[0.0], 1.0, false), 0.0);
    assert!(check_lipschitz(&d, &model, 1, 1.0, 2_000, 1));
}

#[test]
fn measure_change_must_exceed_minus_one() {
    assert!(matches!(
        MeasureChange::new(-1.0),
        Err(Error::InvalidMeasureChange(_))
    ));
    assert!(MeasureChange::new(f64::NAN).is_err());
    assert!(MeasureChange::new(-0.99).is_ok());
}

#[test]
fn zero_coupon_examples() {
    let grid = TimeGrid::uniform(1.0, 10).unwrap();
    let model = IntensityModel::constant(0.1).unwrap();
    let zc =
        zc_price_and_loadings(&market(0.0, 0.0), &model, &MeasureChange::default(), &grid).unwrap();
    assert!((zc.rho_pre(0) - (-0.1f64).exp()).abs() < 1e-15);
    assert_eq!(zc.rho_pre(10), 1.0);
    let zc = zc_price_and_loadings(
        &market(0.02, 0.06),
        &model,
        &MeasureChange::default(),
        &grid,
    )
    .unwrap();
    assert!((zc.rho_pre(0) - (-0.12f64).exp()).abs() < 1e-15);
    assert_eq!(zc.no_arbitrage_gap(), 0.0);
    assert!(zc.drift_gap() < 1e-12);
    assert!(zc.c(3).iter().all(|c| *c == 0.0));
}

#[test]
fn zero_coupon_price_matches_monte_carlo() {
    let params = market(0.0, 0.0);
    let model = IntensityModel::constant(0.1).unwrap();
    let grid = TimeGrid::uniform(1.0, 10).unwrap();
    let zc = zc_price_and_loadings(&params, &model, &MeasureChange::default(), &grid).unwrap();
    let sc = ScenarioSet::simulate(&params, &model, &grid, 100_000, 2).unwrap();
    let claim = PayoffSpec::zero_coupon();
    let payoffs: Vec<f64> = (0..sc.n_paths())
        .map(|p| claim.terminal_payoff(&sc, p))
        .collect();
    let e = Estimate::from_samples(&payoffs);
    assert!((e.mean - zc.rho_pre(0)).abs() < 3.0 * e.std_error);
}

#[test]
fn piecewise_intensity_keeps_the_identity() {
    let grid = TimeGrid::uniform(1.0, 8).unwrap();
    let model = IntensityModel::new(
        PiecewiseConstant::new(vec![(0.0, 0.3), (0.5, 0.1)]).unwrap(),
        1.0,
    )
    .unwrap();
    let zc = zc_price_and_loadings(
        &market(0.03, 0.07),
        &model,
        &MeasureChange::new(0.4).unwrap(),
        &grid,
    )
    .unwrap();
    assert_eq!(zc.no_arbitrage_gap(), 0.0);
    let exact = (-(0.03 + 1.4 * (0.3 * 0.5 + 0.1 * 0.5)) as f64).exp();
    assert!((zc.rho_pre(0) - exact).abs() < 1e-14);
}

struct Run {
    params: MarketParams,
    model: IntensityModel,
    grid: TimeGrid,
    sc: ScenarioSet,
    claim: PayoffSpec,
    driver: HedgingDriver,
    solution: BsdeSolution,
}

fn solve(
    rate: f64,
    drift: f64,
    lambda: f64,
    psi: f64,
    claim: PayoffSpec,
    basis: Basis,
    steps: usize,
    paths: usize,
) -> Run {
    let params = market(rate, drift);
    let model = IntensityModel::constant(lambda).unwrap();
    let grid = TimeGrid::uniform(1.0, steps).unwrap();
    let sc = ScenarioSet::simulate(&params, &model, &grid, paths, 42).unwrap();
    let driver = defaultable_driver(&params, &model, &MeasureChange::new(psi).unwrap()).unwrap();
    let problem = BsdeProblem {
        claim: &claim,
        driver: &driver,
        intensity: &model,
        grid: &grid,
    };
    let cfg = SolverConfig {
        basis,
        ..SolverConfig::default()
    };
    let solution = solve_backward(&problem, &sc, &cfg).unwrap();
    Run {
        params,
        model,
        grid,
        sc,
        claim,
        driver,
        solution,
    }
}

#[test]
fn static_bond_hedge_replicates_exactly() {
    let run = solve(
        0.0,
        0.0,
        0.1,
        0.0,
        PayoffSpec::zero_coupon(),
        Basis::Polynomial(4),
        50,
        10_000,
    );
    let zc = zc_price_and_loadings(
        &run.params,
        &run.model,
        &MeasureChange::default(),
        &run.grid,
    )
    .unwrap();
    let strategy = extract_strategy(&run.solution, &run.sc, &zc, &run.params).unwrap();
    for path in 0..run.sc.n_paths() {
        for k in (0..50).filter(|&k| run.sc.alive(path, k)) {
            assert!((strategy.beta(path, k) - 1.0).abs() < 1e-12);
            assert!(strategy.alpha(path, k)[0].abs() < 1e-12);
        }
    }
    assert!(strategy.decomposition_residual(&run.solution, &run.sc, &zc, &run.params) <= 1e-10);
    let report = replicate_forward(&strategy, &run.sc, &zc, &run.params, &run.claim).unwrap();
    assert!(report.max_abs <= 1e-10, "{report:?}");
    assert!(report.default.count > 0 && report.survival.count > 0);
}

#[test]
fn discounted_bond_hedge_is_close() {
    // With r > 0 the scheme discounts by the predictor-corrector factor while
    // the bond uses the exact exponential; the gap is second order per step.
    let run = solve(
        0.02,
        0.06,
        0.1,
        0.0,
        PayoffSpec::zero_coupon(),
        Basis::Polynomial(4),
        50,
        10_000,
    );
    let zc = zc_price_and_loadings(
        &run.params,
        &run.model,
        &MeasureChange::default(),
        &run.grid,
    )
    .unwrap();
    let strategy = extract_strategy(&run.solution, &run.sc, &zc, &run.params).unwrap();
    let report = replicate_forward(&strategy, &run.sc, &zc, &run.params, &run.claim).unwrap();
    assert!(report.max_abs < 1e-4, "{report:?}");
}

#[test]
fn call_decomposition_is_exact() {
    let run = solve(
        0.02,
        0.06,
        0.2,
        0.5,
        call_claim(3.0),
        Basis::LinearSpline(20),
        20,
        10_000,
    );
    let mc = MeasureChange::new(0.5).unwrap();
    let zc = zc_price_and_loadings(&run.params, &run.model, &mc, &run.grid).unwrap();
    let strategy = extract_strategy(&run.solution, &run.sc, &zc, &run.params).unwrap();
    assert!(strategy.decomposition_residual(&run.solution, &run.sc, &zc, &run.params) <= 1e-10);
    let problem = BsdeProblem {
        claim: &run.claim,
        driver: &run.driver,
        intensity: &run.model,
        grid: &run.grid,
    };
    let cv = y0_control_variate(&problem, &run.solution, &run.sc);
    let case = LyonCase::from_model(&run.params, &run.model, &mc, &run.claim).unwrap();
    let oracle = lyon_value(&case, 0.0, 100.0).y;
    assert!(
        (cv.mean - oracle).abs() < 0.01 * oracle,
        "{cv:?} vs {oracle}"
    );
}

#[test]
fn zero_claim_zero_strategy_zero_error() {
    let claim = PayoffSpec::new(Payoff::Constant(0.0), PiecewiseConstant::constant(0.0)).unwrap();
    let run = solve(0.02, 0.06, 0.3, 0.0, claim, Basis::Polynomial(2), 10, 1_000);
    let zc = zc_price_and_loadings(
        &run.params,
        &run.model,
        &MeasureChange::default(),
        &run.grid,
    )
    .unwrap();
    let strategy = extract_strategy(&run.solution, &run.sc, &zc, &run.params).unwrap();
    let report = replicate_forward(&strategy, &run.sc, &zc, &run.params, &run.claim).unwrap();
    assert_eq!(report.max_abs, 0.0);
    let case = LyonCase::from_model(
        &run.params,
        &run.model,
        &MeasureChange::default(),
        &run.claim,
    )
    .unwrap();
    let d = lyon_vs_solver(&case, &run.solution, &run.sc).unwrap();
    assert_eq!(d.y_sup + d.z_sup + d.u_sup, 0.0);
}

#[test]
fn delta_hedging_error_shrinks_with_the_grid() {
    // λ = 0 call, common random numbers.
    let params = market(0.0, 0.0);
    let model = IntensityModel::constant(0.0).unwrap();
    let fine = TimeGrid::uniform(1.0, 80).unwrap();
    let base = ScenarioSet::simulate(&params, &model, &fine, 20_000, 42).unwrap();
    let claim = call_claim(0.0);
    let driver = defaultable_driver(&params, &model, &MeasureChange::default()).unwrap();
    let mut rms = Vec::new();
    for steps in [20, 80] {
        let grid = TimeGrid::uniform(1.0, steps).unwrap();
        let sc = base.restrict(&grid, 20_000, &model).unwrap();
        let problem = BsdeProblem {
            claim: &claim,
            driver: &driver,
            intensity: &model,
            grid: &grid,
        };
        let cfg = SolverConfig {
            basis: Basis::LinearSpline(20),
            ..SolverConfig::default()
        };
        let sol = solve_backward(&problem, &sc, &cfg).unwrap();
        let zc = zc_price_and_loadings(&params, &model, &MeasureChange::default(), &grid).unwrap();
        let strategy = extract_strategy(&sol, &sc, &zc, &params).unwrap();
        rms.push(
            replicate_forward(&strategy, &sc, &zc, &params, &claim)
                .unwrap()
                .rms,
        );
    }
    // Quadrupling N should roughly halve the error.
    assert!(rms[1] < 0.7 * rms[0], "{rms:?}");
}

#[test]
fn survival_value_falls_with_psi() {
    let grid = TimeGrid::uniform(1.0, 4).unwrap();
    let model = IntensityModel::constant(0.1).unwrap();
    let params = market(0.02, 0.06);
    let values: Vec<f64> = [-0.5, 0.0, 0.5, 1.0, 3.0]
        .iter()
        .map(|&psi| {
            let mc = MeasureChange::new(psi).unwrap();
            let case =
                LyonCase::from_model(&params, &model, &mc, &PayoffSpec::zero_coupon()).unwrap();
            let v = lyon_value(&case, 0.0, 100.0);
            let zc = zc_price_and_loadings(&params, &model, &mc, &grid).unwrap();
            assert!((v.y - zc.rho_pre(0)).abs() < 1e-14);
            v.y
        })
        .collect();
    assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
}

#[test]
fn vanishing_intensity_recovers_black_scholes() {
    let params = market(0.0, 0.0);
    let claim = call_claim(5.0);
    let mut gaps = Vec::new();
    for lambda in [1e-2, 1e-4, 0.0] {
        let model = IntensityModel::constant(lambda).unwrap();
        let case =
            LyonCase::from_model(&params, &model, &MeasureChange::default(), &claim).unwrap();
        gaps.push((lyon_value(&case, 0.0, 100.0).y - BS_CALL).abs());
    }
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2]);
    assert!(gaps[1] < 1e-3);
    assert!(gaps[2] < 1e-12);
}

#[test]
fn closed_form_rejects_two_assets() {
    let params = MarketParams::new(
        1.0,
        PiecewiseConstant::constant(0.0),
        PiecewiseConstant::constant(vec![0.0, 0.0]),
        PiecewiseConstant::constant(dbsde_core::linalg::Matrix::diagonal(&[0.2, 0.3])),
        1.0,
        vec![100.0, 100.0],
    )
    .unwrap();
    let model = IntensityModel::constant(0.1).unwrap();
    let err = LyonCase::from_model(&params, &model, &MeasureChange::default(), &call_claim(0.0))
        .unwrap_err();
    assert!(matches!(err, Error::Unsupported(_)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn jump_plus_value_is_compensation(
        t in 0.0f64..0.99,
        spot in 50.0f64..150.0,
        lambda in 0.0f64..1.0,
        psi in -0.9f64..2.0,
        c0 in 0.0f64..5.0,
        c1 in 0.0f64..5.0,
    ) {
        let params = market(0.03, 0.05);
        let model = IntensityModel::new(PiecewiseConstant::constant(lambda), 1.0).unwrap();
        let claim = PayoffSpec::new(
            Payoff::Call(100.0),
            PiecewiseConstant::new(vec![(0.0, c0), (0.5, c1)]).unwrap(),
        )
        .unwrap();
        let case = LyonCase::from_model(&params, &model, &MeasureChange::new(psi).unwrap(), &claim).unwrap();
        let v = lyon_value(&case, t, spot);
        let c = if t < 0.5 { c0 } else { c1 };
        prop_assert!((v.u + v.y - c).abs() < 1e-12);
    }

    #[test]
    fn call_value_is_bounded(spot in 1.0f64..300.0, tenor in 0.01f64..3.0, vol in 0.01f64..1.0) {
        let (value, delta) = black_scholes(Payoff::Call(100.0), 0.02, vol, tenor, spot);
        prop_assert!(value >= (spot - 100.0 * (-0.02 * tenor).exp()).max(0.0) - 1e-9);
        prop_assert!(value <= spot);
        prop_assert!((0.0..=1.0).contains(&delta));
    }
}
