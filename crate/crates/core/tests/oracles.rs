use rpo_core::derive_stream;
use rpo_core::market::{BidSource, Market, ResponseModel, ValueDistribution};
use rpo_core::oracles::*;

const CASES: [ClosedFormCase; 2] =
    [ClosedFormCase::UniformPerfect { shading: 0.4 }, ClosedFormCase::UniformEquilibrium { bidders: 2 }];

#[test]
fn closed_forms_match_monte_carlo_on_21_points() {
    for (i, case) in CASES.iter().enumerate() {
        let market = case.market().unwrap();
        for k in 0..=20 {
            let r = k as f64 * 0.05;
            let exact = closed_form_revenue(*case, r).unwrap();
            let est = revenue(&market, r, 200_000, &mut derive_stream(i as u64, k)).unwrap();
            assert!(
                (est.mean - exact).abs() <= 3.0 * est.std_error + 1e-12,
                "{case:?} r={r}: {} vs {exact}",
                est.mean
            );
        }
    }
}

#[test]
fn closed_form_examples() {
    let perfect = CASES[0];
    assert!((closed_form_revenue(perfect, 0.2).unwrap() - 0.21).abs() < 1e-12);
    assert!((closed_form_revenue(perfect, 0.5).unwrap() - 0.25).abs() < 1e-12);
    assert!((closed_form_revenue(CASES[1], 0.0).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert!((closed_form_revenue(CASES[1], 0.5).unwrap() - 0.416_666_666_666_666_7).abs() < 1e-12);
}

#[test]
fn perfect_revenue_curve_has_one_peak() {
    let m = Market::uniform_perfect(0.4).unwrap();
    let grid = ReserveGrid { lo: 0.1, hi: 1.0, step: 0.05 }.points().unwrap();
    let curve = revenue_curve(&m, &grid, 1_000_000, 21).unwrap();
    for w in curve.windows(2) {
        let ((r0, a), (_, b)) = (w[0], w[1]);
        let tol = 3.0 * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        if r0 < 0.5 - 1e-9 {
            assert!(b.mean >= a.mean - tol, "rises before 0.5 at {r0}");
        } else {
            assert!(b.mean <= a.mean + tol, "falls after 0.5 at {r0}");
        }
    }
}

#[test]
fn grid_search_finds_the_optima() {
    let grid = ReserveGrid { lo: 0.0, hi: 1.0, step: 0.01 }.points().unwrap();
    for (case, mu) in CASES.iter().zip([0.25, 0.4167]) {
        let (r, est) = grid_search_optimum(&case.market().unwrap(), &grid, 100_000, 31).unwrap();
        assert!((r - 0.5).abs() <= 0.02, "{case:?}: r*={r}");
        assert!((est.mean - mu).abs() <= 0.005, "{case:?}: mu*={}", est.mean);
    }
    let m = CASES[0].market().unwrap();
    let (r, _) = grid_search_optimum(&m, &[0.3], 1000, 0).unwrap();
    assert_eq!(r, 0.3);
}

#[test]
fn oracle_slope_converges() {
    let m = Market::uniform_perfect(0.4).unwrap();
    let a = oracle_slope(&m, SlopeTarget::Revenue, 0.55, 0.45, 1_000_000, &mut derive_stream(41, 0)).unwrap();
    let b = oracle_slope(&m, SlopeTarget::Revenue, 0.55, 0.45, 2_000_000, &mut derive_stream(41, 1)).unwrap();
    let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    assert!((a.mean - b.mean).abs() <= 3.0 * se);
    // mu(r) = r(1 - r) above the shading factor, so the slope is exactly 0 here.
    assert!(a.mean.abs() <= 3.0 * a.std_error + 1e-9);
}

fn all_responses() -> Vec<Market> {
    [
        ResponseModel::perfect(0.4),
        ResponseModel::eps_bounded(0.4, 0.05),
        ResponseModel::equilibrium(2),
        ResponseModel::no_response(0.4),
        ResponseModel::mixture(0.4, 0.9),
    ]
    .into_iter()
    .map(|m| Market::new(ValueDistribution::Uniform01, m.unwrap()))
    .collect()
}

#[test]
fn decomposition_holds_on_a_shared_sample() {
    for (i, m) in all_responses().iter().enumerate() {
        for r in [0.0, 0.1, 0.3, 0.5, 0.8] {
            let res = decomposition_residual(m, r, 100_000, &mut derive_stream(51, i as u64)).unwrap();
            assert!(res <= 1e-10, "{:?} r={r}: {res}", m.response);
        }
    }
}

#[test]
fn decomposition_holds_across_independent_samples() {
    let m = Market::uniform_perfect(0.4).unwrap();
    let (res, se) = decomposition_residual_independent(&m, 0.3, 1_000_000, &mut derive_stream(52, 0)).unwrap();
    assert!(res <= 3.0 * se, "{res} > 3 * {se}");
}

#[test]
fn revenue_rejects_tiny_samples_and_empty_grids() {
    let m = Market::uniform_perfect(0.4).unwrap();
    assert!(revenue(&m, 0.5, 1, &mut derive_stream(0, 0)).is_err());
    assert!(ReserveGrid { lo: 0.5, hi: 0.4, step: 0.01 }.points().is_err());
    let cfg = MeasureConfig::new(0.5, 0.1, 50, 50);
    assert!(measure_estimator(EstimatorUnderTest::Naive, &m, &cfg, &mut derive_stream(0, 0)).is_err());
    assert_eq!(m.sample_bids(0.5, 0, &mut derive_stream(0, 0)).len(), 0);
}
