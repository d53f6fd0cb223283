mod common;

use common::*;
use qest::commute::{build_kernels, calibrate_backaction};
use qest::feedback::{
    closed_loop, effective_open_loop_filter, equivalence_report, feedback_gain, inloop_error_commutator, inloop_filter,
    inloop_filter_with_gain, squashing_report, transduction_plant, LoopModel,
};
use qest::models::Observable;
use qest::ratpoly::RationalFn;
use qest::specfact::probe_grid;
use qest::wiener::{filter_error_variance, synthesize};
use qest::{Complex64, Error};

fn loops(plant: &RationalFn) -> Vec<LoopModel> {
    let c = |num: &[f64], den: &[f64]| RationalFn::from_real(num, den).unwrap();
    vec![
        LoopModel::new(plant.clone(), RationalFn::real(-2.0)).unwrap(),
        LoopModel::new(plant.clone(), c(&[-5.0], &[1.0, 1.0 / 3.0])).unwrap(),
        LoopModel::new(plant.clone(), c(&[-4.0], &[1.0, 0.625, 0.0625])).unwrap(),
    ]
}

#[test]
fn test_loops_are_stable() {
    let m = e1();
    for lp in loops(&transduction_plant(&m)) {
        let kc = closed_loop(&lp).unwrap();
        assert!(kc.poles().unwrap().iter().all(|p| p.re < 0.0));
    }
}

#[test]
fn static_loop_closed_form() {
    // M = 1/(s + 1/2), K = -2: K_c = (s + 1/2) / (s + 5/2).
    let m = e1();
    let lp = LoopModel::new(transduction_plant(&m), RationalFn::real(-2.0)).unwrap();
    let kc = closed_loop(&lp).unwrap();
    for w in [0.0, 0.7, 3.0] {
        let s = Complex64::new(0.0, w);
        assert!((kc.at_freq(w).unwrap() - (s + 0.5) / (s + 2.5)).norm() < 1e-13);
    }
}

#[test]
fn inloop_estimation_matches_open_loop() {
    for (_, _, m) in grid_models() {
        for lp in loops(&transduction_plant(&m)) {
            for obs in [Observable::X, Observable::P] {
                let r = equivalence_report(&m, &lp, obs).unwrap();
                assert!(r.max_deviation <= 1e-10, "{r:?}");
                assert!(r.inloop_filter_realizable);
            }
        }
    }
}

#[test]
fn effective_filter_is_the_open_loop_filter() {
    let m = grid_model(10.0, 0.5);
    for lp in loops(&transduction_plant(&m)) {
        for obs in [Observable::X, Observable::P] {
            let w_o = synthesize(&m, obs).unwrap();
            let w_c = inloop_filter_with_gain(&w_o.filter, &lp, &feedback_gain(&m, &lp, obs)).unwrap();
            let h = effective_open_loop_filter(&m, &lp, obs, &w_c).unwrap();
            for w in probe_grid(&[&m.s_yy]) {
                assert!(rel(h.at_freq(w).unwrap(), w_o.filter.at_freq(w).unwrap()) <= 1e-10);
            }
            let v = filter_error_variance(&m, obs, &h).unwrap();
            assert!((v - w_o.error_variance).abs() <= 1e-9 * w_o.error_variance);
        }
    }
}

#[test]
fn inloop_commutator_is_canonical() {
    for (_, _, m) in grid_models() {
        let k = build_kernels(&m, Some(&calibrate_backaction(&m).unwrap())).unwrap();
        for lp in loops(&transduction_plant(&m)) {
            let c = inloop_error_commutator(&m, &lp, &k).unwrap();
            assert!((c - Complex64::new(0.0, m.params.hbar)).norm() <= 1e-8 * m.params.hbar);
        }
    }
}

#[test]
fn open_loop_leaves_filter_unchanged() {
    let m = e1();
    let w_o = synthesize(&m, Observable::X).unwrap().filter;
    let lp = LoopModel::open(transduction_plant(&m)).unwrap();
    assert_eq!(inloop_filter(&w_o, &lp).unwrap(), w_o);
    assert_eq!(equivalence_report(&m, &lp, Observable::X).unwrap().max_deviation, 0.0);
}

#[test]
fn unstable_loop_is_reported_with_poles() {
    let m = e1();
    // 1 - K/(s + 1/2) with K = 2 puts a pole at s = 3/2.
    let lp = LoopModel::new(transduction_plant(&m), RationalFn::real(2.0)).unwrap();
    match closed_loop(&lp) {
        Err(Error::Instability { poles }) => assert!((poles[0] - Complex64::new(1.5, 0.0)).norm() < 1e-12),
        other => panic!("expected instability, got {other:?}"),
    }
    assert!(equivalence_report(&m, &lp, Observable::X).is_err());
}

#[test]
fn non_causal_controller_is_refused() {
    let m = e1();
    let k = RationalFn::from_real(&[1.0], &[-1.0, 1.0]).unwrap();
    assert!(LoopModel::new(transduction_plant(&m), k).is_err());
}

#[test]
fn strong_feedback_squashes_record_below_imprecision() {
    let m = e1();
    let lp = LoopModel::new(transduction_plant(&m), RationalFn::real(-5.0)).unwrap();
    let r = squashing_report(&lp, &m).unwrap();
    // In x_zpf^2 units S_yc = (delta^2 / 2 + 3.125) / (delta^2 + 30.25),
    // below S_imp = 1/2 everywhere and deepest on resonance.
    let x2 = m.rates.x_zpf.powi(2);
    assert_eq!(r.squashed.len(), r.omega.len());
    let (i0, deepest) = r.s_yc.iter().enumerate().fold((0, f64::INFINITY), |a, (i, &v)| if v < a.1 { (i, v) } else { a });
    assert_eq!(r.omega[i0], 0.0);
    assert!((deepest / x2 - 3.125 / 30.25).abs() < 1e-12);
    assert!(r.error_deviation_at_squashed <= 1e-10);
    assert!((r.high_frequency_gain - 1.0).abs() < 1e-3, "{}", r.high_frequency_gain);
}
