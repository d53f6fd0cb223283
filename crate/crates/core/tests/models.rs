mod common;

use common::*;
use proptest::prelude::*;
use qest::models::{bose_occupation, near_resonance_model, Bath, Loss, Measurement, Observable, OscMeasParams};
use qest::specfact::{factorize, integrate_psd, Psd};
use qest::wiener::synthesize;
use qest::{Complex64, Error};

proptest! {
    #![proptest_config(fixed(64, 21))]

    // The record spectrum's factor has its zero at -gamma_w: S_yy vanishes at s = +-gamma_w.
    #[test]
    fn record_spectrum_vanishes_at_filter_bandwidth(n_th in 0.0f64..60.0, gm in 0.005f64..2000.0) {
        let m = grid_model(gm, n_th);
        let gw = m.rates.gamma_w;
        let v = m.s_yy.eval(Complex64::new(gw, 0.0)).unwrap();
        let scale = m.s_imp + m.s_xx.eval(Complex64::new(0.0, 0.0)).unwrap().re;
        prop_assert!(v.norm() <= 1e-10 * scale);
        let fac = factorize(&Psd::new(m.s_yy.clone()).unwrap()).unwrap();
        let z = fac.plus.zeros().unwrap();
        prop_assert_eq!(z.len(), 1);
        prop_assert!((z[0] + gw).norm() <= 1e-10 * gw);
    }

    #[test]
    fn prior_variance_matches_spectrum_integral(n_th in 0.0f64..60.0, gm in 0.005f64..2000.0) {
        let m = grid_model(gm, n_th);
        let x2 = m.rates.x_zpf.powi(2);
        let v = integrate_psd(&Psd::new(m.s_xx.clone()).unwrap()).unwrap() / x2;
        prop_assert!((v - m.rates.prior_variance()).abs() <= 1e-10 * v);
    }

    // Normalized results depend only on n_th and gamma_meas / gamma0.
    #[test]
    fn normalized_variance_is_unit_free(
        n_th in 0.0f64..20.0,
        ratio in 0.01f64..100.0,
        hbar in 0.1f64..10.0,
        mass in 0.1f64..10.0,
        gamma0 in 0.1f64..10.0,
    ) {
        let base = grid_model(ratio, n_th);
        let params = OscMeasParams {
            hbar,
            mass,
            omega0: 1.0e5 * gamma0,
            loss: Loss::Rate { gamma0 },
            bath: Bath::Occupancy { n_th },
            measurement: Measurement::Rate { gamma_meas: ratio * gamma0 },
            eta: 1.0,
        };
        let scaled = near_resonance_model(&params).unwrap();
        for obs in [Observable::X, Observable::P] {
            let a = synthesize(&base, obs).unwrap().normalized_variance(&base);
            let b = synthesize(&scaled, obs).unwrap().normalized_variance(&scaled);
            prop_assert!((a - b).abs() <= 1e-9 * a);
        }
    }
}

#[test]
fn filter_bandwidth_example() {
    let r = OscMeasParams::dimensionless(OMEGA0, 4.5, 5.0).rates().unwrap();
    assert!((r.gamma_w - 14.150971698).abs() < 1e-8);
    assert_eq!(r.gamma_th, 5.0);
}

#[test]
fn cavity_rate_matches_direct_rate() {
    let mut p = OscMeasParams::dimensionless(OMEGA0, 1.0, 0.0);
    p.measurement = Measurement::Cavity { g: 3.0, kappa: 4.0e6 };
    assert!((p.rates().unwrap().gamma_meas - 9.0e-6).abs() < 1e-18);
    assert!(p.warnings().is_empty());
    p.measurement = Measurement::Cavity { g: 3.0, kappa: 10.0 };
    assert!(!p.warnings().is_empty());
}

#[test]
fn temperature_bath_uses_bose_occupation() {
    let mut p = OscMeasParams::dimensionless(2.0, 0.0, 1.0);
    p.bath = Bath::Temperature { temperature: 3.0, k_b: 1.0 };
    let n = p.rates().unwrap().n_th;
    assert!((n - 1.0 / ((2.0f64 / 3.0).exp() - 1.0)).abs() < 1e-14);
    assert!((bose_occupation(2.0 / 3.0) - n).abs() < 1e-15);
}

#[test]
fn zero_measurement_rate_yields_no_information() {
    let p = OscMeasParams::dimensionless(OMEGA0, 1.0, 0.0);
    assert!(matches!(near_resonance_model(&p), Err(Error::NoInformation(_))));
}

#[test]
fn invalid_parameters_are_rejected() {
    let mut p = OscMeasParams::dimensionless(OMEGA0, -1.0, 1.0);
    assert!(p.validate().is_err());
    p = OscMeasParams::dimensionless(OMEGA0, 1.0, 1.0);
    p.eta = 1.5;
    assert!(p.validate().is_err());
    p.eta = 1.0;
    p.mass = 0.0;
    assert!(p.validate().is_err());
}

#[test]
fn position_and_momentum_are_quadratures() {
    for (_, _, m) in grid_models() {
        let w = 0.37 * m.rates.gamma_w;
        let sxx = m.observable_spectrum(Observable::X, Observable::X).at_freq(w).unwrap();
        let spp = m.observable_spectrum(Observable::P, Observable::P).at_freq(w).unwrap();
        let ratio = (m.params.mass * m.params.omega0).powi(2);
        assert!((spp - sxx * ratio).norm() <= 1e-12 * spp.norm());
    }
}
