mod common;

use common::*;
use proptest::prelude::*;
use qest::ratpoly::{Polynomial, RationalFn};
use qest::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

proptest! {
    #![proptest_config(fixed(128, 11))]

    #[test]
    fn roots_round_trip(roots in prop::collection::vec(any_point(), 1..=7), lead in complex_gain()) {
        let mut sorted = roots.clone();
        sorted.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        prop_assume!(sorted.windows(2).all(|w| (w[0] - w[1]).norm() > 0.05));
        let p = Polynomial::from_roots(&roots, lead);
        let found = p.roots().unwrap();
        prop_assert_eq!(found.len(), roots.len());
        for r in &roots {
            let best = found.iter().map(|f| (f - r).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(best <= 1e-8 * r.norm().max(1.0), "root {} missed by {}", r, best);
        }
    }

    #[test]
    fn split_reconstructs_and_is_idempotent(f in mixed_rational(), pts in probe_points()) {
        let (causal, anti) = f.causal_split().unwrap();
        prop_assert!(causal.is_causal().unwrap());
        prop_assert!(anti.poles().unwrap().iter().all(|p| p.re > 0.0));
        prop_assert!(anti.is_strictly_proper());
        let again = causal.causal_part().unwrap();
        for s in away_from(&pts, &singular(&f), 0.1) {
            let want = f.eval(s).unwrap();
            let scale = term_scale(&f, s);
            prop_assert!(close(causal.eval(s).unwrap() + anti.eval(s).unwrap(), want, scale, 1e-10));
            prop_assert!(close(again.eval(s).unwrap(), causal.eval(s).unwrap(), scale, 1e-10));
        }
    }

    #[test]
    fn stable_functions_are_their_own_causal_part(f in stable_rational(), pts in probe_points()) {
        let causal = f.causal_part().unwrap();
        for s in away_from(&pts, &singular(&f), 0.1) {
            prop_assert!(close(causal.eval(s).unwrap(), f.eval(s).unwrap(), term_scale(&f, s), 1e-10));
        }
    }

    #[test]
    fn partial_fractions_reconstruct(f in mixed_rational(), pts in probe_points()) {
        let pf = f.partial_fractions().unwrap();
        prop_assert_eq!(pf.terms.len(), f.den().degree());
        let back = pf.to_rational().unwrap();
        for s in away_from(&pts, &singular(&f), 0.1) {
            let want = f.eval(s).unwrap();
            let scale = term_scale(&f, s);
            prop_assert!(close(pf.eval(s), want, scale, 1e-10));
            prop_assert!(close(back.eval(s).unwrap(), want, scale, 1e-10));
        }
    }

    #[test]
    fn arithmetic_matches_pointwise(f in mixed_rational(), g in stable_rational(), pts in probe_points()) {
        let sum = f.add(&g).unwrap();
        let prod = f.mul(&g).unwrap();
        let mut sing = f.poles().unwrap();
        sing.extend(g.poles().unwrap());
        for s in away_from(&pts, &sing, 0.05) {
            let (a, b) = (f.eval(s).unwrap(), g.eval(s).unwrap());
            prop_assert!((sum.eval(s).unwrap() - (a + b)).norm() <= 1e-10 * (a.norm() + b.norm()).max(1e-300));
            prop_assert!(rel(prod.eval(s).unwrap(), a * b) <= 1e-10);
        }
    }

    #[test]
    fn reflection_is_an_involution(f in mixed_rational(), pts in probe_points()) {
        let r = f.conj_reflect();
        let rr = r.conj_reflect();
        for s in away_from(&pts, &f.poles().unwrap().iter().map(|p| -p.conj()).collect::<Vec<_>>(), 0.05) {
            prop_assert!(rel(r.eval(s).unwrap(), f.eval(-s.conj()).unwrap().conj()) <= 1e-12);
        }
        for s in away_from(&pts, &singular(&f), 0.1) {
            prop_assert!(rel(rr.eval(s).unwrap(), f.eval(s).unwrap()) <= 1e-12);
        }
    }
}

#[test]
fn pole_zero_cancellation_reduces_degree() {
    let f = RationalFn::from_zpk(&[c(-1.0, 0.0), c(2.0, 1.0)], &[c(-1.0, 0.0), c(-3.0, 0.0)], c(2.0, 0.0)).unwrap();
    assert_eq!(f.den().degree(), 1);
    assert!((f.eval(c(0.0, 0.0)).unwrap() - c(2.0, 0.0) * c(-2.0, -1.0) / 3.0).norm() < 1e-12);
}

#[test]
fn axis_pole_is_rejected_by_split() {
    let f = RationalFn::from_zpk(&[], &[c(0.0, 1.0), c(-1.0, 0.0)], c(1.0, 0.0)).unwrap();
    assert!(f.causal_split().is_err());
}

#[test]
fn constant_term_goes_to_causal_part() {
    // (s^2 + 1) / ((s - 2)(s + 1)) = 1 + (5/3) / (s - 2) - (2/3) / (s + 1)
    let f = RationalFn::from_real(&[1.0, 0.0, 1.0], &[-2.0, -1.0, 1.0]).unwrap();
    let (causal, anti) = f.causal_split().unwrap();
    let s = c(0.3, 0.7);
    assert!((causal.eval(s).unwrap() - (1.0 - (2.0 / 3.0) / (s + 1.0))).norm() < 1e-12);
    assert!((anti.eval(s).unwrap() - (5.0 / 3.0) / (s - 2.0)).norm() < 1e-12);
}

#[test]
fn improper_split_is_refused() {
    let f = RationalFn::from_real(&[1.0, 0.0, 1.0], &[-2.0, 1.0]).unwrap();
    assert!(f.causal_split().is_err());
}
