#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, RngSeed, TestRng, TestRunner};
use qest::models::{near_resonance_model, OscMeasParams, SpectralModel};
use qest::ratpoly::{Polynomial, RationalFn};
use qest::Complex64;

pub const GAMMA_RATIOS: [f64; 6] = [0.01, 0.1, 1.0, 10.0, 100.0, 1000.0];
pub const OCCUPANCIES: [f64; 4] = [0.0, 0.5, 5.0, 50.0];
pub const OMEGA0: f64 = 1.0e5;

pub fn grid_model(gm: f64, n_th: f64) -> SpectralModel {
    near_resonance_model(&OscMeasParams::dimensionless(OMEGA0, n_th, gm)).unwrap()
}

pub fn grid_models() -> Vec<(f64, f64, SpectralModel)> {
    let mut out = Vec::new();
    for &n in &OCCUPANCIES {
        for &g in &GAMMA_RATIOS {
            out.push((g, n, grid_model(g, n)));
        }
    }
    out
}

pub fn e1() -> SpectralModel {
    near_resonance_model(&OscMeasParams::dimensionless(OMEGA0, 0.0, 1.0)).unwrap()
}

/// Seeded runner so randomized suites are reproducible.
pub fn runner(cases: u32, seed: u8) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32]),
    )
}

pub fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(a.norm()).max(1e-300)
}

/// Pairwise separation of at least `sep`.
fn separated(points: &[Complex64], sep: f64) -> bool {
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            if (a - b).norm() < sep {
                return false;
            }
        }
    }
    true
}

/// Fixed-seed configuration for `proptest!` blocks.
pub fn fixed(cases: u32, seed: u64) -> Config {
    Config {
        cases,
        failure_persistence: None,
        rng_seed: RngSeed::Fixed(seed),
        ..Config::default()
    }
}

prop_compose! {
    pub fn left_point()(re in -5.0f64..-0.05, im in -5.0f64..5.0) -> Complex64 {
        Complex64::new(re, im)
    }
}

prop_compose! {
    pub fn any_point()(re in -5.0f64..5.0, im in -5.0f64..5.0) -> Complex64 {
        let re = if re.abs() < 0.05 { 0.05f64.copysign(re) } else { re };
        Complex64::new(re, im)
    }
}

prop_compose! {
    pub fn complex_gain()(re in -3.0f64..3.0, im in -3.0f64..3.0) -> Complex64 {
        if re.abs() + im.abs() < 0.1 { Complex64::new(1.0, 0.0) } else { Complex64::new(re, im) }
    }
}

fn build(zeros: Vec<Complex64>, poles: Vec<Complex64>, gain: Complex64) -> Option<RationalFn> {
    let mut all = zeros.clone();
    all.extend(&poles);
    // Clustered poles make residues large and reconstruction ill-conditioned;
    // the 1e-10 tolerances assume residues of the same order as the function.
    if !separated(&poles, 0.3) || !separated(&all, 0.1) {
        return None;
    }
    RationalFn::new_unreduced(
        Polynomial::from_roots(&zeros, gain),
        Polynomial::from_roots(&poles, Complex64::new(1.0, 0.0)),
    )
    .ok()
}

/// Proper rational function with simple, well-separated poles in both half-planes.
pub fn mixed_rational() -> impl Strategy<Value = RationalFn> {
    (1usize..=5)
        .prop_flat_map(|np| {
            (
                prop::collection::vec(any_point(), np),
                prop::collection::vec(any_point(), 0..=np),
                complex_gain(),
            )
        })
        .prop_filter_map("poles too close", |(p, z, g)| build(z, p, g))
}

/// Proper, stable rational function.
pub fn stable_rational() -> impl Strategy<Value = RationalFn> {
    (1usize..=5)
        .prop_flat_map(|np| {
            (
                prop::collection::vec(left_point(), np),
                prop::collection::vec(any_point(), 0..=np),
                complex_gain(),
            )
        })
        .prop_filter_map("poles too close", |(p, z, g)| build(z, p, g))
}

/// Minimum-phase, stable, biproper factor with positive real gain; its
/// product with its reflection is a factorizable density.
pub fn min_phase_factor() -> impl Strategy<Value = RationalFn> {
    (1usize..=3)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(left_point(), n),
                prop::collection::vec(left_point(), n),
                0.2f64..3.0,
            )
        })
        .prop_filter_map("roots too close", |(p, z, g)| build(z, p, Complex64::new(g, 0.0)))
}

/// Strictly proper stable filter with exactly one more pole than zeros.
pub fn strictly_proper_stable() -> impl Strategy<Value = RationalFn> {
    (1usize..=4)
        .prop_flat_map(|np| {
            (
                prop::collection::vec(left_point(), np),
                prop::collection::vec(any_point(), np - 1),
                complex_gain(),
            )
        })
        .prop_filter_map("poles too close", |(p, z, g)| build(z, p, g))
}

prop_compose! {
    pub fn probe_points()(pts in prop::collection::vec((-6.0f64..6.0, -6.0f64..6.0), 20)) -> Vec<Complex64> {
        pts.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()
    }
}

/// Probe points kept away from the given singularities.
pub fn away_from(points: &[Complex64], roots: &[Complex64], margin: f64) -> Vec<Complex64> {
    points
        .iter()
        .cloned()
        .filter(|p| roots.iter().all(|r| (p - r).norm() > margin))
        .collect()
}

/// Poles and zeros: relative errors are only meaningful away from both.
pub fn singular(f: &RationalFn) -> Vec<Complex64> {
    let mut v = f.poles().unwrap();
    v.extend(f.zeros().unwrap());
    v
}

/// Size of the partial-fraction terms at `s`; the natural scale for the
/// rounding error of anything built from them.
pub fn term_scale(f: &RationalFn, s: Complex64) -> f64 {
    let pf = f.partial_fractions().unwrap();
    pf.terms.iter().map(|t| (t.residue / (s - t.pole)).norm()).sum::<f64>() + pf.polynomial.eval(s).norm()
}

pub fn close(a: Complex64, b: Complex64, scale: f64, tol: f64) -> bool {
    (a - b).norm() <= tol * scale.max(b.norm())
}

