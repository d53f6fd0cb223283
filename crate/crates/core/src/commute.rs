//! Two-time commutator kernels of the measured oscillator, in the lab frame.
//!
//! Convention: `K_AB(tau) = <[A(t), B(t - tau)]>`. For the damped mode with
//! response `chi(tau)`, Kubo's formula gives
//! `K_xx(tau) = -i hbar (chi(tau) - chi(-tau))`. The record is
//! `y = x + x_imp`, and the back-action force couples to `x_imp` through a
//! white commutator of weight `c`, so `[x(t), x_imp(t - tau)] = hbar c chi(tau)`.
//!
//! Kernels are finite sums of complex exponentials on each side of `tau = 0`,
//! plus an optional `delta(tau)` weight.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::SpectralModel;
use crate::ratpoly::{is_marginal, RationalFn};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// `weight * exp(rate * tau)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpTerm {
    pub weight: Complex64,
    pub rate: Complex64,
}

fn sum_at(terms: &[ExpTerm], tau: f64) -> Complex64 {
    terms.iter().map(|t| t.weight * (t.rate * tau).exp()).sum()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CommutatorKernel {
    /// Terms active for `tau > 0`.
    pub causal: Vec<ExpTerm>,
    /// Terms active for `tau < 0`.
    pub anticausal: Vec<ExpTerm>,
    /// Weight of `delta(tau)`.
    pub delta: Complex64,
}

impl CommutatorKernel {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Smooth value; at `tau = 0` the mean of the one-sided limits.
    pub fn eval(&self, tau: f64) -> Complex64 {
        if tau > 0.0 {
            sum_at(&self.causal, tau)
        } else if tau < 0.0 {
            sum_at(&self.anticausal, tau)
        } else {
            0.5 * (self.limit_plus() + self.limit_minus())
        }
    }

    pub fn limit_plus(&self) -> Complex64 {
        self.causal.iter().map(|t| t.weight).sum()
    }

    pub fn limit_minus(&self) -> Complex64 {
        self.anticausal.iter().map(|t| t.weight).sum()
    }

    pub fn scale(&self, k: Complex64) -> Self {
        let sc = |v: &[ExpTerm]| v.iter().map(|t| ExpTerm { weight: t.weight * k, rate: t.rate }).collect();
        CommutatorKernel {
            causal: sc(&self.causal),
            anticausal: sc(&self.anticausal),
            delta: self.delta * k,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.causal.extend_from_slice(&other.causal);
        out.anticausal.extend_from_slice(&other.anticausal);
        out.delta += other.delta;
        out
    }

    /// `K'(tau) = -K(-tau)`: the kernel of the swapped operator pair.
    pub fn reversed(&self) -> Self {
        self.reflected().scale(Complex64::new(-1.0, 0.0))
    }

    /// `K'(tau) = K(-tau)`.
    pub fn reflected(&self) -> Self {
        let flip = |v: &[ExpTerm]| v.iter().map(|t| ExpTerm { weight: t.weight, rate: -t.rate }).collect();
        CommutatorKernel {
            causal: flip(&self.anticausal),
            anticausal: flip(&self.causal),
            delta: self.delta,
        }
    }

    /// `dK/dtau`; a jump at the origin becomes a delta weight.
    pub fn derivative(&self) -> Result<Self> {
        if self.delta != ZERO {
            return Err(Error::Unsupported("derivative of a delta kernel".into()));
        }
        let d = |v: &[ExpTerm]| v.iter().map(|t| ExpTerm { weight: t.weight * t.rate, rate: t.rate }).collect();
        Ok(CommutatorKernel {
            causal: d(&self.causal),
            anticausal: d(&self.anticausal),
            delta: self.limit_plus() - self.limit_minus(),
        })
    }

    /// Largest `|K(tau)|` over the grid points accepted by `keep`.
    pub fn max_abs<F: Fn(f64) -> bool>(&self, grid: &[f64], keep: F) -> f64 {
        grid.iter()
            .filter(|t| keep(**t))
            .map(|t| self.eval(*t).norm())
            .fold(0.0, f64::max)
    }
}

/// 256 log-spaced points in `[1e-3, 20] / gamma_w` on each side, plus 0.
pub fn tau_grid(gamma_w: f64) -> Vec<f64> {
    let n = 256;
    let (lo, hi) = (1e-3f64.ln(), 20f64.ln());
    let mut out = vec![0.0];
    for k in 0..n {
        let t = (lo + (hi - lo) * k as f64 / (n - 1) as f64).exp() / gamma_w;
        out.push(t);
        out.push(-t);
    }
    out
}

/// Impulse response of the damped mode, `exp(-g t) sin(w0 t) / (m w0)` for `t > 0`.
pub fn susceptibility_terms(model: &SpectralModel) -> Vec<ExpTerm> {
    let m = model.params.mass;
    let w0 = model.params.omega0;
    let g = 0.5 * model.rates.gamma0;
    let r = 1.0 / Complex64::new(0.0, 2.0 * m * w0);
    vec![
        ExpTerm { weight: r, rate: Complex64::new(-g, w0) },
        ExpTerm { weight: -r, rate: Complex64::new(-g, -w0) },
    ]
}

/// Kernel `k(tau) = factor * chi(tau)`, zero for `tau < 0`.
fn causal_kernel(chi: &[ExpTerm], factor: Complex64) -> CommutatorKernel {
    CommutatorKernel {
        causal: chi.iter().map(|t| ExpTerm { weight: factor * t.weight, rate: t.rate }).collect(),
        ..Default::default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Calibration {
    /// Commutator weight `c` between back-action force and imprecision noise.
    pub weight: Complex64,
    /// Canonical commutator of the input field quadratures, solved from the
    /// cancellation; `weight = field_commutator * force * imprecision / hbar`.
    pub field_commutator: Complex64,
    /// Square root of the back-action force density `4 hbar m omega0 gamma_meas`.
    pub force_amplitude: f64,
    /// Square root of the imprecision density.
    pub imprecision_amplitude: f64,
    /// Largest `|K_xy(tau >= 0)| / hbar` after calibration.
    pub residual: f64,
}

/// Solves for the weight that cancels `K_xy` on `tau >= 0`, by least squares
/// on the tau grid.
pub fn calibrate_backaction(model: &SpectralModel) -> Result<Calibration> {
    if model.rates.gamma_meas <= 0.0 {
        return Err(Error::NoInformation(model.rates.gamma_meas));
    }
    let hbar = model.params.hbar;
    let chi = susceptibility_terms(model);
    let k_xx = mode_kxx(&chi, hbar);
    let unit = causal_kernel(&chi, Complex64::new(hbar, 0.0));
    let grid = tau_grid(model.rates.gamma_w);
    let (mut num, mut den) = (ZERO, 0.0);
    for &t in grid.iter().filter(|t| **t > 0.0) {
        let u = unit.eval(t);
        num += u.conj() * k_xx.eval(t);
        den += u.norm_sqr();
    }
    let weight = -num / den;
    let k_xy = k_xx.add(&unit.scale(weight));
    let residual = k_xy.max_abs(&grid, |t| t >= 0.0) / hbar;
    if residual > 1e-10 {
        return Err(Error::ModelInconsistency(format!(
            "no back-action weight cancels K_xy on tau >= 0 (residual {residual:e})"
        )));
    }
    let force_amplitude = (4.0 * hbar * model.params.mass * model.params.omega0 * model.rates.gamma_meas).sqrt();
    let imprecision_amplitude = model.s_imp.sqrt();
    Ok(Calibration {
        weight,
        field_commutator: weight * hbar / (force_amplitude * imprecision_amplitude),
        force_amplitude,
        imprecision_amplitude,
        residual,
    })
}

fn mode_kxx(chi: &[ExpTerm], hbar: f64) -> CommutatorKernel {
    let f = Complex64::new(0.0, -hbar);
    CommutatorKernel {
        causal: chi.iter().map(|t| ExpTerm { weight: f * t.weight, rate: t.rate }).collect(),
        anticausal: chi.iter().map(|t| ExpTerm { weight: -f * t.weight, rate: -t.rate }).collect(),
        delta: ZERO,
    }
}

#[derive(Clone, Debug)]
pub struct KernelSet {
    pub xx: CommutatorKernel,
    pub xp: CommutatorKernel,
    /// `<[x(t), x_imp(t - tau)]>`, the back-action channel.
    pub x_imp: CommutatorKernel,
    pub imp_x: CommutatorKernel,
    pub imp_imp: CommutatorKernel,
    pub xy: CommutatorKernel,
    pub py: CommutatorKernel,
    pub yy: CommutatorKernel,
    pub grid: Vec<f64>,
    pub hbar: f64,
}

impl KernelSet {
    /// `<[x(t), p(t)]>`.
    pub fn equal_time_xp(&self) -> Complex64 {
        self.xp.eval(0.0)
    }
}

pub fn build_kernels(model: &SpectralModel, calibration: Option<&Calibration>) -> Result<KernelSet> {
    let cal = calibration.ok_or_else(|| Error::Usage("kernels need a calibration; call calibrate_backaction first".into()))?;
    let hbar = model.params.hbar;
    let m = model.params.mass;
    let chi = susceptibility_terms(model);
    let xx = mode_kxx(&chi, hbar);
    // p = m dx/dt; the second time argument enters as t - tau.
    let xp = xx.derivative()?.scale(Complex64::new(-m, 0.0));
    let x_imp = causal_kernel(&chi, cal.weight * hbar);
    let imp_x = x_imp.reversed();
    let imp_imp = CommutatorKernel::zero();
    let xy = xx.add(&x_imp);
    let py = xy.derivative()?.scale(Complex64::new(m, 0.0));
    let yy = xx.add(&x_imp).add(&imp_x).add(&imp_imp);
    Ok(KernelSet {
        xx,
        xp,
        x_imp,
        imp_x,
        imp_imp,
        xy,
        py,
        yy,
        grid: tau_grid(model.rates.gamma_w),
        hbar,
    })
}

/// Real impulse response of a filter acting on the lab-frame record.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabFilter {
    /// `h(u)` for `u > 0`.
    pub causal: Vec<ExpTerm>,
    /// `h(u)` for `u < 0`.
    pub anticausal: Vec<ExpTerm>,
    /// Instantaneous gain.
    pub delta: f64,
}

impl LabFilter {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Embeds an envelope-frame filter `W(s)`, with `s = i (omega - omega0)`, as
    /// the real lab-frame response `W(s - i w0) + conj_reflect(W)(s + i w0)`.
    pub fn from_envelope(w: &RationalFn, omega0: f64) -> Result<Self> {
        if !w.is_proper() {
            return Err(Error::Usage("filter is improper".into()));
        }
        let pf = w.partial_fractions()?;
        let mut out = LabFilter {
            delta: pf.direct().re,
            ..Default::default()
        };
        let shift = Complex64::new(0.0, omega0);
        for t in &pf.terms {
            if is_marginal(t.pole) {
                return Err(Error::Usage(format!("filter pole {} on the axis", t.pole)));
            }
            let a = ExpTerm { weight: t.residue, rate: t.pole + shift };
            let b = ExpTerm { weight: t.residue.conj(), rate: t.pole.conj() - shift };
            if t.pole.re < 0.0 {
                out.causal.extend([a, b]);
            } else {
                // r/(s - p) with Re p > 0 is -r exp(p u) on u < 0.
                out.anticausal.extend([
                    ExpTerm { weight: -a.weight, rate: a.rate },
                    ExpTerm { weight: -b.weight, rate: b.rate },
                ]);
            }
        }
        Ok(out)
    }

    pub fn is_causal(&self) -> bool {
        self.anticausal.is_empty()
    }

    pub fn eval(&self, u: f64) -> f64 {
        let v = if u > 0.0 {
            sum_at(&self.causal, u)
        } else if u < 0.0 {
            sum_at(&self.anticausal, u)
        } else {
            ZERO
        };
        v.re
    }
}

/// `int h(u) K(u) du`, with the instantaneous gain paired with `K(0+)`.
pub fn pair_integral(h: &LabFilter, k: &CommutatorKernel) -> Complex64 {
    let mut total = h.delta * k.limit_plus();
    for a in &h.causal {
        for b in &k.causal {
            total -= a.weight * b.weight / (a.rate + b.rate);
        }
    }
    for a in &h.anticausal {
        for b in &k.anticausal {
            total += a.weight * b.weight / (a.rate + b.rate);
        }
    }
    total
}

/// `int int h_a(u) h_b(v) K(v - u) du dv`.
pub fn double_integral(h_a: &LabFilter, h_b: &LabFilter, k: &CommutatorKernel) -> Complex64 {
    let mut total = h_a.delta * pair_integral(h_b, k) + h_b.delta * pair_integral(h_a, &k.reflected());
    total += h_a.delta * h_b.delta * k.eval(0.0);
    let sides = |f: &LabFilter| {
        f.causal
            .iter()
            .map(|t| (*t, true))
            .chain(f.anticausal.iter().map(|t| (*t, false)))
            .collect::<Vec<_>>()
    };
    let kt: Vec<(ExpTerm, bool)> = k
        .causal
        .iter()
        .map(|t| (*t, true))
        .chain(k.anticausal.iter().map(|t| (*t, false)))
        .collect();
    for (a, ua) in sides(h_a) {
        for (b, vb) in sides(h_b) {
            for (c, kc) in &kt {
                let w = a.weight * b.weight * c.weight;
                let (al, be, p) = (a.rate, b.rate, c.rate);
                total += match (ua, vb, kc) {
                    (true, true, true) | (false, false, false) => w / ((be + p) * (al + be)),
                    (true, true, false) | (false, false, true) => w / ((al + be) * (al - p)),
                    (false, true, true) | (true, false, false) => -w / ((al - p) * (be + p)),
                    _ => ZERO,
                };
            }
        }
    }
    total
}

/// Whether non-causal filters are refused.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CausalityCheck {
    Strict,
    Bypass,
}

/// `<[dx(t), dp(t)]>` for estimates `h_x * y` and `h_p * y`.
pub fn error_commutator(k: &KernelSet, h_x: &LabFilter, h_p: &LabFilter, mode: CausalityCheck) -> Result<Complex64> {
    if mode == CausalityCheck::Strict && !(h_x.is_causal() && h_p.is_causal()) {
        return Err(Error::Usage(
            "estimator filter is not causal; the error commutator theorem does not apply".into(),
        ));
    }
    Ok(k.equal_time_xp() - pair_integral(h_p, &k.xy) + pair_integral(h_x, &k.py) + double_integral(h_x, h_p, &k.yy))
}

/// Same as [`error_commutator`] for envelope-frame filters of `model`.
pub fn error_commutator_envelope(
    model: &SpectralModel,
    k: &KernelSet,
    w_x: &RationalFn,
    w_p: &RationalFn,
    mode: CausalityCheck,
) -> Result<Complex64> {
    let w0 = model.params.omega0;
    error_commutator(k, &LabFilter::from_envelope(w_x, w0)?, &LabFilter::from_envelope(w_p, w0)?, mode)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TheoremReport {
    pub max_kyy: f64,
    pub max_kxy_causal: f64,
    pub commutator: Complex64,
    /// `|<[dx, dp]> - i hbar| / hbar`.
    pub deviation: f64,
}

/// Kernel checks plus the error commutator of the given envelope-frame filters.
pub fn theorem_report(model: &SpectralModel, w_x: &RationalFn, w_p: &RationalFn, mode: CausalityCheck) -> Result<TheoremReport> {
    let cal = calibrate_backaction(model)?;
    let k = build_kernels(model, Some(&cal))?;
    let hbar = k.hbar;
    let commutator = error_commutator_envelope(model, &k, w_x, w_p, mode)?;
    Ok(TheoremReport {
        max_kyy: k.yy.max_abs(&k.grid, |_| true) / hbar,
        max_kxy_causal: k.xy.max_abs(&k.grid, |t| t >= 0.0) / hbar,
        commutator,
        deviation: (commutator - I * hbar).norm() / hbar,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{near_resonance_model, Observable, OscMeasParams};
    use crate::wiener::synthesize;

    fn e1() -> SpectralModel {
        near_resonance_model(&OscMeasParams::dimensionless(1.0e4, 0.0, 1.0)).unwrap()
    }

    fn kernels(m: &SpectralModel) -> KernelSet {
        build_kernels(m, Some(&calibrate_backaction(m).unwrap())).unwrap()
    }

    #[test]
    fn self_commutator_vanishes_at_equal_time() {
        let k = kernels(&e1());
        assert_eq!(k.xx.eval(0.0), ZERO);
        assert!((k.equal_time_xp() - I).norm() < 1e-12);
        // Closed form -2 i x_zpf^2 sin(w0 t) exp(-g |t|).
        let m = e1();
        let x2 = m.rates.x_zpf.powi(2);
        for t in [-0.3f64, 1e-3, 0.71] {
            let want = Complex64::new(0.0, -2.0 * x2 * (1e4 * t).sin() * (-0.5 * t.abs()).exp());
            assert!((k.xx.eval(t) - want).norm() < 1e-12 * x2);
        }
    }

    #[test]
    fn kxx_slope_at_origin() {
        let k = kernels(&e1());
        let d = k.xx.derivative().unwrap();
        assert!((d.eval(0.0) - Complex64::new(0.0, -1.0)).norm() < 1e-12);
        assert_eq!(d.delta, ZERO);
    }

    #[test]
    fn calibration_and_causality() {
        let m = e1();
        let cal = calibrate_backaction(&m).unwrap();
        assert!((cal.weight - I).norm() < 1e-12);
        assert!((cal.field_commutator - I).norm() < 1e-12);
        let k = kernels(&m);
        assert!(k.xy.max_abs(&k.grid, |t| t >= 0.0) <= 1e-10);
        assert!(k.yy.max_abs(&k.grid, |_| true) <= 1e-10);
        let t = -1.0 / m.rates.gamma_w;
        let want = I * (-0.5 * 0.4f64).exp() * (1e4 * 0.4f64).sin() / 1e4;
        assert!((k.xy.eval(t) - want).norm() < 1e-12 * want.norm());
    }

    #[test]
    fn calibration_is_measurement_rate_independent() {
        let w: Vec<Complex64> = [1e-3, 1.0, 1e3]
            .iter()
            .map(|g| {
                let m = near_resonance_model(&OscMeasParams::dimensionless(1.0e4, 2.0, *g)).unwrap();
                calibrate_backaction(&m).unwrap().weight
            })
            .collect();
        for c in &w {
            assert!((*c - w[0]).norm() < 1e-12);
        }
    }

    #[test]
    fn uncalibrated_kernels_are_refused() {
        assert!(matches!(build_kernels(&e1(), None), Err(Error::Usage(_))));
    }

    #[test]
    fn no_estimation_keeps_canonical_commutator() {
        let k = kernels(&e1());
        let c = error_commutator(&k, &LabFilter::zero(), &LabFilter::zero(), CausalityCheck::Strict).unwrap();
        assert_eq!(c, k.equal_time_xp());
        assert!((c - I).norm() < 1e-12);
    }

    #[test]
    fn wiener_filters_keep_canonical_commutator() {
        let m = e1();
        let wx = synthesize(&m, Observable::X).unwrap().filter;
        let wp = synthesize(&m, Observable::P).unwrap().filter;
        let r = theorem_report(&m, &wx, &wp, CausalityCheck::Strict).unwrap();
        assert!(r.deviation <= 1e-8, "{r:?}");
    }

    #[test]
    fn anticausal_filter_breaks_the_theorem() {
        let m = e1();
        let wx = synthesize(&m, Observable::X).unwrap().filter;
        let wp = synthesize(&m, Observable::P).unwrap().filter;
        let reversed = wx.conj_reflect();
        assert!(matches!(
            theorem_report(&m, &reversed, &wp, CausalityCheck::Strict),
            Err(Error::Usage(_))
        ));
        let r = theorem_report(&m, &reversed, &wp, CausalityCheck::Bypass).unwrap();
        assert!(r.deviation > 1e-3, "{r:?}");
    }

    #[test]
    fn envelope_embedding_matches_frequency_response() {
        let w = RationalFn::from_real(&[2.0], &[2.5, 1.0]).unwrap();
        let h = LabFilter::from_envelope(&w, 100.0).unwrap();
        // h(u) = 2 Re(2 exp((-2.5 + 100 i) u)).
        for u in [0.01f64, 0.3] {
            let want = 4.0 * (-2.5 * u).exp() * (100.0 * u).cos();
            assert!((h.eval(u) - want).abs() < 1e-12);
        }
        assert_eq!(h.eval(-0.1), 0.0);
    }
}
