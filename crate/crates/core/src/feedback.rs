//! Measurement-based feedback: closed-loop records, in-loop filters and the
//! equivalence of in-loop and out-of-loop estimation errors.
//!
//! The loop feeds `K * y_c` back onto the observable, `a_c = a_o + K_a * y_c`,
//! while the record obeys `y_c = K_c * y_o` with `K_c = 1 / (1 - M K)`.
//! The in-loop filter `W_c = (1 - W_o M) K + W_o` then gives identical estimation errors, `da_c = da_o`.

use num_complex::Complex64;
use serde::Serialize;

use crate::commute::{error_commutator, CausalityCheck, KernelSet, LabFilter};
use crate::error::{Error, Result};
use crate::models::{Observable, SpectralModel};
use crate::ratpoly::{is_left, Polynomial, RationalFn};
use crate::specfact::probe_grid;
use crate::wiener::synthesize;

/// Plant `M` (controller output to record) and controller `K`; setpoint zero.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopModel {
    pub plant: RationalFn,
    pub controller: RationalFn,
}

fn require_realizable(f: &RationalFn, what: &str) -> Result<()> {
    if !f.is_realizable()? {
        return Err(Error::Usage(format!("{what} must be causal, stable and proper")));
    }
    Ok(())
}

impl LoopModel {
    pub fn new(plant: RationalFn, controller: RationalFn) -> Result<Self> {
        require_realizable(&plant, "plant M")?;
        require_realizable(&controller, "controller K")?;
        Ok(LoopModel { plant, controller })
    }

    /// No feedback, `K = 0`.
    pub fn open(plant: RationalFn) -> Result<Self> {
        Self::new(plant, RationalFn::zero())
    }

    pub fn is_open(&self) -> bool {
        self.controller.is_zero()
    }
}

/// The oscillator's envelope response `1 / (s + gamma0/2)`, with the
/// `1 / (2 i m omega0)` transduction absorbed into a unit-gain force actuator.
pub fn transduction_plant(model: &SpectralModel) -> RationalFn {
    RationalFn::new_unreduced(
        Polynomial::one(),
        Polynomial::from_real(&[0.5 * model.rates.gamma0, 1.0]),
    )
    .expect("monic denominator")
}

/// `K_c = 1 / (1 - M K)`, checked for stability.
pub fn closed_loop(lp: &LoopModel) -> Result<RationalFn> {
    if lp.is_open() {
        return Ok(RationalFn::real(1.0));
    }
    let return_diff = RationalFn::real(1.0).sub(&lp.plant.mul(&lp.controller)?)?;
    if return_diff.is_zero() {
        return Err(Error::Usage("1 - M K vanishes identically".into()));
    }
    let kc = return_diff.recip()?;
    let bad: Vec<Complex64> = kc.poles()?.into_iter().filter(|p| !is_left(*p)).collect();
    if !bad.is_empty() {
        return Err(Error::Instability { poles: bad });
    }
    Ok(kc)
}

fn stable_closed_loop(lp: &LoopModel) -> Result<RationalFn> {
    closed_loop(lp).map_err(|e| match e {
        Error::Instability { poles } => Error::Usage(format!("closed loop is unstable, poles {poles:?}")),
        other => other,
    })
}

/// `W_c = (1 - W_o M) K + W_o`, cross-checked against `W_o / K_c + K`.
pub fn inloop_filter(w_o: &RationalFn, lp: &LoopModel) -> Result<RationalFn> {
    inloop_filter_with_gain(w_o, lp, &lp.controller)
}

/// In-loop filter for an observable that receives feedback `K_a * y_c`:
/// `W_o + K_a - W_o M K`, cross-checked against `W_o / K_c + K_a`.
pub fn inloop_filter_with_gain(w_o: &RationalFn, lp: &LoopModel, k_a: &RationalFn) -> Result<RationalFn> {
    require_realizable(w_o, "open-loop filter")?;
    let kc = stable_closed_loop(lp)?;
    if lp.is_open() {
        return Ok(w_o.clone());
    }
    let w_c = w_o.add(k_a)?.sub(&w_o.mul(&lp.plant)?.mul(&lp.controller)?)?;
    let dual = w_o.div(&kc)?.add(k_a)?;
    for w in probe_grid(&[w_o, &lp.plant, &lp.controller]) {
        let a = w_c.at_freq(w)?;
        let b = dual.at_freq(w)?;
        if (a - b).norm() > 1e-9 * a.norm().max(b.norm()).max(1e-300) {
            return Err(Error::ModelInconsistency(format!(
                "the two forms of the in-loop filter disagree at omega = {w}: {a} vs {b}"
            )));
        }
    }
    require_realizable(&w_c, "in-loop filter")?;
    Ok(w_c)
}

/// Feedback gain onto observable `a`: `K` for x, `i m omega0 K` for p.
pub fn feedback_gain(model: &SpectralModel, lp: &LoopModel, observable: Observable) -> RationalFn {
    lp.controller.scale(model.observable_gain(observable))
}

/// Open-loop-equivalent filter `(W_c - K_a) K_c` seen by the open-loop record.
pub fn effective_open_loop_filter(
    model: &SpectralModel,
    lp: &LoopModel,
    observable: Observable,
    w_c: &RationalFn,
) -> Result<RationalFn> {
    let kc = stable_closed_loop(lp)?;
    w_c.sub(&feedback_gain(model, lp, observable))?.mul(&kc)
}

/// Error spectrum of a filter `H` on the open-loop record, evaluated pointwise.
fn error_spectrum_at(model: &SpectralModel, observable: Observable, h: Complex64, w: f64) -> Result<f64> {
    let s_aa = model.observable_spectrum(observable, observable).at_freq(w)?;
    let s_ay = model.record_cross_spectrum(observable).at_freq(w)?;
    let s_yy = model.s_yy.at_freq(w)?;
    Ok((s_aa - h.conj() * s_ay - h * s_ay.conj() + h.norm_sqr() * s_yy).re)
}

/// `S(h + d) - S(h)` without forming either spectrum, which would cancel
/// the large prior `S_aa` under strong measurement.
fn error_spectrum_change(model: &SpectralModel, observable: Observable, h: Complex64, d: Complex64, w: f64) -> Result<f64> {
    let s_ay = model.record_cross_spectrum(observable).at_freq(w)?;
    let s_yy = model.s_yy.at_freq(w)?.re;
    Ok(2.0 * (d * (h.conj() * s_yy - s_ay.conj())).re + d.norm_sqr() * s_yy)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub observable: Observable,
    /// `max |S_c - S_o| / max S_o` over the probe grid.
    pub max_deviation: f64,
    pub inloop_filter_realizable: bool,
}

/// Compares in-loop and out-of-loop error spectra pointwise, with the in-loop
/// error built from `W_c`, `K_c` and the feedback gain directly.
pub fn equivalence_report(model: &SpectralModel, lp: &LoopModel, observable: Observable) -> Result<EquivalenceReport> {
    let w_o = synthesize(model, observable)?.filter;
    let k_a = feedback_gain(model, lp, observable);
    let w_c = inloop_filter_with_gain(&w_o, lp, &k_a)?;
    let kc = stable_closed_loop(lp)?;
    let grid = probe_grid(&[&model.s_yy, &w_o, &lp.plant, &lp.controller]);
    let mut peak = 0.0f64;
    let mut max_dev = 0.0f64;
    for &w in &grid {
        let h_o = w_o.at_freq(w)?;
        peak = peak.max(error_spectrum_at(model, observable, h_o, w)?);
        let h_c = (w_c.at_freq(w)? - k_a.at_freq(w)?) * kc.at_freq(w)?;
        max_dev = max_dev.max(error_spectrum_change(model, observable, h_o, h_c - h_o, w)?.abs());
    }
    Ok(EquivalenceReport {
        observable,
        max_deviation: max_dev / peak,
        inloop_filter_realizable: w_c.is_realizable()?,
    })
}

/// `<[dx_c, dp_c]>` for in-loop Wiener estimation.
pub fn inloop_error_commutator(model: &SpectralModel, lp: &LoopModel, kernels: &KernelSet) -> Result<Complex64> {
    let w0 = model.params.omega0;
    let mut lab = Vec::with_capacity(2);
    for obs in [Observable::X, Observable::P] {
        let w_o = synthesize(model, obs)?.filter;
        let w_c = inloop_filter_with_gain(&w_o, lp, &feedback_gain(model, lp, obs))?;
        let h = effective_open_loop_filter(model, lp, obs, &w_c)?;
        lab.push(LabFilter::from_envelope(&h, w0)?);
    }
    error_commutator(kernels, &lab[0], &lab[1], CausalityCheck::Strict)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SquashingReport {
    pub omega: Vec<f64>,
    /// In-loop record spectrum `|K_c|^2 S_yo`.
    pub s_yc: Vec<f64>,
    pub s_imp: f64,
    /// Frequencies where the in-loop record dips below the imprecision floor.
    pub squashed: Vec<f64>,
    /// `max |S_c - S_o| / max S_o` over the squashed frequencies.
    pub error_deviation_at_squashed: f64,
    /// `|K_c|` at the largest probe frequency.
    pub high_frequency_gain: f64,
}

pub fn squashing_report(lp: &LoopModel, model: &SpectralModel) -> Result<SquashingReport> {
    let kc = stable_closed_loop(lp)?;
    let w_o = synthesize(model, Observable::X)?.filter;
    let w_c = inloop_filter(&w_o, lp)?;
    let grid = probe_grid(&[&model.s_yy, &lp.plant, &lp.controller]);
    let mut omega = grid.clone();
    omega.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut s_yc = Vec::with_capacity(omega.len());
    let mut squashed = Vec::new();
    let mut dev = 0.0f64;
    let mut peak = 0.0f64;
    for &w in &omega {
        let kcw = kc.at_freq(w)?;
        let s = kcw.norm_sqr() * model.s_yy.at_freq(w)?.re;
        s_yc.push(s);
        let h_o = w_o.at_freq(w)?;
        peak = peak.max(error_spectrum_at(model, Observable::X, h_o, w)?);
        if s < model.s_imp {
            squashed.push(w);
            let h = (w_c.at_freq(w)? - lp.controller.at_freq(w)?) * kcw;
            dev = dev.max(error_spectrum_change(model, Observable::X, h_o, h - h_o, w)?.abs());
        }
    }
    let w_max = omega.iter().cloned().fold(0.0, f64::max);
    Ok(SquashingReport {
        omega,
        s_yc,
        s_imp: model.s_imp,
        squashed,
        error_deviation_at_squashed: if peak > 0.0 { dev / peak } else { 0.0 },
        high_frequency_gain: kc.at_freq(w_max)?.norm(),
    })
}
