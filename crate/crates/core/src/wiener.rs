//! Causal Wiener filters, estimation-error spectra and the uncertainty product.
//!
//! The causal filter for observable `a` is `W = [S_ay / S_y^-]_+ / S_y^+`.
//! Its error spectrum is taken as `S_aa - C C~` with `C = [S_ay / S_y^-]_+`
//! and `~` the reflect-conjugate; this differs pointwise from the spectrum of
//! the error process only by terms that integrate to zero, so variances agree.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{DerivedRates, Observable, SpectralModel};
use crate::ratpoly::RationalFn;
use crate::specfact::{factorize, integrate_psd, integrate_rational, Psd, SpectralFactors};

#[derive(Clone, Debug)]
pub struct WienerSolution {
    pub observable: Observable,
    pub filter: RationalFn,
    pub factors: SpectralFactors,
    /// `[S_ay / S_y^-]_+`.
    pub causal_part: RationalFn,
    pub error_spectrum: Psd,
    pub error_variance: f64,
    record_spectrum: RationalFn,
}

impl WienerSolution {
    /// Error variance in units of the observable's zero-point variance.
    pub fn normalized_variance(&self, model: &SpectralModel) -> f64 {
        let z = model.zpf(self.observable);
        self.error_variance / (z * z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UncertaintyReport {
    pub sigma_dx2: f64,
    pub sigma_dp2: f64,
    /// Symmetrized error covariance `<{dx, dp}>/2`.
    pub sigma_dxdp: f64,
    pub product: f64,
    /// `hbar^2 / 4`.
    pub floor: f64,
    /// `(2 n_th + 1)^2 hbar^2 / 4`.
    pub ceiling: f64,
}

impl UncertaintyReport {
    pub fn product_over_floor(&self) -> f64 {
        self.product / self.floor
    }

    pub fn within_bounds(&self, slack: f64) -> bool {
        self.product >= self.floor * (1.0 - slack) && self.product <= self.ceiling * (1.0 + slack)
    }
}

pub fn synthesize(model: &SpectralModel, observable: Observable) -> Result<WienerSolution> {
    if model.rates.gamma_meas <= 0.0 {
        return Err(Error::NoInformation(model.rates.gamma_meas));
    }
    let factors = factorize(&Psd::new(model.s_yy.clone())?)?;
    let cross = model.record_cross_spectrum(observable);
    let causal_part = cross.div(&factors.minus)?.causal_part()?;
    let filter = causal_part.div(&factors.plus)?;
    if !filter.is_realizable()? {
        return Err(Error::ModelInconsistency("synthesized filter is not causal and proper".into()));
    }
    let spectrum = model
        .observable_spectrum(observable, observable)
        .sub(&causal_part.mul(&causal_part.conj_reflect())?)?;
    let error_spectrum = Psd::new(spectrum)?;
    let error_variance = integrate_psd(&error_spectrum)?;
    Ok(WienerSolution {
        observable,
        filter,
        factors,
        causal_part,
        error_spectrum,
        error_variance,
        record_spectrum: model.s_yy.clone(),
    })
}

/// `S_ab - C_a C_b~` for two solutions built from `model`.
pub fn error_cross_spectrum(a: &WienerSolution, b: &WienerSolution, model: &SpectralModel) -> Result<RationalFn> {
    if a.record_spectrum != model.s_yy || b.record_spectrum != model.s_yy {
        return Err(Error::Usage("solutions were not synthesized from this model".into()));
    }
    model
        .observable_spectrum(a.observable, b.observable)
        .sub(&a.causal_part.mul(&b.causal_part.conj_reflect())?)
}

/// Symmetrized covariance `int Re S(w) dw / 2 pi` of a cross spectrum.
pub fn symmetrized_covariance(cross: &RationalFn) -> Result<f64> {
    Ok(integrate_rational(cross)?.re)
}

/// Spectrum of `a - H * y` for an arbitrary filter `H` acting on the record:
/// `S_aa - H~ S_ay - H S_ay~ + H H~ S_yy`.
pub fn filter_error_spectrum(model: &SpectralModel, observable: Observable, h: &RationalFn) -> Result<RationalFn> {
    filter_error_cross_spectrum(model, observable, h, observable, h)
}

/// Cross spectrum of `a - H_a * y` and `b - H_b * y`.
pub fn filter_error_cross_spectrum(
    model: &SpectralModel,
    a: Observable,
    h_a: &RationalFn,
    b: Observable,
    h_b: &RationalFn,
) -> Result<RationalFn> {
    let hb_r = h_b.conj_reflect();
    let s_ab = model.observable_spectrum(a, b);
    let t1 = hb_r.mul(&model.record_cross_spectrum(a))?;
    let t2 = h_a.mul(&model.record_cross_spectrum(b).conj_reflect())?;
    let t3 = h_a.mul(&hb_r)?.mul(&model.s_yy)?;
    s_ab.sub(&t1)?.sub(&t2)?.add(&t3)
}

/// Error variance of an arbitrary filter.
pub fn filter_error_variance(model: &SpectralModel, observable: Observable, h: &RationalFn) -> Result<f64> {
    Ok(integrate_rational(&filter_error_spectrum(model, observable, h)?)?.re)
}

pub fn uncertainty_product(model: &SpectralModel) -> Result<UncertaintyReport> {
    let sx = synthesize(model, Observable::X)?;
    let sp = synthesize(model, Observable::P)?;
    let cross = error_cross_spectrum(&sx, &sp, model)?;
    let sigma_dxdp = symmetrized_covariance(&cross)?;
    let hbar = model.params.hbar;
    let floor = 0.25 * hbar * hbar;
    let n = model.rates.n_th;
    Ok(UncertaintyReport {
        sigma_dx2: sx.error_variance,
        sigma_dp2: sp.error_variance,
        sigma_dxdp,
        product: sx.error_variance * sp.error_variance,
        floor,
        ceiling: (2.0 * n + 1.0).powi(2) * floor,
    })
}

/// Closed-form error spectrum of x near resonance, at detuning `delta`:
/// `S_xx(delta) [1 - 16 G_m (G_m + G_th) / (G_0 + 2 G_W)^2]`.
pub fn closed_form_error_spectrum(rates: &DerivedRates, delta: f64) -> f64 {
    let x2 = rates.x_zpf * rates.x_zpf;
    let g = rates.gamma_meas + rates.gamma_th;
    let lorentz = 8.0 * x2 * g / (rates.gamma0 * rates.gamma0 + 4.0 * delta * delta);
    let d = rates.gamma0 + 2.0 * rates.gamma_w;
    lorentz * (1.0 - 16.0 * rates.gamma_meas * g / (d * d))
}

/// Closed-form `[S_xy / S_y^-]_+` at detuning `delta`.
pub fn closed_form_causal_part(rates: &DerivedRates, delta: f64) -> Complex64 {
    let num = Complex64::new(
        0.0,
        2.0 * rates.x_zpf * (2.0 * rates.gamma_meas).sqrt() * (rates.gamma_th + rates.gamma_meas),
    );
    let den = (0.5 * rates.gamma0 + rates.gamma_w) * Complex64::new(delta, 0.5 * rates.gamma0);
    num / den
}
