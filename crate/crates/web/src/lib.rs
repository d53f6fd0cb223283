//! Browser bindings. Every export returns a flat `Float64Array` of
//! fixed-width rows so the page can plot without any glue types.
//!
//! Units: `hbar = m = gamma0 = 1`, variances in zero-point units.

use qest::commute::{build_kernels, calibrate_backaction};
use qest::models::{near_resonance_model, Observable, OscMeasParams, SpectralModel};
use qest::wiener::{synthesize, uncertainty_product};
use wasm_bindgen::prelude::*;

fn model(omega0: f64, n_th: f64, ratio: f64) -> Result<SpectralModel, String> {
    near_resonance_model(&OscMeasParams::dimensionless(omega0, n_th, ratio)).map_err(|e| e.to_string())
}

fn check_points(points: usize) -> Result<(), String> {
    if (2..=4096).contains(&points) {
        Ok(())
    } else {
        Err(format!("points must lie in [2, 4096], got {points}"))
    }
}

/// Rows `[gamma_meas/gamma0, sigma_dx2, product/(hbar^2/4)]` for
/// log-spaced measurement rates `10^lo ..= 10^hi`.
pub fn uncertainty_rows(n_th: f64, lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, String> {
    check_points(points)?;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err("need finite decades with lo < hi".into());
    }
    let mut out = Vec::with_capacity(3 * points);
    for i in 0..points {
        let ratio = 10f64.powf(lo + (hi - lo) * i as f64 / (points - 1) as f64);
        let m = model(1.0e5, n_th, ratio)?;
        let r = uncertainty_product(&m).map_err(|e| e.to_string())?;
        out.extend([ratio, r.sigma_dx2 / m.rates.x_zpf.powi(2), r.product_over_floor()]);
    }
    Ok(out)
}

/// Rows `[delta, S_xx, S_err, S_imp]` over `|delta| <= span_bandwidths * gamma_w`.
pub fn spectrum_rows(n_th: f64, ratio: f64, span_bandwidths: f64, points: usize) -> Result<Vec<f64>, String> {
    check_points(points)?;
    let m = model(1.0e5, n_th, ratio)?;
    let sol = synthesize(&m, Observable::X).map_err(|e| e.to_string())?;
    let x2 = m.rates.x_zpf.powi(2);
    let span = span_bandwidths * m.rates.gamma_w;
    let mut out = Vec::with_capacity(4 * points);
    for i in 0..points {
        let w = -span + 2.0 * span * i as f64 / (points - 1) as f64;
        let sxx = m.s_xx.at_freq(w).map_err(|e| e.to_string())?.re;
        let err = sol.error_spectrum.at(w).map_err(|e| e.to_string())?;
        out.extend([w, sxx / x2, err / x2, m.s_imp / x2]);
    }
    Ok(out)
}

/// Rows `[tau, Im K_xx, Im K_xy, |K_yy|]` in units of hbar over
/// `|tau| <= 6 / gamma0`. A small `omega0` keeps the carrier visible.
pub fn kernel_rows(n_th: f64, ratio: f64, omega0: f64, points: usize) -> Result<Vec<f64>, String> {
    check_points(points)?;
    let m = model(omega0, n_th, ratio)?;
    let cal = calibrate_backaction(&m).map_err(|e| e.to_string())?;
    let k = build_kernels(&m, Some(&cal)).map_err(|e| e.to_string())?;
    let span = 6.0 / m.rates.gamma0;
    let mut out = Vec::with_capacity(4 * points);
    for i in 0..points {
        let t = -span + 2.0 * span * i as f64 / (points - 1) as f64;
        out.extend([t, k.xx.eval(t).im / k.hbar, k.xy.eval(t).im / k.hbar, k.yy.eval(t).norm() / k.hbar]);
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn uncertainty_curve(n_th: f64, lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, JsError> {
    uncertainty_rows(n_th, lo, hi, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn error_spectrum(n_th: f64, ratio: f64, span_bandwidths: f64, points: usize) -> Result<Vec<f64>, JsError> {
    spectrum_rows(n_th, ratio, span_bandwidths, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn commutator_kernel(n_th: f64, ratio: f64, omega0: f64, points: usize) -> Result<Vec<f64>, JsError> {
    kernel_rows(n_th, ratio, omega0, points).map_err(|e| JsError::new(&e))
}
