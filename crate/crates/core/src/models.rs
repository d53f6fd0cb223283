//! Structurally damped oscillator read out by a bad-cavity interferometer.
//!
//! Spectra of the near-resonance model are rational functions of the
//! detuning `delta = omega - omega0`, carried in the envelope variable
//! `s = i*delta`. All spectra are folded single-peak densities: integrating
//! one resonance peak over `d delta / 2 pi` gives the full variance.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratpoly::{Polynomial, RationalFn};

/// How the mechanical loss is specified.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Loss {
    /// Energy damping rate at resonance. Realized as a Zener loss angle
    /// peaked at `omega0` (`tau = 1/omega0`, `phi0 = 2 gamma0 / omega0`).
    Rate { gamma0: f64 },
    /// Zener loss angle `phi0 * w tau / (1 + (w tau)^2)`.
    Zener { phi0: f64, tau: f64 },
}

/// Bath occupancy, given directly or through a temperature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Bath {
    Occupancy { n_th: f64 },
    Temperature { temperature: f64, k_b: f64 },
}

/// Measurement strength, given directly or through cavity parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Measurement {
    Rate { gamma_meas: f64 },
    /// Multi-photon coupling `g` and cavity linewidth `kappa`.
    Cavity { g: f64, kappa: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscMeasParams {
    pub hbar: f64,
    pub mass: f64,
    pub omega0: f64,
    pub loss: Loss,
    pub bath: Bath,
    pub measurement: Measurement,
    /// Detection efficiency in (0, 1].
    pub eta: f64,
}

impl OscMeasParams {
    /// Internal units: `hbar = m = gamma0 = 1`.
    pub fn dimensionless(omega0: f64, n_th: f64, gamma_meas: f64) -> Self {
        OscMeasParams {
            hbar: 1.0,
            mass: 1.0,
            omega0,
            loss: Loss::Rate { gamma0: 1.0 },
            bath: Bath::Occupancy { n_th },
            measurement: Measurement::Rate { gamma_meas },
            eta: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("hbar", self.hbar)?;
        positive("mass", self.mass)?;
        positive("omega0", self.omega0)?;
        match self.loss {
            Loss::Rate { gamma0 } => positive("gamma0", gamma0)?,
            Loss::Zener { phi0, tau } => {
                positive("phi0", phi0)?;
                positive("tau", tau)?;
            }
        }
        match self.bath {
            Bath::Occupancy { n_th } => {
                if !(n_th >= 0.0 && n_th.is_finite()) {
                    return Err(Error::InvalidParameter(format!("n_th must be >= 0, got {n_th}")));
                }
            }
            Bath::Temperature { temperature, k_b } => {
                if !(temperature >= 0.0 && temperature.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "temperature must be >= 0, got {temperature}"
                    )));
                }
                positive("k_b", k_b)?;
            }
        }
        match self.measurement {
            Measurement::Rate { gamma_meas } => {
                if !gamma_meas.is_finite() || gamma_meas < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "gamma_meas must be >= 0, got {gamma_meas}"
                    )));
                }
            }
            Measurement::Cavity { g, kappa } => {
                positive("kappa", kappa)?;
                if !(g >= 0.0 && g.is_finite()) {
                    return Err(Error::InvalidParameter(format!("g must be >= 0, got {g}")));
                }
            }
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidParameter(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        Ok(())
    }

    /// Loss angle at frequency `omega`.
    pub fn phi(&self, omega: f64) -> f64 {
        let (phi0, tau) = self.zener();
        zener_phi(omega, phi0, tau)
    }

    fn zener(&self) -> (f64, f64) {
        match self.loss {
            Loss::Rate { gamma0 } => (2.0 * gamma0 / self.omega0, 1.0 / self.omega0),
            Loss::Zener { phi0, tau } => (phi0, tau),
        }
    }

    /// Bath occupancy at frequency `omega`.
    pub fn occupancy(&self, omega: f64) -> Result<f64> {
        match self.bath {
            Bath::Occupancy { n_th } => Ok(n_th),
            Bath::Temperature { temperature, k_b } => {
                if temperature == 0.0 {
                    return Ok(if omega > 0.0 { 0.0 } else { -1.0 });
                }
                if omega == 0.0 {
                    return Err(Error::Divergence("Bose occupancy diverges at omega = 0".into()));
                }
                Ok(bose_occupation(self.hbar * omega / (k_b * temperature)))
            }
        }
    }

    pub fn gamma_meas(&self) -> f64 {
        match self.measurement {
            Measurement::Rate { gamma_meas } => gamma_meas,
            Measurement::Cavity { g, kappa } => 4.0 * g * g / kappa,
        }
    }

    /// Advisory notes about regimes where the near-resonance model degrades.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Measurement::Cavity { kappa, .. } = self.measurement {
            if kappa < 10.0 * self.omega0 {
                out.push(format!(
                    "bad-cavity condition kappa >= 10 omega0 violated (kappa = {kappa}, omega0 = {})",
                    self.omega0
                ));
            }
        }
        if let Ok(r) = self.rates() {
            if r.gamma0.max(r.gamma_w) > 0.1 * self.omega0 {
                out.push(format!(
                    "near-resonance approximation is poor: max(gamma0, gamma_w) = {} vs omega0 = {}",
                    r.gamma0.max(r.gamma_w),
                    self.omega0
                ));
            }
        }
        out
    }

    pub fn rates(&self) -> Result<DerivedRates> {
        self.validate()?;
        let gamma0 = self.omega0 * self.phi(self.omega0);
        let n_th = self.occupancy(self.omega0)?;
        let gamma_th = gamma0 * (n_th + 0.5);
        let gamma_meas = self.gamma_meas();
        let gamma_w = (4.0 * gamma_th * gamma_meas + 4.0 * gamma_meas * gamma_meas + 0.25 * gamma0 * gamma0).sqrt();
        let x_zpf = (self.hbar / (2.0 * self.mass * self.omega0)).sqrt();
        Ok(DerivedRates {
            gamma0,
            n_th,
            gamma_th,
            gamma_meas,
            n_meas: gamma_meas / gamma0,
            gamma_w,
            x_zpf,
            p_zpf: self.hbar / (2.0 * x_zpf),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates {
    pub gamma0: f64,
    pub n_th: f64,
    pub gamma_th: f64,
    pub gamma_meas: f64,
    pub n_meas: f64,
    /// Estimation bandwidth of the causal Wiener filter.
    pub gamma_w: f64,
    pub x_zpf: f64,
    pub p_zpf: f64,
}

impl DerivedRates {
    /// Closed-form causal estimation-error variance of x, in x_zpf^2 units.
    pub fn sigma_dx2_closed_form(&self) -> f64 {
        4.0 * (self.gamma_meas + self.gamma_th) / (self.gamma0 + 2.0 * self.gamma_w)
    }

    /// Unconditional variance of x in x_zpf^2 units.
    pub fn prior_variance(&self) -> f64 {
        2.0 * (self.n_th + self.n_meas) + 1.0
    }
}

/// Observable estimated from the record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Observable {
    X,
    P,
}

/// Cross-spectral description of the observable/record pair.
#[derive(Clone, Debug)]
pub struct SpectralModel {
    pub params: OscMeasParams,
    pub rates: DerivedRates,
    pub s_xx: RationalFn,
    pub s_xy: RationalFn,
    pub s_yy: RationalFn,
    /// White imprecision floor of the displacement-referred record.
    pub s_imp: f64,
}

impl SpectralModel {
    /// Transfer from x to the observable: 1 for x, `i m omega0` for p.
    pub fn observable_gain(&self, obs: Observable) -> Complex64 {
        match obs {
            Observable::X => Complex64::new(1.0, 0.0),
            Observable::P => Complex64::new(0.0, self.params.mass * self.params.omega0),
        }
    }

    /// Zero-point scale of the observable.
    pub fn zpf(&self, obs: Observable) -> f64 {
        match obs {
            Observable::X => self.rates.x_zpf,
            Observable::P => self.rates.p_zpf,
        }
    }

    /// `S_{a b}` for observables `a`, `b` (`L_a conj(L_b) S_xx`).
    pub fn observable_spectrum(&self, a: Observable, b: Observable) -> RationalFn {
        self.s_xx.scale(self.observable_gain(a) * self.observable_gain(b).conj())
    }

    /// `S_{a y}` (`L_a S_xy`).
    pub fn record_cross_spectrum(&self, a: Observable) -> RationalFn {
        self.s_xy.scale(self.observable_gain(a))
    }

    /// Envelope susceptibility near resonance, `1 / (2 i m omega0 (s + gamma0/2))`.
    pub fn envelope_chi(&self) -> RationalFn {
        let m = self.params.mass;
        let w0 = self.params.omega0;
        let g2 = 0.5 * self.rates.gamma0;
        RationalFn::new_unreduced(
            Polynomial::constant(Complex64::new(1.0, 0.0)),
            Polynomial::new(vec![Complex64::new(0.0, 2.0 * m * w0 * g2), Complex64::new(0.0, 2.0 * m * w0)]),
        )
        .expect("nonzero denominator")
    }
}

/// Zener loss angle.
pub fn zener_phi(omega: f64, phi0: f64, tau: f64) -> f64 {
    let u = omega * tau;
    phi0 * u / (1.0 + u * u)
}

/// Full structural susceptibility `[m(w0^2 - w^2 + i w0^2 phi(w))]^-1`.
pub fn structural_chi(omega: f64, params: &OscMeasParams) -> Result<Complex64> {
    params.validate()?;
    let w0 = params.omega0;
    let d = Complex64::new(w0 * w0 - omega * omega, w0 * w0 * params.phi(omega)) * params.mass;
    if d.norm() == 0.0 {
        return Err(Error::PoleEvaluation(Complex64::new(0.0, omega)));
    }
    Ok(1.0 / d)
}

/// Near-resonance susceptibility over the full frequency variable `s = i*omega`:
/// `1 / (m (2 w0 (w0 - w) + i gamma0 w0))`.
pub fn near_resonance_chi(params: &OscMeasParams) -> Result<RationalFn> {
    let r = params.rates()?;
    let m = params.mass;
    let w0 = params.omega0;
    RationalFn::new(
        Polynomial::one(),
        Polynomial::new(vec![
            Complex64::new(2.0 * m * w0 * w0, m * r.gamma0 * w0),
            Complex64::new(0.0, 2.0 * m * w0),
        ]),
    )
}

/// Bose-Einstein occupancy for `x = hbar w / k_B T`.
pub fn bose_occupation(x: f64) -> f64 {
    1.0 / x.exp_m1()
}

/// Thermal displacement density from the fluctuation-dissipation theorem,
/// `2 hbar (n_th(w) + 1/2) (-Im chi(w))`. With `s = i*omega` the dissipative
/// part of a causal susceptibility is `-Im chi` for `omega > 0`.
pub fn thermal_psd_fdt(omega: f64, params: &OscMeasParams) -> Result<f64> {
    let n = params.occupancy(omega)?;
    let chi = structural_chi(omega, params)?;
    Ok(2.0 * params.hbar * (n + 0.5) * (-chi.im))
}

/// Near-resonance spectral model of the interferometric readout.
///
/// `S_xx = S_xy = 2 x_zpf^2 (gamma_th + gamma_meas) / (delta^2 + (gamma0/2)^2)`
/// and `S_yy = S_xx + x_zpf^2 / (2 eta gamma_meas)`.
pub fn near_resonance_model(params: &OscMeasParams) -> Result<SpectralModel> {
    let rates = params.rates()?;
    if rates.gamma_meas <= 0.0 {
        return Err(Error::NoInformation(rates.gamma_meas));
    }
    let x2 = rates.x_zpf * rates.x_zpf;
    let g2 = 0.5 * rates.gamma0;
    let amp = 2.0 * x2 * (rates.gamma_th + rates.gamma_meas);
    let s_imp = x2 / (2.0 * params.eta * rates.gamma_meas);
    // delta^2 = -s^2 on the envelope axis s = i delta.
    let lorentz_den = Polynomial::from_real(&[g2 * g2, 0.0, -1.0]);
    let s_xx = RationalFn::new_unreduced(Polynomial::from_real(&[amp]), lorentz_den.clone())?;
    let s_yy = RationalFn::new_unreduced(
        Polynomial::from_real(&[amp + s_imp * g2 * g2, 0.0, -s_imp]),
        lorentz_den,
    )?;
    Ok(SpectralModel {
        params: *params,
        rates,
        s_xy: s_xx.clone(),
        s_xx,
        s_yy,
        s_imp,
    })
}
