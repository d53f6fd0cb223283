//! Power spectral densities, Wiener-Hopf factorization and variance integrals.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ratpoly::{is_left, is_marginal, Polynomial, RationalFn};

/// Log-spaced points per half-axis in the probe grid.
pub const PROBE_POINTS_PER_SIDE: usize = 256;

/// Two-sided density `S(omega) = f(i*omega)`, real and non-negative on the axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Psd {
    f: RationalFn,
}

impl Psd {
    /// Validates realness and non-negativity on the probe grid.
    pub fn new(f: RationalFn) -> Result<Self> {
        let grid = probe_grid(&[&f]);
        let mut peak = 0.0f64;
        let mut vals = Vec::with_capacity(grid.len());
        for &w in &grid {
            let v = f.at_freq(w).map_err(|_| Error::InvalidPsd(format!("pole on the axis at omega = {w}")))?;
            peak = peak.max(v.norm());
            vals.push((w, v));
        }
        for (w, v) in vals {
            if v.im.abs() > 1e-9 * peak {
                return Err(Error::InvalidPsd(format!("complex value {v} at omega = {w}")));
            }
            if v.re < -1e-12 * peak {
                return Err(Error::InvalidPsd(format!("negative value {} at omega = {w}", v.re)));
            }
        }
        Ok(Psd { f })
    }

    pub fn zero() -> Self {
        Psd { f: RationalFn::zero() }
    }

    pub fn rational(&self) -> &RationalFn {
        &self.f
    }

    pub fn into_rational(self) -> RationalFn {
        self.f
    }

    /// `S(omega)`, real part of `f(i omega)`.
    pub fn at(&self, omega: f64) -> Result<f64> {
        Ok(self.f.at_freq(omega)?.re)
    }
}

/// `S = plus * minus` with `plus` causal and minimum-phase.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralFactors {
    pub plus: RationalFn,
    pub minus: RationalFn,
}

/// Frequencies `0`, `+-w*10^u` for `u` evenly spaced in `[-4, 4]`; `w` is the
/// geometric mean of the nonzero pole and zero magnitudes.
pub fn probe_grid(fs: &[&RationalFn]) -> Vec<f64> {
    probe_grid_with_width(characteristic_width(fs))
}

/// Geometric mean of the nonzero pole and zero magnitudes, 1 if there are none.
pub fn characteristic_width(fs: &[&RationalFn]) -> f64 {
    let mut log_sum = 0.0;
    let mut count = 0usize;
    for f in fs {
        let roots = f.poles().unwrap_or_default().into_iter().chain(f.zeros().unwrap_or_default());
        for r in roots {
            let n = r.norm();
            if n > 0.0 && n.is_finite() {
                log_sum += n.ln();
                count += 1;
            }
        }
    }
    if count == 0 {
        1.0
    } else {
        (log_sum / count as f64).exp()
    }
}

pub fn probe_grid_with_width(width: f64) -> Vec<f64> {
    let n = PROBE_POINTS_PER_SIDE;
    let mut out = Vec::with_capacity(2 * n + 1);
    out.push(0.0);
    for k in 0..n {
        let u = -4.0 + 8.0 * k as f64 / (n - 1) as f64;
        let w = width * 10f64.powf(u);
        out.push(w);
        out.push(-w);
    }
    out
}

/// Spectral factorization of a rational density.
pub fn factorize(s: &Psd) -> Result<SpectralFactors> {
    let f = s.rational();
    if f.is_zero() {
        return Err(Error::NonFactorizable("zero spectrum".into()));
    }
    let grid = probe_grid(&[f]);
    let vals: Vec<f64> = grid.iter().map(|&w| s.at(w)).collect::<Result<_>>()?;
    let peak = vals.iter().cloned().fold(0.0, f64::max);
    if let Some((w, v)) = grid.iter().zip(&vals).find(|(_, v)| **v <= 1e-12 * peak) {
        return Err(Error::NonFactorizable(format!("spectrum vanishes at omega = {w} (value {v})")));
    }

    let zeros = f.zeros()?;
    let poles = f.poles()?;
    for r in zeros.iter().chain(&poles) {
        if is_marginal(*r) {
            return Err(Error::NonFactorizable(format!("root {r} on the imaginary axis")));
        }
    }
    let zl: Vec<Complex64> = zeros.iter().cloned().filter(|z| is_left(*z)).collect();
    let pl: Vec<Complex64> = poles.iter().cloned().filter(|p| is_left(*p)).collect();
    if 2 * zl.len() != zeros.len() || 2 * pl.len() != poles.len() {
        return Err(Error::NonFactorizable("roots are not mirror-paired across the axis".into()));
    }

    // S = c prod(s - z)/prod(s - p); the mirrored factors contribute (-1)^(nz - np).
    let c = f.num().leading() / f.den().leading();
    let sign = if (zl.len() + pl.len()) % 2 == 0 { 1.0 } else { -1.0 };
    let g2 = c * sign;
    if g2.re <= 0.0 || g2.im.abs() > 1e-9 * g2.norm() {
        return Err(Error::NonFactorizable(format!("gain {g2} is not positive real")));
    }
    let gain = Complex64::new(g2.re.sqrt(), 0.0);
    let plus = RationalFn::new_unreduced(
        Polynomial::from_roots(&zl, gain),
        Polynomial::from_roots(&pl, Complex64::new(1.0, 0.0)),
    )?;
    let minus = plus.conj_reflect();
    Ok(SpectralFactors { plus, minus })
}

/// `int f(i w) dw / 2 pi` as a complex number, by residues at the
/// left-half-plane poles. Needs relative degree at least 2.
pub fn integrate_rational(f: &RationalFn) -> Result<Complex64> {
    if f.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if f.relative_degree() < 2 {
        return Err(Error::Divergence(format!(
            "relative degree {} < 2, integrand does not decay",
            f.relative_degree()
        )));
    }
    let pf = f.partial_fractions()?;
    let mut total = Complex64::new(0.0, 0.0);
    for t in &pf.terms {
        if is_marginal(t.pole) {
            return Err(Error::Divergence(format!("pole {} on the integration axis", t.pole)));
        }
        if t.pole.re < 0.0 {
            total += t.residue;
        }
    }
    Ok(total)
}

/// Variance `int S(w) dw / 2 pi`.
pub fn integrate_psd(s: &Psd) -> Result<f64> {
    Ok(integrate_rational(s.rational())?.re)
}

/// Adaptive Gauss-Kronrod quadrature of `int f(i w) dw / 2 pi` over the
/// whole axis, mapped to a finite interval via `w = width * tan(theta)`.
pub fn integrate_quadrature(f: &RationalFn, rel_tol: f64) -> Result<Complex64> {
    if f.relative_degree() < 2 {
        return Err(Error::Divergence("integrand does not decay".into()));
    }
    let width = characteristic_width(&[f]);
    let g = |theta: f64| -> Complex64 {
        let t = theta.tan();
        let sec2 = 1.0 + t * t;
        match f.at_freq(width * t) {
            Ok(v) => v * (width * sec2),
            Err(_) => Complex64::new(f64::NAN, 0.0),
        }
    };
    let half = std::f64::consts::FRAC_PI_2;
    // Peaks much narrower than the mapping width are resolved by seeding panels.
    let mut edges = vec![-half, half];
    for r in f.poles()? {
        let th = (r.im / width).atan();
        edges.push(th);
    }
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let mut panels: Vec<Panel> = edges
        .windows(2)
        .map(|w| Panel::new(&g, w[0], w[1]))
        .collect();
    let scale: f64 = panels.iter().map(|p| p.value.norm()).sum();
    let abs_tol = rel_tol * scale.max(f64::MIN_POSITIVE);
    // Global adaptive bisection of the worst panel, as in QUADPACK's QAG.
    loop {
        let (worst, err) = panels
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.error))
            .fold((0, 0.0f64), |acc, x| if x.1 > acc.1 { x } else { acc });
        let total_err: f64 = panels.iter().map(|p| p.error).sum();
        if total_err <= abs_tol || err == 0.0 {
            break;
        }
        if panels.len() >= MAX_PANELS {
            // Rounding floor: accept if close, otherwise report.
            if total_err <= 1e3 * abs_tol {
                break;
            }
            return Err(Error::Divergence(format!(
                "quadrature did not converge: error {total_err:e} vs tolerance {abs_tol:e}"
            )));
        }
        let p = panels.swap_remove(worst);
        let m = 0.5 * (p.a + p.b);
        if !(m > p.a && m < p.b) {
            panels.push(Panel { error: 0.0, ..p });
            continue;
        }
        panels.push(Panel::new(&g, p.a, m));
        panels.push(Panel::new(&g, m, p.b));
    }
    let total: Complex64 = panels.iter().map(|p| p.value).sum();
    if !total.re.is_finite() || !total.im.is_finite() {
        return Err(Error::Divergence("non-finite integrand".into()));
    }
    Ok(total / (2.0 * std::f64::consts::PI))
}

const MAX_PANELS: usize = 4000;

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl Panel {
    fn new<F: Fn(f64) -> Complex64>(g: &F, a: f64, b: f64) -> Self {
        let (value, error) = gk15(g, a, b);
        let error = if error.is_finite() { error } else { f64::INFINITY };
        Panel { a, b, value, error }
    }
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One 15-point Kronrod panel with its embedded 7-point Gauss error estimate.
fn gk15<F: Fn(f64) -> Complex64>(g: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = g(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let pair = g(c - x) + g(c + x);
        kron += pair * WGK[j];
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    (kron * h, ((kron - gauss) * h).norm())
}

/// Result of the Schwarz check `|S_xy|^2 <= S_xx S_yy`.
#[derive(Clone, Debug, PartialEq)]
pub struct SchwarzReport {
    /// `max |S_xy|^2 / (S_xx S_yy)` over the grid.
    pub max_ratio: f64,
    /// Largest excess of `|S_xy|^2` over `S_xx S_yy (1 + 1e-9)`, relative to `S_xx S_yy`.
    pub max_violation: f64,
    pub worst_omega: f64,
    pub pass: bool,
}

pub fn cross_spectrum_check(sxx: &Psd, sxy: &RationalFn, syy: &Psd) -> Result<SchwarzReport> {
    let grid = probe_grid(&[sxx.rational(), sxy, syy.rational()]);
    let mut report = SchwarzReport {
        max_ratio: 0.0,
        max_violation: 0.0,
        worst_omega: 0.0,
        pass: true,
    };
    for &w in &grid {
        let cross = sxy.at_freq(w)?.norm_sqr();
        let bound = sxx.at(w)? * syy.at(w)?;
        let excess = cross - bound * (1.0 + 1e-9);
        let ratio = if bound > 0.0 {
            cross / bound
        } else if cross > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if ratio > report.max_ratio {
            report.max_ratio = ratio;
            report.worst_omega = w;
        }
        if excess > 0.0 {
            report.pass = false;
            let rel = if bound > 0.0 { excess / bound } else { f64::INFINITY };
            report.max_violation = report.max_violation.max(rel);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    // Omega^2 -> -s^2 on the axis.
    fn from_omega2(num: &[f64], den: &[f64]) -> RationalFn {
        let lift = |p: &[f64]| {
            let mut out = vec![0.0; 2 * p.len() - 1];
            for (k, a) in p.iter().enumerate() {
                out[2 * k] = if k % 2 == 0 { *a } else { -*a };
            }
            out
        };
        RationalFn::from_real(&lift(num), &lift(den)).unwrap()
    }

    #[test]
    fn white_spectrum_factors() {
        let f = factorize(&Psd::new(RationalFn::real(4.0)).unwrap()).unwrap();
        assert_eq!(f.plus.eval(c(0.3, 0.0)).unwrap(), c(2.0, 0.0));
        assert_eq!(f.minus.eval(c(0.3, 0.0)).unwrap(), c(2.0, 0.0));
    }

    #[test]
    fn rational_spectrum_factors() {
        let s = Psd::new(from_omega2(&[4.0, 1.0], &[1.0, 1.0])).unwrap();
        let f = factorize(&s).unwrap();
        let want = RationalFn::from_real(&[2.0, 1.0], &[1.0, 1.0]).unwrap();
        for w in [0.0, 0.3, -2.0, 17.0] {
            let a = f.plus.at_freq(w).unwrap();
            let b = want.at_freq(w).unwrap();
            assert!((a - b).norm() < 1e-13 * b.norm());
        }
    }

    #[test]
    fn lorentzian_integral() {
        let s = Psd::new(from_omega2(&[1.0], &[1.0, 1.0])).unwrap();
        assert!((integrate_psd(&s).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(integrate_psd(&Psd::zero()).unwrap(), 0.0);
        let q = integrate_quadrature(s.rational(), 1e-12).unwrap();
        assert!((q.re - 0.5).abs() < 1e-10);
    }

    #[test]
    fn constant_tail_diverges() {
        let s = Psd::new(from_omega2(&[4.0, 1.0], &[1.0, 1.0])).unwrap();
        assert!(matches!(integrate_psd(&s), Err(Error::Divergence(_))));
    }

    #[test]
    fn negative_lobe_is_invalid() {
        assert!(matches!(
            Psd::new(from_omega2(&[-1.0, 1.0], &[1.0, 1.0])),
            Err(Error::InvalidPsd(_))
        ));
    }

    #[test]
    fn axis_zero_is_not_factorizable() {
        let s = Psd::new(from_omega2(&[0.0, 1.0], &[1.0, 0.0, 1.0])).unwrap();
        assert!(matches!(factorize(&s), Err(Error::NonFactorizable(_))));
    }

    #[test]
    fn schwarz_check() {
        let sxx = Psd::new(from_omega2(&[1.0], &[1.0, 1.0])).unwrap();
        let syy = Psd::new(from_omega2(&[2.0, 1.0], &[1.0, 1.0])).unwrap();
        assert!(cross_spectrum_check(&sxx, &RationalFn::zero(), &syy).unwrap().pass);
        assert!(cross_spectrum_check(&sxx, sxx.rational(), &syy).unwrap().pass);
        let bad = sxx.rational().scale_real(2.0);
        let r = cross_spectrum_check(&sxx, &bad, &syy).unwrap();
        assert!(!r.pass && r.max_violation > 0.0);
    }

    #[test]
    fn grid_shape() {
        let g = probe_grid_with_width(2.0);
        assert_eq!(g.len(), 2 * PROBE_POINTS_PER_SIDE + 1);
        assert!((g[1] - 2e-4).abs() < 1e-18);
        assert!((g[g.len() - 2] - 2e4).abs() < 1e-9);
    }
}
