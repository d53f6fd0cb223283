use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Coefficients below this fraction of the largest coefficient are trimmed
/// from the top of a polynomial.
pub const TRIM_TOL: f64 = 1e-13;

/// Two roots closer than this (relative to their magnitude) are one cluster.
pub const ROOT_CLUSTER_TOL: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Complex polynomial in the frequency variable `s`, lowest degree first.
#[derive(Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        let mut p = Polynomial { coeffs };
        p.trim();
        p
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![c])
    }

    pub fn one() -> Self {
        Self::constant(ONE)
    }

    /// Monic linear factor `s - root`.
    pub fn linear(root: Complex64) -> Self {
        Self::new(vec![-root, ONE])
    }

    /// `lead * prod (s - r)` over the given roots.
    pub fn from_roots(roots: &[Complex64], lead: Complex64) -> Self {
        let mut coeffs = vec![lead];
        for &r in roots {
            let mut next = vec![ZERO; coeffs.len() + 1];
            for (k, &c) in coeffs.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= c * r;
            }
            coeffs = next;
        }
        Self::new(coeffs)
    }

    fn trim(&mut self) {
        let max = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if max == 0.0 || !max.is_finite() {
            if max == 0.0 {
                self.coeffs.clear();
            }
            return;
        }
        while let Some(last) = self.coeffs.last() {
            if last.norm() <= TRIM_TOL * max {
                self.coeffs.pop();
            } else {
                break;
            }
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs.last().copied().unwrap_or(ZERO)
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * s + c)
    }

    /// Sum of `|c_k| |s|^k`, the natural scale of rounding error in `eval`.
    pub fn eval_scale(&self, s: Complex64) -> f64 {
        let r = s.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn scale(&self, k: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * k).collect())
    }

    /// `q(s) = conj(p(-conj(s)))`.
    pub fn conj_reflect(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| if k % 2 == 0 { c.conj() } else { -c.conj() })
                .collect(),
        )
    }

    /// `q(s) = p(s + a)` (Taylor shift).
    pub fn shift(&self, a: Complex64) -> Self {
        let mut out = Polynomial::zero();
        let step = Polynomial::new(vec![a, ONE]);
        for &c in self.coeffs.iter().rev() {
            out = &(&out * &step) + &Polynomial::constant(c);
        }
        out
    }

    /// Polynomial long division: `self = q * d + r` with `deg r < deg d`.
    pub fn div_rem(&self, d: &Polynomial) -> Result<(Polynomial, Polynomial)> {
        if d.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        if self.coeffs.len() < d.coeffs.len() {
            return Ok((Polynomial::zero(), self.clone()));
        }
        let mut rem = self.coeffs.clone();
        let dl = d.leading();
        let n = d.coeffs.len();
        let mut quot = vec![ZERO; rem.len() - n + 1];
        for k in (0..quot.len()).rev() {
            let q = rem[k + n - 1] / dl;
            quot[k] = q;
            for (j, &dc) in d.coeffs.iter().enumerate() {
                rem[k + j] -= q * dc;
            }
        }
        rem.truncate(n - 1);
        // The remainder is trimmed against the dividend's scale, not its own.
        let scale = self.max_coeff().max(d.max_coeff());
        while let Some(last) = rem.last() {
            if last.norm() <= TRIM_TOL * scale {
                rem.pop();
            } else {
                break;
            }
        }
        Ok((Polynomial::new(quot), Polynomial { coeffs: rem }))
    }

    /// All complex roots, repeated according to multiplicity.
    ///
    /// Eigenvalues of the (scaled) companion matrix, each polished by Newton
    /// steps on the original coefficients.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        if self.is_zero() {
            return Err(Error::Domain("roots of the zero polynomial".into()));
        }
        let mut roots = Vec::with_capacity(self.degree());
        // Exact zero roots.
        let lowest = self.coeffs.iter().position(|c| *c != ZERO).unwrap();
        roots.extend(std::iter::repeat_n(ZERO, lowest));
        let reduced = Polynomial {
            coeffs: self.coeffs[lowest..].to_vec(),
        };
        let n = reduced.degree();
        match n {
            0 => {}
            1 => roots.push(-reduced.coeffs[0] / reduced.coeffs[1]),
            _ => {
                // Symmetric root sets (e.g. s^4 + 1) can stall the QR iteration on
                // the companion matrix; a complex shift of the variable breaks that.
                let rho0 = (reduced.coeffs[0].norm() / reduced.leading().norm()).powf(1.0 / n as f64);
                let rho0 = if rho0.is_finite() && rho0 > 0.0 { rho0 } else { 1.0 };
                let shifts = [ZERO, Complex64::new(0.137, 0.071) * rho0, Complex64::new(-0.29, 0.113) * rho0];
                let mut found = None;
                for shift in shifts {
                    let shifted = reduced.shift(shift);
                    if let Some(eig) = companion_eigenvalues(&shifted) {
                        found = Some(eig.into_iter().map(|z| z + shift).collect::<Vec<_>>());
                        break;
                    }
                }
                let eig = found.ok_or_else(|| {
                    Error::Domain("companion eigenvalue iteration did not converge".into())
                })?;
                for z in eig {
                    roots.push(reduced.polish(z));
                }
            }
        }
        Ok(roots)
    }

    fn polish(&self, mut r: Complex64) -> Complex64 {
        let dp = self.derivative();
        let mut best = self.eval(r).norm();
        for _ in 0..4 {
            let d = dp.eval(r);
            if d == ZERO {
                break;
            }
            let next = r - self.eval(r) / d;
            let val = self.eval(next).norm();
            if val.is_finite() && val < best {
                best = val;
                r = next;
            } else {
                break;
            }
        }
        r
    }
}

fn companion_eigenvalues(p: &Polynomial) -> Option<Vec<Complex64>> {
    let n = p.degree();
    let lead = p.leading();
    let rho = (p.coeffs[0].norm() / lead.norm()).powf(1.0 / n as f64);
    let rho = if rho.is_finite() && rho > 0.0 { rho } else { 1.0 };
    // Monic polynomial in t = s / rho.
    let monic: Vec<Complex64> = (0..n)
        .map(|k| p.coeffs[k] / lead / rho.powi((n - k) as i32))
        .collect();
    let companion = DMatrix::from_fn(n, n, |i, j| {
        if j == n - 1 {
            -monic[i]
        } else if i == j + 1 {
            ONE
        } else {
            ZERO
        }
    });
    let schur = companion.try_schur(f64::EPSILON, 200 * n)?;
    let eig = schur.eigenvalues()?;
    Some(eig.iter().map(|z| z * rho).collect())
}

/// Whether two roots coincide within the clustering tolerance.
pub fn roots_coincide(a: Complex64, b: Complex64, tol: f64) -> bool {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        return true;
    }
    (a - b).norm() <= tol * scale
}

/// Group roots into clusters `(mean root, multiplicity)`.
pub fn cluster_roots(roots: &[Complex64], tol: f64) -> Vec<(Complex64, usize)> {
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for &r in roots {
        if let Some(c) = clusters.iter_mut().find(|(c, _)| roots_coincide(*c, r, tol)) {
            let m = c.1 as f64;
            c.0 = (c.0 * m + r) / (m + 1.0);
            c.1 += 1;
        } else {
            clusters.push((r, 1));
        }
    }
    clusters
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial{:?}", self.coeffs)
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let c = (0..n)
            .map(|k| {
                self.coeffs.get(k).copied().unwrap_or(ZERO) + rhs.coeffs.get(k).copied().unwrap_or(ZERO)
            })
            .collect();
        Polynomial::new(c)
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut c = vec![ZERO; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Polynomial::new(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        v
    }

    #[test]
    fn symmetric_root_set() {
        let p = Polynomial::from_real(&[1.0, 0.0, 0.0, 0.0, 1.0]);
        let r = p.roots().unwrap();
        assert_eq!(r.len(), 4);
        for z in r {
            assert!(p.eval(z).norm() < 1e-12);
        }
    }

    #[test]
    fn perfect_square_roots() {
        let p = Polynomial::from_real(&[6.25, 0.0, 1.0]);
        let r = sorted(p.roots().unwrap());
        assert!((r[0] - c(0.0, -2.5)).norm() < 1e-12);
        assert!((r[1] - c(0.0, 2.5)).norm() < 1e-12);
    }

    #[test]
    fn factorable_quadratic() {
        let p = Polynomial::from_real(&[2.0, 3.0, 1.0]);
        let r = sorted(p.roots().unwrap());
        assert!((r[0] - c(-2.0, 0.0)).norm() < 1e-12);
        assert!((r[1] - c(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_polynomial_has_no_roots() {
        assert!(matches!(Polynomial::zero().roots(), Err(Error::Domain(_))));
        assert!(Polynomial::one().roots().unwrap().is_empty());
    }

    #[test]
    fn exact_zero_roots_are_kept() {
        let p = Polynomial::from_real(&[0.0, 0.0, -1.0, 1.0]);
        let r = sorted(p.roots().unwrap());
        assert_eq!(r.len(), 3);
        assert_eq!(r[0], ZERO);
        assert_eq!(r[1], ZERO);
        assert!((r[2] - ONE).norm() < 1e-13);
    }

    #[test]
    fn roots_satisfy_residual_bound() {
        let p = Polynomial::new(vec![c(1.0, 2.0), c(-3.0, 0.5), c(0.2, 0.0), c(4.0, -1.0), c(1.0, 1.0)]);
        let roots = p.roots().unwrap();
        assert_eq!(roots.len(), 4);
        for r in roots {
            assert!(p.eval(r).norm() <= 1e-10 * p.eval_scale(r));
        }
    }

    #[test]
    fn conj_reflect_is_involution() {
        let p = Polynomial::new(vec![c(1.0, 2.0), c(-3.0, 0.5), c(0.2, 0.7)]);
        assert_eq!(p.conj_reflect().conj_reflect(), p);
        let s = c(0.3, -1.7);
        let lhs = p.conj_reflect().eval(s);
        let rhs = p.eval(-s.conj()).conj();
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn shift_matches_substitution() {
        let p = Polynomial::from_real(&[1.0, -2.0, 0.5, 3.0]);
        let a = c(0.4, 1.1);
        let s = c(-0.7, 0.2);
        assert!((p.shift(a).eval(s) - p.eval(s + a)).norm() < 1e-12);
    }

    #[test]
    fn division_reconstructs_dividend() {
        let a = Polynomial::from_real(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let d = Polynomial::from_real(&[1.0, 0.0, 2.0]);
        let (q, r) = a.div_rem(&d).unwrap();
        assert!(r.degree() < d.degree());
        let back = &(&q * &d) + &r;
        for (x, y) in back.coeffs().iter().zip(a.coeffs()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn clustering_groups_near_roots() {
        let cl = cluster_roots(&[c(1.0, 0.0), c(1.0 + 1e-12, 0.0), c(2.0, 0.0)], ROOT_CLUSTER_TOL);
        assert_eq!(cl.len(), 2);
        assert_eq!(cl[0].1, 2);
    }
}
