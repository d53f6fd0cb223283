use std::fmt;

use num_complex::Complex64;

use super::partial::{partial_fractions, PartialFractions};
use super::polynomial::{roots_coincide, Polynomial, ROOT_CLUSTER_TOL};
use crate::error::{Error, Result};

/// Poles with `|Re p| <= MARGINAL_TOL * |p|` count as lying on the imaginary axis.
pub const MARGINAL_TOL: f64 = 1e-9;

/// Relative size of `|den(s)|` below which evaluation reports a pole.
pub const POLE_EVAL_TOL: f64 = 1e-9;

/// Ratio of complex polynomials in the Laplace-type variable `s`.
///
/// A function is causal when every pole satisfies `Re s < 0`; on the
/// frequency axis `s = i*omega`. The denominator is kept monic and the
/// representation is reduced (no shared numerator/denominator roots).
#[derive(Clone, PartialEq)]
pub struct RationalFn {
    num: Polynomial,
    den: Polynomial,
}

impl RationalFn {
    /// Builds a reduced rational function.
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        let f = Self::normalized(num, den);
        f.reduced()
    }

    /// Builds without cancelling common roots. Callers guarantee coprimality.
    pub fn new_unreduced(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        Ok(Self::normalized(num, den))
    }

    fn normalized(num: Polynomial, den: Polynomial) -> Self {
        let lead = den.leading();
        if num.is_zero() {
            return RationalFn {
                num,
                den: Polynomial::one(),
            };
        }
        RationalFn {
            num: num.scale(1.0 / lead),
            den: den.scale(1.0 / lead),
        }
    }

    pub fn constant(c: Complex64) -> Self {
        RationalFn {
            num: Polynomial::constant(c),
            den: Polynomial::one(),
        }
    }

    pub fn real(c: f64) -> Self {
        Self::constant(Complex64::new(c, 0.0))
    }

    pub fn zero() -> Self {
        Self::constant(Complex64::new(0.0, 0.0))
    }

    pub fn polynomial(p: Polynomial) -> Self {
        RationalFn {
            num: p,
            den: Polynomial::one(),
        }
    }

    /// `gain * prod(s - z) / prod(s - p)`.
    pub fn from_zpk(zeros: &[Complex64], poles: &[Complex64], gain: Complex64) -> Result<Self> {
        Self::new(Polynomial::from_roots(zeros, gain), Polynomial::from_roots(poles, Complex64::new(1.0, 0.0)))
    }

    pub fn from_real(num: &[f64], den: &[f64]) -> Result<Self> {
        Self::new(Polynomial::from_real(num), Polynomial::from_real(den))
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() <= self.den.degree()
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() < self.den.degree()
    }

    /// Relative degree `deg den - deg num`, negative for improper functions.
    pub fn relative_degree(&self) -> isize {
        if self.num.is_zero() {
            return isize::MAX;
        }
        self.den.degree() as isize - self.num.degree() as isize
    }

    pub fn poles(&self) -> Result<Vec<Complex64>> {
        self.den.roots()
    }

    pub fn zeros(&self) -> Result<Vec<Complex64>> {
        if self.num.is_zero() {
            return Ok(Vec::new());
        }
        self.num.roots()
    }

    /// All poles strictly in the open left half-plane.
    pub fn is_causal(&self) -> Result<bool> {
        Ok(self.poles()?.iter().all(|p| is_left(*p)))
    }

    /// Causal, stable and proper: realizable as a causal filter.
    pub fn is_realizable(&self) -> Result<bool> {
        Ok(self.is_proper() && self.is_causal()?)
    }

    /// `num(s)/den(s)`; errors when `s` sits on a pole.
    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        let d = self.den.eval(s);
        if d.norm() <= POLE_EVAL_TOL * self.den.eval_scale(s) {
            return Err(Error::PoleEvaluation(s));
        }
        Ok(self.num.eval(s) / d)
    }

    /// Value on the frequency axis, `f(i*omega)`.
    pub fn at_freq(&self, omega: f64) -> Result<Complex64> {
        self.eval(Complex64::new(0.0, omega))
    }

    /// `g(s) = conj(f(-conj(s)))`; on the axis `g(i w) = conj(f(i w))`.
    pub fn conj_reflect(&self) -> Self {
        Self::normalized(self.num.conj_reflect(), self.den.conj_reflect())
    }

    /// `g(s) = f(s + a)`.
    pub fn shift(&self, a: Complex64) -> Self {
        Self::normalized(self.num.shift(a), self.den.shift(a))
    }

    pub fn scale(&self, k: Complex64) -> Self {
        Self::normalized(self.num.scale(k), self.den.clone())
    }

    pub fn scale_real(&self, k: f64) -> Self {
        self.scale(Complex64::new(k, 0.0))
    }

    pub fn neg(&self) -> Self {
        self.scale_real(-1.0)
    }

    pub fn add(&self, other: &RationalFn) -> Result<Self> {
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.den == other.den {
            return Self::new(&self.num + &other.num, self.den.clone());
        }
        // Least common denominator from matched roots keeps poles simple.
        let ra = self.den.roots()?;
        let rb = other.den.roots()?;
        let mut used = vec![false; rb.len()];
        let mut only_a = Vec::new();
        for &a in &ra {
            match rb
                .iter()
                .enumerate()
                .find(|(j, b)| !used[*j] && roots_coincide(a, **b, ROOT_CLUSTER_TOL))
            {
                Some((j, _)) => used[j] = true,
                None => only_a.push(a),
            }
        }
        let only_b: Vec<Complex64> = rb
            .iter()
            .zip(&used)
            .filter(|(_, u)| !**u)
            .map(|(b, _)| *b)
            .collect();
        let one = Complex64::new(1.0, 0.0);
        let num_a = &self.num * &Polynomial::from_roots(&only_b, one);
        let num_b = &other.num * &Polynomial::from_roots(&only_a, one);
        let mut den_roots = ra.clone();
        den_roots.extend_from_slice(&only_b);
        Self::new(&num_a + &num_b, Polynomial::from_roots(&den_roots, one))
    }

    pub fn sub(&self, other: &RationalFn) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &RationalFn) -> Result<Self> {
        if self.is_zero() || other.is_zero() {
            return Ok(Self::zero());
        }
        Self::new(&self.num * &other.num, &self.den * &other.den)
    }

    pub fn div(&self, other: &RationalFn) -> Result<Self> {
        if other.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        Self::new(&self.num * &other.den, &self.den * &other.num)
    }

    pub fn recip(&self) -> Result<Self> {
        Self::real(1.0).div(self)
    }

    /// Cancels numerator and denominator roots that coincide within
    /// [`ROOT_CLUSTER_TOL`]. Returns the input untouched when nothing cancels.
    pub fn reduced(self) -> Result<Self> {
        if self.num.is_zero() || self.num.degree() == 0 || self.den.degree() == 0 {
            return Ok(self);
        }
        let zs = self.num.roots()?;
        let ps = self.den.roots()?;
        let mut used = vec![false; ps.len()];
        let mut keep_z = Vec::with_capacity(zs.len());
        let mut cancelled = false;
        for &z in &zs {
            match ps
                .iter()
                .enumerate()
                .find(|(j, p)| !used[*j] && roots_coincide(z, **p, ROOT_CLUSTER_TOL))
            {
                Some((j, _)) => {
                    used[j] = true;
                    cancelled = true;
                }
                None => keep_z.push(z),
            }
        }
        if !cancelled {
            return Ok(self);
        }
        let keep_p: Vec<Complex64> = ps
            .iter()
            .zip(&used)
            .filter(|(_, u)| !**u)
            .map(|(p, _)| *p)
            .collect();
        Ok(RationalFn {
            num: Polynomial::from_roots(&keep_z, self.num.leading()),
            den: Polynomial::from_roots(&keep_p, Complex64::new(1.0, 0.0)),
        })
    }

    pub fn partial_fractions(&self) -> Result<PartialFractions> {
        partial_fractions(self)
    }

    /// Splits `f` into a causal part (left-half-plane poles plus the constant
    /// term) and an anticausal part (right-half-plane poles).
    pub fn causal_split(&self) -> Result<(RationalFn, RationalFn)> {
        if !self.is_proper() {
            return Err(Error::Unsupported(
                "causal split of a strictly improper function".into(),
            ));
        }
        let pf = self.partial_fractions()?;
        if let Some(t) = pf.terms.iter().find(|t| is_marginal(t.pole)) {
            return Err(Error::MarginalPole(t.pole));
        }
        // One-sided inputs are returned as given rather than rebuilt.
        if pf.terms.iter().all(|t| t.pole.re < 0.0) {
            return Ok((self.clone(), RationalFn::zero()));
        }
        let mut causal = PartialFractions {
            polynomial: pf.polynomial.clone(),
            terms: Vec::new(),
        };
        let mut anticausal = PartialFractions {
            polynomial: Polynomial::zero(),
            terms: Vec::new(),
        };
        for term in pf.terms {
            if is_marginal(term.pole) {
                return Err(Error::MarginalPole(term.pole));
            }
            if term.pole.re < 0.0 {
                causal.terms.push(term);
            } else {
                anticausal.terms.push(term);
            }
        }
        Ok((causal.to_rational()?, anticausal.to_rational()?))
    }

    /// Causal part only, `[f]_+`.
    pub fn causal_part(&self) -> Result<RationalFn> {
        Ok(self.causal_split()?.0)
    }
}

/// Strictly inside the left half-plane (not marginal).
pub fn is_left(p: Complex64) -> bool {
    p.re < 0.0 && !is_marginal(p)
}

pub fn is_marginal(p: Complex64) -> bool {
    let n = p.norm();
    n == 0.0 || p.re.abs() <= MARGINAL_TOL * n
}

impl fmt::Debug for RationalFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?}) / ({:?})", self.num.coeffs(), self.den.coeffs())
    }
}
