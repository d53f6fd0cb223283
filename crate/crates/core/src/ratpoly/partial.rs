use num_complex::Complex64;

use super::polynomial::{cluster_roots, Polynomial, ROOT_CLUSTER_TOL};
use super::rational::RationalFn;
use crate::error::{Error, Result};

/// One simple-pole term `residue / (s - pole)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoleTerm {
    pub pole: Complex64,
    pub residue: Complex64,
    pub multiplicity: usize,
}

/// `polynomial(s) + sum residue_k / (s - pole_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialFractions {
    pub polynomial: Polynomial,
    pub terms: Vec<PoleTerm>,
}

impl PartialFractions {
    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.terms
            .iter()
            .fold(self.polynomial.eval(s), |acc, t| acc + t.residue / (s - t.pole))
    }

    /// Constant part (value of the polynomial part at `s = 0`).
    pub fn direct(&self) -> Complex64 {
        self.polynomial.eval(Complex64::new(0.0, 0.0))
    }

    pub fn to_rational(&self) -> Result<RationalFn> {
        let one = Complex64::new(1.0, 0.0);
        let poles: Vec<Complex64> = self.terms.iter().map(|t| t.pole).collect();
        let den = Polynomial::from_roots(&poles, one);
        let mut num = &self.polynomial * &den;
        for (k, t) in self.terms.iter().enumerate() {
            let others: Vec<Complex64> = poles
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, p)| *p)
                .collect();
            num = &num + &Polynomial::from_roots(&others, t.residue);
        }
        RationalFn::new_unreduced(num, den)
    }
}

/// Expands a reduced rational function with simple poles.
pub fn partial_fractions(f: &RationalFn) -> Result<PartialFractions> {
    let (quot, rem) = f.num().div_rem(f.den())?;
    if f.den().degree() == 0 {
        return Ok(PartialFractions {
            polynomial: quot,
            terms: Vec::new(),
        });
    }
    let poles = f.den().roots()?;
    for (pole, mult) in cluster_roots(&poles, ROOT_CLUSTER_TOL) {
        if mult > 1 {
            return Err(Error::UnsupportedMultiplicity(pole));
        }
    }
    // D'(p_k) in product form is far better conditioned than from coefficients.
    let lead = f.den().leading();
    let terms = poles
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let dd = poles
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .fold(lead, |acc, (_, q)| acc * (p - q));
            PoleTerm {
                pole: p,
                residue: rem.eval(p) / dd,
                multiplicity: 1,
            }
        })
        .filter(|t| t.residue != Complex64::new(0.0, 0.0))
        .collect();
    Ok(PartialFractions {
        polynomial: quot,
        terms,
    })
}
