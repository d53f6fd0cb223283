//! Complex rational-function algebra in a Laplace-type variable `s`.
//!
//! Causal objects have every pole in `Re s < 0`. Frequency responses are
//! read on the imaginary axis, `s = i*omega`.

mod partial;
mod polynomial;
mod rational;

pub use partial::{partial_fractions, PartialFractions, PoleTerm};
pub use polynomial::{cluster_roots, roots_coincide, Polynomial, ROOT_CLUSTER_TOL, TRIM_TOL};
pub use rational::{is_left, is_marginal, RationalFn, MARGINAL_TOL, POLE_EVAL_TOL};
