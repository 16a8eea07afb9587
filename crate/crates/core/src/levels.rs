//! Levels and scale parameters of the tree and sprinkling constructions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::GreenEvaluator;

/// alpha = 15 + e + log 500 / log 3
pub fn alpha() -> f64 {
    15.0 + std::f64::consts::E + 500f64.ln() / 3f64.ln()
}

/// ell = 3 + [eps^{-1} (7 + 2 alpha log(1/eps))]
pub fn ell_formula(epsilon: f64) -> u64 {
    3 + ((7.0 + 2.0 * alpha() * (1.0 / epsilon).ln()) / epsilon).floor() as u64
}

/// L = [(1/2) (d^eps / ell)^{ell - 1}], as a float since it under- or overflows any
/// integer type for small eps.
pub fn big_l(d: usize, epsilon: f64, ell: u64) -> f64 {
    let log = (ell as f64 - 1.0) * (epsilon * (d as f64).ln() - (ell as f64).ln()) - 2f64.ln();
    log.exp().floor()
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Levels {
    pub d: usize,
    pub epsilon: f64,
    pub g0: f64,
    /// (1 - eps) g(0) log d
    pub u0: f64,
    /// (1 - 2 eps) g(0) log d
    pub u1: f64,
    /// (1 - 3 eps) g(0) log d
    pub u2: f64,
    pub alpha: f64,
    pub ell: u64,
    pub big_l: f64,
}

impl Levels {
    pub fn new(ev: &GreenEvaluator, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Precondition(format!("epsilon = {epsilon} outside (0, 1)")));
        }
        let d = ev.dim();
        let g0 = ev.g0()?;
        let scale = g0 * (d as f64).ln();
        let ell = ell_formula(epsilon);
        Ok(Levels {
            d,
            epsilon,
            g0,
            u0: (1.0 - epsilon) * scale,
            u1: (1.0 - 2.0 * epsilon) * scale,
            u2: (1.0 - 3.0 * epsilon) * scale,
            alpha: alpha(),
            ell,
            big_l: big_l(d, epsilon, ell),
        })
    }

    /// Whether eps lies in the range (0, 1/10) the constructions are stated for.
    pub fn in_stated_range(&self) -> bool {
        self.epsilon > 0.0 && self.epsilon < 0.1
    }
}
