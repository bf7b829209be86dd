//! Truncated power series in one complex variable, and curves in C² built from them.
//!
//! Everything here is exact to the truncation order: products drop every term of degree
//! above `order`, so composing a polynomial map with a curve jet yields the exact Taylor
//! coefficients of the composition up to that order.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::ComplexPair;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `c[0] + c[1] ζ + … + c[order] ζ^order`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub c: Vec<Complex64>,
}

impl Series {
    pub fn zeros(order: usize) -> Self {
        Self {
            c: vec![ZERO; order + 1],
        }
    }

    pub fn constant(v: Complex64, order: usize) -> Self {
        let mut s = Self::zeros(order);
        s.c[0] = v;
        s
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn add(&self, o: &Series) -> Series {
        Series {
            c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, o: &Series) -> Series {
        Series {
            c: self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Series {
        Series {
            c: self.c.iter().map(|a| a * s).collect(),
        }
    }

    /// Truncated Cauchy product.
    pub fn mul(&self, o: &Series) -> Series {
        let n = self.c.len();
        let mut out = vec![ZERO; n];
        for (i, a) in self.c.iter().enumerate() {
            if *a == ZERO {
                continue;
            }
            for (j, b) in o.c[..n - i].iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Series { c: out }
    }

    /// Evaluates the polynomial with coefficients `poly` (constant first) at this series.
    pub fn poly_compose(&self, poly: &[Complex64]) -> Series {
        let order = self.order();
        let mut acc = Series::constant(*poly.last().unwrap_or(&ZERO), order);
        for coef in poly.iter().rev().skip(1) {
            acc = acc.mul(self);
            acc.c[0] += coef;
        }
        acc
    }

    /// `Σ c_k ζ^k` by Horner's rule.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.c.iter().rev().fold(ZERO, |acc, c| acc * z + c)
    }
}

/// Jet of a parametrized curve `ζ ↦ (x(ζ), y(ζ))`.
#[derive(Debug, Clone, PartialEq)]
pub struct JetPair {
    pub x: Series,
    pub y: Series,
}

impl JetPair {
    pub fn order(&self) -> usize {
        self.x.order()
    }

    pub fn constant(p: ComplexPair, order: usize) -> Self {
        Self {
            x: Series::constant(p.x, order),
            y: Series::constant(p.y, order),
        }
    }

    /// Builds a jet from a base point and coefficient vectors `a_1..a_T`.
    pub fn from_coeffs(base: ComplexPair, coeffs: &[ComplexPair], order: usize) -> Self {
        let mut j = Self::constant(base, order);
        for (k, a) in coeffs.iter().enumerate().take(order) {
            j.x.c[k + 1] = a.x;
            j.y.c[k + 1] = a.y;
        }
        j
    }

    pub fn coeff(&self, k: usize) -> ComplexPair {
        ComplexPair::new(self.x.c[k], self.y.c[k])
    }

    pub fn base(&self) -> ComplexPair {
        self.coeff(0)
    }

    /// Coefficient vectors `a_1..a_order`.
    pub fn coeffs(&self) -> Vec<ComplexPair> {
        (1..=self.order()).map(|k| self.coeff(k)).collect()
    }

    pub fn eval(&self, z: Complex64) -> ComplexPair {
        ComplexPair::new(self.x.eval(z), self.y.eval(z))
    }

    /// Reparametrizes by `ζ ↦ s·ζ`.
    pub fn rescale(&self, s: Complex64) -> JetPair {
        let mut out = self.clone();
        let mut p = Complex64::new(1.0, 0.0);
        for k in 0..=self.order() {
            out.x.c[k] *= p;
            out.y.c[k] *= p;
            p *= s;
        }
        out
    }
}

/// Re-expands `Σ_{k=0}^{T} a_k ζ^k` around `ζ = w`, returning coefficients of `δ` in
/// `Σ a_k (w + δ)^k` truncated at `order`.
pub fn taylor_shift(a: &[Complex64], w: Complex64, order: usize) -> Vec<Complex64> {
    // Repeated synthetic division; exact for the polynomial.
    let mut b = a.to_vec();
    let n = b.len();
    let mut out = Vec::with_capacity(order + 1);
    for m in 0..n.min(order + 1) {
        for k in (m..n - 1).rev() {
            let t = b[k + 1] * w;
            b[k] += t;
        }
        out.push(b[m]);
    }
    out.resize(order + 1, ZERO);
    out
}

/// Plain polynomial curve `base + Σ a_k ζ^k`, used for synthetic test curves and as the
/// exchange format of curve jets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveJet {
    pub base: ComplexPair,
    pub coeffs: Vec<ComplexPair>,
}

impl CurveJet {
    pub fn new(base: ComplexPair, coeffs: Vec<ComplexPair>) -> Self {
        Self { base, coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn to_jet(&self, order: usize) -> JetPair {
        JetPair::from_coeffs(self.base, &self.coeffs, order)
    }

    pub fn from_jet(j: &JetPair) -> Self {
        Self {
            base: j.base(),
            coeffs: j.coeffs(),
        }
    }

    pub fn eval(&self, z: Complex64) -> ComplexPair {
        let mut acc = ComplexPair::ZERO;
        for a in self.coeffs.iter().rev() {
            acc = (acc + *a) * z;
        }
        acc + self.base
    }

    pub fn derivative(&self, z: Complex64) -> ComplexPair {
        let mut acc = ComplexPair::ZERO;
        for (k, a) in self.coeffs.iter().enumerate().rev() {
            acc = acc * z + *a * ((k + 1) as f64);
        }
        acc
    }
}
