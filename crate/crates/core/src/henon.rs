//! Finite compositions of complex Hénon maps `(x, y) ↦ (p(x) − a·y, x)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::JetPair;
use crate::linalg::{ComplexPair, Mat2};

/// Orbits whose max-norm passes this bound are reported as escaped.
pub const OVERFLOW_RADIUS: f64 = 1e150;

/// One factor `(x, y) ↦ (p(x) − a·y, x)` with monic `p` of degree at least 2.
#[derive(Debug, Clone, PartialEq)]
pub struct HenonFactor {
    p: Vec<Complex64>,
    a: Complex64,
}

impl HenonFactor {
    /// `p` lists coefficients constant term first; the last one must be exactly 1.
    pub fn new(p: Vec<Complex64>, a: Complex64) -> Result<Self> {
        if p.len() < 3 {
            return Err(Error::InvalidMap(format!(
                "polynomial degree must be at least 2, got {}",
                p.len().saturating_sub(1)
            )));
        }
        if p.iter().any(|c| !c.is_finite()) || !a.is_finite() {
            return Err(Error::InvalidMap("non-finite coefficient".into()));
        }
        if *p.last().unwrap() != Complex64::new(1.0, 0.0) {
            return Err(Error::InvalidMap(format!(
                "polynomial must be monic, leading coefficient is {}",
                p.last().unwrap()
            )));
        }
        if a == Complex64::new(0.0, 0.0) {
            return Err(Error::InvalidMap("jacobian parameter a must be nonzero".into()));
        }
        Ok(Self { p, a })
    }

    /// The quadratic family `x² + c − a·y`.
    pub fn quadratic(c: Complex64, a: Complex64) -> Result<Self> {
        Self::new(
            vec![c, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            a,
        )
    }

    pub fn poly(&self) -> &[Complex64] {
        &self.p
    }

    pub fn a(&self) -> Complex64 {
        self.a
    }

    pub fn degree(&self) -> usize {
        self.p.len() - 1
    }

    fn p_at(&self, x: Complex64) -> Complex64 {
        self.p
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * x + c)
    }

    fn dp_at(&self, x: Complex64) -> Complex64 {
        self.p
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, (k, c)| acc * x + c * k as f64)
    }

    pub fn apply(&self, z: ComplexPair) -> ComplexPair {
        ComplexPair::new(self.p_at(z.x) - self.a * z.y, z.x)
    }

    pub fn apply_inverse(&self, z: ComplexPair) -> ComplexPair {
        ComplexPair::new(z.y, (self.p_at(z.y) - z.x) / self.a)
    }

    /// `[[p'(x), −a], [1, 0]]`.
    pub fn jacobian(&self, z: ComplexPair) -> Mat2 {
        Mat2::new(
            self.dp_at(z.x),
            -self.a,
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        )
    }

    /// `[[0, 1], [−1/a, p'(y)/a]]`.
    pub fn jacobian_inverse(&self, z: ComplexPair) -> Mat2 {
        Mat2::new(
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            -1.0 / self.a,
            self.dp_at(z.y) / self.a,
        )
    }

    pub fn apply_jet(&self, j: &JetPair) -> JetPair {
        let px = j.x.poly_compose(&self.p);
        JetPair {
            x: px.sub(&j.y.scale(self.a)),
            y: j.x.clone(),
        }
    }

    pub fn apply_inverse_jet(&self, j: &JetPair) -> JetPair {
        let py = j.y.poly_compose(&self.p);
        JetPair {
            x: j.y.clone(),
            y: py.sub(&j.x).scale(1.0 / self.a),
        }
    }

    /// `1 + |a| + Σ|c_k|` over the non-leading coefficients.
    pub fn filtration_radius(&self) -> f64 {
        let lower: f64 = self.p[..self.p.len() - 1].iter().map(|c| c.norm()).sum();
        1.0 + self.a.norm() + lower
    }
}

/// A polynomial diffeomorphism of C² with constant Jacobian and a filtration.
///
/// Implemented by [`HenonMap`] and by its inverse, so every construction written for
/// "the unstable side of `f`" runs unchanged on `f⁻¹` to produce the stable side.
pub trait PlaneMap: Send + Sync {
    fn step(&self, z: ComplexPair) -> ComplexPair;
    fn step_back(&self, z: ComplexPair) -> ComplexPair;
    fn step_jacobian(&self, z: ComplexPair) -> Mat2;
    fn step_jet(&self, j: &JetPair) -> JetPair;
    fn degree(&self) -> u64;
    fn jac_det(&self) -> Complex64;
    fn filtration_radius(&self) -> f64;
    /// Whether `z` lies in the forward escape region of the filtration radius `r`.
    fn in_escape_region(&self, z: ComplexPair, r: f64) -> bool;
    /// Affine growth law of `log‖z‖` in the escape region: one step sends
    /// `L ↦ degree·L + log_lead`, up to terms that vanish as `‖z‖ → ∞`.
    fn log_lead(&self) -> f64;
    /// Bound on `|log‖f(z)‖ − (degree·log‖z‖ + log_lead)|` for `z` in the escape region
    /// with max-norm `norm`.
    fn growth_defect(&self, norm: f64) -> f64;
}

/// Each factor step multiplies the dominant coordinate by `w^d·(1 + δ)` with
/// `|δ| ≤ (R − 1)/|w|`.
fn factor_defect(factors: usize, r: f64, norm: f64) -> f64 {
    let rho = (r - 1.0) / norm;
    if rho >= 1.0 {
        f64::INFINITY
    } else {
        -(factors as f64) * (-rho).ln_1p()
    }
}

/// Composition of Hénon factors, applied first factor first.
#[derive(Debug, Clone, PartialEq)]
pub struct HenonMap {
    factors: Vec<HenonFactor>,
}

impl HenonMap {
    pub fn new(factors: Vec<HenonFactor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidMap("at least one factor is required".into()));
        }
        Ok(Self { factors })
    }

    /// Single quadratic factor `(x² + c − a·y, x)` with real parameters.
    pub fn quadratic(a: f64, c: f64) -> Result<Self> {
        Self::new(vec![HenonFactor::quadratic(
            Complex64::new(c, 0.0),
            Complex64::new(a, 0.0),
        )?])
    }

    /// The reference horseshoe `a = 0.5, c = −6`.
    pub fn horseshoe() -> Self {
        Self::quadratic(0.5, -6.0).expect("valid reference map")
    }

    pub fn factors(&self) -> &[HenonFactor] {
        &self.factors
    }

    pub fn inverse(&self) -> InverseHenon {
        InverseHenon { map: self.clone() }
    }

    /// One application of the map; escapes past [`OVERFLOW_RADIUS`] are reported as such.
    pub fn evaluate(&self, z: ComplexPair) -> Result<ComplexPair> {
        checked(self.step(z))
    }

    pub fn inverse_evaluate(&self, z: ComplexPair) -> Result<ComplexPair> {
        checked(self.step_back(z))
    }

    /// Chain-rule product of factor Jacobians at `z`.
    pub fn jacobian(&self, z: ComplexPair) -> Mat2 {
        self.step_jacobian(z)
    }

    /// `f^n(z)` for `n > 0`, `f^{-n}` for `n < 0`.
    pub fn iterate(&self, z: ComplexPair, n: i64) -> Result<ComplexPair> {
        iterate(self, z, n)
    }

    /// Parses the map specification JSON `{"factors":[{"p":[c0,…,1],"a":[re,im]}]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: MapSpec = serde_json::from_str(text)?;
        spec.build()
    }

    pub fn to_spec(&self) -> MapSpec {
        MapSpec {
            factors: self
                .factors
                .iter()
                .map(|f| FactorSpec {
                    p: f.p.iter().map(|&c| Coefficient::from(c)).collect(),
                    a: Coefficient::from(f.a),
                })
                .collect(),
        }
    }
}

fn checked(z: ComplexPair) -> Result<ComplexPair> {
    if z.is_finite() && z.norm_max() <= OVERFLOW_RADIUS {
        Ok(z)
    } else {
        Err(Error::Escaped { steps: 1 })
    }
}

/// `n`-fold iterate of any [`PlaneMap`] with the overflow flag.
pub fn iterate<M: PlaneMap + ?Sized>(f: &M, z: ComplexPair, n: i64) -> Result<ComplexPair> {
    let mut w = z;
    for k in 0..n.unsigned_abs() {
        w = if n > 0 { f.step(w) } else { f.step_back(w) };
        if !(w.is_finite() && w.norm_max() <= OVERFLOW_RADIUS) {
            return Err(Error::Escaped { steps: k + 1 });
        }
    }
    Ok(w)
}

/// `Df^n(z)` together with `f^n(z)`.
pub fn iterate_with_jacobian<M: PlaneMap + ?Sized>(
    f: &M,
    z: ComplexPair,
    n: usize,
) -> (ComplexPair, Mat2) {
    let mut w = z;
    let mut d = Mat2::identity();
    for _ in 0..n {
        d = f.step_jacobian(w).matmul(&d);
        w = f.step(w);
    }
    (w, d)
}

/// Pushes a curve jet forward by `n` steps.
pub fn iterate_jet<M: PlaneMap + ?Sized>(f: &M, j: &JetPair, n: usize) -> JetPair {
    let mut out = j.clone();
    for _ in 0..n {
        out = f.step_jet(&out);
    }
    out
}

impl PlaneMap for HenonMap {
    fn step(&self, z: ComplexPair) -> ComplexPair {
        self.factors.iter().fold(z, |w, f| f.apply(w))
    }

    fn step_back(&self, z: ComplexPair) -> ComplexPair {
        self.factors.iter().rev().fold(z, |w, f| f.apply_inverse(w))
    }

    fn step_jacobian(&self, z: ComplexPair) -> Mat2 {
        let mut w = z;
        let mut d = Mat2::identity();
        for f in &self.factors {
            d = f.jacobian(w).matmul(&d);
            w = f.apply(w);
        }
        d
    }

    fn step_jet(&self, j: &JetPair) -> JetPair {
        let mut out = j.clone();
        for f in &self.factors {
            out = f.apply_jet(&out);
        }
        out
    }

    fn degree(&self) -> u64 {
        self.factors.iter().map(|f| f.degree() as u64).product()
    }

    fn jac_det(&self) -> Complex64 {
        self.factors
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, f| acc * f.a)
    }

    fn filtration_radius(&self) -> f64 {
        self.factors
            .iter()
            .map(HenonFactor::filtration_radius)
            .fold(0.0, f64::max)
    }

    fn in_escape_region(&self, z: ComplexPair, r: f64) -> bool {
        let ax = z.x.norm();
        ax > r && ax >= z.y.norm()
    }

    fn log_lead(&self) -> f64 {
        0.0
    }

    fn growth_defect(&self, norm: f64) -> f64 {
        factor_defect(self.factors.len(), self.filtration_radius(), norm)
    }
}

/// `f⁻¹` for a Hénon composition. Not itself of monic Hénon form, but polynomial with
/// the same filtration.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseHenon {
    map: HenonMap,
}

impl InverseHenon {
    pub fn forward(&self) -> &HenonMap {
        &self.map
    }
}

impl PlaneMap for InverseHenon {
    fn step(&self, z: ComplexPair) -> ComplexPair {
        self.map.step_back(z)
    }

    fn step_back(&self, z: ComplexPair) -> ComplexPair {
        self.map.step(z)
    }

    fn step_jacobian(&self, z: ComplexPair) -> Mat2 {
        let mut w = z;
        let mut d = Mat2::identity();
        for f in self.map.factors.iter().rev() {
            d = f.jacobian_inverse(w).matmul(&d);
            w = f.apply_inverse(w);
        }
        d
    }

    fn step_jet(&self, j: &JetPair) -> JetPair {
        let mut out = j.clone();
        for f in self.map.factors.iter().rev() {
            out = f.apply_inverse_jet(&out);
        }
        out
    }

    fn degree(&self) -> u64 {
        self.map.degree()
    }

    fn jac_det(&self) -> Complex64 {
        1.0 / self.map.jac_det()
    }

    fn filtration_radius(&self) -> f64 {
        self.map.filtration_radius()
    }

    fn in_escape_region(&self, z: ComplexPair, r: f64) -> bool {
        let ay = z.y.norm();
        ay > r && ay >= z.x.norm()
    }

    fn log_lead(&self) -> f64 {
        // Applying inverse factors last-to-first: L ↦ d_i·L − log|a_i|.
        self.map
            .factors
            .iter()
            .rev()
            .fold(0.0, |acc, f| f.degree() as f64 * acc - f.a.norm().ln())
    }

    fn growth_defect(&self, norm: f64) -> f64 {
        factor_defect(self.map.factors.len(), self.filtration_radius(), norm)
    }
}

/// A polynomial or scalar coefficient: plain real number or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Real(f64),
    Complex([f64; 2]),
}

impl From<Coefficient> for Complex64 {
    fn from(c: Coefficient) -> Self {
        match c {
            Coefficient::Real(r) => Complex64::new(r, 0.0),
            Coefficient::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

impl From<Complex64> for Coefficient {
    fn from(c: Complex64) -> Self {
        Coefficient::Complex([c.re, c.im])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSpec {
    pub p: Vec<Coefficient>,
    pub a: Coefficient,
}

/// Serialized form of a [`HenonMap`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub factors: Vec<FactorSpec>,
}

impl MapSpec {
    pub fn build(&self) -> Result<HenonMap> {
        let factors = self
            .factors
            .iter()
            .enumerate()
            .map(|(i, f)| {
                HenonFactor::new(
                    f.p.iter().map(|&c| c.into()).collect(),
                    f.a.into(),
                )
                .map_err(|e| Error::InvalidMap(format!("factor {i}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        HenonMap::new(factors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn fixed_x() -> f64 {
        (1.5 + 26.25f64.sqrt()) / 2.0
    }

    fn two_factor() -> HenonMap {
        HenonMap::new(vec![
            HenonFactor::quadratic(c(-6.0, 0.0), c(0.5, 0.0)).unwrap(),
            HenonFactor::new(vec![c(0.1, 0.2), c(0.3, 0.0), c(0.0, 0.0), c(1.0, 0.0)], c(-0.7, 0.4))
                .unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let f = HenonMap::horseshoe();
        assert_eq!(f.evaluate(ComplexPair::ZERO).unwrap(), ComplexPair::real(-6.0, 0.0));
        assert_eq!(
            f.inverse_evaluate(ComplexPair::real(-6.0, 0.0)).unwrap(),
            ComplexPair::ZERO
        );
        let p = ComplexPair::real(fixed_x(), fixed_x());
        assert!(f.evaluate(p).unwrap().dist(&p) < 1e-10);
        for n in [-4, 0, 1, 5] {
            assert!(f.iterate(p, n).unwrap().dist(&p) < 1e-10);
        }
    }

    #[test]
    fn overflow_is_flagged() {
        let f = HenonMap::horseshoe();
        let z = ComplexPair::real(1e6, 0.0);
        assert!(f.iterate(z, 1).is_ok());
        match f.iterate(z, 10) {
            Err(Error::Escaped { steps }) => assert!(steps <= 5),
            other => panic!("expected escape, got {other:?}"),
        }
    }

    #[test]
    fn factor_validation() {
        assert!(HenonFactor::new(vec![c(1.0, 0.0), c(2.0, 0.0)], c(1.0, 0.0)).is_err());
        assert!(HenonFactor::new(vec![c(1.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)], c(1.0, 0.0)).is_err());
        assert!(HenonFactor::quadratic(c(1.0, 0.0), c(0.0, 0.0)).is_err());
        assert!(HenonMap::new(vec![]).is_err());
    }

    #[test]
    fn filtration_radius_examples() {
        assert!((HenonMap::horseshoe().filtration_radius() - 7.5).abs() < 1e-15);
        assert!((HenonMap::quadratic(0.1, -1.24).unwrap().filtration_radius() - 2.34).abs() < 1e-14);
        let f = two_factor();
        let r0 = f.factors()[0].filtration_radius();
        let r1 = f.factors()[1].filtration_radius();
        assert_eq!(f.filtration_radius(), r0.max(r1));
    }

    #[test]
    fn filtration_escape_by_sampling() {
        // 100 orbits started in the escape region must grow monotonically.
        for f in [HenonMap::horseshoe(), HenonMap::quadratic(0.1, -1.24).unwrap(), two_factor()] {
            let r = f.filtration_radius();
            for i in 0..100 {
                let t = i as f64 * 0.0628;
                let rad = r * (1.0 + 0.01 * (i % 7) as f64);
                let x = c(rad * t.cos(), rad * t.sin());
                let y = x * c(0.9 * (i as f64 * 0.37).cos(), 0.0);
                let mut z = ComplexPair::new(x, y);
                while z.norm_max() < 1e40 {
                    let w = f.step(z);
                    assert!(f.in_escape_region(w, r), "{i} {z:?} {w:?} {r}");
                    assert!(w.x.norm() >= z.x.norm());
                    z = w;
                }
            }
        }
    }

    #[test]
    fn jacobian_determinant_is_constant() {
        let f = two_factor();
        for i in 0..1000 {
            let t = i as f64;
            let z = ComplexPair::new(c((t * 0.7).sin() * 3.0, (t * 1.3).cos()), c((t * 0.3).cos() * 2.0, (t * 0.11).sin()));
            let det = f.jacobian(z).det();
            let expect = f.jac_det();
            assert!((det - expect).norm() <= 1e-12 * expect.norm().max(1.0) * f.jacobian(z).norm_max());
        }
        let g = HenonMap::horseshoe();
        assert!((g.jacobian(ComplexPair::real(1.0, 2.0)).det() - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let f = two_factor();
        let z = ComplexPair::new(c(0.4, -0.2), c(-0.3, 0.5));
        let e = ComplexPair::new(c(0.6, 0.1), c(-0.2, 0.7));
        let lin = f.jacobian(z).apply(e);
        let mut prev = f64::INFINITY;
        for h in [1e-4, 1e-5, 1e-6, 1e-7, 1e-8] {
            let fd = (f.step(z + e * h) - f.step(z)) * (1.0 / h);
            let err = (fd - lin).norm();
            assert!(err < 50.0 * h + 1e-5, "h={h} err={err}");
            if h >= 1e-5 {
                assert!(err < prev);
            }
            prev = err;
        }
    }

    #[test]
    fn inverse_map_trait_consistency() {
        let f = two_factor();
        let g = f.inverse();
        let z = ComplexPair::new(c(0.4, -0.2), c(-0.3, 0.5));
        assert!(g.step(f.step(z)).dist(&z) < 1e-12);
        let prod = g.step_jacobian(f.step(z)).matmul(&f.step_jacobian(z));
        assert!(prod.sub(&Mat2::identity()).norm_max() < 1e-12);
        assert!((g.jac_det() * f.jac_det() - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn json_spec_roundtrip_and_rejects() {
        let f = HenonMap::from_json(r#"{"factors":[{"p":[-6,0,1],"a":[0.5,0]}]}"#).unwrap();
        assert_eq!(f, HenonMap::horseshoe());
        let back = serde_json::to_string(&f.to_spec()).unwrap();
        assert_eq!(HenonMap::from_json(&back).unwrap(), f);
        assert!(HenonMap::from_json(r#"{"factors":[{"p":[-6,0,2],"a":[0.5,0]}]}"#).is_err());
        assert!(HenonMap::from_json(r#"{"factors":[{"p":[-6,0,1],"a":[0,0]}]}"#).is_err());
        assert!(HenonMap::from_json(r#"{"factors":[]}"#).is_err());
    }

    proptest! {
        #[test]
        fn inverse_roundtrip(xr in -7.5f64..7.5, xi in -7.5f64..7.5, yr in -7.5f64..7.5, yi in -7.5f64..7.5) {
            let f = HenonMap::horseshoe();
            let z = ComplexPair::new(c(xr, xi), c(yr, yi));
            let back = f.inverse_evaluate(f.evaluate(z).unwrap()).unwrap();
            prop_assert!(back.dist(&z) <= 1e-12 * z.norm_max().max(1.0) * 10.0);
        }

        #[test]
        fn composition_inverse_roundtrip(xr in -2.0f64..2.0, yi in -2.0f64..2.0) {
            let f = two_factor();
            let z = ComplexPair::new(c(xr, 0.1), c(0.2, yi));
            let w = f.iterate(z, 1).unwrap();
            prop_assert!(f.iterate(w, -1).unwrap().dist(&z) < 1e-12 * w.norm_max().max(1.0));
        }
    }

    #[test]
    fn long_roundtrip_on_bounded_orbit() {
        // Area-preserving map near its elliptic fixed point x = 1 - sqrt(0.9): orbits stay
        // bounded without exponential error growth in either time direction.
        let f = HenonMap::quadratic(1.0, 0.1).unwrap();
        let xe = 1.0 - 0.9f64.sqrt();
        let z = ComplexPair::new(c(xe + 0.05, 0.01), c(xe - 0.03, 0.0));
        for n in 1..=20 {
            let w = f.iterate(z, n).unwrap();
            assert!(f.iterate(w, -n).unwrap().dist(&z) < 1e-10);
        }
        let m = ComplexPair::real(xe, xe);
        for n in [-20, 0, 20] {
            assert!(f.iterate(m, n).unwrap().dist(&m) < 1e-10);
        }
    }
}
