//! Points and vectors of C² and 2×2 complex matrices.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A point (or tangent vector) of C².
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexPair {
    pub x: Complex64,
    pub y: Complex64,
}

impl ComplexPair {
    pub const ZERO: ComplexPair = ComplexPair {
        x: Complex64::new(0.0, 0.0),
        y: Complex64::new(0.0, 0.0),
    };

    pub fn new(x: Complex64, y: Complex64) -> Self {
        Self { x, y }
    }

    pub fn real(x: f64, y: f64) -> Self {
        Self::new(Complex64::new(x, 0.0), Complex64::new(y, 0.0))
    }

    /// Max-norm `max(|x|, |y|)`.
    pub fn norm_max(&self) -> f64 {
        self.x.norm().max(self.y.norm())
    }

    /// Euclidean (Hermitian) norm.
    pub fn norm(&self) -> f64 {
        self.x.norm().hypot(self.y.norm())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Hermitian inner product `<self, other> = x·conj(x') + y·conj(y')`.
    pub fn dot(&self, other: &ComplexPair) -> Complex64 {
        self.x * other.x.conj() + self.y * other.y.conj()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    pub fn dist(&self, other: &ComplexPair) -> f64 {
        (*self - *other).norm()
    }

    pub fn dist_max(&self, other: &ComplexPair) -> f64 {
        (*self - *other).norm_max()
    }

    /// Unit vector with its largest-modulus component made positive real.
    pub fn gauge_fixed(&self) -> Self {
        let n = self.norm();
        let lead = if self.x.norm() >= self.y.norm() {
            self.x
        } else {
            self.y
        };
        let phase = lead.conj() / lead.norm();
        self.scale(phase / n)
    }

    /// Angle in `[0, π/2]` between the complex lines spanned by two nonzero vectors.
    pub fn line_angle(&self, other: &ComplexPair) -> f64 {
        let c = (self.dot(other).norm() / (self.norm() * other.norm())).min(1.0);
        // acos loses precision near 1; the sine form is exact for small angles.
        let cross = (self.x * other.y - self.y * other.x).norm() / (self.norm() * other.norm());
        cross.min(1.0).atan2(c)
    }
}

impl Add for ComplexPair {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for ComplexPair {
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for ComplexPair {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for ComplexPair {
    fn sub_assign(&mut self, o: Self) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Neg for ComplexPair {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl Mul<Complex64> for ComplexPair {
    type Output = Self;
    fn mul(self, s: Complex64) -> Self {
        self.scale(s)
    }
}

impl Mul<f64> for ComplexPair {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

/// Row-major 2×2 complex matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub m: [[Complex64; 2]; 2],
}

/// Eigen-decomposition of a 2×2 matrix, ordered by increasing modulus.
#[derive(Debug, Clone, Copy)]
pub struct Eigen2 {
    pub values: [Complex64; 2],
    pub vectors: [ComplexPair; 2],
}

impl Mat2 {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        Self { m: [[a, b], [c, d]] }
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self::new(one, zero, zero, one)
    }

    pub fn det(&self) -> Complex64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn trace(&self) -> Complex64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn apply(&self, v: ComplexPair) -> ComplexPair {
        ComplexPair::new(
            self.m[0][0] * v.x + self.m[0][1] * v.y,
            self.m[1][0] * v.x + self.m[1][1] * v.y,
        )
    }

    pub fn matmul(&self, o: &Mat2) -> Mat2 {
        let a = &self.m;
        let b = &o.m;
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }

    pub fn sub(&self, o: &Mat2) -> Mat2 {
        Mat2::new(
            self.m[0][0] - o.m[0][0],
            self.m[0][1] - o.m[0][1],
            self.m[1][0] - o.m[1][0],
            self.m[1][1] - o.m[1][1],
        )
    }

    pub fn sub_scalar(&self, s: Complex64) -> Mat2 {
        Mat2::new(self.m[0][0] - s, self.m[0][1], self.m[1][0], self.m[1][1] - s)
    }

    /// Largest entry modulus.
    pub fn norm_max(&self) -> f64 {
        self.m
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0, |acc, c| acc.max(c.norm()))
    }

    /// Solves `self · v = rhs` by Cramer's rule; `None` when the determinant vanishes
    /// relative to the entry scale.
    pub fn solve(&self, rhs: ComplexPair) -> Option<ComplexPair> {
        let det = self.det();
        let scale = self.norm_max();
        if !(det.norm() > 1e-300 && det.norm() > f64::EPSILON * 1e-4 * scale * scale) {
            return None;
        }
        let m = &self.m;
        Some(ComplexPair::new(
            (m[1][1] * rhs.x - m[0][1] * rhs.y) / det,
            (m[0][0] * rhs.y - m[1][0] * rhs.x) / det,
        ))
    }

    /// Eigenvalues sorted by modulus, with unit eigenvectors whose largest component is
    /// positive real. The smaller eigenvalue is recovered from the determinant to avoid
    /// cancellation.
    pub fn eigen(&self) -> Eigen2 {
        let half_tr = self.trace() * 0.5;
        let det = self.det();
        let disc = (half_tr * half_tr - det).sqrt();
        let l1 = half_tr + disc;
        let l2 = half_tr - disc;
        let big = if l1.norm() >= l2.norm() { l1 } else { l2 };
        let small = if big.norm() > 0.0 { det / big } else { l2 };
        Eigen2 {
            values: [small, big],
            vectors: [self.eigenvector(small), self.eigenvector(big)],
        }
    }

    /// Unit eigenvector for a given eigenvalue, gauge-fixed.
    pub fn eigenvector(&self, lambda: Complex64) -> ComplexPair {
        let m = &self.m;
        let v1 = ComplexPair::new(m[0][1], lambda - m[0][0]);
        let v2 = ComplexPair::new(lambda - m[1][1], m[1][0]);
        let v = if v1.norm() >= v2.norm() { v1 } else { v2 };
        if v.norm() == 0.0 {
            // Scalar matrix: every vector is an eigenvector.
            return ComplexPair::real(1.0, 0.0);
        }
        v.gauge_fixed()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eigen_of_henon_factor_matrix() {
        // [[2x, -a], [1, 0]] at the fixed point of x² - 6 - 0.5y.
        let x = (1.5 + 26.25f64.sqrt()) / 2.0;
        let m = Mat2::new(c(2.0 * x, 0.0), c(-0.5, 0.0), c(1.0, 0.0), c(0.0, 0.0));
        let e = m.eigen();
        for (val, vec) in e.values.iter().zip(e.vectors.iter()) {
            let r = m.apply(*vec) - vec.scale(*val);
            assert!(r.norm() < 1e-12);
            assert!((vec.norm() - 1.0).abs() < 1e-14);
        }
        assert!((e.values[0] * e.values[1] - c(0.5, 0.0)).norm() < 1e-14);
        assert!(e.values[0].norm() < e.values[1].norm());
    }

    #[test]
    fn solve_roundtrip_and_singular() {
        let m = Mat2::new(c(1.0, 2.0), c(0.5, 0.0), c(-1.0, 0.3), c(2.0, -1.0));
        let v = ComplexPair::new(c(0.3, -0.7), c(1.1, 0.2));
        let x = m.solve(m.apply(v)).unwrap();
        assert!((x - v).norm() < 1e-14);
        let s = Mat2::new(c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0));
        assert!(s.solve(v).is_none());
    }

    #[test]
    fn line_angle_is_phase_invariant() {
        let u = ComplexPair::new(c(1.0, 0.0), c(0.0, 0.0));
        let v = ComplexPair::new(c(0.0, 1.0), c(0.0, 0.0));
        assert!(u.line_angle(&v) < 1e-15);
        let w = ComplexPair::new(c(0.0, 0.0), c(0.0, 3.0));
        assert!((u.line_angle(&w) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let t = ComplexPair::new(c(1.0, 0.0), c(1e-9, 0.0));
        assert!((u.line_angle(&t) - 1e-9).abs() < 1e-20);
    }
}
