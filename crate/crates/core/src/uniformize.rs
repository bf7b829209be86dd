//! Power-series parametrizations of unstable and stable manifolds of saddles.
//!
//! For a saddle `p` of period `N` the unstable parametrization `ξ` solves
//! `f^N(ξ(ζ)) = ξ(ν_u ζ)`. Matching Taylor coefficients gives, for `k ≥ 2`,
//! `(ν^k I − Df^N(p)) a_k = [f^N(ξ_{<k})]_k`, where the right side is the order-`k`
//! coefficient of `f^N` applied to the partial series; jet arithmetic computes it exactly.
//! The stable side is the same construction for `f⁻¹` with multiplier `1/ν_s`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::{green, GreenConfig};
use crate::henon::{iterate_jet, iterate_with_jacobian, HenonMap, InverseHenon, PlaneMap};
use crate::jet::{taylor_shift, CurveJet, JetPair, Series};
use crate::linalg::{ComplexPair, Mat2};
use crate::saddles::Saddle;

pub const DEFAULT_ORDER: usize = 40;
pub const DEFAULT_SERIES_TOL: f64 = 1e-12;
const RESONANCE_GAP: f64 = 1e-10;
const CIRCLE_SAMPLES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Stable,
    Unstable,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Stable => Side::Unstable,
            Side::Unstable => Side::Stable,
        }
    }
}

/// The map whose expanding direction a parametrization follows: `f` for unstable
/// manifolds, `f⁻¹` for stable ones.
#[derive(Debug, Clone, PartialEq)]
pub enum SideMap {
    Forward(HenonMap),
    Backward(InverseHenon),
}

impl SideMap {
    pub fn new(f: &HenonMap, side: Side) -> Self {
        match side {
            Side::Unstable => SideMap::Forward(f.clone()),
            Side::Stable => SideMap::Backward(f.inverse()),
        }
    }

    fn inner(&self) -> &dyn PlaneMap {
        match self {
            SideMap::Forward(m) => m,
            SideMap::Backward(m) => m,
        }
    }

    /// Green function of the expanding direction: `G⁺` for the unstable side, `G⁻` for
    /// the stable side.
    pub fn green(&self, z: ComplexPair, cfg: &GreenConfig) -> f64 {
        green(self.inner(), z, cfg).value
    }
}

impl PlaneMap for SideMap {
    fn step(&self, z: ComplexPair) -> ComplexPair {
        self.inner().step(z)
    }
    fn step_back(&self, z: ComplexPair) -> ComplexPair {
        self.inner().step_back(z)
    }
    fn step_jacobian(&self, z: ComplexPair) -> Mat2 {
        self.inner().step_jacobian(z)
    }
    fn step_jet(&self, j: &JetPair) -> JetPair {
        self.inner().step_jet(j)
    }
    fn degree(&self) -> u64 {
        self.inner().degree()
    }
    fn jac_det(&self) -> Complex64 {
        self.inner().jac_det()
    }
    fn filtration_radius(&self) -> f64 {
        self.inner().filtration_radius()
    }
    fn in_escape_region(&self, z: ComplexPair, r: f64) -> bool {
        self.inner().in_escape_region(z, r)
    }
    fn log_lead(&self) -> f64 {
        self.inner().log_lead()
    }
    fn growth_defect(&self, norm: f64) -> f64 {
        self.inner().growth_defect(norm)
    }
}

/// A holomorphic curve `ζ ↦ ψ(ζ)` in C² together with the dynamics it is measured by.
pub trait ParamCurve: Send + Sync {
    fn eval(&self, zeta: Complex64) -> Result<ComplexPair>;
    /// Value and derivative.
    fn eval_d(&self, zeta: Complex64) -> Result<(ComplexPair, ComplexPair)>;
    fn side_map(&self) -> &SideMap;

    fn base(&self) -> ComplexPair {
        self.eval(Complex64::new(0.0, 0.0)).expect("base point is finite")
    }

    /// `ψ′(0)`.
    fn velocity(&self) -> ComplexPair {
        self.eval_d(Complex64::new(0.0, 0.0))
            .expect("base point is finite")
            .1
    }

    /// Taylor jet `ψ(0) + Σ_{k≤order} a_k ζ^k`.
    fn jet(&self, order: usize) -> Result<CurveJet>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesParametrization {
    pub side: Side,
    pub saddle: Saddle,
    pub map: SideMap,
    /// Expanding multiplier of the side map's `N`-th iterate.
    pub nu: Complex64,
    /// `a_1..a_T`; `a_0` is the saddle point.
    pub coeffs: Vec<ComplexPair>,
    /// Accumulated normalization scale; 1 before normalization.
    pub alpha: f64,
    pub r_valid: f64,
    pub series_tol: f64,
}

impl SeriesParametrization {
    pub fn period(&self) -> usize {
        self.saddle.period
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn point(&self) -> ComplexPair {
        self.saddle.point()
    }

    /// Truncated sum, regardless of `r_valid`.
    pub fn eval_direct(&self, zeta: Complex64) -> ComplexPair {
        let mut acc = ComplexPair::ZERO;
        for a in self.coeffs.iter().rev() {
            acc = (acc + *a) * zeta;
        }
        acc + self.point()
    }

    pub fn eval_direct_d(&self, zeta: Complex64) -> (ComplexPair, ComplexPair) {
        let mut v = ComplexPair::ZERO;
        let mut d = ComplexPair::ZERO;
        for (k, a) in self.coeffs.iter().enumerate().rev() {
            d = d * zeta + *a * ((k + 1) as f64);
            v = (v + *a) * zeta;
        }
        (v + self.point(), d)
    }

    /// Smallest `k ≥ 0` with `|ζ/ν^k| ≤ r_valid`.
    pub fn extension_depth(&self, zeta: Complex64) -> usize {
        let mut k = 0;
        let mut r = zeta.norm();
        while r > self.r_valid && k < 10_000 {
            r /= self.nu.norm();
            k += 1;
        }
        k
    }

    /// `g^{Nk}(ξ(ζ/ν^k))` for a prescribed `k`, where `g` is the side map.
    pub fn evaluate_route(&self, zeta: Complex64, k: usize) -> Result<ComplexPair> {
        let w = self.eval_direct(zeta / self.nu.powi(k as i32));
        crate::henon::iterate(&self.map, w, (self.period() * k) as i64)
    }

    /// Evaluation on all of C by the functional equation.
    pub fn evaluate(&self, zeta: Complex64) -> Result<ComplexPair> {
        self.evaluate_route(zeta, self.extension_depth(zeta))
    }

    pub fn evaluate_d(&self, zeta: Complex64) -> Result<(ComplexPair, ComplexPair)> {
        let k = self.extension_depth(zeta);
        let s = self.nu.powi(k as i32);
        let (w, dw) = self.eval_direct_d(zeta / s);
        let (z, d) = iterate_with_jacobian(&self.map, w, self.period() * k);
        if !(z.is_finite() && z.norm_max() <= crate::henon::OVERFLOW_RADIUS) {
            return Err(Error::Escaped { steps: (self.period() * k) as u64 });
        }
        Ok((z, d.apply(dw) * (Complex64::new(1.0, 0.0) / s)))
    }

    /// Taylor jet of `ξ` at `ζ₀` in the local variable `δ = ζ − ζ₀`, exact to `order`.
    pub fn jet_at(&self, zeta0: Complex64, order: usize) -> Result<JetPair> {
        let k = self.extension_depth(zeta0);
        let s = self.nu.powi(k as i32);
        let w = zeta0 / s;
        let p = self.point();
        let xs: Vec<Complex64> = std::iter::once(p.x)
            .chain(self.coeffs.iter().map(|a| a.x))
            .collect();
        let ys: Vec<Complex64> = std::iter::once(p.y)
            .chain(self.coeffs.iter().map(|a| a.y))
            .collect();
        let local = JetPair {
            x: Series {
                c: taylor_shift(&xs, w, order),
            },
            y: Series {
                c: taylor_shift(&ys, w, order),
            },
        }
        .rescale(Complex64::new(1.0, 0.0) / s);
        let out = iterate_jet(&self.map, &local, self.period() * k);
        if !out.base().is_finite() || out.base().norm_max() > crate::henon::OVERFLOW_RADIUS {
            return Err(Error::Escaped { steps: (self.period() * k) as u64 });
        }
        Ok(out)
    }

    /// `max ‖g^N(ξ(ζ)) − ξ(νζ)‖` over `samples` points of `|ζ| = radius`, with both sides
    /// summed directly from the truncated series.
    pub fn functional_residual(&self, radius: f64, samples: usize) -> f64 {
        (0..samples)
            .map(|i| {
                let zeta = Complex64::from_polar(radius, 2.0 * PI * i as f64 / samples as f64);
                let lhs = crate::henon::iterate(&self.map, self.eval_direct(zeta), self.period() as i64);
                let rhs = self.eval_direct(self.nu * zeta);
                lhs.map_or(f64::INFINITY, |l| l.dist_max(&rhs))
            })
            .fold(0.0, f64::max)
    }

    /// `‖ξ_k-route(ζ) − ξ_{k+1}-route(ζ)‖` with `k` the minimal extension depth.
    pub fn route_discrepancy(&self, zeta: Complex64) -> Result<f64> {
        let k = self.extension_depth(zeta);
        let a = self.evaluate_route(zeta, k)?;
        let b = self.evaluate_route(zeta, k + 1)?;
        Ok(a.dist_max(&b))
    }

    /// Coefficients after the substitution `ζ ↦ s·ζ`.
    fn rescaled(&self, s: f64) -> SeriesParametrization {
        let mut out = self.clone();
        let mut pw = 1.0;
        for a in out.coeffs.iter_mut() {
            pw *= s;
            *a = *a * pw;
        }
        out.alpha *= s;
        out.r_valid /= s;
        out
    }
}

impl ParamCurve for SeriesParametrization {
    fn eval(&self, zeta: Complex64) -> Result<ComplexPair> {
        self.evaluate(zeta)
    }

    fn eval_d(&self, zeta: Complex64) -> Result<(ComplexPair, ComplexPair)> {
        self.evaluate_d(zeta)
    }

    fn side_map(&self) -> &SideMap {
        &self.map
    }

    fn base(&self) -> ComplexPair {
        self.point()
    }

    fn velocity(&self) -> ComplexPair {
        self.coeffs[0]
    }

    fn jet(&self, order: usize) -> Result<CurveJet> {
        let mut coeffs: Vec<ComplexPair> = self.coeffs.iter().take(order).copied().collect();
        coeffs.resize(order, ComplexPair::ZERO);
        Ok(CurveJet::new(self.point(), coeffs))
    }
}

impl ParamCurve for CurveJet {
    fn eval(&self, zeta: Complex64) -> Result<ComplexPair> {
        Ok(CurveJet::eval(self, zeta))
    }

    fn eval_d(&self, zeta: Complex64) -> Result<(ComplexPair, ComplexPair)> {
        Ok((CurveJet::eval(self, zeta), self.derivative(zeta)))
    }

    fn side_map(&self) -> &SideMap {
        panic!("a bare polynomial curve carries no dynamics")
    }

    fn jet(&self, order: usize) -> Result<CurveJet> {
        let mut coeffs: Vec<ComplexPair> = self.coeffs.iter().take(order).copied().collect();
        coeffs.resize(order, ComplexPair::ZERO);
        Ok(CurveJet::new(self.base, coeffs))
    }
}

/// Unstable (or, with `Side::Stable`, stable) parametrization of `s` to order `order`.
pub fn linearize(
    f: &HenonMap,
    s: &Saddle,
    side: Side,
    order: usize,
) -> Result<SeriesParametrization> {
    linearize_with(f, s, side, order, DEFAULT_SERIES_TOL)
}

pub fn linearize_with(
    f: &HenonMap,
    s: &Saddle,
    side: Side,
    order: usize,
    series_tol: f64,
) -> Result<SeriesParametrization> {
    if order < 2 {
        return Err(Error::InvalidArgument(format!("series order must be ≥ 2, got {order}")));
    }
    let map = SideMap::new(f, side);
    let (nu, other, e) = match side {
        Side::Unstable => (s.nu_u, s.nu_s, s.e_u),
        Side::Stable => (1.0 / s.nu_s, 1.0 / s.nu_u, s.e_s),
    };
    let coeffs = series_coefficients(&map, s.point(), s.period, nu, other, e, order)?;
    let r_valid = validity_radius(s.point(), &coeffs, nu.norm(), series_tol);
    Ok(SeriesParametrization {
        side,
        saddle: s.clone(),
        map,
        nu,
        coeffs,
        alpha: 1.0,
        r_valid,
        series_tol,
    })
}

/// Solves the coefficient recurrence for any plane map `g` with `g^N(p) = p`.
pub fn series_coefficients<M: PlaneMap + ?Sized>(
    g: &M,
    p: ComplexPair,
    period: usize,
    nu: Complex64,
    other: Complex64,
    e: ComplexPair,
    order: usize,
) -> Result<Vec<ComplexPair>> {
    let (_, d) = iterate_with_jacobian(g, p, period);
    let mut coeffs = vec![e];
    let mut nu_k = nu;
    let mut inv_nu_k = 1.0 / nu;
    for k in 2..=order {
        nu_k *= nu;
        inv_nu_k /= nu;
        let gap = (nu_k - other).norm().min((nu_k - nu).norm());
        if gap < RESONANCE_GAP {
            return Err(Error::Resonance { order: k, gap });
        }
        let partial = JetPair::from_coeffs(p, &coeffs, k);
        let rhs = iterate_jet(g, &partial, period).coeff(k);
        // (ν^k I − D) a = rhs, divided through by ν^k to stay in range.
        let m = &d.m;
        let one = Complex64::new(1.0, 0.0);
        let a = Mat2::new(
            one - m[0][0] * inv_nu_k,
            -m[0][1] * inv_nu_k,
            -m[1][0] * inv_nu_k,
            one - m[1][1] * inv_nu_k,
        )
        .solve(rhs * inv_nu_k)
        .ok_or(Error::Resonance { order: k, gap })?;
        coeffs.push(a);
    }
    Ok(coeffs)
}

/// Largest `ρ` such that, at radius `|ν|·ρ`, the geometric tail estimate plus the
/// round-off of direct summation is at most `tol`. Both `ξ(ζ)` and `ξ(νζ)` are then
/// summable directly for `|ζ| ≤ ρ`.
pub fn validity_radius(base: ComplexPair, coeffs: &[ComplexPair], nu_abs: f64, tol: f64) -> f64 {
    let t = coeffs.len();
    let window = 6.min(t - 1).max(1);
    let mags: Vec<f64> = coeffs.iter().map(|a| a.norm()).collect();
    let mut q: f64 = 0.0;
    for k in t - window..t {
        if mags[k - 1] > 0.0 {
            q = q.max(mags[k] / mags[k - 1]);
        }
    }
    // Envelope |a_{k+1}| ≤ A q^{k+1} on the tail window.
    let amp = if q > 0.0 {
        (t - window..t)
            .map(|k| mags[k] / q.powi(k as i32 + 1))
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    let base_norm = base.norm();
    let error = |rho: f64| {
        let r = nu_abs * rho;
        let x = q * r;
        let tail = if x >= 0.5 {
            f64::INFINITY
        } else if q == 0.0 {
            0.0
        } else {
            amp * x.powi(t as i32 + 1) / (1.0 - x)
        };
        let sum: f64 = mags.iter().rev().fold(0.0, |acc, m| (acc + m) * r) + base_norm;
        tail + 4.0 * f64::EPSILON * sum
    };
    let mut lo = 1e-3;
    while error(lo) > tol && lo > 1e-300 {
        lo *= 1e-3;
    }
    let mut hi = lo;
    while error(hi) <= tol && hi < 1e300 {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = (lo * hi).sqrt();
        if error(mid) <= tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `max_{|ζ|=r} G(ψ(ζ))` with `G` the Green function of the curve's side map: 256 samples
/// refined by golden-section search around the best one.
pub fn m_psi(curve: &dyn ParamCurve, r: f64, cfg: &GreenConfig) -> f64 {
    m_psi_centered(curve, Complex64::new(0.0, 0.0), r, cfg)
}

/// `max_{|ζ−c|=r} G(ψ(ζ))`.
pub fn m_psi_centered(
    curve: &dyn ParamCurve,
    center: Complex64,
    r: f64,
    cfg: &GreenConfig,
) -> f64 {
    let g = curve.side_map();
    let value = |theta: f64| -> f64 {
        match curve.eval(center + Complex64::from_polar(r, theta)) {
            Ok(z) => g.green(z, cfg),
            Err(_) => f64::INFINITY,
        }
    };
    let h = 2.0 * PI / CIRCLE_SAMPLES as f64;
    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    for i in 0..CIRCLE_SAMPLES {
        let v = value(h * i as f64);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    if !best.is_finite() || best <= 0.0 {
        return best.max(0.0);
    }
    let (mut a, mut b) = (h * (best_i as f64 - 1.0), h * (best_i as f64 + 1.0));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (value(c), value(d));
    for _ in 0..40 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = value(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = value(d);
        }
    }
    best.max(fc).max(fd)
}

/// Finds `r > 0` with `m(r) = 1` for a nondecreasing `m`, by bisection in `log r`.
pub fn solve_unit_level(m: impl Fn(f64) -> f64, start: f64) -> Result<f64> {
    let mut lo = start;
    let mut hi = start;
    let mut tries = 0;
    while m(lo) >= 1.0 {
        lo *= 0.5;
        tries += 1;
        if tries > 200 {
            return Err(Error::Bracket("growth does not drop below 1 near the origin".into()));
        }
    }
    tries = 0;
    while m(hi) < 1.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(Error::Bracket(
                "growth never reaches 1; the Green budget may be too small".into(),
            ));
        }
    }
    for _ in 0..200 {
        if hi / lo - 1.0 <= 1e-14 {
            break;
        }
        let mid = (lo * hi).sqrt();
        if m(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Rescales `ξ` so that `max_{|ζ|≤1} G(ξ(ζ)) = 1`, with `α > 0` real.
pub fn normalize(xi: &SeriesParametrization, cfg: &GreenConfig) -> Result<SeriesParametrization> {
    let alpha = solve_unit_level(|r| m_psi(xi, r, cfg), 1.0)?;
    Ok(xi.rescaled(alpha))
}

/// `linearize` followed by `normalize`.
pub fn normalized_parametrization(
    f: &HenonMap,
    s: &Saddle,
    side: Side,
    order: usize,
    cfg: &GreenConfig,
) -> Result<SeriesParametrization> {
    normalize(&linearize(f, s, side, order)?, cfg)
}

/// `λ_x` from `Dg(x)·ψ′_x(0) = ψ′_{g(x)}(0)·λ_x`, `g` the side map of `psi_x`.
pub fn lambda_of(psi_x: &dyn ParamCurve, psi_gx: &dyn ParamCurve) -> Result<Complex64> {
    let g = psi_x.side_map();
    let x = psi_x.base();
    let gx = g.step(x);
    let scale = gx.norm_max().max(1.0);
    if gx.dist_max(&psi_gx.base()) > 1e-8 * scale {
        return Err(Error::Mismatch(format!(
            "second curve is based at {:?}, expected the image {:?}",
            psi_gx.base(),
            gx
        )));
    }
    let lhs = g.step_jacobian(x).apply(psi_x.velocity());
    let v = psi_gx.velocity();
    let (lx, ly) = (lhs.x / v.x, lhs.y / v.y);
    let lambda = if v.x.norm() >= v.y.norm() { lx } else { ly };
    let disagreement = (lhs - v * lambda).norm() / lhs.norm();
    if disagreement > 1e-6 {
        return Err(Error::Mismatch(format!(
            "component ratios {lx} and {ly} disagree (relative {disagreement:e})"
        )));
    }
    Ok(lambda)
}

/// Expanded metric on the tangent line `E^u_x`: `‖v‖# = |v|_e / |ψ′_x(0)|_e`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpMetric {
    pub at: ComplexPair,
    pub direction: ComplexPair,
    pub scale: f64,
}

impl SharpMetric {
    pub fn of(psi: &dyn ParamCurve) -> Self {
        let v = psi.velocity();
        Self {
            at: psi.base(),
            direction: v.gauge_fixed(),
            scale: 1.0 / v.norm(),
        }
    }
}

pub fn sharp_norm(m: &SharpMetric, v: ComplexPair) -> Result<f64> {
    let angle = v.line_angle(&m.direction);
    if angle > 1e-8 {
        return Err(Error::NotTangent { angle });
    }
    Ok(v.norm() * m.scale)
}
