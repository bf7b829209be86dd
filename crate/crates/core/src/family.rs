//! Finite samples of invariant curve families, their growth functions and `κ`, local
//! disks, contraction diagnostics and vanishing-order strata.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::green::{in_k_plus, GreenConfig};
use crate::henon::{HenonMap, PlaneMap};
use crate::intersect::{find_intersections, slope, IntersectOptions};
use crate::jet::CurveJet;
use crate::linalg::ComplexPair;
use crate::saddles::{saddles_of_period, Saddle, DEFAULT_GRID};
use crate::uniformize::{
    lambda_of, linearize_with, m_psi, m_psi_centered, normalize, solve_unit_level, ParamCurve,
    SeriesParametrization, Side, SideMap, DEFAULT_ORDER, DEFAULT_SERIES_TOL,
};

pub const DEFAULT_TAU_THRESHOLD: f64 = 1e-5;
/// Upper bound for local-disk radii. Every disk of the period ≤ 4 horseshoe saddle
/// family, on both sides, is star-shaped up to twice this radius.
pub const DEFAULT_R0: f64 = 1.0;
pub const DEFAULT_DISK_RADIUS: f64 = 0.5;
pub const DISK_RAYS: usize = 256;
const RADIAL_NODES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Saddle,
    Recentered,
    Synthetic,
}

/// `ζ ↦ ξ(α·ζ + center)`.
#[derive(Debug, Clone)]
pub struct Recentered {
    pub parent: Arc<SeriesParametrization>,
    pub center: Complex64,
    pub alpha: f64,
}

impl ParamCurve for Recentered {
    fn eval(&self, zeta: Complex64) -> Result<ComplexPair> {
        self.parent.evaluate(self.center + zeta * self.alpha)
    }

    fn eval_d(&self, zeta: Complex64) -> Result<(ComplexPair, ComplexPair)> {
        let (p, d) = self.parent.evaluate_d(self.center + zeta * self.alpha)?;
        Ok((p, d * self.alpha))
    }

    fn side_map(&self) -> &SideMap {
        &self.parent.map
    }

    fn jet(&self, order: usize) -> Result<CurveJet> {
        let j = self.parent.jet_at(self.center, order)?;
        Ok(CurveJet::from_jet(&j.rescale(Complex64::new(self.alpha, 0.0))))
    }
}

#[derive(Debug, Clone)]
pub enum Curve {
    Series(SeriesParametrization),
    Recentered(Recentered),
    Polynomial(CurveJet),
}

impl Curve {
    fn inner(&self) -> &dyn ParamCurve {
        match self {
            Curve::Series(c) => c,
            Curve::Recentered(c) => c,
            Curve::Polynomial(c) => c,
        }
    }
}

impl ParamCurve for Curve {
    fn eval(&self, zeta: Complex64) -> Result<ComplexPair> {
        self.inner().eval(zeta)
    }
    fn eval_d(&self, zeta: Complex64) -> Result<(ComplexPair, ComplexPair)> {
        self.inner().eval_d(zeta)
    }
    fn side_map(&self) -> &SideMap {
        self.inner().side_map()
    }
    fn base(&self) -> ComplexPair {
        self.inner().base()
    }
    fn velocity(&self) -> ComplexPair {
        self.inner().velocity()
    }
    fn jet(&self, order: usize) -> Result<CurveJet> {
        self.inner().jet(order)
    }
}

#[derive(Debug, Clone)]
pub struct Member {
    pub id: usize,
    pub base: ComplexPair,
    pub curve: Curve,
    /// Period of the underlying saddle cycle, 0 for non-saddle members.
    pub period: usize,
    /// Index of the member based at the side map's image of `base`.
    pub successor: Option<usize>,
    /// `λ_x`: the side map sends this curve to the successor's curve scaled by `λ_x`.
    pub lambda: Option<Complex64>,
}

#[derive(Debug, Clone)]
pub struct CurveFamily {
    pub kind: FamilyKind,
    pub side: Side,
    pub members: Vec<Member>,
    pub source: String,
}

impl CurveFamily {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `max |m_ψ(1) − 1|` over members.
    pub fn normalization_defect(&self, cfg: &GreenConfig, exec: Execution) -> f64 {
        exec.map(&self.members, |m| (m_psi(&m.curve, 1.0, cfg) - 1.0).abs())
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// Members whose base lies within `radius` of `x`.
    pub fn near(&self, x: ComplexPair, radius: f64) -> Vec<&Member> {
        self.members
            .iter()
            .filter(|m| m.base.dist(&x) <= radius)
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FamilyOptions {
    pub order: usize,
    pub grid: usize,
    pub series_tol: f64,
    pub green: GreenConfig,
    pub exec: Execution,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        Self {
            order: DEFAULT_ORDER,
            grid: DEFAULT_GRID,
            series_tol: DEFAULT_SERIES_TOL,
            green: GreenConfig::default(),
            exec: Execution::default(),
        }
    }
}

/// Normalized parametrizations at every point of every saddle cycle of period
/// `1..=n_max`, on one side. Members of a cycle are stored consecutively.
pub fn build_saddle_family(
    f: &HenonMap,
    n_max: usize,
    side: Side,
    opts: &FamilyOptions,
) -> Result<CurveFamily> {
    let saddles: Vec<Saddle> = (1..=n_max)
        .flat_map(|n| saddles_of_period(f, n, opts.grid, opts.exec))
        .collect();
    build_from_saddles(f, &saddles, side, opts, format!("saddles of period <= {n_max}"))
}

/// Both sides of [`build_saddle_family`]: `(unstable, stable)`.
pub fn build_saddle_families(
    f: &HenonMap,
    n_max: usize,
    opts: &FamilyOptions,
) -> Result<(CurveFamily, CurveFamily)> {
    let saddles: Vec<Saddle> = (1..=n_max)
        .flat_map(|n| saddles_of_period(f, n, opts.grid, opts.exec))
        .collect();
    let src = format!("saddles of period <= {n_max}");
    Ok((
        build_from_saddles(f, &saddles, Side::Unstable, opts, src.clone())?,
        build_from_saddles(f, &saddles, Side::Stable, opts, src)?,
    ))
}

/// Family over the cycles of the given saddles.
pub fn build_from_saddles(
    f: &HenonMap,
    saddles: &[Saddle],
    side: Side,
    opts: &FamilyOptions,
    source: String,
) -> Result<CurveFamily> {
    let mut points: Vec<(Saddle, usize, usize)> = Vec::new();
    for s in saddles {
        let start = points.len();
        for j in 0..s.period {
            points.push((s.rebased(f, j), start, s.period));
        }
    }
    let curves = opts.exec.map(&points, |(s, _, _)| {
        normalize(&linearize_with(f, s, side, opts.order, opts.series_tol)?, &opts.green)
    });
    let mut members = Vec::with_capacity(points.len());
    for (i, ((s, start, n), curve)) in points.iter().zip(curves).enumerate() {
        let j = i - start;
        // The side map moves along the cycle forward for f and backward for f⁻¹.
        let next = match side {
            Side::Unstable => (j + 1) % n,
            Side::Stable => (j + n - 1) % n,
        };
        members.push(Member {
            id: i,
            base: s.point(),
            curve: Curve::Series(curve?),
            period: *n,
            successor: Some(start + next),
            lambda: None,
        });
    }
    let lambdas: Vec<Result<Complex64>> = opts.exec.map_range(members.len(), |i| {
        let m = &members[i];
        lambda_of(&m.curve, &members[m.successor.expect("set above")].curve)
    });
    for (m, l) in members.iter_mut().zip(lambdas) {
        m.lambda = Some(l?);
    }
    Ok(CurveFamily {
        kind: FamilyKind::Saddle,
        side,
        members,
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecenterOptions {
    /// Annulus `inner ≤ |ζ_y| ≤ outer` in the normalized parameter of `ψ_q`.
    pub inner: f64,
    pub outer: f64,
    /// Saddles of period up to this supply the stable curves that cut out `X`.
    pub x_period: usize,
    /// Parameter radius scanned on those stable curves.
    pub stable_radius: f64,
    pub seeds: usize,
}

impl Default for RecenterOptions {
    fn default() -> Self {
        Self {
            inner: 0.3,
            outer: 3.0,
            x_period: 4,
            stable_radius: 10.0,
            seeds: 16,
        }
    }
}

/// Recentered family `ψ_y(ζ) = ψ_q(α_y ζ + ζ_y)` over sample points `y ∈ W^u(q) ∩ K⁺`.
///
/// The sample set consists of intersections of `W^u(q)` with stable curves of low-period
/// saddles (including `q`), transported along `ζ ↦ ν_u^j ζ` into the annulus. Those lie
/// in `K⁺` by construction and are confirmed with `in_k_plus`. Fewer than `samples`
/// points is not an error; the family simply has fewer members.
pub fn build_recentered_family(
    f: &HenonMap,
    q: &Saddle,
    samples: usize,
    ropts: &RecenterOptions,
    opts: &FamilyOptions,
) -> Result<CurveFamily> {
    let parent = Arc::new(normalize(
        &linearize_with(f, q, Side::Unstable, opts.order, opts.series_tol)?,
        &opts.green,
    )?);
    let mut stable_saddles: Vec<Saddle> = Vec::new();
    for n in 1..=ropts.x_period {
        for s in saddles_of_period(f, n, opts.grid, opts.exec) {
            for j in 0..s.period {
                stable_saddles.push(s.rebased(f, j));
            }
        }
    }
    let stables: Vec<SeriesParametrization> = opts
        .exec
        .map(&stable_saddles, |s| {
            normalize(&linearize_with(f, s, Side::Stable, opts.order, opts.series_tol)?, &opts.green)
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let iopts = IntersectOptions {
        seeds: ropts.seeds,
        ..Default::default()
    };
    let mut zetas: Vec<Complex64> = Vec::new();
    for st in &stables {
        let scan = find_intersections(
            parent.as_ref(),
            st,
            ropts.outer,
            ropts.stable_radius,
            &iopts,
            Execution::Sequential,
        );
        zetas.extend(scan.records.iter().map(|r| r.zeta_u));
    }
    let nu = parent.nu;
    let mut candidates: Vec<Complex64> = Vec::new();
    for z in zetas {
        if z.norm() < 1e-12 {
            continue;
        }
        // Move along the orbit into the annulus.
        let mut w = z;
        while w.norm() > ropts.outer {
            w /= nu;
        }
        while w.norm() < ropts.inner {
            w *= nu;
        }
        while (w * nu).norm() <= ropts.outer {
            w *= nu;
        }
        let mut v = w;
        while v.norm() >= ropts.inner && v.norm() <= ropts.outer {
            if !candidates.iter().any(|c| (c - v).norm() <= 1e-8) {
                candidates.push(v);
            }
            v /= nu;
        }
    }
    candidates.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.arg().total_cmp(&b.arg())));
    let kept: Vec<Complex64> = candidates
        .into_iter()
        .filter(|z| {
            parent
                .evaluate(*z)
                .map(|y| in_k_plus(f, y, opts.green.n_max))
                .unwrap_or(false)
        })
        .take(samples)
        .collect();
    let alphas: Vec<Result<f64>> = opts.exec.map(&kept, |c| {
        solve_unit_level(|r| m_psi_centered(parent.as_ref(), *c, r, &opts.green), 1.0)
    });
    let mut members = Vec::with_capacity(kept.len());
    for (i, (c, a)) in kept.iter().zip(alphas).enumerate() {
        let alpha = a?;
        let curve = Recentered {
            parent: parent.clone(),
            center: *c,
            alpha,
        };
        let lambda = if q.period == 1 {
            // f∘ψ_y(ζ) = ψ_q(ν α ζ + ν ζ_y) = ψ_{f(y)}(ν α / α_{f(y)} · ζ).
            let a_next = solve_unit_level(
                |r| m_psi_centered(parent.as_ref(), nu * c, r, &opts.green),
                alpha * nu.norm(),
            )?;
            Some(nu * (alpha / a_next))
        } else {
            None
        };
        members.push(Member {
            id: i,
            base: curve.eval(Complex64::new(0.0, 0.0))?,
            curve: Curve::Recentered(curve),
            period: 0,
            successor: None,
            lambda,
        });
    }
    Ok(CurveFamily {
        kind: FamilyKind::Recentered,
        side: Side::Unstable,
        members,
        source: format!(
            "W^u of the period-{} saddle at ({:.6}, {:.6}); annulus [{}, {}]",
            q.period,
            q.point().x,
            q.point().y,
            ropts.inner,
            ropts.outer
        ),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthProfile {
    pub r_grid: Vec<f64>,
    /// `inf_ψ m_ψ(r)`.
    pub m_of_r: Vec<f64>,
    /// `sup_ψ m_ψ(r)`.
    pub big_m_of_r: Vec<f64>,
    /// Solution of `M(κ) = deg`.
    pub kappa: f64,
    /// `M(κ)`, equal to `deg` up to the bisection tolerance.
    pub m_at_kappa: f64,
}

/// Growth functions of a family on `r_grid` and `κ` by bisection on `M`.
pub fn growth_profile(
    fam: &CurveFamily,
    r_grid: &[f64],
    degree: f64,
    cfg: &GreenConfig,
    exec: Execution,
) -> Result<GrowthProfile> {
    if fam.is_empty() {
        return Err(Error::InvalidArgument("growth profile of an empty family".into()));
    }
    let big_m = |r: f64| -> f64 {
        exec.map(&fam.members, |m| m_psi(&m.curve, r, cfg))
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let per_radius: Vec<Vec<f64>> = r_grid
        .iter()
        .map(|r| exec.map(&fam.members, |m| m_psi(&m.curve, *r, cfg)))
        .collect();
    let m_of_r = per_radius
        .iter()
        .map(|v| v.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    let big_m_of_r = per_radius
        .iter()
        .map(|v| v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let kappa = solve_unit_level(|r| big_m(r) / degree, degree)?;
    Ok(GrowthProfile {
        r_grid: r_grid.to_vec(),
        m_of_r,
        big_m_of_r,
        kappa,
        m_at_kappa: big_m(kappa),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalDisk {
    pub owner: usize,
    pub r: f64,
    /// `∂D_ψ(r)` as ray endpoints in the parameter plane.
    pub boundary: Vec<Complex64>,
    /// `∫∫_D |ψ′|² dA`, the Euclidean area of `ψ(D)`.
    pub area: f64,
    pub rho_in: f64,
    pub rho_out: f64,
    /// Some ray re-enters the ball after its first exit within twice its exit radius.
    pub non_star_shaped: bool,
    /// `max |‖ψ(ζ) − x‖ − r|` over boundary samples.
    pub boundary_residual: f64,
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Component of `ψ⁻¹(B(x, r))` containing 0, traced along `DISK_RAYS` rays.
pub fn local_disk(psi: &dyn ParamCurve, owner: usize, r: f64) -> Result<LocalDisk> {
    let x = psi.base();
    let mut boundary = Vec::with_capacity(DISK_RAYS);
    let mut radii = Vec::with_capacity(DISK_RAYS);
    let mut non_star = false;
    for i in 0..DISK_RAYS {
        let dir = Complex64::from_polar(1.0, 2.0 * PI * i as f64 / DISK_RAYS as f64);
        let t = first_exit(psi, x, dir, r)?;
        for k in 1..=16 {
            let s = t * (1.0 + k as f64 / 16.0);
            if let Ok(p) = psi.eval(dir * s) {
                if p.dist(&x) < r * (1.0 - 1e-6) {
                    non_star = true;
                    break;
                }
            }
        }
        radii.push(t);
        boundary.push(dir * t);
    }
    let residual = boundary
        .iter()
        .map(|b| psi.eval(*b).map(|p| (p.dist(&x) - r).abs()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let nodes = gauss_legendre(RADIAL_NODES);
    let mut area = 0.0;
    for (i, t) in radii.iter().enumerate() {
        let dir = Complex64::from_polar(1.0, 2.0 * PI * i as f64 / DISK_RAYS as f64);
        let mut ray = 0.0;
        for (xn, w) in &nodes {
            let rho = 0.5 * t * (xn + 1.0);
            let (_, d) = psi.eval_d(dir * rho)?;
            ray += w * d.norm().powi(2) * rho;
        }
        area += 0.5 * t * ray;
    }
    area *= 2.0 * PI / DISK_RAYS as f64;
    Ok(LocalDisk {
        owner,
        r,
        rho_in: radii.iter().copied().fold(f64::INFINITY, f64::min),
        rho_out: radii.iter().copied().fold(0.0, f64::max),
        boundary,
        area,
        non_star_shaped: non_star,
        boundary_residual: residual,
    })
}

/// Smallest `t` with `‖ψ(t·dir) − x‖ = r`: adaptive march then bisection.
fn first_exit(psi: &dyn ParamCurve, x: ComplexPair, dir: Complex64, r: f64) -> Result<f64> {
    let mut t = 0.0;
    for _ in 0..100_000 {
        let (p, d) = psi.eval_d(dir * t)?;
        let gap = r - p.dist(&x);
        let step = (0.25 * gap / d.norm().max(1e-300)).max(1e-9 * (1.0 + t));
        let next = t + step;
        if psi.eval(dir * next)?.dist(&x) >= r {
            let (mut lo, mut hi) = (t, next);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if psi.eval(dir * mid)?.dist(&x) < r {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(0.5 * (lo + hi));
        }
        t = next;
    }
    Err(Error::InvalidArgument(format!(
        "ray in direction {dir} did not leave the ball of radius {r}"
    )))
}

/// Local disks of all members, in member order.
pub fn family_disks(
    fam: &CurveFamily,
    r: f64,
    r0: f64,
    exec: Execution,
) -> Result<Vec<LocalDisk>> {
    if !(r > 0.0 && r <= r0) {
        return Err(Error::InvalidArgument(format!("disk radius {r} outside (0, {r0}]")));
    }
    exec.map(&fam.members, |m| local_disk(&m.curve, m.id, r))
        .into_iter()
        .collect()
}

/// Points of `ψ(D)` on `rings` concentric fractions of each of `rays` rays.
pub fn disk_image_samples(
    psi: &dyn ParamCurve,
    disk: &LocalDisk,
    rays: usize,
    rings: usize,
) -> Result<Vec<ComplexPair>> {
    let step = (disk.boundary.len() / rays.max(1)).max(1);
    let mut out = vec![psi.base()];
    for b in disk.boundary.iter().step_by(step) {
        for k in 1..=rings {
            out.push(psi.eval(*b * (k as f64 / rings as f64))?);
        }
    }
    Ok(out)
}

/// Symmetric Hausdorff distance between finite point sets.
pub fn hausdorff_distance(a: &[ComplexPair], b: &[ComplexPair]) -> f64 {
    let one_sided = |p: &[ComplexPair], q: &[ComplexPair]| {
        p.iter()
            .map(|u| q.iter().map(|v| u.dist(v)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}

/// Minimal sampled distance between the disk images of distinct members whose base
/// points are within `pair_radius`. `None` if no pair qualifies.
pub fn disjointness_residual(
    fam: &CurveFamily,
    disks: &[LocalDisk],
    pair_radius: f64,
) -> Result<Option<f64>> {
    let samples: Vec<Vec<ComplexPair>> = fam
        .members
        .iter()
        .zip(disks)
        .map(|(m, d)| disk_image_samples(&m.curve, d, 32, 4))
        .collect::<Result<_>>()?;
    let mut best: Option<f64> = None;
    for i in 0..fam.len() {
        for j in i + 1..fam.len() {
            if fam.members[i].base.dist(&fam.members[j].base) > pair_radius {
                continue;
            }
            let d = samples[i]
                .iter()
                .flat_map(|p| samples[j].iter().map(move |q| p.dist(q)))
                .fold(f64::INFINITY, f64::min);
            best = Some(best.map_or(d, |b: f64| b.min(d)));
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub kappa: f64,
    pub rho1: f64,
    pub rho2: f64,
    /// Smallest `N` with `ρ₁κ^N > ρ₂`.
    pub n_threshold: usize,
    /// Boundary samples whose `f^{−N}` image left `B(f^{−N}(x), r)`.
    pub inclusion_violations: usize,
    pub inclusion_checked: usize,
    /// Member whose cycle has the slowest mean expansion `|ν_u|^{1/N}`.
    pub slowest_member: usize,
    /// Fitted `d/dn log dist(f^{−n}y′, f^{−n}y″)` at the slowest member.
    pub backward_exponent: f64,
    /// Largest fitted exponent over all members; the bound asks for `≤ −log κ`.
    pub worst_backward_exponent: f64,
    pub forward: Vec<ForwardExit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardExit {
    pub zeta: Complex64,
    pub predicted: usize,
    pub observed: usize,
}

/// Checks backward invariance and contraction of local unstable disks and the forward
/// exit time of nearby `J*` points.
///
/// `neighbors` are parameters `ζ′` (in the normalized coordinate of the slowest member)
/// of points of `W^u ∩ K⁺`; each is pushed forward until it leaves `B(x, r)`.
pub fn contraction_check(
    f: &HenonMap,
    fam: &CurveFamily,
    disks: &[LocalDisk],
    kappa: f64,
    neighbors: &[Complex64],
    exec: Execution,
) -> Result<ContractionReport> {
    if fam.side != Side::Unstable || fam.kind != FamilyKind::Saddle {
        return Err(Error::InvalidArgument(
            "contraction check needs an unstable saddle family".into(),
        ));
    }
    let r = disks.first().map(|d| d.r).unwrap_or(DEFAULT_DISK_RADIUS);
    let rho1 = disks.iter().map(|d| d.rho_in).fold(f64::INFINITY, f64::min);
    let rho2 = disks.iter().map(|d| d.rho_out).fold(0.0, f64::max);
    let mut n_threshold = 0;
    while rho1 * kappa.powi(n_threshold as i32) <= rho2 {
        n_threshold += 1;
    }
    let inv = f.inverse();
    let pre = predecessors(fam);
    let checks: Vec<(usize, usize)> = exec.map_range(fam.len(), |i| {
        let m = &fam.members[i];
        let mut target = i;
        for _ in 0..n_threshold {
            target = pre[target];
        }
        let center = fam.members[target].base;
        let mut bad = 0;
        let mut total = 0;
        for b in disks[i].boundary.iter().step_by(8) {
            // Just inside the boundary, so the sample belongs to W^u_{x,r}.
            if let Ok(p) = m.curve.eval(*b * (1.0 - 1e-9)) {
                let q = (0..n_threshold).fold(p, |z, _| inv.step(z));
                total += 1;
                if q.dist(&center) >= r {
                    bad += 1;
                }
            }
        }
        (bad, total)
    });
    let cycle_rate: Vec<f64> = fam
        .members
        .iter()
        .map(|m| {
            let mut idx = m.id;
            let mut sum = 0.0;
            for _ in 0..m.period {
                sum += fam.members[idx].lambda.map_or(f64::NAN, |l| l.norm().ln());
                idx = fam.members[idx].successor.expect("saddle member");
            }
            sum / m.period as f64
        })
        .collect();
    let slowest = (0..fam.len())
        .min_by(|a, b| cycle_rate[*a].total_cmp(&cycle_rate[*b]).then(a.cmp(b)))
        .expect("nonempty family");
    let exponents: Vec<f64> = exec.map_range(fam.len(), |i| {
        backward_pair_exponent(&inv, &fam.members[i].curve, &disks[i])
    });
    let forward = neighbors
        .iter()
        .map(|z| forward_exit(f, &fam.members[slowest], *z, r, rho2, kappa))
        .collect::<Result<_>>()?;
    Ok(ContractionReport {
        kappa,
        rho1,
        rho2,
        n_threshold,
        inclusion_violations: checks.iter().map(|c| c.0).sum(),
        inclusion_checked: checks.iter().map(|c| c.1).sum(),
        slowest_member: slowest,
        backward_exponent: exponents[slowest],
        worst_backward_exponent: exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        forward,
    })
}

fn predecessors(fam: &CurveFamily) -> Vec<usize> {
    let mut pre = vec![0; fam.len()];
    for m in &fam.members {
        pre[m.successor.expect("saddle member")] = m.id;
    }
    pre
}

/// Slope of `log dist(f^{−n}y′, f^{−n}y″)` for `n = 0..=8`, with `y′, y″` on opposite
/// sides of the base point at half the inscribed radius.
fn backward_pair_exponent(inv: &dyn PlaneMap, psi: &dyn ParamCurve, disk: &LocalDisk) -> f64 {
    let s = 0.5 * disk.rho_in;
    let (Ok(mut a), Ok(mut b)) = (
        psi.eval(Complex64::from_polar(s, 0.3)),
        psi.eval(Complex64::from_polar(s, 0.3 + PI)),
    ) else {
        return f64::NAN;
    };
    let mut pts = Vec::with_capacity(9);
    for n in 0..=8 {
        pts.push((n as f64, a.dist(&b).ln()));
        a = inv.step(a);
        b = inv.step(b);
    }
    slope(&pts)
}

fn forward_exit(
    f: &HenonMap,
    x: &Member,
    zeta: Complex64,
    r: f64,
    rho2: f64,
    kappa: f64,
) -> Result<ForwardExit> {
    let mut p = x.curve.eval(zeta)?;
    let mut c = x.base;
    let mut observed = 0;
    while p.dist(&c) <= r && observed < 200 {
        p = f.step(p);
        c = f.step(c);
        observed += 1;
    }
    let predicted = ((rho2 / zeta.norm()).ln() / kappa.ln()).ceil().max(0.0) as usize;
    Ok(ForwardExit {
        zeta,
        predicted,
        observed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderEstimate {
    pub at: ComplexPair,
    pub tau_s: usize,
    pub tau_u: usize,
    pub gamma_u: f64,
    /// `(side, member id, leading index, |a_lead|)` for each nearby member.
    pub evidence: Vec<(Side, usize, usize, f64)>,
    pub stratum: (usize, usize),
}

/// Order of vanishing of one curve at 0: first `j` with `|a_j| > threshold·max_k|a_k|`.
pub fn vanishing_order(jet: &CurveJet, threshold: f64) -> Option<(usize, f64)> {
    let top = jet.coeffs.iter().map(|a| a.norm()).fold(0.0, f64::max);
    jet.coeffs
        .iter()
        .position(|a| a.norm() > threshold * top)
        .map(|j| (j + 1, jet.coeffs[j].norm()))
}

const TAU_ORDER: usize = 8;

fn side_order(
    fam: &CurveFamily,
    x: ComplexPair,
    radius: f64,
    threshold: f64,
    evidence: &mut Vec<(Side, usize, usize, f64)>,
) -> Result<Option<(usize, f64)>> {
    let mut best: Option<(usize, f64)> = None;
    for m in fam.near(x, radius) {
        let jet = m.curve.jet(TAU_ORDER)?;
        let Some((j, a)) = vanishing_order(&jet, threshold) else {
            continue;
        };
        evidence.push((fam.side, m.id, j, a));
        best = Some(match best {
            None => (j, a),
            Some((bj, _)) if j > bj => (j, a),
            Some((bj, ba)) if j == bj => (bj, ba.min(a)),
            Some(b) => b,
        });
    }
    Ok(best)
}

/// `τ^s`, `τ^u` and `γ^u` at `x` from the members of each family within `radius`.
pub fn estimate_tau(
    stable: &CurveFamily,
    unstable: &CurveFamily,
    x: ComplexPair,
    radius: f64,
    threshold: f64,
) -> Result<OrderEstimate> {
    let mut evidence = Vec::new();
    let s = side_order(stable, x, radius, threshold, &mut evidence)?;
    let u = side_order(unstable, x, radius, threshold, &mut evidence)?;
    match (s, u) {
        (Some((ts, _)), Some((tu, gu))) => Ok(OrderEstimate {
            at: x,
            tau_s: ts,
            tau_u: tu,
            gamma_u: gu,
            evidence,
            stratum: (ts, tu),
        }),
        _ => Err(Error::InvalidArgument(format!(
            "no family members within {radius} of {x:?}"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrataTable {
    /// `(m_s, m_u, count)`, sorted lexicographically.
    pub rows: Vec<(usize, usize, usize)>,
    /// Strata not dominated componentwise by another observed stratum.
    pub maximal: Vec<(usize, usize)>,
    pub undefined: usize,
    pub fraction_11: f64,
}

pub fn stratify(
    stable: &CurveFamily,
    unstable: &CurveFamily,
    samples: &[ComplexPair],
    radius: f64,
    threshold: f64,
    exec: Execution,
) -> StrataTable {
    let est = exec.map(samples, |x| {
        estimate_tau(stable, unstable, *x, radius, threshold)
            .ok()
            .map(|e| e.stratum)
    });
    let mut rows: Vec<(usize, usize, usize)> = Vec::new();
    let mut undefined = 0;
    for e in est {
        match e {
            Some((s, u)) => match rows.iter_mut().find(|r| r.0 == s && r.1 == u) {
                Some(r) => r.2 += 1,
                None => rows.push((s, u, 1)),
            },
            None => undefined += 1,
        }
    }
    rows.sort();
    let maximal = rows
        .iter()
        .filter(|a| {
            !rows
                .iter()
                .any(|b| (b.0 >= a.0 && b.1 >= a.1) && (b.0 > a.0 || b.1 > a.1))
        })
        .map(|a| (a.0, a.1))
        .collect();
    let defined: usize = rows.iter().map(|r| r.2).sum();
    let ones = rows
        .iter()
        .find(|r| r.0 == 1 && r.1 == 1)
        .map_or(0, |r| r.2);
    StrataTable {
        rows,
        maximal,
        undefined,
        fraction_11: if defined == 0 {
            0.0
        } else {
            ones as f64 / defined as f64
        },
    }
}

/// Family of polynomial curves, used for manufactured vanishing orders.
pub fn synthetic_family(side: Side, curves: Vec<CurveJet>) -> CurveFamily {
    CurveFamily {
        kind: FamilyKind::Synthetic,
        side,
        members: curves
            .into_iter()
            .enumerate()
            .map(|(i, c)| Member {
                id: i,
                base: c.base,
                curve: Curve::Polynomial(c),
                period: 0,
                successor: None,
                lambda: None,
            })
            .collect(),
        source: "synthetic".into(),
    }
}
