//! Intersections of parametrized unstable and stable curves, their angles and
//! multiplicities, and transport of curve jets under the map.
//!
//! An intersection solves `H(ζ₁, ζ₂) = ψu(ζ₁) − ψs(ζ₂) = 0`, a holomorphic system
//! C² → C². Its multiplicity `μ` is counted twice, independently: by the number of
//! nearby solutions of `H = ε` for small random `ε`, and by the winding number of the
//! normal component of `H` once `ζ₂` has been eliminated along the tangent direction.
//! The tangency order is `k = μ − 1`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::family::CurveFamily;
use crate::henon::{iterate_jet, PlaneMap};
use crate::jet::CurveJet;
use crate::linalg::{ComplexPair, Mat2};
use crate::uniformize::ParamCurve;

pub const DEFAULT_ANGLE_TOL: f64 = 1e-4;
pub const DEFAULT_SEEDS: usize = 16;
/// Perturbation size relative to the local coordinate scale.
pub const DEFAULT_EPS: f64 = 1e-6;
const RESIDUAL_TOL: f64 = 1e-10;
const DEDUP: f64 = 1e-8;
const PERTURBATIONS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionRecord {
    pub zeta_u: Complex64,
    pub zeta_s: Complex64,
    pub point: ComplexPair,
    pub residual: f64,
    /// Angle between the tangent complex lines, in `[0, π/2]`.
    pub angle: f64,
    pub mu: u32,
    /// `mu − 1`.
    pub k: u32,
    pub mu_perturbation: u32,
    pub mu_argument: u32,
    /// Both counters returned the same value.
    pub counters_agree: bool,
    /// No other record within the counting ball.
    pub isolated: bool,
    /// Newton stalled on a singular Jacobian or the angle is below tolerance.
    pub tangency_suspect: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntersectOptions {
    /// Lattice size per side: a `seeds × seeds` grid clipped to each parameter disk.
    pub seeds: usize,
    pub angle_tol: f64,
    pub eps: f64,
    /// Radius of the counting ball in `ζ₁`.
    pub ball: f64,
    pub seed: u64,
}

impl Default for IntersectOptions {
    fn default() -> Self {
        Self {
            seeds: DEFAULT_SEEDS,
            angle_tol: DEFAULT_ANGLE_TOL,
            eps: DEFAULT_EPS,
            ball: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionScan {
    pub records: Vec<IntersectionRecord>,
    /// Seeds that stalled near a singular Jacobian without reaching the residual bound.
    pub unresolved_clusters: usize,
}

fn eval_pair(
    u: &dyn ParamCurve,
    s: &dyn ParamCurve,
    z1: Complex64,
    z2: Complex64,
) -> Option<(ComplexPair, ComplexPair, ComplexPair)> {
    let (pu, du) = u.eval_d(z1).ok()?;
    let (ps, ds) = s.eval_d(z2).ok()?;
    Some((pu - ps, du, ds))
}

enum NewtonOutcome {
    Root(Complex64, Complex64, f64),
    /// Ended near a singular Jacobian.
    Singular(Complex64, Complex64, f64),
    Failed,
}

/// Newton on `ψu(ζ₁) − ψs(ζ₂) = target` with steps capped at `max_step`.
#[allow(clippy::too_many_arguments)]
fn newton_pair(
    u: &dyn ParamCurve,
    s: &dyn ParamCurve,
    mut z1: Complex64,
    mut z2: Complex64,
    target: ComplexPair,
    max_step: f64,
    iters: usize,
    bound: impl Fn(Complex64, Complex64) -> bool,
) -> NewtonOutcome {
    let mut singular = false;
    for _ in 0..iters {
        let Some((h, du, ds)) = eval_pair(u, s, z1, z2) else {
            return NewtonOutcome::Failed;
        };
        let r = h - target;
        let scale = u.base().norm_max().max(1.0);
        if r.norm_max() <= 1e-14 * scale {
            break;
        }
        let jac = Mat2::new(du.x, -ds.x, du.y, -ds.y);
        let sin = (du.x * ds.y - du.y * ds.x).norm() / (du.norm() * ds.norm());
        singular = sin < 1e-7;
        let step = match jac.solve(r) {
            Some(st) => st,
            None => {
                // Least-squares step along the common tangent.
                singular = true;
                let w = du;
                let t = r.dot(&w) / w.dot(&w);
                ComplexPair::new(t, Complex64::new(0.0, 0.0))
            }
        };
        let len = step.norm_max();
        if !len.is_finite() {
            return NewtonOutcome::Failed;
        }
        let st = if len > max_step { step * (max_step / len) } else { step };
        z1 -= st.x;
        z2 -= st.y;
        if !bound(z1, z2) {
            return NewtonOutcome::Failed;
        }
        if len <= 1e-15 * (1.0 + z1.norm() + z2.norm()) {
            break;
        }
    }
    let Some((h, _, _)) = eval_pair(u, s, z1, z2) else {
        return NewtonOutcome::Failed;
    };
    let res = (h - target).norm_max();
    if singular {
        NewtonOutcome::Singular(z1, z2, res)
    } else {
        NewtonOutcome::Root(z1, z2, res)
    }
}

/// `seeds × seeds` square lattice on `[−r, r]²` clipped to the closed disk.
fn disk_lattice(r: f64, seeds: usize) -> Vec<Complex64> {
    let n = seeds.max(2);
    let mut pts = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let re = -r + 2.0 * r * i as f64 / (n - 1) as f64;
            let im = -r + 2.0 * r * j as f64 / (n - 1) as f64;
            let z = Complex64::new(re, im);
            if z.norm() <= r * (1.0 + 1e-12) {
                pts.push(z);
            }
        }
    }
    pts
}

/// All intersections of `ψu(|ζ₁| ≤ ru)` with `ψs(|ζ₂| ≤ rs)` reachable from the seed
/// lattices. Each lattice point of `ψu` is paired with the two nearest image points of
/// `ψs`; records are merged at `1e-8` and sorted by `(|ζ₁|, arg ζ₁)`.
pub fn find_intersections(
    u: &dyn ParamCurve,
    s: &dyn ParamCurve,
    ru: f64,
    rs: f64,
    opts: &IntersectOptions,
    exec: Execution,
) -> IntersectionScan {
    let lu = disk_lattice(ru, opts.seeds);
    let ls = disk_lattice(rs, opts.seeds);
    let img_s: Vec<(Complex64, ComplexPair)> = ls
        .iter()
        .filter_map(|z| s.eval(*z).ok().map(|p| (*z, p)))
        .collect();
    let pairs: Vec<(Complex64, Complex64)> = lu
        .iter()
        .filter_map(|z1| u.eval(*z1).ok().map(|p| (*z1, p)))
        .flat_map(|(z1, p)| {
            let mut best = [(f64::INFINITY, None), (f64::INFINITY, None)];
            for (z2, q) in &img_s {
                let d = p.dist(q);
                if d < best[1].0 {
                    best[1] = (d, Some(*z2));
                    if best[1].0 < best[0].0 {
                        best.swap(0, 1);
                    }
                }
            }
            best.into_iter().filter_map(move |(_, z2)| z2.map(|z2| (z1, z2)))
        })
        .collect();
    let step = 0.25 * ru.max(rs);
    let within = |z1: Complex64, z2: Complex64| {
        z1.norm() <= 1.05 * ru && z2.norm() <= 1.05 * rs
    };
    let near_tangent = |a: Complex64, b: Complex64| match (u.eval_d(a), s.eval_d(b)) {
        (Ok((_, du)), Ok((_, ds))) => du.line_angle(&ds) <= opts.angle_tol,
        _ => false,
    };
    let outcomes = exec.map(&pairs, |(z1, z2)| {
        let (a, b, r, singular) =
            match newton_pair(u, s, *z1, *z2, ComplexPair::ZERO, step, 60, within) {
                NewtonOutcome::Root(a, b, r) => (a, b, r, false),
                NewtonOutcome::Singular(a, b, r) => (a, b, r, true),
                NewtonOutcome::Failed => return None,
            };
        if !(singular || near_tangent(a, b)) {
            return Some((a, b, r, false));
        }
        // Tangency-cluster pipeline: convergence is only linear near a multiple root.
        match newton_pair(u, s, a, b, ComplexPair::ZERO, step, 400, within) {
            NewtonOutcome::Root(a, b, r) | NewtonOutcome::Singular(a, b, r) => {
                Some((a, b, r, true))
            }
            NewtonOutcome::Failed => Some((a, b, r, true)),
        }
    });

    let mut found: Vec<(Complex64, Complex64, bool)> = Vec::new();
    let mut unresolved = 0usize;
    for (a, b, r, singular) in outcomes.into_iter().flatten() {
        let scale = u.base().norm_max().max(1.0);
        if !(a.norm() <= ru * (1.0 + 1e-9) && b.norm() <= rs * (1.0 + 1e-9)) {
            continue;
        }
        if r > RESIDUAL_TOL * scale {
            if singular {
                unresolved += 1;
            }
            continue;
        }
        // Multiple roots are only located to about `residual^{1/μ}`.
        let tol = if singular { opts.ball } else { DEDUP };
        if let Some(e) = found
            .iter_mut()
            .find(|(x, y, _)| (x - a).norm().max((y - b).norm()) <= tol)
        {
            e.2 |= singular;
            continue;
        }
        found.push((a, b, singular));
    }
    found.sort_by(|p, q| {
        p.0.norm()
            .total_cmp(&q.0.norm())
            .then(p.0.arg().total_cmp(&q.0.arg()))
    });

    let keys: Vec<(Complex64, Complex64)> = found.iter().map(|(a, b, _)| (*a, *b)).collect();
    let records = exec.map_range(found.len(), |i| {
        let (a, b, singular) = found[i];
        let nearest = keys
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, (x, y))| (x - a).norm().max((y - b).norm()))
            .fold(f64::INFINITY, f64::min);
        let ball = opts.ball.min(0.3 * nearest);
        let mut rec = make_record(u, s, a, b, singular, opts);
        let m = multiplicity_in_ball(u, s, &rec, ball, opts, opts.seed.wrapping_add(i as u64));
        rec.mu = m.mu;
        rec.k = m.mu.saturating_sub(1);
        rec.mu_perturbation = m.perturbation;
        rec.mu_argument = m.argument;
        rec.counters_agree = m.agree;
        rec.isolated = nearest > 2.0 * ball;
        rec
    });
    IntersectionScan {
        records,
        unresolved_clusters: unresolved,
    }
}

/// Builds a record at a located root, with multiplicity left at 1 until counted.
pub fn make_record(
    u: &dyn ParamCurve,
    s: &dyn ParamCurve,
    zeta_u: Complex64,
    zeta_s: Complex64,
    singular: bool,
    opts: &IntersectOptions,
) -> IntersectionRecord {
    let (pu, du) = u.eval_d(zeta_u).expect("record lies in the evaluable region");
    let (ps, ds) = s.eval_d(zeta_s).expect("record lies in the evaluable region");
    let angle = du.line_angle(&ds);
    IntersectionRecord {
        zeta_u,
        zeta_s,
        point: pu,
        residual: (pu - ps).norm_max(),
        angle,
        mu: 1,
        k: 0,
        mu_perturbation: 1,
        mu_argument: 1,
        counters_agree: true,
        isolated: true,
        tangency_suspect: singular || angle <= opts.angle_tol,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Multiplicity {
    pub mu: u32,
    pub perturbation: u32,
    pub argument: u32,
    pub agree: bool,
}

/// Intersection multiplicity at `rec`, counted in a `ζ₁`-ball of radius `opts.ball`.
pub fn multiplicity(
    u: &dyn ParamCurve,
    s: &dyn ParamCurve,
    rec: &IntersectionRecord,
    opts: &IntersectOptions,
) -> Multiplicity {
    multiplicity_in_ball(u, s, rec, opts.ball, opts, opts.seed)
}

fn multiplicity_in_ball(
    u: &dyn ParamCurve,
    s: &dyn ParamCurve,
    rec: &IntersectionRecord,
    ball: f64,
    opts: &IntersectOptions,
    seed: u64,
) -> Multiplicity {
    let perturbation = perturbation_count(u, s, rec, ball, opts.eps, seed);
    let argument = argument_count(u, s, rec, ball);
    Multiplicity {
        mu: perturbation.max(argument).max(1),
        perturbation,
        argument,
        agree: perturbation == argument,
    }
}

/// Ratio `c` with `ψu′(ζ₁*) ≈ c·ψs′(ζ₂*)` along the tangent, used to pair seeds.
fn tangent_ratio(u: &dyn ParamCurve, s: &dyn ParamCurve, rec: &IntersectionRecord) -> Complex64 {
    let du = u.eval_d(rec.zeta_u).map(|v| v.1).unwrap_or(ComplexPair::ZERO);
    let ds = s.eval_d(rec.zeta_s).map(|v| v.1).unwrap_or(ComplexPair::ZERO);
    let denom = ds.dot(&ds);
    if denom.norm() == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        du.dot(&ds) / denom
    }
}

/// Modal number of solutions of `H = ε` in the ball over random `|ε| = eps·scale`.
fn perturbation_count(
    u: &dyn ParamCurve,
    s: &dyn ParamCurve,
    rec: &IntersectionRecord,
    ball: f64,
    eps: f64,
    seed: u64,
) -> u32 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = rec.point.norm_max().max(1.0);
    let c = tangent_ratio(u, s, rec);
    let c_abs = c.norm().max(1e-12);
    let inside = |z1: Complex64, z2: Complex64| {
        (z1 - rec.zeta_u).norm() <= ball
            && (z2 - rec.zeta_s).norm() <= 4.0 * ball * c_abs.max(1.0 / c_abs)
    };
    let mut seeds = vec![rec.zeta_u];
    for (ring, frac) in [0.12, 0.3, 0.55, 0.85].iter().enumerate() {
        for j in 0..12 {
            let th = 2.0 * PI * (j as f64 + 0.5 * ring as f64) / 12.0;
            seeds.push(rec.zeta_u + Complex64::from_polar(frac * ball, th));
        }
    }
    let mut counts = Vec::with_capacity(PERTURBATIONS);
    for _ in 0..PERTURBATIONS {
        let g: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let dir = ComplexPair::new(Complex64::new(g[0], g[1]), Complex64::new(g[2], g[3]));
        let target = dir * (eps * scale / dir.norm());
        let mut roots: Vec<(Complex64, Complex64)> = Vec::new();
        for z1 in &seeds {
            let z2 = rec.zeta_s + (z1 - rec.zeta_u) * c;
            if let NewtonOutcome::Root(a, b, r) =
                newton_pair(u, s, *z1, z2, target, 0.25 * ball, 80, inside)
            {
                if r <= 1e-12 * scale
                    && !roots
                        .iter()
                        .any(|(x, y)| (x - a).norm().max((y - b).norm()) <= 1e-9 * ball.max(1e-3))
                {
                    roots.push((a, b));
                }
            }
        }
        counts.push(roots.len() as u32);
    }
    modal(&counts)
}

fn modal(v: &[u32]) -> u32 {
    let mut best = (0usize, 0u32);
    let mut sorted = v.to_vec();
    sorted.sort_unstable();
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|x| **x == sorted[i]).count();
        // Ties go to the larger count.
        if j >= best.0 {
            best = (j, sorted[i]);
        }
        i += j;
    }
    best.1
}

/// Winding number of `h(ζ₁) = ℓ_n(ψu(ζ₁) − ψs(ζ₂(ζ₁)))` on `|ζ₁ − ζ₁*| = ball`, where
/// `ζ₂(ζ₁)` zeroes the tangential component `ℓ_t` and `ℓ_n` annihilates the tangent.
fn argument_count(
    u: &dyn ParamCurve,
    s: &dyn ParamCurve,
    rec: &IntersectionRecord,
    ball: f64,
) -> u32 {
    let Ok((_, w)) = s.eval_d(rec.zeta_s) else {
        return 0;
    };
    let lt = |v: ComplexPair| v.x * w.x.conj() + v.y * w.y.conj();
    let ln = |v: ComplexPair| v.x * w.y - v.y * w.x;
    let c = tangent_ratio(u, s, rec);
    let mut z2 = rec.zeta_s + Complex64::from_polar(ball, 0.0) * c;
    let sample = |theta: f64, z2: &mut Complex64| -> Option<Complex64> {
        let z1 = rec.zeta_u + Complex64::from_polar(ball, theta);
        let pu = u.eval(z1).ok()?;
        for _ in 0..60 {
            let (ps, ds) = s.eval_d(*z2).ok()?;
            let g = lt(pu - ps);
            let dg = -lt(ds);
            if dg.norm() == 0.0 {
                return None;
            }
            let step = g / dg;
            *z2 -= step;
            if step.norm() <= 1e-15 * (1.0 + z2.norm()) {
                break;
            }
        }
        let ps = s.eval(*z2).ok()?;
        Some(ln(pu - ps))
    };
    let n = 256;
    let Some(first) = sample(0.0, &mut z2) else {
        return 0;
    };
    let mut prev = first;
    let mut total = 0.0;
    let mut theta = 0.0;
    let h = 2.0 * PI / n as f64;
    while theta < 2.0 * PI - 1e-12 {
        let mut dt = h.min(2.0 * PI - theta);
        loop {
            let mut z2_try = z2;
            let Some(next) = sample(theta + dt, &mut z2_try) else {
                return 0;
            };
            let d = (next / prev).arg();
            if d.abs() <= PI / 4.0 || dt < 1e-9 {
                total += d;
                prev = next;
                z2 = z2_try;
                theta += dt;
                break;
            }
            dt *= 0.5;
        }
    }
    (total / (2.0 * PI)).round().max(0.0) as u32
}

/// Truncated composition of `g^n` with a curve jet: exact Taylor coefficients of
/// `g^n ∘ jet` up to `order`.
pub fn jet_of_pushforward(g: &dyn PlaneMap, jet: &CurveJet, n: usize, order: usize) -> CurveJet {
    CurveJet::from_jet(&iterate_jet(g, &jet.to_jet(order), n))
}

/// Divides coefficient `j` by `λ^j`: the jet of `ζ ↦ γ(ζ/λ)`.
pub fn reparametrize(jet: &CurveJet, lambda: Complex64) -> CurveJet {
    let mut s = Complex64::new(1.0, 0.0);
    let coeffs = jet
        .coeffs
        .iter()
        .map(|a| {
            s /= lambda;
            *a * s
        })
        .collect();
    CurveJet::new(jet.base, coeffs)
}

/// One row of a jet-transport experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub n: usize,
    /// `|ā_{j,n}|` for `j = 1..=k+1`.
    pub abar: Vec<f64>,
    /// `|ā_{j,n} − b_j c^j (μ_n/λ_n)^j| / |b_j c^j (μ_n/λ_n)^j|` for `j = 1..=k+1`.
    pub law_defect: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub k: usize,
    pub rows: Vec<DecayRow>,
    /// Least-squares slope of `log|ā_{j,n}|` in `n`, `j = 1..=k`.
    pub exponents: Vec<f64>,
    /// Number of rows used in each fit; deeper rows are dominated by round-off.
    pub fit_rows: Vec<usize>,
}

/// Pushes a curve tangent to order `k` to the stable curve `b` of a saddle cycle and
/// tracks the reparametrized coefficients `ā_{j,n} = [f^{Nn}∘A]_j / λ_n^j`.
///
/// `A(ζ) = b(cζ) + e·ζ^{k+1}`; along the cycle `λ_n = ν_u^n` and `μ_n = ν_s^n`, so the
/// jet law predicts `ā_{j,n} = b_j c^j (ν_s/ν_u)^{nj}` for `j ≤ k` only.
#[allow(clippy::too_many_arguments)]
pub fn tangency_decay_experiment(
    f: &dyn PlaneMap,
    period: usize,
    nu_u: Complex64,
    nu_s: Complex64,
    b: &CurveJet,
    c: Complex64,
    e: ComplexPair,
    k: usize,
    n_max: usize,
) -> DecayTable {
    let order = k + 1;
    let mut scaled = reparametrize(b, Complex64::new(1.0, 0.0) / c);
    scaled.coeffs.resize(order, ComplexPair::ZERO);
    let mut a = scaled.clone();
    a.coeffs[k] += e;
    let mut rows = Vec::with_capacity(n_max + 1);
    let ratio = nu_s / nu_u;
    let mut pushed = a.clone();
    for n in 0..=n_max {
        if n > 0 {
            pushed = jet_of_pushforward(f, &pushed, period, order);
        }
        let lam = nu_u.powi(n as i32);
        let abar = reparametrize(&pushed, lam);
        let mut mags = Vec::with_capacity(order);
        let mut defects = Vec::with_capacity(order);
        for j in 1..=order {
            let pred = scaled.coeffs[j - 1] * ratio.powi((n * j) as i32);
            let got = abar.coeffs[j - 1];
            mags.push(got.norm());
            defects.push((got - pred).norm() / pred.norm());
        }
        rows.push(DecayRow {
            n,
            abar: mags,
            law_defect: defects,
        });
    }
    // Relative round-off in ā_{j,n} grows like ε·(|ν_u|/|ν_s|^j)^n; fit only the rows
    // where it stays below 1e-7.
    let mut exponents = Vec::with_capacity(k);
    let mut fit_rows = Vec::with_capacity(k);
    for j in 1..=k {
        let growth = (nu_u.norm() / nu_s.norm().powi(j as i32)).ln();
        let cap = ((1e-7 / f64::EPSILON).ln() / growth).floor() as usize;
        let used = (cap + 1).clamp(2, rows.len());
        let pts: Vec<(f64, f64)> = rows[..used]
            .iter()
            .map(|r| (r.n as f64, r.abar[j - 1].ln()))
            .collect();
        exponents.push(slope(&pts));
        fit_rows.push(used);
    }
    DecayTable {
        k,
        rows,
        exponents,
        fit_rows,
    }
}

/// Least-squares slope.
pub fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransversalityReport {
    pub pairs_scanned: usize,
    pub records: usize,
    pub min_angle: Option<f64>,
    pub max_mu: u32,
    /// Counts of records by `mu`, index `mu − 1`.
    pub mu_histogram: Vec<usize>,
    /// Angle histogram over decades `[10^{-(i+1)}, 10^{-i})` of radians, `i = 0..8`.
    pub angle_histogram: Vec<usize>,
    pub counter_disagreements: usize,
    pub suspects: Vec<IntersectionRecord>,
    pub verdict: String,
}

/// Summarizes a set of intersection scans.
pub fn summarize_scans(
    scans: &[IntersectionScan],
    pairs_scanned: usize,
    angle_tol: f64,
) -> TransversalityReport {
    let all: Vec<&IntersectionRecord> = scans.iter().flat_map(|s| &s.records).collect();
    let min_angle = all.iter().map(|r| r.angle).reduce(f64::min);
    let max_mu = all.iter().map(|r| r.mu).max().unwrap_or(0);
    let mut mu_histogram = vec![0usize; max_mu.max(1) as usize];
    let mut angle_histogram = vec![0usize; 9];
    for r in &all {
        mu_histogram[(r.mu.max(1) - 1) as usize] += 1;
        let decade = (-(r.angle.max(1e-300)).log10()).floor().clamp(0.0, 8.0) as usize;
        angle_histogram[decade] += 1;
    }
    let suspects: Vec<IntersectionRecord> = all
        .iter()
        .filter(|r| r.angle <= angle_tol || r.mu > 1 || r.tangency_suspect)
        .map(|r| (*r).clone())
        .collect();
    let verdict = if all.is_empty() {
        "no intersections found".to_string()
    } else if suspects.is_empty() {
        format!("no tangency detected above angle_tol = {angle_tol:e}")
    } else {
        format!("{} tangency-suspect record(s)", suspects.len())
    };
    TransversalityReport {
        pairs_scanned,
        records: all.len(),
        min_angle,
        max_mu,
        mu_histogram,
        angle_histogram,
        counter_disagreements: all.iter().filter(|r| !r.counters_agree).count(),
        suspects,
        verdict,
    }
}

/// Intersections of one (unstable, stable) member pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScan {
    pub unstable_id: usize,
    pub stable_id: usize,
    pub scan: IntersectionScan,
}

/// Scans every (unstable, stable) member pair whose sampled disk images come close.
pub fn scan_families(
    stable: &CurveFamily,
    unstable: &CurveFamily,
    ru: f64,
    rs: f64,
    opts: &IntersectOptions,
    exec: Execution,
) -> Vec<PairScan> {
    let boxes = |fam: &CurveFamily, r: f64| -> Vec<Option<[(f64, f64); 4]>> {
        exec.map(&fam.members, |m| {
            let pts: Vec<ComplexPair> = disk_lattice(r, 9)
                .into_iter()
                .filter_map(|z| m.curve.eval(z).ok())
                .collect();
            bounding_box(&pts)
        })
    };
    let bu = boxes(unstable, ru);
    let bs = boxes(stable, rs);
    let mut pairs = Vec::new();
    for (i, a) in bu.iter().enumerate() {
        for (j, b) in bs.iter().enumerate() {
            if let (Some(a), Some(b)) = (a, b) {
                if a.iter().zip(b).all(|(p, q)| p.0 <= q.1 && q.0 <= p.1) {
                    pairs.push((i, j));
                }
            }
        }
    }
    exec.map(&pairs, |(i, j)| PairScan {
        unstable_id: unstable.members[*i].id,
        stable_id: stable.members[*j].id,
        scan: find_intersections(
            &unstable.members[*i].curve,
            &stable.members[*j].curve,
            ru,
            rs,
            opts,
            Execution::Sequential,
        ),
    })
}

/// [`scan_families`] followed by [`summarize_scans`].
pub fn transversality_report(
    stable: &CurveFamily,
    unstable: &CurveFamily,
    ru: f64,
    rs: f64,
    opts: &IntersectOptions,
    exec: Execution,
) -> TransversalityReport {
    let pairs = scan_families(stable, unstable, ru, rs, opts, exec);
    let scans: Vec<IntersectionScan> = pairs.into_iter().map(|p| p.scan).collect();
    let n = scans.len();
    summarize_scans(&scans, n, opts.angle_tol)
}

/// Coordinate ranges of a point set in R⁴, padded by 10% of the widest range.
fn bounding_box(pts: &[ComplexPair]) -> Option<[(f64, f64); 4]> {
    if pts.is_empty() {
        return None;
    }
    let coords = |p: &ComplexPair| [p.x.re, p.x.im, p.y.re, p.y.im];
    let mut bb = [(f64::INFINITY, f64::NEG_INFINITY); 4];
    for p in pts {
        for (k, v) in coords(p).into_iter().enumerate() {
            bb[k].0 = bb[k].0.min(v);
            bb[k].1 = bb[k].1.max(v);
        }
    }
    let pad = 0.1 * bb.iter().map(|(a, b)| b - a).fold(0.0, f64::max) + 1e-9;
    Some(bb.map(|(a, b)| (a - pad, b + pad)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoalescenceRow {
    /// `dist(x′, x″)`.
    pub separation: f64,
    /// Distance from `x′` to the nearest point of `W^s_{x′} ∩ W^u_{x″}`.
    pub offset: f64,
    pub angle: f64,
}

/// For each unstable curve based at `x″`, the intersection with the stable curve at
/// `x′` that lies nearest `x′`. Curves without an intersection in the radii are skipped.
pub fn coalescence_experiment(
    stable: &dyn ParamCurve,
    unstables: &[&dyn ParamCurve],
    rs: f64,
    ru: f64,
    opts: &IntersectOptions,
) -> Vec<CoalescenceRow> {
    let x = stable.base();
    unstables
        .iter()
        .filter_map(|u| {
            let scan = find_intersections(*u, stable, ru, rs, opts, Execution::Sequential);
            scan.records
                .iter()
                .min_by(|a, b| a.point.dist(&x).total_cmp(&b.point.dist(&x)))
                .map(|rec| CoalescenceRow {
                    separation: u.base().dist(&x),
                    offset: rec.point.dist(&x),
                    angle: rec.angle,
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::henon::HenonMap;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// `(ζ, ζ^{k+1})` and `(ζ, 0)`.
    fn tangent_pair(k: usize) -> (CurveJet, CurveJet) {
        let mut coeffs = vec![ComplexPair::ZERO; k + 1];
        coeffs[0] = ComplexPair::real(1.0, 0.0);
        coeffs[k] += ComplexPair::real(0.0, 1.0);
        (
            CurveJet::new(ComplexPair::ZERO, coeffs),
            CurveJet::new(ComplexPair::ZERO, vec![ComplexPair::real(1.0, 0.0)]),
        )
    }

    #[test]
    fn synthetic_tangency_multiplicity() {
        let opts = IntersectOptions::default();
        for k in 0..=4 {
            let (u, s) = tangent_pair(k);
            let rec = make_record(&u, &s, c(0.0, 0.0), c(0.0, 0.0), false, &opts);
            let m = multiplicity(&u, &s, &rec, &opts);
            assert_eq!(m.perturbation, k as u32 + 1, "k={k}");
            assert_eq!(m.argument, k as u32 + 1, "k={k}");
            assert!(m.agree);
        }
    }

    #[test]
    fn synthetic_scan_flags_tangency() {
        let (u, s) = tangent_pair(1);
        let opts = IntersectOptions::default();
        let scan = find_intersections(&u, &s, 0.5, 0.5, &opts, Execution::Sequential);
        assert_eq!(scan.records.len(), 1);
        let r = &scan.records[0];
        assert!(r.tangency_suspect);
        assert_eq!(r.mu, 2);
        assert_eq!(r.k, 1);
    }

    #[test]
    fn transversal_lines_are_simple() {
        let u = CurveJet::new(ComplexPair::ZERO, vec![ComplexPair::new(c(1.0, 0.0), c(0.5, 0.2))]);
        let s = CurveJet::new(
            ComplexPair::real(0.1, 0.0),
            vec![ComplexPair::new(c(0.3, 0.0), c(-1.0, 0.4))],
        );
        let opts = IntersectOptions::default();
        let scan = find_intersections(&u, &s, 1.0, 1.0, &opts, Execution::Sequential);
        assert_eq!(scan.records.len(), 1);
        let r = &scan.records[0];
        assert!(r.residual <= 1e-10);
        assert!(r.angle > 0.5);
        assert_eq!((r.mu, r.k), (1, 0));
        assert!(r.counters_agree);
    }

    #[test]
    fn pushforward_first_order_is_jacobian_action() {
        let f = HenonMap::horseshoe();
        let base = ComplexPair::new(c(0.3, 0.1), c(-1.2, 0.4));
        let v = ComplexPair::new(c(0.7, -0.2), c(0.1, 0.9));
        let jet = CurveJet::new(base, vec![v, ComplexPair::real(0.2, 0.1)]);
        let out = jet_of_pushforward(&f, &jet, 1, 2);
        assert!(out.coeffs[0].dist(&f.jacobian(base).apply(v)) <= 1e-12);
        assert!(out.base.dist(&f.step(base)) == 0.0);
    }

    #[test]
    fn pushforward_is_associative() {
        let f = HenonMap::horseshoe();
        let jet = CurveJet::new(
            ComplexPair::new(c(0.3, 0.1), c(-0.2, 0.4)),
            vec![ComplexPair::real(0.7, -0.2), ComplexPair::real(0.2, 0.1), ComplexPair::real(0.0, 0.3)],
        );
        let a = jet_of_pushforward(&f, &jet_of_pushforward(&f, &jet, 2, 3), 1, 3);
        let b = jet_of_pushforward(&f, &jet, 3, 3);
        let scale = b.coeffs.iter().map(|v| v.norm_max()).fold(b.base.norm_max(), f64::max);
        assert!(a.base.dist_max(&b.base) <= 1e-10 * scale);
        for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
            assert!(x.dist_max(y) <= 1e-10 * scale);
        }
    }

    #[test]
    fn modal_prefers_majority() {
        assert_eq!(modal(&[1, 1, 2, 1]), 1);
        assert_eq!(modal(&[3, 2, 3, 3, 2]), 3);
    }
}
