//! Periodic points of a Hénon composition and their classification as saddles.
//!
//! Roots of `f^N(z) = z` are found by Newton's method on the equivalent split equation
//! `f^m(z) = f^{-(N-m)}(z)`, `m = ⌈N/2⌉`. Splitting halves the degree of each side, which
//! shrinks the basins' fractal boundaries and lets a modest seed lattice reach every
//! root. Each converged root is polished by plain Newton on `f^N − id` and its forward
//! orbit is added, so a single hit recovers the whole cycle.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::henon::{iterate_with_jacobian, HenonMap, PlaneMap};
use crate::linalg::{ComplexPair, Mat2};

/// Default sup-norm Newton tolerance; roots closer than `10·tol` are merged.
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_GRID: usize = 128;

/// Moduli within this distance of 1 are reported as indifferent.
const INDIFFERENT_GAP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    /// Minimal period.
    pub period: usize,
    /// `points[j] = f^j(points[0])`; starts at the lexicographically smallest point.
    pub points: Vec<ComplexPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicSearch {
    pub n: usize,
    /// Every distinct solution of `f^N(z) = z`, divisor periods included, sorted.
    pub solutions: Vec<ComplexPair>,
    /// Cycles of minimal period exactly `N`, excluding non-hyperbolic candidates.
    pub cycles: Vec<Cycle>,
    /// Roots at which `Df^N − I` is numerically singular.
    pub non_hyperbolic: Vec<ComplexPair>,
}

impl PeriodicSearch {
    pub fn solution_count(&self) -> usize {
        self.solutions.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Saddle {
    pub period: usize,
    /// The cycle, starting at the base point `p = cycle[0]`.
    pub cycle: Vec<ComplexPair>,
    pub nu_s: Complex64,
    pub nu_u: Complex64,
    /// Unit eigenvectors of `Df^N(p)`, gauge-fixed.
    pub e_s: ComplexPair,
    pub e_u: ComplexPair,
    /// `max_j ‖f^N(cycle[j]) − cycle[j]‖`.
    pub residual: f64,
}

impl Saddle {
    pub fn point(&self) -> ComplexPair {
        self.cycle[0]
    }

    /// The same cycle based at `cycle[j]`.
    pub fn rebased(&self, f: &HenonMap, j: usize) -> Saddle {
        let n = self.cycle.len();
        let points = (0..n).map(|i| self.cycle[(i + j) % n]).collect();
        match classify(
            f,
            &Cycle {
                period: self.period,
                points,
            },
        ) {
            Ok(s) => s,
            Err(ns) => unreachable!("rebasing cannot change multipliers: {ns:?}"),
        }
    }

    /// `Df^N` at the base point as the ordered product along the stored cycle.
    pub fn monodromy(&self, f: &HenonMap) -> Mat2 {
        cycle_monodromy(f, &self.cycle)
    }
}

/// A verified cycle that is not a saddle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonSaddle {
    pub period: usize,
    pub multipliers: [Complex64; 2],
    /// Some multiplier has modulus within `1e-6` of 1.
    pub indifferent: bool,
}

fn cycle_monodromy(f: &HenonMap, cycle: &[ComplexPair]) -> Mat2 {
    cycle
        .iter()
        .fold(Mat2::identity(), |d, p| f.step_jacobian(*p).matmul(&d))
}

/// Multipliers and eigenvectors of `Df^N` along `cycle`.
pub fn classify(f: &HenonMap, cycle: &Cycle) -> Result<Saddle, NonSaddle> {
    let n = cycle.points.len();
    let d = cycle_monodromy(f, &cycle.points);
    let eig = d.eigen();
    let nu_u = eig.values[1];
    // The determinant is known exactly; dividing avoids cancellation in the small root.
    let nu_s = f.jac_det().powi(n as i32) / nu_u;
    let (ms, mu) = (nu_s.norm(), nu_u.norm());
    let indifferent =
        (ms - 1.0).abs() < INDIFFERENT_GAP || (mu - 1.0).abs() < INDIFFERENT_GAP;
    if indifferent || !(ms < 1.0 && mu > 1.0) {
        return Err(NonSaddle {
            period: cycle.period,
            multipliers: [nu_s, nu_u],
            indifferent,
        });
    }
    let residual = cycle
        .points
        .iter()
        .map(|p| crate::henon::iterate(f, *p, n as i64).map_or(f64::INFINITY, |q| q.dist_max(p)))
        .fold(0.0, f64::max);
    Ok(Saddle {
        period: cycle.period,
        cycle: cycle.points.clone(),
        nu_s,
        nu_u,
        e_s: d.eigenvector(nu_s),
        e_u: d.eigenvector(nu_u),
        residual,
    })
}

/// All saddle points of minimal period `n`, one [`Saddle`] per cycle.
pub fn saddles_of_period(f: &HenonMap, n: usize, grid: usize, exec: Execution) -> Vec<Saddle> {
    find_periodic_with(f, n, grid, DEFAULT_TOL, exec)
        .cycles
        .iter()
        .filter_map(|c| classify(f, c).ok())
        .collect()
}

/// Saddle of minimal period `n` obtained by Newton from a single seed, based at the
/// converged point. `None` if Newton fails, the period is smaller, or it is no saddle.
pub fn saddle_from_seed(f: &HenonMap, seed: ComplexPair, n: usize) -> Option<Saddle> {
    let r = f.filtration_radius();
    let z = split_newton(f, &f.inverse(), seed, n, r)?;
    if minimal_period(f, z, n, DEFAULT_TOL) != n {
        return None;
    }
    let mut points = Vec::with_capacity(n);
    let mut w = z;
    for _ in 0..n {
        points.push(w);
        w = f.step(w);
    }
    classify(f, &Cycle { period: n, points }).ok()
}

pub fn find_periodic(f: &HenonMap, n: usize, grid: usize, tol: f64) -> PeriodicSearch {
    find_periodic_with(f, n, grid, tol, Execution::default())
}

pub fn find_periodic_with(
    f: &HenonMap,
    n: usize,
    grid: usize,
    tol: f64,
    exec: Execution,
) -> PeriodicSearch {
    assert!(n >= 1, "period must be positive");
    let r = f.filtration_radius();
    let grid = grid.max(1);
    let seeds: Vec<ComplexPair> = (0..grid * grid)
        .map(|idx| {
            let (i, j) = (idx / grid, idx % grid);
            let t = |k: usize| -r + 2.0 * r * (k as f64 + 0.5) / grid as f64;
            // A small imaginary offset keeps seeds off the real-analytic critical set.
            ComplexPair::new(Complex64::new(t(i), 1e-3), Complex64::new(t(j), -7e-4))
        })
        .collect();
    let inv = f.inverse();
    let hits = exec.map(&seeds, |s| split_newton(f, &inv, *s, n, r));

    let merge_tol = 10.0 * tol;
    let mut roots: Vec<ComplexPair> = Vec::new();
    let push = |roots: &mut Vec<ComplexPair>, p: ComplexPair| {
        if !roots.iter().any(|q| q.dist_max(&p) <= merge_tol) {
            roots.push(p);
        }
    };
    for p in hits.into_iter().flatten() {
        push(&mut roots, p);
    }
    // Orbit completion: every forward image of a root is a root.
    let mut k = 0;
    while k < roots.len() {
        let mut w = roots[k];
        for _ in 1..n {
            w = f.step(w);
            if let Some(p) = polish(f, w, n, r) {
                push(&mut roots, p);
                w = p;
            }
        }
        k += 1;
    }
    roots.sort_by(lex_cmp);

    let mut non_hyperbolic = Vec::new();
    let mut assigned = vec![false; roots.len()];
    let mut cycles = Vec::new();
    for i in 0..roots.len() {
        if assigned[i] {
            continue;
        }
        let p = roots[i];
        if is_degenerate(f, p, n) {
            non_hyperbolic.push(p);
            assigned[i] = true;
            continue;
        }
        let m = minimal_period(f, p, n, merge_tol);
        let mut points = vec![p];
        let mut w = p;
        assigned[i] = true;
        for _ in 1..m {
            w = f.step(w);
            // Snap to the stored root to keep cycle points bitwise-canonical.
            if let Some(j) = (0..roots.len()).find(|&j| roots[j].dist_max(&w) <= merge_tol) {
                assigned[j] = true;
                w = roots[j];
            }
            points.push(w);
        }
        if m == n {
            cycles.push(Cycle { period: m, points });
        }
    }
    PeriodicSearch {
        n,
        solutions: roots,
        cycles,
        non_hyperbolic,
    }
}

fn lex_cmp(a: &ComplexPair, b: &ComplexPair) -> std::cmp::Ordering {
    [a.x.re, a.x.im, a.y.re, a.y.im]
        .iter()
        .zip([b.x.re, b.x.im, b.y.re, b.y.im].iter())
        .map(|(u, v)| u.total_cmp(v))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

fn minimal_period(f: &HenonMap, p: ComplexPair, n: usize, tol: f64) -> usize {
    let scale = p.norm_max().max(1.0);
    let mut w = p;
    for m in 1..=n {
        w = f.step(w);
        if n.is_multiple_of(m) && w.dist_max(&p) <= tol * scale {
            return m;
        }
    }
    n
}

fn is_degenerate(f: &HenonMap, p: ComplexPair, n: usize) -> bool {
    let (_, d) = iterate_with_jacobian(f, p, n);
    let a = d.sub(&Mat2::identity());
    let s = a.norm_max().max(1.0);
    a.det().norm() < 1e-10 * s * s
}

/// Damped Newton on `f^m(z) − f^{-k}(z)`, then polish on `f^N − id`.
fn split_newton<M: PlaneMap>(
    f: &HenonMap,
    inv: &M,
    seed: ComplexPair,
    n: usize,
    r: f64,
) -> Option<ComplexPair> {
    let m = n.div_ceil(2);
    let k = n - m;
    let mut z = seed;
    for _ in 0..80 {
        let (a, da) = iterate_with_jacobian(f, z, m);
        let (b, db) = iterate_with_jacobian(inv, z, k);
        let step = da.sub(&db).solve(a - b)?;
        let len = step.norm_max();
        if !len.is_finite() {
            return None;
        }
        z -= if len > 1.0 { step * (1.0 / len) } else { step };
        if z.norm_max() > 1.5 * r {
            return None;
        }
        if len <= 1e-13 * z.norm_max().max(1.0) {
            break;
        }
    }
    polish(f, z, n, r)
}

/// Plain Newton on `f^N − id`; `None` unless it settles inside the filtration bidisk.
fn polish(f: &HenonMap, z0: ComplexPair, n: usize, r: f64) -> Option<ComplexPair> {
    let mut z = z0;
    let mut last = f64::INFINITY;
    for _ in 0..12 {
        let (w, d) = iterate_with_jacobian(f, z, n);
        let step = d.sub(&Mat2::identity()).solve(w - z)?;
        z -= step;
        let len = step.norm_max();
        if !len.is_finite() || z.norm_max() > 1.01 * r {
            return None;
        }
        if len <= 1e-15 * z.norm_max().max(1.0) || len >= last {
            break;
        }
        last = len;
    }
    let (w, _) = iterate_with_jacobian(f, z, n);
    let scale = z.norm_max().max(1.0);
    (w.dist_max(&z) <= 1e-8 * scale).then_some(z)
}
