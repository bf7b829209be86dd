//! Escape-rate computation of the Green functions `G⁺` and `G⁻`.
//!
//! `G⁺(z) = lim deg^{-n} log(‖fⁿ(z)‖ + 1)`. An orbit is followed until it enters the
//! escape region of the filtration, then refined: first by direct iteration while the
//! coordinates are representable, then in log-coordinates, where one step acts on
//! `L = log‖w‖` by `L ↦ d·L + log_lead`. Past the switch radius the neglected correction
//! is below `1e-40` relative, so the refinement only tightens `err_bound`.
//!
//! Floating-point orbits of saddle cycles are repelled by round-off and would "escape"
//! after a few dozen steps. An orbit that returns within `capture_radius` of itself after
//! `M ≤ capture_max_period` steps, at a point where Newton's method confirms a genuine
//! period-`M` cycle, is treated as bounded. This fixes the resolution of the `K⁺` test at
//! `capture_radius`: membership is one-sided evidence, escape is a certificate.

use serde::{Deserialize, Serialize};

use crate::henon::{iterate_with_jacobian, HenonMap, PlaneMap};
use crate::linalg::{ComplexPair, Mat2};

/// Max-norm beyond which refinement continues in log-coordinates.
const LOG_SWITCH: f64 = 1e40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenConfig {
    /// Iteration budget before declaring non-escape.
    pub n_max: usize,
    /// Extra iterations after escape.
    pub refine: usize,
    /// Refinement continues past `refine` until `err_bound ≤ tol`.
    pub tol: f64,
    pub capture_radius: f64,
    pub capture_max_period: usize,
}

impl Default for GreenConfig {
    fn default() -> Self {
        Self {
            n_max: 400,
            refine: 25,
            tol: 1e-14,
            capture_radius: 1e-5,
            capture_max_period: 8,
        }
    }
}

impl GreenConfig {
    pub fn with_budget(tol: f64, n_max: usize) -> Self {
        Self {
            n_max,
            tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenValue {
    pub value: f64,
    /// Iterations performed, refinement included.
    pub n_used: usize,
    pub escaped: bool,
    pub err_bound: f64,
}

impl GreenValue {
    fn bounded(n_used: usize) -> Self {
        Self {
            value: 0.0,
            n_used,
            escaped: false,
            err_bound: 0.0,
        }
    }
}

/// Outcome of following a forward orbit under a budget.
#[derive(Debug, Clone, Copy, PartialEq)]
enum OrbitFate {
    /// Entered the escape region at iterate `n`, at point `w`.
    Escaped { n: usize, w: ComplexPair },
    /// Closed up onto a verified cycle at iterate `n`.
    Captured { n: usize },
    Survived,
}

fn follow<M: PlaneMap + ?Sized>(f: &M, z: ComplexPair, cfg: &GreenConfig) -> OrbitFate {
    let r = f.filtration_radius();
    let cap = cfg.capture_max_period;
    let mut history: Vec<ComplexPair> = Vec::with_capacity(cap + 1);
    let mut w = z;
    for n in 0..=cfg.n_max {
        if !w.is_finite() {
            // Cannot happen from inside the filtration; treat as escape at the last step.
            return OrbitFate::Escaped { n, w };
        }
        if f.in_escape_region(w, r) {
            return OrbitFate::Escaped { n, w };
        }
        if cap > 0 && cfg.capture_radius > 0.0 {
            let scale = w.norm_max().max(1.0);
            for m in 1..=history.len() {
                let prev = history[history.len() - m];
                if w.dist_max(&prev) <= cfg.capture_radius * scale
                    && verify_cycle(f, w, m, cfg.capture_radius * scale)
                {
                    return OrbitFate::Captured { n };
                }
            }
            if history.len() == cap {
                history.remove(0);
            }
            history.push(w);
        }
        if n == cfg.n_max {
            break;
        }
        w = f.step(w);
    }
    OrbitFate::Survived
}

/// Newton on `f^m − id` from `w`; true when it lands on a cycle point within `radius`.
fn verify_cycle<M: PlaneMap + ?Sized>(f: &M, w: ComplexPair, m: usize, radius: f64) -> bool {
    let mut p = w;
    let scale = w.norm_max().max(1.0);
    for _ in 0..16 {
        let (q, d) = iterate_with_jacobian(f, p, m);
        let Some(step) = d.sub(&Mat2::identity()).solve(q - p) else {
            return false;
        };
        p -= step;
        if p.dist_max(&w) > 2.0 * radius {
            return false;
        }
        if step.norm_max() <= 1e-15 * scale {
            break;
        }
    }
    let (q, _) = iterate_with_jacobian(f, p, m);
    q.dist_max(&p) <= 1e-11 * scale && p.dist_max(&w) <= 2.0 * radius
}

/// Green function of `f` (forward escape rate) for any [`PlaneMap`]; `G⁻` of a Hénon map
/// is this function applied to its inverse.
pub fn green<M: PlaneMap + ?Sized>(f: &M, z: ComplexPair, cfg: &GreenConfig) -> GreenValue {
    match follow(f, z, cfg) {
        OrbitFate::Captured { n } => GreenValue::bounded(n),
        OrbitFate::Survived => GreenValue::bounded(cfg.n_max),
        OrbitFate::Escaped { n, w } => refine(f, n, w, cfg),
    }
}

fn refine<M: PlaneMap + ?Sized>(
    f: &M,
    mut n: usize,
    mut w: ComplexPair,
    cfg: &GreenConfig,
) -> GreenValue {
    let d = f.degree() as f64;
    let ln_d = d.ln();
    // Remaining error after n steps: the geometric tail of growth defects plus the `+1`
    // inside the logarithm.
    let err_at = |n: usize, log_norm: f64| {
        let norm = log_norm.exp();
        let tail = if norm.is_finite() {
            f.growth_defect(norm) / (d - 1.0) + 1.0 / norm
        } else {
            0.0
        };
        if log_norm > 700.0 {
            // Past f64 range: the defect is ~ (k(R−1) + 1)/‖w‖ to leading order.
            let k = f.growth_defect(1e300) * 1e300 + 1.0;
            return (k.ln() - log_norm - n as f64 * ln_d).exp();
        }
        tail * (-(n as f64) * ln_d).exp()
    };

    let mut extra = 0usize;
    while extra < cfg.refine && w.norm_max() < LOG_SWITCH {
        let next = f.step(w);
        if !next.is_finite() {
            break;
        }
        w = next;
        n += 1;
        extra += 1;
    }
    let norm = w.norm_max();
    let mut value = (norm + 1.0).ln() * (-(n as f64) * ln_d).exp();
    let mut log_norm = norm.ln();
    let mut err = err_at(n, log_norm);

    // Log-coordinate refinement; capped so that d^{-n} never underflows.
    let lead = f.log_lead();
    let cap = cfg.refine + 400;
    while (extra < cfg.refine || err > cfg.tol) && extra < cap {
        log_norm = d * log_norm + lead;
        n += 1;
        extra += 1;
        value += lead * (-(n as f64) * ln_d).exp();
        let next_err = err_at(n, log_norm);
        // Stop once the bound stalls; a NaN bound also stops.
        if next_err.is_nan() || next_err >= err {
            break;
        }
        err = next_err;
    }
    GreenValue {
        value: value.max(0.0),
        n_used: n,
        escaped: true,
        err_bound: err,
    }
}

/// `G⁺(z)` for a Hénon composition.
pub fn green_plus(f: &HenonMap, z: ComplexPair, tol: f64, n_max: usize) -> GreenValue {
    green(f, z, &GreenConfig::with_budget(tol, n_max))
}

/// `G⁻(z)`: the escape rate of backward orbits.
pub fn green_minus(f: &HenonMap, z: ComplexPair, tol: f64, n_max: usize) -> GreenValue {
    green(&f.inverse(), z, &GreenConfig::with_budget(tol, n_max))
}

/// Budget-limited membership in `K⁺`. `false` is certain (the orbit entered the escape
/// region); `true` means no escape within `n_max` steps or capture by a verified cycle.
pub fn in_k_plus(f: &HenonMap, z: ComplexPair, n_max: usize) -> bool {
    in_k(f, z, &GreenConfig::with_budget(1.0, n_max))
}

pub fn in_k_minus(f: &HenonMap, z: ComplexPair, n_max: usize) -> bool {
    in_k(&f.inverse(), z, &GreenConfig::with_budget(1.0, n_max))
}

pub fn in_k<M: PlaneMap + ?Sized>(f: &M, z: ComplexPair, cfg: &GreenConfig) -> bool {
    !matches!(follow(f, z, cfg), OrbitFate::Escaped { .. })
}

/// Errors-bounded trace of the refinement, used to check geometric convergence.
pub fn refinement_trace<M: PlaneMap + ?Sized>(
    f: &M,
    z: ComplexPair,
    cfg: &GreenConfig,
    steps: usize,
) -> Vec<GreenValue> {
    (0..steps)
        .map(|k| {
            green(
                f,
                z,
                &GreenConfig {
                    refine: k,
                    tol: f64::INFINITY,
                    ..*cfg
                },
            )
        })
        .collect()
}
