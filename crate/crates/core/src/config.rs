//! Run configuration, read from TOML.
//!
//! Every field has a default, so an empty file is a valid configuration for the
//! horseshoe `a = 0.5, c = −6`. Parse and validation errors carry the line of the
//! offending key.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::family::{FamilyOptions, RecenterOptions, DEFAULT_DISK_RADIUS, DEFAULT_R0, DEFAULT_TAU_THRESHOLD};
use crate::green::GreenConfig;
use crate::henon::{Coefficient, FactorSpec, HenonMap, MapSpec};
use crate::intersect::{IntersectOptions, DEFAULT_ANGLE_TOL, DEFAULT_SEEDS};
use crate::saddles::DEFAULT_GRID;
use crate::uniformize::{DEFAULT_ORDER, DEFAULT_SERIES_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Seed for randomized perturbation directions.
    pub seed: u64,
    /// Output directory; the `--out` flag overrides it.
    pub out: PathBuf,
    pub map: MapSpec,
    pub budgets: Budgets,
    pub tolerances: Tolerances,
    pub radii: Radii,
    pub recenter: RecenterOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budgets {
    /// Green-function iteration budget.
    pub n_max: usize,
    /// Largest saddle period used by the families.
    pub period_max: usize,
    /// Series truncation order `T`.
    pub order: usize,
    /// Seeds per axis of the periodic-point lattice.
    pub grid: usize,
    /// Sample count for Green-function grids and recentered families.
    pub samples: usize,
    /// Newton seeds per axis in intersection scans.
    pub seeds: usize,
    /// Tangency order `k` of the manufactured jets in `tangency-report`.
    pub jet_order: usize,
    /// Pushforward steps of the jet experiment.
    pub jet_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub green_tol: f64,
    pub series_tol: f64,
    /// Allowed `|m_ψ(1) − 1|`.
    pub norm_tol: f64,
    pub angle_tol: f64,
    pub tau_threshold: f64,
    /// Relative capture radius for bounded orbits.
    pub capture_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Radii {
    /// Local disk radius `r`.
    pub r: f64,
    /// Upper bound `r₀` on disk radii.
    pub r0: f64,
    pub r_grid: Vec<f64>,
    /// Parameter radii of unstable and stable curves in intersection scans.
    pub intersect_u: f64,
    pub intersect_s: f64,
    /// Half-width of the real box sampled by the `green` subcommand.
    pub green_box: f64,
    /// Imaginary offset added to both coordinates of the `green` box.
    pub green_imag: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            map: MapSpec {
                factors: vec![FactorSpec {
                    p: vec![Coefficient::Real(-6.0), Coefficient::Real(0.0), Coefficient::Real(1.0)],
                    a: Coefficient::Real(0.5),
                }],
            },
            budgets: Budgets::default(),
            tolerances: Tolerances::default(),
            radii: Radii::default(),
            recenter: RecenterOptions::default(),
        }
    }
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            n_max: 400,
            period_max: 3,
            order: DEFAULT_ORDER,
            grid: DEFAULT_GRID,
            samples: 16,
            seeds: DEFAULT_SEEDS,
            jet_order: 3,
            jet_steps: 8,
        }
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        let g = GreenConfig::default();
        Self {
            green_tol: g.tol,
            series_tol: DEFAULT_SERIES_TOL,
            norm_tol: 1e-6,
            angle_tol: DEFAULT_ANGLE_TOL,
            tau_threshold: DEFAULT_TAU_THRESHOLD,
            capture_radius: g.capture_radius,
        }
    }
}

impl Default for Radii {
    fn default() -> Self {
        Self {
            r: DEFAULT_DISK_RADIUS,
            r0: DEFAULT_R0,
            r_grid: vec![0.25, 0.5, 1.0, 2.0, 3.0, 4.0],
            intersect_u: 1.0,
            intersect_s: 1.0,
            green_box: 4.0,
            green_imag: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line of the offending key, when known.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    /// Checks the invariants; `text` is used only to locate the offending key.
    pub fn validate(&self, text: &str) -> Result<(), ConfigError> {
        let fail = |key: &str, msg: String| ConfigError {
            line: key_line(text, key),
            message: format!("{key}: {msg}"),
        };
        self.map.build().map_err(|e| fail("factors", e.to_string()))?;
        let t = &self.tolerances;
        for (key, v) in [
            ("green_tol", t.green_tol),
            ("series_tol", t.series_tol),
            ("norm_tol", t.norm_tol),
            ("angle_tol", t.angle_tol),
            ("tau_threshold", t.tau_threshold),
            ("capture_radius", t.capture_radius),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(fail(key, format!("tolerance must be positive, got {v}")));
            }
        }
        let b = &self.budgets;
        for (key, v) in [
            ("n_max", b.n_max),
            ("period_max", b.period_max),
            ("grid", b.grid),
            ("samples", b.samples),
            ("seeds", b.seeds),
            ("jet_order", b.jet_order),
            ("jet_steps", b.jet_steps),
        ] {
            if v < 1 {
                return Err(fail(key, "budget must be at least 1".into()));
            }
        }
        if b.order < 2 {
            return Err(fail("order", format!("series order must be at least 2, got {}", b.order)));
        }
        let r = &self.radii;
        if r.r0.is_nan() || r.r0 <= 0.0 {
            return Err(fail("r0", format!("must be positive, got {}", r.r0)));
        }
        if !(r.r > 0.0 && r.r <= r.r0) {
            return Err(fail("r", format!("must lie in (0, r0 = {}], got {}", r.r0, r.r)));
        }
        if r.r_grid.is_empty() || r.r_grid.iter().any(|v| v.is_nan() || *v <= 0.0) {
            return Err(fail("r_grid", "needs at least one positive radius".into()));
        }
        for (key, v) in [
            ("intersect_u", r.intersect_u),
            ("intersect_s", r.intersect_s),
            ("green_box", r.green_box),
        ] {
            if v.is_nan() || v <= 0.0 {
                return Err(fail(key, format!("must be positive, got {v}")));
            }
        }
        let rc = &self.recenter;
        if !(rc.inner > 0.0 && rc.outer > rc.inner) || rc.x_period < 1 || rc.seeds < 1 {
            return Err(fail("recenter", "needs 0 < inner < outer, x_period ≥ 1, seeds ≥ 1".into()));
        }
        Ok(())
    }

    pub fn henon(&self) -> HenonMap {
        self.map.build().expect("validated")
    }

    pub fn green(&self) -> GreenConfig {
        GreenConfig {
            n_max: self.budgets.n_max,
            tol: self.tolerances.green_tol,
            capture_radius: self.tolerances.capture_radius,
            ..GreenConfig::default()
        }
    }

    pub fn family_options(&self, exec: Execution) -> FamilyOptions {
        FamilyOptions {
            order: self.budgets.order,
            grid: self.budgets.grid,
            series_tol: self.tolerances.series_tol,
            green: self.green(),
            exec,
        }
    }

    pub fn intersect_options(&self) -> IntersectOptions {
        IntersectOptions {
            seeds: self.budgets.seeds,
            angle_tol: self.tolerances.angle_tol,
            seed: self.seed,
            ..IntersectOptions::default()
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the first `key = …` assignment, if present.
fn key_line(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        l.trim_start()
            .strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_horseshoe() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.henon(), HenonMap::horseshoe());
    }

    #[test]
    fn full_round_trip() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn complex_coefficients_parse() {
        let text = "[map]\nfactors = [{ p = [[-1.0, 0.2], 0, 1], a = [0.3, 0.1] }]\n";
        let cfg = RunConfig::from_toml(text).unwrap();
        assert_eq!(cfg.henon().factors()[0].a(), num_complex::Complex64::new(0.3, 0.1));
    }

    #[test]
    fn syntax_error_reports_its_line() {
        let e = RunConfig::from_toml("seed = 1\n\n[budgets]\nn_max = = 3\n").unwrap_err();
        assert_eq!(e.line, Some(4));
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let e = RunConfig::from_toml("seed = 1\n[budgets]\ngird = 3\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.message.contains("gird"));
    }

    #[test]
    fn invalid_values_report_their_line() {
        let e = RunConfig::from_toml("[tolerances]\nangle_tol = 0.0\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = RunConfig::from_toml("[budgets]\n\nperiod_max = 0\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        let e = RunConfig::from_toml("[radii]\nr = 5.0\n").unwrap_err();
        assert_eq!(e.line, Some(2));
    }

    #[test]
    fn non_monic_map_is_rejected() {
        let text = "[map]\nfactors = [{ p = [-6, 0, 2], a = 0.5 }]\n";
        let e = RunConfig::from_toml(text).unwrap_err();
        assert_eq!(e.line, Some(2));
    }
}
