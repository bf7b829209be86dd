//! Subcommand pipelines: each turns a [`RunConfig`] into named output files.
//!
//! Numerical failures never abort a pipeline. They are collected in
//! [`RunOutput::failures`] and, for `qh-report`, written into the document.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::Result;
use crate::exec::Execution;
use crate::family::{
    build_from_saddles, build_recentered_family, contraction_check, disjointness_residual,
    disk_image_samples, family_disks, growth_profile, stratify, ContractionReport, Curve,
    CurveFamily, GrowthProfile, LocalDisk, StrataTable,
};
use crate::green::green;
use crate::henon::{HenonMap, MapSpec, PlaneMap};
use crate::intersect::{
    scan_families, summarize_scans, tangency_decay_experiment, DecayTable, IntersectionScan,
    PairScan, TransversalityReport,
};
use crate::linalg::ComplexPair;
use crate::output::{json_document, CsvTable};
use crate::saddles::{find_periodic_with, saddles_of_period, Saddle};
use crate::uniformize::{ParamCurve, SeriesParametrization, Side, SideMap};

/// Tolerance on `min|λ| ≥ κ`, relative to `κ`.
pub const LAMBDA_SLACK: f64 = 1e-4;
/// Backward exponents must reach this fraction of `−log κ`.
pub const CONTRACTION_FRACTION: f64 = 0.9;
/// Neighbors fed to the forward-exit check.
const FORWARD_NEIGHBORS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Saddles,
    Green,
    Uniformize,
    FamilyReport,
    Growth,
    LocalDisks,
    Intersections,
    TangencyReport,
    Stratify,
    QhReport,
}

impl Subcommand {
    pub const ALL: [Subcommand; 10] = [
        Subcommand::Saddles,
        Subcommand::Green,
        Subcommand::Uniformize,
        Subcommand::FamilyReport,
        Subcommand::Growth,
        Subcommand::LocalDisks,
        Subcommand::Intersections,
        Subcommand::TangencyReport,
        Subcommand::Stratify,
        Subcommand::QhReport,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Saddles => "saddles",
            Subcommand::Green => "green",
            Subcommand::Uniformize => "uniformize",
            Subcommand::FamilyReport => "family-report",
            Subcommand::Growth => "growth",
            Subcommand::LocalDisks => "local-disks",
            Subcommand::Intersections => "intersections",
            Subcommand::TangencyReport => "tangency-report",
            Subcommand::Stratify => "stratify",
            Subcommand::QhReport => "qh-report",
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subcommand {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown subcommand {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    /// File name relative to the output directory.
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    pub failures: Vec<String>,
}

impl RunOutput {
    fn file(&mut self, name: &str, contents: String) {
        self.artifacts.push(Artifact {
            name: name.into(),
            contents,
        });
    }

    fn fail(&mut self, what: &str, e: impl fmt::Display) {
        self.failures.push(format!("{what}: {e}"));
    }
}

pub fn run(cmd: Subcommand, cfg: &RunConfig, exec: Execution) -> RunOutput {
    let lab = Lab::new(cfg, exec);
    let mut out = RunOutput::default();
    match cmd {
        Subcommand::Saddles => lab.saddles_csv(&mut out),
        Subcommand::Green => lab.green_csv(&mut out),
        Subcommand::Uniformize => lab.uniformize_json(&mut out),
        Subcommand::FamilyReport => lab.family_report(&mut out),
        Subcommand::Growth => lab.growth_csv(&mut out),
        Subcommand::LocalDisks => lab.local_disks(&mut out),
        Subcommand::Intersections => lab.intersections_csv(&mut out),
        Subcommand::TangencyReport => lab.tangency_report(&mut out),
        Subcommand::Stratify => lab.strata_csv(&mut out),
        Subcommand::QhReport => {
            let report = lab.qh_report();
            out.failures.clone_from(&report.failures);
            out.file("qh_report.json", json_document("qh-report", &report));
        }
    }
    out
}

/// Map, configuration and execution mode shared by the pipelines.
pub struct Lab<'a> {
    pub cfg: &'a RunConfig,
    pub f: HenonMap,
    pub exec: Execution,
}

impl<'a> Lab<'a> {
    pub fn new(cfg: &'a RunConfig, exec: Execution) -> Self {
        Self {
            cfg,
            f: cfg.henon(),
            exec,
        }
    }

    /// Saddles of period `1..=period_max`, grouped by period.
    pub fn saddles(&self) -> Vec<Saddle> {
        (1..=self.cfg.budgets.period_max)
            .flat_map(|n| saddles_of_period(&self.f, n, self.cfg.budgets.grid, self.exec))
            .collect()
    }

    /// `(unstable, stable)` saddle families.
    pub fn families(&self, saddles: &[Saddle]) -> Result<(CurveFamily, CurveFamily)> {
        let opts = self.cfg.family_options(self.exec);
        let src = format!("saddles of period <= {}", self.cfg.budgets.period_max);
        Ok((
            build_from_saddles(&self.f, saddles, Side::Unstable, &opts, src.clone())?,
            build_from_saddles(&self.f, saddles, Side::Stable, &opts, src)?,
        ))
    }

    fn degree(&self) -> f64 {
        self.f.degree() as f64
    }

    fn saddles_csv(&self, out: &mut RunOutput) {
        let mut t = CsvTable::new(
            "saddles",
            &[
                "period", "cycle", "index", "re_x", "im_x", "re_y", "im_y", "re_nu_s", "im_nu_s",
                "re_nu_u", "im_nu_u", "residual",
            ],
        );
        let saddles = self.saddles();
        let mut cycle_id = 0usize;
        let mut last_period = 0;
        for s in &saddles {
            if s.period != last_period {
                cycle_id = 0;
                last_period = s.period;
            }
            for (j, p) in s.cycle.iter().enumerate() {
                t.push(vec![
                    s.period.into(),
                    cycle_id.into(),
                    j.into(),
                    p.x.re.into(),
                    p.x.im.into(),
                    p.y.re.into(),
                    p.y.im.into(),
                    s.nu_s.re.into(),
                    s.nu_s.im.into(),
                    s.nu_u.re.into(),
                    s.nu_u.im.into(),
                    s.residual.into(),
                ]);
            }
            cycle_id += 1;
        }
        out.file("saddles.csv", t.render());
    }

    /// Lattice of `samples²` points on the real box `[−B, B]²`, shifted by `i·green_imag`.
    pub fn green_points(&self) -> Vec<ComplexPair> {
        let n = self.cfg.budgets.samples;
        let b = self.cfg.radii.green_box;
        let im = self.cfg.radii.green_imag;
        let coord = |k: usize| {
            if n == 1 {
                0.0
            } else {
                -b + 2.0 * b * k as f64 / (n - 1) as f64
            }
        };
        (0..n * n)
            .map(|k| {
                ComplexPair::new(
                    Complex64::new(coord(k % n), im),
                    Complex64::new(coord(k / n), im),
                )
            })
            .collect()
    }

    fn green_csv(&self, out: &mut RunOutput) {
        let cfg = self.cfg.green();
        let inv = self.f.inverse();
        let pts = self.green_points();
        let vals = self.exec.map(&pts, |z| (green(&self.f, *z, &cfg), green(&inv, *z, &cfg)));
        let mut t = CsvTable::new(
            "green",
            &["re_x", "im_x", "re_y", "im_y", "gplus", "gminus", "escaped_fwd", "escaped_bwd"],
        );
        for (z, (gp, gm)) in pts.iter().zip(vals) {
            t.push(vec![
                z.x.re.into(),
                z.x.im.into(),
                z.y.re.into(),
                z.y.im.into(),
                gp.value.into(),
                gm.value.into(),
                gp.escaped.into(),
                gm.escaped.into(),
            ]);
        }
        out.file("green.csv", t.render());
    }

    fn uniformize_json(&self, out: &mut RunOutput) {
        #[derive(Serialize)]
        struct Entry {
            period: usize,
            base: ComplexPair,
            nu_u: Complex64,
            alpha: f64,
            r_valid: f64,
            coeffs: Vec<[f64; 4]>,
            residual: f64,
        }
        #[derive(Serialize)]
        struct Doc {
            order: usize,
            saddles: Vec<Entry>,
        }
        let saddles = self.saddles();
        let opts = self.cfg.family_options(self.exec);
        let fam = match build_from_saddles(&self.f, &saddles, Side::Unstable, &opts, String::new())
        {
            Ok(f) => f,
            Err(e) => {
                out.fail("uniformize", e);
                return;
            }
        };
        let entries = fam
            .members
            .iter()
            .filter_map(|m| series_of(m))
            .filter(|sp| sp.saddle.cycle[0] == self.canonical_base(&sp.saddle))
            .map(|sp| Entry {
                period: sp.period(),
                base: sp.point(),
                nu_u: sp.nu,
                alpha: sp.alpha,
                r_valid: sp.r_valid,
                coeffs: sp.coeffs.iter().map(|a| [a.x.re, a.x.im, a.y.re, a.y.im]).collect(),
                residual: sp.functional_residual(sp.r_valid.min(self.cfg.radii.r0), 64),
            })
            .collect();
        let doc = Doc {
            order: self.cfg.budgets.order,
            saddles: entries,
        };
        out.file("uniformize.json", json_document("uniformize", &doc));
    }

    /// Base point that the periodic-point search reports for the cycle of `s`.
    fn canonical_base(&self, s: &Saddle) -> ComplexPair {
        s.cycle
            .iter()
            .copied()
            .min_by(|a, b| {
                (a.x.re, a.x.im, a.y.re, a.y.im)
                    .partial_cmp(&(b.x.re, b.x.im, b.y.re, b.y.im))
                    .expect("finite cycle points")
            })
            .expect("nonempty cycle")
    }

    fn growth_table(&self, g: &GrowthProfile) -> String {
        let mut t = CsvTable::new("growth", &["r", "m", "M"]);
        for ((r, m), big) in g.r_grid.iter().zip(&g.m_of_r).zip(&g.big_m_of_r) {
            t.push(vec![(*r).into(), (*m).into(), (*big).into()]);
        }
        let body = t.render();
        // The κ marker sits on a comment line right after the schema line.
        let (schema, rest) = body.split_once('\n').expect("schema line");
        format!("{schema}\n#kappa={}\n{rest}", crate::output::fmt_f64(g.kappa))
    }

    fn growth_csv(&self, out: &mut RunOutput) {
        let saddles = self.saddles();
        let (u, s) = match self.families(&saddles) {
            Ok(v) => v,
            Err(e) => return out.fail("families", e),
        };
        for (fam, name) in [(&u, "growth.csv"), (&s, "growth_stable.csv")] {
            match self.growth(fam) {
                Ok(g) => out.file(name, self.growth_table(&g)),
                Err(e) => out.fail(name, e),
            }
        }
    }

    fn growth(&self, fam: &CurveFamily) -> Result<GrowthProfile> {
        growth_profile(fam, &self.cfg.radii.r_grid, self.degree(), &self.cfg.green(), self.exec)
    }

    fn disks_table(&self, disks: &[LocalDisk]) -> String {
        let mut t = CsvTable::new("disks", &["member", "area", "rho_in", "rho_out"]);
        for d in disks {
            t.push(vec![d.owner.into(), d.area.into(), d.rho_in.into(), d.rho_out.into()]);
        }
        t.render()
    }

    fn local_disks(&self, out: &mut RunOutput) {
        let saddles = self.saddles();
        let opts = self.cfg.family_options(self.exec);
        let fam = match build_from_saddles(&self.f, &saddles, Side::Unstable, &opts, String::new())
        {
            Ok(f) => f,
            Err(e) => return out.fail("unstable family", e),
        };
        let disks = match family_disks(&fam, self.cfg.radii.r, self.cfg.radii.r0, self.exec) {
            Ok(d) => d,
            Err(e) => return out.fail("local disks", e),
        };
        out.file("disks.csv", self.disks_table(&disks));
        let cfg = self.cfg.green();
        let inv = self.f.inverse();
        let mut t = CsvTable::new(
            "disk-samples",
            &["member", "re_x", "im_x", "re_y", "im_y", "gplus", "gminus"],
        );
        let pts: Vec<(usize, ComplexPair)> = fam
            .members
            .iter()
            .zip(&disks)
            .filter_map(|(m, d)| match disk_image_samples(&m.curve, d, 32, 4) {
                Ok(p) => Some(p.into_iter().map(|z| (m.id, z)).collect::<Vec<_>>()),
                Err(_) => None,
            })
            .flatten()
            .collect();
        let vals = self.exec.map(&pts, |(_, z)| {
            (green(&self.f, *z, &cfg).value, green(&inv, *z, &cfg).value)
        });
        for ((id, z), (gp, gm)) in pts.iter().zip(vals) {
            t.push(vec![
                (*id).into(),
                z.x.re.into(),
                z.x.im.into(),
                z.y.re.into(),
                z.y.im.into(),
                gp.into(),
                gm.into(),
            ]);
        }
        out.file("disk_samples.csv", t.render());
    }

    pub fn pair_scans(&self, u: &CurveFamily, s: &CurveFamily) -> Vec<PairScan> {
        scan_families(
            s,
            u,
            self.cfg.radii.intersect_u,
            self.cfg.radii.intersect_s,
            &self.cfg.intersect_options(),
            self.exec,
        )
    }

    fn intersections_csv(&self, out: &mut RunOutput) {
        let saddles = self.saddles();
        let (u, s) = match self.families(&saddles) {
            Ok(v) => v,
            Err(e) => return out.fail("families", e),
        };
        let mut t = CsvTable::new(
            "intersections",
            &[
                "unstable_id", "stable_id", "re_zeta_u", "im_zeta_u", "re_zeta_s", "im_zeta_s",
                "re_x", "im_x", "re_y", "im_y", "residual", "angle", "mu", "k",
            ],
        );
        for p in self.pair_scans(&u, &s) {
            for r in &p.scan.records {
                t.push(vec![
                    p.unstable_id.into(),
                    p.stable_id.into(),
                    r.zeta_u.re.into(),
                    r.zeta_u.im.into(),
                    r.zeta_s.re.into(),
                    r.zeta_s.im.into(),
                    r.point.x.re.into(),
                    r.point.x.im.into(),
                    r.point.y.re.into(),
                    r.point.y.im.into(),
                    r.residual.into(),
                    r.angle.into(),
                    r.mu.into(),
                    r.k.into(),
                ]);
            }
        }
        out.file("intersections.csv", t.render());
    }

    fn transversality(&self, u: &CurveFamily, s: &CurveFamily) -> TransversalityReport {
        let pairs = self.pair_scans(u, s);
        let n = pairs.len();
        let scans: Vec<IntersectionScan> = pairs.into_iter().map(|p| p.scan).collect();
        summarize_scans(&scans, n, self.cfg.tolerances.angle_tol)
    }

    /// Jet-transport experiment at the fixed saddle with the slowest expansion.
    pub fn jet_decay(&self, s: &CurveFamily) -> Result<Option<JetDecay>> {
        let Some(st) = s
            .members
            .iter()
            .filter(|m| m.period == 1)
            .filter_map(series_of)
            .min_by(|a, b| a.saddle.nu_u.norm().total_cmp(&b.saddle.nu_u.norm()))
        else {
            return Ok(None);
        };
        let k = self.cfg.budgets.jet_order;
        let sad = &st.saddle;
        let b = st.jet(k + 1)?;
        let c = Complex64::from_polar(1.3, 0.4);
        let table = tangency_decay_experiment(
            &self.f,
            sad.period,
            sad.nu_u,
            sad.nu_s,
            &b,
            c,
            sad.e_u,
            k,
            self.cfg.budgets.jet_steps,
        );
        Ok(Some(JetDecay {
            base: sad.point(),
            nu_u: sad.nu_u,
            nu_s: sad.nu_s,
            predicted_exponents: (1..=k)
                .map(|j| j as f64 * (sad.nu_s / sad.nu_u).norm().ln())
                .collect(),
            table,
        }))
    }

    fn tangency_report(&self, out: &mut RunOutput) {
        #[derive(Serialize)]
        struct Doc {
            transversality: TransversalityReport,
            jet_decay: Option<JetDecay>,
        }
        let saddles = self.saddles();
        let (u, s) = match self.families(&saddles) {
            Ok(v) => v,
            Err(e) => return out.fail("families", e),
        };
        let jet_decay = self.jet_decay(&s).unwrap_or_else(|e| {
            out.fail("jet decay", e);
            None
        });
        let doc = Doc {
            transversality: self.transversality(&u, &s),
            jet_decay,
        };
        out.file("tangency.json", json_document("tangency-report", &doc));
    }

    /// Strata at every saddle point of the families.
    pub fn strata(&self, u: &CurveFamily, s: &CurveFamily) -> StrataTable {
        let samples: Vec<ComplexPair> = s.members.iter().map(|m| m.base).collect();
        stratify(s, u, &samples, 1e-8, self.cfg.tolerances.tau_threshold, self.exec)
    }

    fn strata_csv(&self, out: &mut RunOutput) {
        let saddles = self.saddles();
        let (u, s) = match self.families(&saddles) {
            Ok(v) => v,
            Err(e) => return out.fail("families", e),
        };
        let table = self.strata(&u, &s);
        if table.undefined > 0 {
            out.fail("stratify", format!("{} sample(s) without an order estimate", table.undefined));
        }
        let mut t = CsvTable::new("strata", &["m_s", "m_u", "count"]);
        for (ms, mu, n) in &table.rows {
            t.push(vec![(*ms).into(), (*mu).into(), (*n).into()]);
        }
        out.file("strata.csv", t.render());
    }

    fn family_report(&self, out: &mut RunOutput) {
        let saddles = self.saddles();
        let (u, s) = match self.families(&saddles) {
            Ok(v) => v,
            Err(e) => return out.fail("families", e),
        };
        let mut failures = Vec::new();
        let unstable = self.family_summary(&u, &mut failures);
        let stable = self.family_summary(&s, &mut failures);
        let disks = family_disks(&u, self.cfg.radii.r, self.cfg.radii.r0, self.exec);
        let (disk_summary, contraction) = match &disks {
            Ok(d) => {
                out.file("disks.csv", self.disks_table(d));
                let summary = self.disk_summary(&u, d, &mut failures);
                let c = unstable
                    .kappa
                    .map(|k| self.contraction(&u, d, k, &mut failures))
                    .unwrap_or(None);
                (Some(summary), c)
            }
            Err(e) => {
                failures.push(format!("local disks: {e}"));
                (None, None)
            }
        };
        let members = u
            .members
            .iter()
            .map(|m| MemberRow {
                id: m.id,
                period: m.period,
                base: m.base,
                successor: m.successor,
                lambda: m.lambda,
                alpha: series_of(m).map(|sp| sp.alpha),
                r_valid: series_of(m).map(|sp| sp.r_valid),
            })
            .collect();
        let doc = FamilyReport {
            unstable,
            stable,
            disks: disk_summary,
            contraction,
            members,
            failures: failures.clone(),
        };
        out.failures.extend(failures);
        out.file("family.json", json_document("family-report", &doc));
    }

    pub fn family_summary(&self, fam: &CurveFamily, failures: &mut Vec<String>) -> FamilySummary {
        let cfg = self.cfg.green();
        let growth = self.growth(fam).map_err(|e| failures.push(format!("{:?} growth: {e}", fam.side))).ok();
        let lambdas: Vec<f64> = fam.members.iter().filter_map(|m| m.lambda.map(|l| l.norm())).collect();
        // The opposite Green function vanishes along each curve.
        let other = SideMap::new(&self.f, fam.side.opposite());
        let cross: Vec<f64> = self.exec.map(&fam.members, |m| {
            (0..16)
                .filter_map(|i| {
                    let z = Complex64::from_polar(self.cfg.radii.r, 2.0 * PI * i as f64 / 16.0);
                    m.curve.eval(z).ok()
                })
                .map(|p| other.green(p, &cfg))
                .fold(0.0, f64::max)
        });
        FamilySummary {
            side: fam.side,
            members: fam.len(),
            kappa: growth.as_ref().map(|g| g.kappa),
            m_at_kappa: growth.as_ref().map(|g| g.m_at_kappa),
            normalization_defect: fam.normalization_defect(&cfg, self.exec),
            lambda_min: lambdas.iter().copied().reduce(f64::min),
            lambda_max: lambdas.iter().copied().reduce(f64::max),
            opposite_green_max: cross.into_iter().fold(0.0, f64::max),
            growth,
        }
    }

    fn disk_summary(
        &self,
        u: &CurveFamily,
        d: &[LocalDisk],
        failures: &mut Vec<String>,
    ) -> DiskSummary {
        let disjointness = disjointness_residual(u, d, 1e-6)
            .map_err(|e| failures.push(format!("disjointness: {e}")))
            .ok()
            .flatten();
        DiskSummary {
            r: self.cfg.radii.r,
            area_min: d.iter().map(|x| x.area).reduce(f64::min),
            area_max: d.iter().map(|x| x.area).reduce(f64::max),
            rho_in_min: d.iter().map(|x| x.rho_in).reduce(f64::min),
            rho_out_max: d.iter().map(|x| x.rho_out).reduce(f64::max),
            non_star_shaped: d.iter().filter(|x| x.non_star_shaped).count(),
            max_boundary_residual: d.iter().map(|x| x.boundary_residual).fold(0.0, f64::max),
            coincident_pair_distance: disjointness,
        }
    }

    /// Contraction diagnostics with forward-exit neighbors taken from the recentered
    /// family of the slowest saddle.
    fn contraction(
        &self,
        u: &CurveFamily,
        d: &[LocalDisk],
        kappa: f64,
        failures: &mut Vec<String>,
    ) -> Option<ContractionReport> {
        let first = contraction_check(&self.f, u, d, kappa, &[], self.exec)
            .map_err(|e| failures.push(format!("contraction: {e}")))
            .ok()?;
        let neighbors = match self.forward_neighbors(u, first.slowest_member, first.rho1) {
            Ok(n) => n,
            Err(e) => {
                failures.push(format!("recentered family: {e}"));
                return Some(first);
            }
        };
        contraction_check(&self.f, u, d, kappa, &neighbors, self.exec)
            .map_err(|e| failures.push(format!("contraction: {e}")))
            .ok()
    }

    /// Parameters `ζ_y/ν_u^m` of points of `W^u ∩ K⁺` inside the inscribed radius.
    pub fn forward_neighbors(
        &self,
        u: &CurveFamily,
        member: usize,
        rho1: f64,
    ) -> Result<Vec<Complex64>> {
        let Some(sp) = series_of(&u.members[member]) else {
            return Ok(Vec::new());
        };
        let rec = build_recentered_family(
            &self.f,
            &sp.saddle,
            self.cfg.budgets.samples,
            &self.cfg.recenter,
            &self.cfg.family_options(self.exec),
        )?;
        let nu = sp.nu;
        let mut out: Vec<Complex64> = Vec::new();
        for m in &rec.members {
            let Curve::Recentered(r) = &m.curve else {
                continue;
            };
            let mut z = r.center;
            while z.norm() >= rho1 {
                z /= nu;
            }
            // Centers on one ν-orbit reduce to the same neighbor.
            if out.iter().all(|w| (w - z).norm() > 1e-9 * z.norm()) {
                out.push(z);
            }
        }
        out.truncate(FORWARD_NEIGHBORS);
        Ok(out)
    }

    /// Runs the whole pipeline.
    pub fn qh_report(&self) -> QhReport {
        let mut failures = Vec::new();
        let b = &self.cfg.budgets;
        let degree = self.f.degree();
        let periods: Vec<PeriodCount> = (1..=b.period_max)
            .map(|n| {
                let search = find_periodic_with(&self.f, n, b.grid, 1e-9, self.exec);
                PeriodCount {
                    period: n,
                    solutions: search.solution_count(),
                    expected: degree.pow(n as u32) as usize,
                    cycles: search.cycles.len(),
                    non_hyperbolic: search.non_hyperbolic.len(),
                }
            })
            .collect();
        let saddles = self.saddles();
        let green = self.green_summary(&saddles);
        let families = self.families(&saddles);
        let (u, s) = match families {
            Ok(v) => v,
            Err(e) => {
                failures.push(format!("families: {e}"));
                return QhReport::failed(self.cfg, periods, green, failures);
            }
        };
        let unstable = self.family_summary(&u, &mut failures);
        let stable = self.family_summary(&s, &mut failures);
        let (disks, contraction) = match family_disks(&u, self.cfg.radii.r, self.cfg.radii.r0, self.exec)
        {
            Ok(d) => {
                let summary = self.disk_summary(&u, &d, &mut failures);
                let c = unstable
                    .kappa
                    .and_then(|k| self.contraction(&u, &d, k, &mut failures));
                (Some(summary), c)
            }
            Err(e) => {
                failures.push(format!("local disks: {e}"));
                (None, None)
            }
        };
        let strata = self.strata(&u, &s);
        let transversality = self.transversality(&u, &s);
        let diagnostics = diagnostics(
            self.cfg,
            &periods,
            &unstable,
            &stable,
            disks.as_ref(),
            contraction.as_ref(),
            &transversality,
        );
        let verdict = Verdict::new(&unstable, &strata, &transversality, &diagnostics, s.len());
        QhReport {
            map: self.cfg.map.clone(),
            seed: self.cfg.seed,
            degree,
            period_max: b.period_max,
            periods,
            green,
            unstable: Some(unstable),
            stable: Some(stable),
            disks,
            contraction,
            strata: Some(strata),
            transversality: Some(transversality),
            diagnostics,
            verdict: Some(verdict),
            failures,
        }
    }

    fn green_summary(&self, saddles: &[Saddle]) -> GreenSummary {
        let cfg = self.cfg.green();
        let pts = self.green_points();
        let defects: Vec<Option<f64>> = self.exec.map(&pts, |z| {
            let g = green(&self.f, *z, &cfg);
            if !g.escaped {
                return None;
            }
            let fz = self.f.step(*z);
            Some((green(&self.f, fz, &cfg).value - self.degree() * g.value).abs())
        });
        let periodic: Vec<ComplexPair> = saddles.iter().flat_map(|s| s.cycle.clone()).collect();
        let gp = self
            .exec
            .map(&periodic, |p| green(&self.f, *p, &cfg).value)
            .into_iter()
            .fold(0.0, f64::max);
        GreenSummary {
            samples: pts.len(),
            escaped: defects.iter().flatten().count(),
            functional_defect: defects.iter().flatten().copied().fold(0.0, f64::max),
            periodic_points: periodic.len(),
            periodic_gplus_max: gp,
        }
    }
}

fn series_of(m: &crate::family::Member) -> Option<&SeriesParametrization> {
    match &m.curve {
        Curve::Series(sp) => Some(sp),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetDecay {
    pub base: ComplexPair,
    pub nu_u: Complex64,
    pub nu_s: Complex64,
    /// `j·log|ν_s/ν_u|` for `j = 1..=k`.
    pub predicted_exponents: Vec<f64>,
    pub table: DecayTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberRow {
    pub id: usize,
    pub period: usize,
    pub base: ComplexPair,
    pub successor: Option<usize>,
    pub lambda: Option<Complex64>,
    pub alpha: Option<f64>,
    pub r_valid: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub unstable: FamilySummary,
    pub stable: FamilySummary,
    pub disks: Option<DiskSummary>,
    pub contraction: Option<ContractionReport>,
    pub members: Vec<MemberRow>,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub side: Side,
    pub members: usize,
    pub kappa: Option<f64>,
    pub m_at_kappa: Option<f64>,
    pub normalization_defect: f64,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    /// Largest Green function of the opposite side on the curve samples.
    pub opposite_green_max: f64,
    pub growth: Option<GrowthProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskSummary {
    pub r: f64,
    pub area_min: Option<f64>,
    pub area_max: Option<f64>,
    pub rho_in_min: Option<f64>,
    pub rho_out_max: Option<f64>,
    pub non_star_shaped: usize,
    pub max_boundary_residual: f64,
    /// Smallest distance between disks of distinct members at a common base point.
    pub coincident_pair_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodCount {
    pub period: usize,
    pub solutions: usize,
    /// `deg^N`.
    pub expected: usize,
    pub cycles: usize,
    pub non_hyperbolic: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenSummary {
    pub samples: usize,
    pub escaped: usize,
    /// `max |G⁺(f(z)) − deg·G⁺(z)|` over escaping samples.
    pub functional_defect: f64,
    pub periodic_points: usize,
    pub periodic_gplus_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
}

fn check(name: &str, passed: bool, value: Option<f64>, threshold: Option<f64>) -> Diagnostic {
    Diagnostic {
        name: name.into(),
        passed,
        value,
        threshold,
    }
}

/// Uniform-expansion diagnostics. A missing value counts as a failed check.
fn diagnostics(
    cfg: &RunConfig,
    periods: &[PeriodCount],
    u: &FamilySummary,
    s: &FamilySummary,
    disks: Option<&DiskSummary>,
    contraction: Option<&ContractionReport>,
    t: &TransversalityReport,
) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let complete = periods.iter().all(|p| p.solutions == p.expected && p.non_hyperbolic == 0);
    out.push(check("periodic_points_complete_and_hyperbolic", complete, None, None));
    for (side, f) in [("unstable", u), ("stable", s)] {
        out.push(check(
            &format!("{side}_kappa_gt_1"),
            f.kappa.is_some_and(|k| k > 1.0),
            f.kappa,
            Some(1.0),
        ));
        let floor = f.kappa.map(|k| k * (1.0 - LAMBDA_SLACK));
        out.push(check(
            &format!("{side}_lambda_min_ge_kappa"),
            matches!((f.lambda_min, floor), (Some(l), Some(k)) if l >= k),
            f.lambda_min,
            floor,
        ));
        out.push(check(
            &format!("{side}_normalized"),
            f.normalization_defect <= cfg.tolerances.norm_tol,
            Some(f.normalization_defect),
            Some(cfg.tolerances.norm_tol),
        ));
    }
    out.push(check(
        "disks_star_shaped",
        disks.is_some_and(|d| d.non_star_shaped == 0),
        disks.map(|d| d.non_star_shaped as f64),
        Some(0.0),
    ));
    out.push(check(
        "backward_inclusion",
        contraction.is_some_and(|c| c.inclusion_violations == 0 && c.inclusion_checked > 0),
        contraction.map(|c| c.inclusion_violations as f64),
        Some(0.0),
    ));
    let bound = contraction.map(|c| -CONTRACTION_FRACTION * c.kappa.ln());
    out.push(check(
        "backward_contraction",
        matches!((contraction, bound), (Some(c), Some(b)) if c.worst_backward_exponent <= b),
        contraction.map(|c| c.worst_backward_exponent),
        bound,
    ));
    let tol = cfg.tolerances.angle_tol;
    out.push(check(
        "intersections_transversal",
        t.min_angle.is_some_and(|a| a > tol) && t.max_mu == 1 && t.counter_disagreements == 0,
        t.min_angle,
        Some(tol),
    ));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumEntry {
    pub m_s: usize,
    pub m_u: usize,
    pub count: usize,
    /// Whether this stratum holds every sample.
    pub all: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub kappa_gt_1: bool,
    pub all_lambda_ge_kappa: bool,
    pub strata: Vec<StratumEntry>,
    pub min_angle_positive: bool,
    /// Every sample lies in the `(1, 1)` stratum.
    pub single_stratum_11: bool,
    /// Every uniform-expansion diagnostic passed.
    pub uniformly_expanding: bool,
    /// `single_stratum_11 == uniformly_expanding`.
    pub consistent: bool,
}

impl Verdict {
    fn new(
        u: &FamilySummary,
        strata: &StrataTable,
        t: &TransversalityReport,
        diags: &[Diagnostic],
        samples: usize,
    ) -> Self {
        let single = strata.undefined == 0
            && strata.rows.len() == 1
            && strata.rows[0] == (1, 1, samples);
        let uniformly_expanding = diags.iter().all(|d| d.passed);
        Self {
            kappa_gt_1: u.kappa.is_some_and(|k| k > 1.0),
            all_lambda_ge_kappa: matches!((u.lambda_min, u.kappa), (Some(l), Some(k)) if l >= k * (1.0 - LAMBDA_SLACK)),
            strata: strata
                .rows
                .iter()
                .map(|&(m_s, m_u, count)| StratumEntry {
                    m_s,
                    m_u,
                    count,
                    all: count == samples && strata.undefined == 0,
                })
                .collect(),
            min_angle_positive: t.min_angle.is_some_and(|a| a > 0.0),
            single_stratum_11: single,
            uniformly_expanding,
            consistent: single == uniformly_expanding,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QhReport {
    pub map: MapSpec,
    pub seed: u64,
    pub degree: u64,
    pub period_max: usize,
    pub periods: Vec<PeriodCount>,
    pub green: GreenSummary,
    pub unstable: Option<FamilySummary>,
    pub stable: Option<FamilySummary>,
    pub disks: Option<DiskSummary>,
    pub contraction: Option<ContractionReport>,
    pub strata: Option<StrataTable>,
    pub transversality: Option<TransversalityReport>,
    pub diagnostics: Vec<Diagnostic>,
    pub verdict: Option<Verdict>,
    pub failures: Vec<String>,
}

impl QhReport {
    fn failed(
        cfg: &RunConfig,
        periods: Vec<PeriodCount>,
        green: GreenSummary,
        failures: Vec<String>,
    ) -> Self {
        Self {
            map: cfg.map.clone(),
            seed: cfg.seed,
            degree: cfg.henon().degree(),
            period_max: cfg.budgets.period_max,
            periods,
            green,
            unstable: None,
            stable: None,
            disks: None,
            contraction: None,
            strata: None,
            transversality: None,
            diagnostics: Vec::new(),
            verdict: None,
            failures,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.budgets.period_max = 2;
        cfg.budgets.grid = 64;
        cfg.budgets.samples = 6;
        cfg.budgets.seeds = 8;
        cfg.recenter.x_period = 2;
        cfg
    }

    #[test]
    fn subcommand_names_round_trip() {
        for c in Subcommand::ALL {
            assert_eq!(c.name().parse::<Subcommand>().unwrap(), c);
        }
        assert!("qh".parse::<Subcommand>().is_err());
    }

    #[test]
    fn csv_outputs_have_the_documented_columns() {
        let cfg = small();
        let heads = [
            (Subcommand::Green, "green.csv", "re_x,im_x,re_y,im_y,gplus,gminus,escaped_fwd,escaped_bwd"),
            (Subcommand::Growth, "growth.csv", "r,m,M"),
            (Subcommand::Stratify, "strata.csv", "m_s,m_u,count"),
            (Subcommand::LocalDisks, "disks.csv", "member,area,rho_in,rho_out"),
        ];
        for (cmd, file, header) in heads {
            let out = run(cmd, &cfg, Execution::Parallel);
            assert!(out.failures.is_empty(), "{cmd}: {:?}", out.failures);
            let a = out.artifacts.iter().find(|a| a.name == file).unwrap();
            let lines: Vec<&str> = a.contents.lines().filter(|l| !l.starts_with('#')).collect();
            assert_eq!(lines[0], header, "{cmd}");
            assert!(a.contents.starts_with("#schema=henon-qh/"));
            assert!(lines.len() > 1, "{cmd} wrote no rows");
        }
    }

    #[test]
    fn green_csv_flags_match_values() {
        let out = run(Subcommand::Green, &small(), Execution::Sequential);
        let body = &out.artifacts[0].contents;
        for line in body.lines().skip(2) {
            let cells: Vec<&str> = line.split(',').collect();
            let gp: f64 = cells[4].parse().unwrap();
            assert_eq!(gp > 0.0, cells[6] == "1", "{line}");
        }
    }

    #[test]
    fn modes_produce_identical_bytes() {
        let cfg = small();
        let a = run(Subcommand::Intersections, &cfg, Execution::Sequential);
        let b = run(Subcommand::Intersections, &cfg, Execution::Parallel);
        assert_eq!(a, b);
    }
}
