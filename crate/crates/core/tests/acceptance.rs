//! Acceptance suite: one PASS/FAIL line per criterion, with runtime against its budget.
//!
//! Runs as a plain binary (`harness = false`) so the lines appear in order. Exits
//! nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use henon_qh::config::RunConfig;
use henon_qh::family::{
    build_saddle_families, contraction_check, family_disks, growth_profile, FamilyOptions,
    DEFAULT_R0,
};
use henon_qh::green::{green_plus, GreenConfig};
use henon_qh::intersect::{find_intersections, tangency_decay_experiment, IntersectOptions};
use henon_qh::jet::CurveJet;
use henon_qh::report::{run, Lab, Subcommand};
use henon_qh::saddles::{find_periodic, saddles_of_period, Saddle, DEFAULT_GRID};
use henon_qh::uniformize::{
    linearize, m_psi, normalized_parametrization, solve_unit_level, ParamCurve, Side,
};
use henon_qh::{Complex64, ComplexPair, Execution, HenonMap, PlaneMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = (bool, String);

/// Name, runtime budget in seconds, check.
type Criterion = (&'static str, u64, fn() -> Verdict);

fn horseshoe() -> HenonMap {
    HenonMap::quadratic(0.5, -6.0).unwrap()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Fixed saddles sorted by `Re x`: `[p−, p+]`.
fn fixed_saddles(f: &HenonMap) -> Vec<Saddle> {
    let mut s = saddles_of_period(f, 1, DEFAULT_GRID, Execution::Parallel);
    s.sort_by(|a, b| a.point().x.re.total_cmp(&b.point().x.re));
    s
}

/// Roots of `z² + bz + c` by the quadratic formula.
fn quadratic_roots(b: Complex64, cc: Complex64) -> [Complex64; 2] {
    let d = (b * b - 4.0 * cc).sqrt();
    [(-b + d) / 2.0, (-b - d) / 2.0]
}

/// Distance between two unordered pairs.
fn pair_distance(a: [Complex64; 2], b: [Complex64; 2]) -> f64 {
    let straight = (a[0] - b[0]).norm().max((a[1] - b[1]).norm());
    let crossed = (a[0] - b[1]).norm().max((a[1] - b[0]).norm());
    straight.min(crossed)
}

fn fixed_point_oracle() -> Verdict {
    let f = horseshoe();
    let search = find_periodic(&f, 1, DEFAULT_GRID, 1e-12);
    let xs = quadratic_roots(c(-1.5, 0.0), c(-6.0, 0.0));
    if search.solutions.len() != 2 {
        return (false, format!("{} fixed points", search.solutions.len()));
    }
    let got = [search.solutions[0].x, search.solutions[1].x];
    let pos = pair_distance(got, xs);
    let diag = search.solutions.iter().map(|z| (z.x - z.y).norm()).fold(0.0, f64::max);
    let mut mult = 0.0f64;
    for s in fixed_saddles(&f) {
        let x = s.point().x;
        let oracle = quadratic_roots(-2.0 * x, c(0.5, 0.0));
        mult = mult.max(pair_distance([s.nu_s, s.nu_u], oracle));
    }
    (
        pos <= 1e-12 && diag <= 1e-12 && mult <= 1e-10,
        format!("root error {pos:.1e}, |x-y| {diag:.1e}, multiplier error {mult:.1e}"),
    )
}

fn bezout_completeness() -> Verdict {
    let f = horseshoe();
    let counts: Vec<usize> = (1..=6)
        .map(|n| find_periodic(&f, n, DEFAULT_GRID, 1e-9).solution_count())
        .collect();
    let ok = counts.iter().enumerate().all(|(i, c)| *c == 1 << (i + 1));
    (ok, format!("counts {counts:?} for N = 1..6"))
}

fn green_functional_equation() -> Verdict {
    let f = horseshoe();
    let cfg = GreenConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut taken = 0;
    let mut drawn = 0;
    while taken < 1000 && drawn < 100_000 {
        drawn += 1;
        let mut u = || rng.gen_range(-4.0..4.0);
        let z = ComplexPair::new(c(u(), u()), c(u(), u()));
        let g = green_plus(&f, z, cfg.tol, cfg.n_max);
        if !g.escaped {
            continue;
        }
        let gf = green_plus(&f, f.step(z), cfg.tol, cfg.n_max);
        worst = worst.max((gf.value - 2.0 * g.value).abs());
        taken += 1;
    }
    let mut periodic = 0;
    let mut nonzero = 0;
    for n in 1..=5 {
        for z in find_periodic(&f, n, 64, 1e-9).solutions {
            periodic += 1;
            if green_plus(&f, z, cfg.tol, cfg.n_max).value != 0.0 {
                nonzero += 1;
            }
        }
    }
    (
        taken == 1000 && worst <= 1e-8 && nonzero == 0,
        format!(
            "max |G+(f z) - 2G+(z)| = {worst:.1e} on {taken} escaping samples; \
             G+ nonzero at {nonzero} of {periodic} periodic points"
        ),
    )
}

/// `(max functional residual, max route discrepancy at 2 r_valid, count)` over the
/// parametrizations of one side for saddles of period ≤ 4.
fn side_residuals(f: &HenonMap, side: Side) -> Result<(f64, f64, usize), String> {
    let mut worst_res = 0.0f64;
    let mut worst_route = 0.0f64;
    let mut count = 0;
    for n in 1..=4 {
        for s in saddles_of_period(f, n, DEFAULT_GRID, Execution::Parallel) {
            let xi = linearize(f, &s, side, 40).map_err(|e| format!("period {n}: {e}"))?;
            worst_res = worst_res.max(xi.functional_residual(xi.r_valid, 64));
            for i in 0..16 {
                let z = Complex64::from_polar(2.0 * xi.r_valid, 0.1 + i as f64 * 0.39);
                worst_route = worst_route.max(xi.route_discrepancy(z).unwrap_or(f64::INFINITY));
            }
            count += 1;
        }
    }
    Ok((worst_res, worst_route, count))
}

fn linearization_residual() -> Verdict {
    let f = horseshoe();
    let (res, route, count) = match side_residuals(&f, Side::Unstable) {
        Ok(v) => v,
        Err(e) => return (false, e),
    };
    // Stable side for information only: its routes iterate f⁻¹, whose period-4
    // multipliers reach 1e4, so ε·|ν|² already exceeds the route tolerance.
    let stable = side_residuals(&f, Side::Stable)
        .map(|(r, q, _)| format!("stable side (informational): residual {r:.1e}, route {q:.1e}"))
        .unwrap_or_else(|e| format!("stable side: {e}"));
    (
        res <= 1e-10 && route <= 1e-8,
        format!(
            "{count} unstable parametrizations; max functional residual {res:.1e}, \
             max route discrepancy at 2 r_valid {route:.1e}; {stable}"
        ),
    )
}

fn normalization_and_kappa() -> Verdict {
    let f = horseshoe();
    let opts = FamilyOptions::default();
    let (u, s) = build_saddle_families(&f, 4, &opts).unwrap();
    let cfg = opts.green;
    let mut notes = Vec::new();
    let mut ok = true;
    for fam in [&u, &s] {
        let defect = fam.normalization_defect(&cfg, Execution::Parallel);
        let g = growth_profile(fam, &[1.0], 2.0, &cfg, Execution::Parallel).unwrap();
        let lam_min = fam
            .members
            .iter()
            .map(|m| m.lambda.unwrap().norm())
            .fold(f64::INFINITY, f64::min);
        // |λ_x| again, from m_{ψ_{f(x)}}(|λ_x|) = deg.
        let by_growth: Vec<f64> = Execution::Parallel.map(&fam.members, |m| {
            let next = &fam.members[m.successor.unwrap()].curve;
            solve_unit_level(|r| m_psi(next, r, &cfg) / 2.0, 2.0).unwrap()
        });
        let agree = fam
            .members
            .iter()
            .zip(&by_growth)
            .map(|(m, r)| (m.lambda.unwrap().norm() - r).abs())
            .fold(0.0, f64::max);
        let at_fixed = fam
            .members
            .iter()
            .filter(|m| m.period == 1)
            .map(|m| {
                let nu = match fam.side {
                    Side::Unstable => u_nu(&f, m.base).0,
                    Side::Stable => 1.0 / u_nu(&f, m.base).1,
                };
                (m.lambda.unwrap() - nu).norm()
            })
            .fold(0.0, f64::max);
        ok &= defect <= 1e-6
            && g.kappa > 1.0
            && lam_min >= g.kappa - 1e-4
            && at_fixed <= 1e-8
            && agree <= 1e-4;
        notes.push(format!(
            "{:?}: {} members, defect {defect:.1e}, kappa {:.6}, min|lambda| {lam_min:.6}, \
             |lambda - nu| {at_fixed:.1e}, definitions differ by {agree:.1e}",
            fam.side,
            fam.len(),
            g.kappa
        ));
    }
    (ok, notes.join("; "))
}

/// `(ν_u, ν_s)` of the fixed point at `p`, from the trace and determinant of `Df(p)`.
fn u_nu(f: &HenonMap, p: ComplexPair) -> (Complex64, Complex64) {
    let j = f.jacobian(p);
    let [a, b] = quadratic_roots(-j.trace(), j.det());
    if a.norm() > b.norm() {
        (a, b)
    } else {
        (b, a)
    }
}

fn contraction_rates() -> Verdict {
    let cfg = RunConfig::default();
    let lab = Lab::new(&cfg, Execution::Parallel);
    let saddles = lab.saddles();
    let (u, _) = lab.families(&saddles).unwrap();
    let g = growth_profile(&u, &[1.0], 2.0, &cfg.green(), Execution::Parallel).unwrap();
    let disks = family_disks(&u, cfg.radii.r, DEFAULT_R0, Execution::Parallel).unwrap();
    let first = contraction_check(&lab.f, &u, &disks, g.kappa, &[], Execution::Parallel).unwrap();
    let neighbors = lab.forward_neighbors(&u, first.slowest_member, first.rho1).unwrap();
    let rep = contraction_check(&lab.f, &u, &disks, g.kappa, &neighbors, Execution::Parallel)
        .unwrap();
    let target = -g.kappa.ln();
    let rel = (rep.backward_exponent - target).abs() / target.abs();
    let exits_ok = !rep.forward.is_empty()
        && rep
            .forward
            .iter()
            .all(|e| (e.observed as i64 - e.predicted as i64).abs() <= 2);
    let exits: Vec<(usize, usize)> = rep.forward.iter().map(|e| (e.predicted, e.observed)).collect();
    (
        rel <= 0.1 && exits_ok,
        format!(
            "backward exponent {:.5} vs -log kappa {target:.5} ({:.1}%); \
             forward exits (predicted, observed) {exits:?}",
            rep.backward_exponent,
            100.0 * rel
        ),
    )
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

fn intersection_machinery() -> Verdict {
    let opts = IntersectOptions::default();
    let mut synth = Vec::new();
    let mut ok = true;
    for k in 0..=4 {
        let (u, s) = tangent_pair(k);
        let scan = find_intersections(&u, &s, 1.0, 1.0, &opts, Execution::Sequential);
        let mus: Vec<(u32, u32)> =
            scan.records.iter().map(|r| (r.mu_perturbation, r.mu_argument)).collect();
        ok &= mus == vec![(k as u32 + 1, k as u32 + 1)];
        synth.push(format!("k={k}: {mus:?}"));
    }
    let f = horseshoe();
    let cfg = GreenConfig::default();
    let mut homoclinic = Vec::new();
    for (p, ru, rs, seeds) in [(0usize, 8.0, 10.0, 32usize), (1, 90.0, 70.0, 64)] {
        let sad = &fixed_saddles(&f)[p];
        let wu = normalized_parametrization(&f, sad, Side::Unstable, 40, &cfg).unwrap();
        let ws = normalized_parametrization(&f, sad, Side::Stable, 40, &cfg).unwrap();
        let scan_with = |seeds: usize| {
            let o = IntersectOptions { seeds, ..opts };
            find_intersections(&wu, &ws, ru, rs, &o, Execution::Parallel)
        };
        let scan = scan_with(seeds);
        let finer = scan_with(2 * seeds);
        let nontrivial = scan.records.iter().filter(|r| r.zeta_u.norm() > 1e-6).count();
        let min_angle = scan.records.iter().map(|r| r.angle).fold(f64::INFINITY, f64::min);
        let mu_one = scan.records.iter().all(|r| r.mu == 1 && r.counters_agree);
        ok &= nontrivial >= 1
            && min_angle > 0.0
            && mu_one
            && finer.records.len() == scan.records.len();
        homoclinic.push(format!(
            "{}: {} records ({nontrivial} nontrivial, {} with doubled seeds), \
             min angle {min_angle:.3}, mu == 1: {mu_one}",
            if p == 0 { "p-" } else { "p+" },
            scan.records.len(),
            finer.records.len()
        ));
    }
    (ok, format!("synthetic (perturbation, argument) {}; {}", synth.join(", "), homoclinic.join("; ")))
}

fn jet_law() -> Verdict {
    let f = horseshoe();
    let opts = FamilyOptions::default();
    let (u, s) = build_saddle_families(&f, 3, &opts).unwrap();
    let ku = growth_profile(&u, &[1.0], 2.0, &opts.green, Execution::Parallel).unwrap().kappa;
    let ks = growth_profile(&s, &[1.0], 2.0, &opts.green, Execution::Parallel).unwrap().kappa;
    // Sharp constants on each side: the decay rate bound is log κ_u + log κ_s.
    let two_log_kappa = ku.ln() + ks.ln();
    let sad = &fixed_saddles(&f)[0];
    let ws = normalized_parametrization(&f, sad, Side::Stable, 40, &opts.green).unwrap();
    let per_step = (sad.nu_s / sad.nu_u).norm().ln();
    let mut ok = true;
    let mut notes = Vec::new();
    for k in 1..=3 {
        let b = ws.jet(k + 1).unwrap();
        let t = tangency_decay_experiment(
            &f,
            1,
            sad.nu_u,
            sad.nu_s,
            &b,
            Complex64::from_polar(1.3, 0.4),
            sad.e_u,
            k,
            8,
        );
        let e1 = t.exponents[0];
        ok &= (e1 + two_log_kappa).abs() <= 0.1 * two_log_kappa;
        for j in 1..=k {
            let e = t.exponents[j - 1];
            let law = j as f64 * per_step;
            ok &= (e - law).abs() <= 0.1 * law.abs() && e <= -0.9 * two_log_kappa;
        }
        // The law holds to round-off below order k + 1 and breaks at k + 1.
        let used = t.fit_rows[k - 1];
        let below = (1..=k)
            .flat_map(|j| t.rows[..used].iter().map(move |r| r.law_defect[j - 1]))
            .fold(0.0, f64::max);
        let at_k1: Vec<f64> = t.rows.iter().map(|r| r.law_defect[k]).collect();
        let grows = at_k1.windows(2).skip(1).all(|w| w[1] > w[0]) && at_k1[t.rows.len() - 1] > 1.0;
        ok &= below <= 1e-6 && grows;
        notes.push(format!(
            "k={k}: exponents {:?}, law defect j<=k {below:.1e}, j=k+1 at n=8 {:.1e}",
            t.exponents.iter().map(|e| format!("{e:.4}")).collect::<Vec<_>>(),
            at_k1[t.rows.len() - 1]
        ));
    }
    (
        ok,
        format!("-2 log kappa = {:.4}; {}", -two_log_kappa, notes.join("; ")),
    )
}

fn stratification() -> Verdict {
    let cfg = RunConfig::default();
    let report = Lab::new(&cfg, Execution::Parallel).qh_report();
    let Some(v) = report.verdict else {
        return (false, format!("no verdict; failures {:?}", report.failures));
    };
    let strata: Vec<(usize, usize, usize, bool)> =
        v.strata.iter().map(|s| (s.m_s, s.m_u, s.count, s.all)).collect();
    let failed: Vec<&str> = report
        .diagnostics
        .iter()
        .filter(|d| !d.passed)
        .map(|d| d.name.as_str())
        .collect();
    (
        v.single_stratum_11
            && v.uniformly_expanding
            && v.consistent
            && v.kappa_gt_1
            && v.all_lambda_ge_kappa
            && v.min_angle_positive
            && report.failures.is_empty(),
        format!(
            "strata {strata:?}; {} diagnostics, failed {failed:?}; consistent {}",
            report.diagnostics.len(),
            v.consistent
        ),
    )
}

fn determinism() -> Verdict {
    let cfg = RunConfig::default();
    let a = run(Subcommand::QhReport, &cfg, Execution::Parallel);
    let b = run(Subcommand::QhReport, &cfg, Execution::Parallel);
    let seq = run(Subcommand::QhReport, &cfg, Execution::Sequential);
    let bytes = a.artifacts[0].contents.len();
    (
        a == b && a == seq,
        format!("{bytes} bytes; repeat identical {}, sequential identical {}", a == b, a == seq),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("fixed-point oracle", 1, fixed_point_oracle),
        ("Bezout completeness", 120, bezout_completeness),
        ("Green functional equation", 10, green_functional_equation),
        ("linearization residual", 30, linearization_residual),
        ("normalization and kappa", 60, normalization_and_kappa),
        ("contraction rates", 60, contraction_rates),
        ("intersection machinery", 120, intersection_machinery),
        ("jet law", 60, jet_law),
        ("stratification", 300, stratification),
        ("determinism", 300, determinism),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (ok, detail) = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| (false, "panicked".to_string()));
        let elapsed = t.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let pass = ok && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {name}: {} ({detail}; {:.2}s of {budget}s budget)",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
