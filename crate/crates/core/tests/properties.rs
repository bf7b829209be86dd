//! Randomized checks of the invariants each module promises.

use std::sync::OnceLock;

use henon_qh::config::{Budgets, RunConfig, Tolerances};
use henon_qh::family::{build_saddle_families, CurveFamily, FamilyOptions};
use henon_qh::green::{green_plus, GreenConfig};
use henon_qh::intersect::{find_intersections, jet_of_pushforward, IntersectOptions};
use henon_qh::jet::CurveJet;
use henon_qh::output::fmt_f64;
use henon_qh::saddles::{saddle_from_seed, saddles_of_period};
use henon_qh::uniformize::m_psi;
use henon_qh::{Complex64, ComplexPair, Execution, HenonFactor, HenonMap, PlaneMap};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn pair() -> impl Strategy<Value = ComplexPair> {
    (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0)
        .prop_map(|(a, b, x, y)| ComplexPair::new(c(a, b), c(x, y)))
}

/// Composition of two quadratic factors with random coefficients.
fn two_factor_map() -> impl Strategy<Value = HenonMap> {
    (-2.0f64..2.0, 0.1f64..1.5, -2.0f64..2.0, 0.1f64..1.5, -1.0f64..1.0).prop_map(
        |(c1, a1, c2, a2, phase)| {
            let f1 = HenonFactor::quadratic(c(c1, 0.2), Complex64::from_polar(a1, phase)).unwrap();
            let f2 = HenonFactor::quadratic(c(c2, -0.1), c(a2, 0.0)).unwrap();
            HenonMap::new(vec![f1, f2]).unwrap()
        },
    )
}

fn horseshoe_families() -> &'static (CurveFamily, CurveFamily) {
    static FAMS: OnceLock<(CurveFamily, CurveFamily)> = OnceLock::new();
    FAMS.get_or_init(|| {
        let f = HenonMap::horseshoe();
        build_saddle_families(&f, 2, &FamilyOptions::default()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jacobian_determinant_is_the_product_of_a(f in two_factor_map(), z in pair()) {
        let want: Complex64 = f.factors().iter().map(|h| h.a()).product();
        let det = f.jacobian(z).det();
        prop_assert!((det - want).norm() <= 1e-12 * want.norm().max(1.0) * f.jacobian(z).norm_max().max(1.0));
    }

    #[test]
    fn green_is_nonnegative_and_doubles(z in pair()) {
        let f = HenonMap::horseshoe();
        let cfg = GreenConfig::default();
        let g = green_plus(&f, z, cfg.tol, cfg.n_max);
        prop_assert!(g.value >= 0.0 && g.err_bound >= 0.0);
        prop_assert_eq!(g.value == 0.0, !g.escaped);
        if g.escaped {
            let gf = green_plus(&f, f.step(z), cfg.tol, cfg.n_max);
            prop_assert!((gf.value - 2.0 * g.value).abs() <= 1e-8);
        }
    }

    #[test]
    fn floats_print_round_trip(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
        prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn config_round_trips(seed in any::<u64>(), period in 1usize..6, tol in 1e-9f64..1e-2) {
        let d = RunConfig::default();
        let cfg = RunConfig {
            seed,
            budgets: Budgets { period_max: period, ..d.budgets.clone() },
            tolerances: Tolerances { angle_tol: tol, ..d.tolerances.clone() },
            ..d
        };
        let text = toml::to_string(&cfg).unwrap();
        prop_assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn first_order_pushforward_is_the_jacobian(z in pair(), v in pair()) {
        let f = HenonMap::quadratic(0.5, -1.0).unwrap();
        let z = z * 0.3;
        let jet = CurveJet::new(z, vec![v]);
        let pushed = jet_of_pushforward(&f, &jet, 1, 1);
        let want = f.jacobian(z).apply(v);
        prop_assert!(pushed.coeffs[0].dist(&want) <= 1e-12 * want.norm().max(1.0));
        prop_assert!(pushed.base.dist(&f.step(z)) <= 1e-12 * pushed.base.norm().max(1.0));
    }

    #[test]
    fn growth_functions_are_nondecreasing(mut r in proptest::collection::vec(0.05f64..4.0, 2..6)) {
        r.sort_by(f64::total_cmp);
        let cfg = GreenConfig::default();
        let (u, s) = horseshoe_families();
        for fam in [u, s] {
            let per_r: Vec<(f64, f64)> = r
                .iter()
                .map(|r| {
                    let v: Vec<f64> = fam.members.iter().map(|m| m_psi(&m.curve, *r, &cfg)).collect();
                    (v.iter().copied().fold(f64::INFINITY, f64::min), v.iter().copied().fold(0.0, f64::max))
                })
                .collect();
            for w in per_r.windows(2) {
                prop_assert!(w[1].0 >= w[0].0 - 1e-12 && w[1].1 >= w[0].1 - 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Random curve pairs `(ζ, aζ²)` and `(bζ + t, ζ + sζ²)`.
    #[test]
    fn intersection_records_are_roots_and_transversal_ones_are_simple(
        a in -1.0f64..1.0, b in -2.0f64..2.0, t in -0.3f64..0.3, s in -0.5f64..0.5,
    ) {
        let u = CurveJet::new(
            ComplexPair::ZERO,
            vec![ComplexPair::real(1.0, 0.0), ComplexPair::new(c(0.0, 0.0), c(a, 0.1))],
        );
        let st = CurveJet::new(
            ComplexPair::new(c(t, 0.0), c(0.0, 0.0)),
            vec![ComplexPair::real(b, 1.0), ComplexPair::new(c(0.0, 0.0), c(s, 0.0))],
        );
        let opts = IntersectOptions { seeds: 8, ..IntersectOptions::default() };
        let scan = find_intersections(&u, &st, 1.0, 1.0, &opts, Execution::Sequential);
        for r in &scan.records {
            let p = u.eval(r.zeta_u);
            let q = st.eval(r.zeta_s);
            prop_assert!(p.dist(&q) <= 1e-10, "{r:?}");
            if r.angle > opts.angle_tol {
                prop_assert_eq!(r.mu, 1, "{:?}", r);
            }
        }
    }

    /// Multiplier product and Newton stability of saddles of a real horseshoe family.
    #[test]
    fn saddles_have_det_product_and_are_newton_fixed(a in 0.2f64..0.6, cc in -8.0f64..-6.0) {
        let f = HenonMap::quadratic(a, cc).unwrap();
        for n in 1..=3 {
            for s in saddles_of_period(&f, n, 48, Execution::Sequential) {
                let det = c(a, 0.0).powi(n as i32);
                prop_assert!((s.nu_s * s.nu_u - det).norm() <= 1e-9 * det.norm().max(1.0));
                let again = saddle_from_seed(&f, s.point(), n).unwrap();
                prop_assert!(again.point().dist(&s.point()) <= 1e-12 * s.point().norm().max(1.0));
            }
        }
    }
}
