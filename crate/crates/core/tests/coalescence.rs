//! Saddles of growing period that shadow a homoclinic loop of `p−` approach `p−`. Their
//! unstable curves must then cut `W^s(p−)` ever closer to `p−`, and their local disks
//! must converge to the disk at `p−`.

use henon_qh::family::{disk_image_samples, hausdorff_distance, local_disk};
use henon_qh::green::GreenConfig;
use henon_qh::intersect::{coalescence_experiment, find_intersections, IntersectOptions};
use henon_qh::saddles::{saddle_from_seed, saddles_of_period, DEFAULT_GRID};
use henon_qh::uniformize::{normalized_parametrization, ParamCurve, SeriesParametrization, Side};
use henon_qh::{Execution, HenonMap};

struct Setup {
    wu: SeriesParametrization,
    ws: SeriesParametrization,
    /// Saddles of period `2k + 1`, `k = 2..=6`, with their unstable curves.
    chain: Vec<SeriesParametrization>,
}

fn setup() -> Setup {
    let f = HenonMap::quadratic(0.5, -6.0).unwrap();
    let cfg = GreenConfig::default();
    let p = saddles_of_period(&f, 1, DEFAULT_GRID, Execution::Parallel)
        .into_iter()
        .min_by(|a, b| a.point().x.re.total_cmp(&b.point().x.re))
        .unwrap();
    let wu = normalized_parametrization(&f, &p, Side::Unstable, 40, &cfg).unwrap();
    let ws = normalized_parametrization(&f, &p, Side::Stable, 40, &cfg).unwrap();
    let opts = IntersectOptions {
        seeds: 32,
        ..IntersectOptions::default()
    };
    let h = find_intersections(&wu, &ws, 8.0, 10.0, &opts, Execution::Parallel)
        .records
        .into_iter()
        .find(|r| r.zeta_u.norm() > 1e-6)
        .expect("a homoclinic point of p-");
    let chain = (2..=6)
        .map(|k| {
            // f^{-k}(h) lies on W^u(p−) at ζ_u/ν_u^k; the orbit through it runs k steps
            // to h and k + 1 more along W^s back near the seed.
            let seed = wu.eval(h.zeta_u / wu.nu.powi(k)).unwrap();
            let s = saddle_from_seed(&f, seed, 2 * k as usize + 1)
                .unwrap_or_else(|| panic!("no saddle of period {}", 2 * k + 1));
            normalized_parametrization(&f, &s, Side::Unstable, 40, &cfg).unwrap()
        })
        .collect();
    Setup { wu, ws, chain }
}

#[test]
fn shadowing_saddles_cut_the_stable_curve_near_p() {
    let s = setup();
    let curves: Vec<&dyn ParamCurve> = s.chain.iter().map(|c| c as &dyn ParamCurve).collect();
    let rows = coalescence_experiment(&s.ws, &curves, 1.0, 1.0, &IntersectOptions::default());
    assert_eq!(rows.len(), s.chain.len());
    for w in rows.windows(2) {
        assert!(w[1].separation < w[0].separation, "{rows:?}");
        assert!(w[1].offset < w[0].offset, "{rows:?}");
    }
    let last = rows.last().unwrap();
    assert!(last.separation < 1e-2 && last.offset < 1e-5, "{last:?}");
    // The limit crossing is the transversal one of W^u(p−) with W^s(p−) at p−.
    let limit = s.wu.velocity().line_angle(&s.ws.velocity());
    assert!((last.angle - limit).abs() < 1e-3, "{} vs {limit}", last.angle);
}

#[test]
fn local_disks_depend_continuously_on_the_base_point() {
    let s = setup();
    let r = 0.5;
    let at_p = local_disk(&s.wu, 0, r).unwrap();
    let reference = disk_image_samples(&s.wu, &at_p, 32, 4).unwrap();
    let dists: Vec<(f64, f64)> = s
        .chain
        .iter()
        .map(|c| {
            let d = local_disk(c, 1, r).unwrap();
            let pts = disk_image_samples(c, &d, 32, 4).unwrap();
            (c.point().dist(&s.wu.point()), hausdorff_distance(&reference, &pts))
        })
        .collect();
    for w in dists.windows(2) {
        assert!(w[1].1 < w[0].1, "{dists:?}");
    }
    let (sep, haus) = *dists.last().unwrap();
    assert!(haus < 10.0 * sep, "{dists:?}");
}
