use escdim::catalog::{eval_g, FunctionSpec, SeriesFunctionSpec};
use escdim::dimension::{box_count, mcmullen_bound, CoverSequence};
use escdim::dynamics::{classify_grid, Classification, GridSpec};
use escdim::geometry::{koebe_constants, spherical_distance, PlanePoint, Rect};
use escdim::verifier::{choose_forest_params, validate_forest_params, LayoutDisk};
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = PlanePoint> {
    (-1e3..1e3f64, -1e3..1e3f64).prop_map(|(re, im)| PlanePoint::finite(re, im))
}

fn point() -> impl Strategy<Value = PlanePoint> {
    prop_oneof![9 => finite(), 1 => Just(PlanePoint::INFINITY)]
}

proptest! {
    #[test]
    fn spherical_distance_is_a_bounded_metric(a in point(), b in point(), c in point()) {
        let ab = spherical_distance(a, b);
        prop_assert_eq!(ab, spherical_distance(b, a));
        prop_assert!(ab <= 2.0 + 1e-15);
        prop_assert!(ab <= spherical_distance(a, c) + spherical_distance(c, b) + 1e-12);
    }

    #[test]
    fn distance_to_infinity_decreases(r in 0.0..1e6f64, s in 0.0..1e6f64, t in 0.0..6.3f64) {
        let (lo, hi) = if r < s { (r, s) } else { (s, r) };
        let d = |m: f64| spherical_distance(PlanePoint::from_polar(m, t), PlanePoint::INFINITY);
        prop_assert!((d(lo) - 2.0 / (1.0 + lo * lo).sqrt()).abs() < 1e-12);
        prop_assert!(d(hi) <= d(lo));
    }

    #[test]
    fn polar_round_trip(p in finite()) {
        let (r, t) = p.to_polar();
        let q = PlanePoint::from_polar(r, t);
        prop_assert!(p.distance(&q) <= 1e-12 * p.modulus().max(1e-300));
    }

    #[test]
    fn koebe_constants_are_monotone(a in 0.001..0.998f64, step in 0.0001..0.001f64) {
        let k = koebe_constants(a).unwrap();
        let l = koebe_constants(a + step).unwrap();
        prop_assert!(l.offset_upper > k.offset_upper);
        prop_assert!(l.deriv_upper > k.deriv_upper);
        prop_assert!(l.deriv_lower < k.deriv_lower);
        prop_assert!(k.deriv_lower <= 1.0 && 1.0 <= k.deriv_upper);
        prop_assert!(k.offset_lower <= k.offset_upper);
    }

    #[test]
    fn box_count_is_nonincreasing_in_size(
        pts in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 1..200),
        k in 1u32..10,
    ) {
        let region = Rect::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let pts: Vec<PlanePoint> = pts.into_iter().map(|(x, y)| PlanePoint::finite(x, y)).collect();
        let fine = box_count(&pts, 2f64.powi(-(k as i32) - 1), &region).unwrap();
        let coarse = box_count(&pts, 2f64.powi(-(k as i32)), &region).unwrap();
        prop_assert!(coarse <= fine);
    }

    #[test]
    fn squaring_diameters_halves_the_codimension(delta in 0.01..1.0f64, c in 0.001..0.9f64, levels in 3usize..60) {
        let a = CoverSequence::new(&vec![delta; levels], &(1..=levels).map(|l| c.powi(l as i32)).collect::<Vec<_>>(), 2);
        let b = CoverSequence::from_logs(vec![delta.ln(); levels], (1..=levels).map(|l| 2.0 * l as f64 * c.ln()).collect(), 2).unwrap();
        // skip cases where c^l underflows to zero
        if let Ok(a) = a {
            let ba = mcmullen_bound(&a).unwrap().value;
            let bb = mcmullen_bound(&b).unwrap().value;
            prop_assert!(((2.0 - bb) - (2.0 - ba) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn series_commutes_with_conjugation(p in finite()) {
        let spec = SeriesFunctionSpec::new(2.0, 1).unwrap();
        match (eval_g(p, &spec), eval_g(p.conj(), &spec)) {
            (Ok(a), Ok(b)) if !a.is_pole => {
                let tol = 1e-10 * a.value.modulus().max(1.0) + a.truncation_bound + b.truncation_bound;
                prop_assert!(a.value.conj().distance(&b.value) <= tol);
            }
            _ => {}
        }
    }
}

fn fuzzed_layout(raw: &[(f64, f64, f64)]) -> Vec<LayoutDisk> {
    let mut out: Vec<LayoutDisk> = Vec::new();
    for &(m, t, r) in raw {
        let d = LayoutDisk {
            center: PlanePoint::from_polar(2.0 + r + m, t),
            radius: r,
        };
        let clear = out
            .iter()
            .all(|e| e.center.distance(&d.center) > e.radius + d.radius + 1e-9);
        if clear {
            out.push(d);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn chooser_output_always_validates(
        raw in prop::collection::vec((0.05..40.0f64, 0.0..6.28f64, 0.05..0.95f64), 1..12),
        budget in 0.05..0.49f64,
    ) {
        let layout = fuzzed_layout(&raw);
        let spec = choose_forest_params(&layout, budget).unwrap();
        let report = validate_forest_params(&spec);
        prop_assert!(report.pass, "{:?}", report.first_failure());
    }
}

#[test]
fn escaping_sets_shrink_with_radius_and_horizon() {
    let f = FunctionSpec::Series(SeriesFunctionSpec::new(2.0, 1).unwrap());
    let grid = GridSpec::new(Rect::centered_square(8.0).unwrap(), 60, 60).unwrap();
    let esc = |r: f64, h: u32| -> Vec<bool> {
        classify_grid(&f, grid, r, h)
            .unwrap()
            .cells
            .iter()
            .map(|&c| c == Classification::Escaping)
            .collect()
    };
    let subset = |a: &[bool], b: &[bool]| a.iter().zip(b).all(|(x, y)| !x || *y);
    for h in 1..4 {
        assert!(subset(&esc(100.0, h), &esc(10.0, h)));
        assert!(subset(&esc(10.0, h + 1), &esc(10.0, h)));
    }
    assert!(esc(10.0, 1).iter().any(|&e| e));
}
