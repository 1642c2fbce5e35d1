use geoconvex_core::algebra::Instance;
use geoconvex_core::checker::{
    check_geodesic_phie_convex_fn, check_phie_convex_interval, check_slope_inequality, reevaluate_fn_witness,
    CheckConfig,
};
use geoconvex_core::exprlang::{Expr, Signature};
use geoconvex_core::manifold::{Manifold, Point};
use geoconvex_core::report::Verdict;
use geoconvex_core::rng::{tags, SampleStream};
use proptest::prelude::*;

fn unit(v: [f64; 3]) -> Option<Point> {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    (n > 1e-3).then(|| Point(v.iter().map(|x| x / n).collect()))
}

fn in_ball(v: [f64; 2]) -> Point {
    // Keep well away from the boundary where distances blow up.
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    let s = if n > 0.9 { 0.9 / n } else { 1.0 };
    Point(vec![v[0] * s, v[1] * s])
}

fn manifold_pair() -> impl Strategy<Value = (Manifold, Point, Point)> {
    let c = -1.0..1.0f64;
    prop_oneof![
        (prop::array::uniform2(-5.0..5.0f64), prop::array::uniform2(-5.0..5.0f64))
            .prop_map(|(a, b)| (Manifold::euclidean(2), Point(a.to_vec()), Point(b.to_vec()))),
        (prop::array::uniform3(c.clone()), prop::array::uniform3(c.clone()))
            .prop_filter_map("degenerate sphere pair", |(a, b)| {
                let (p, q) = (unit(a)?, unit(b)?);
                let dot: f64 = p.0.iter().zip(&q.0).map(|(x, y)| x * y).sum();
                (dot > -0.95).then(|| (Manifold::sphere(2), p, q))
            }),
        (prop::array::uniform2(c.clone()), prop::array::uniform2(c))
            .prop_map(|(a, b)| (Manifold::poincare_ball(2), in_ball(a), in_ball(b))),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn streams_are_deterministic_and_in_range(seed: u64, tag in 1u64..10, index: u64) {
        let mut a = SampleStream::new(seed, tag, index);
        let mut b = SampleStream::new(seed, tag, index);
        for _ in 0..16 {
            let (x, y) = (a.uniform(), b.uniform());
            prop_assert_eq!(x.to_bits(), y.to_bits());
            prop_assert!((0.0..1.0).contains(&x));
            prop_assert!(a.below(7) < 7 && b.below(7) < 7);
        }
    }

    #[test]
    fn geodesic_endpoints_are_exact((m, p, q) in manifold_pair()) {
        prop_assert_eq!(m.geodesic(&p, &q, 0.0).unwrap(), q.clone());
        prop_assert_eq!(m.geodesic(&p, &q, 1.0).unwrap(), p);
    }

    #[test]
    fn distance_is_symmetric((m, p, q) in manifold_pair()) {
        let (d1, d2) = (m.distance(&p, &q).unwrap(), m.distance(&q, &p).unwrap());
        prop_assert!((d1 - d2).abs() <= 1e-9 * (1.0 + d1), "{} vs {}", d1, d2);
    }

    #[test]
    fn geodesics_have_constant_speed((m, p, q) in manifold_pair(), s in 0.0..1.0f64, t in 0.0..1.0f64) {
        let d = m.distance(&p, &q).unwrap();
        let (gs, gt) = (m.geodesic(&p, &q, s).unwrap(), m.geodesic(&p, &q, t).unwrap());
        let dst = m.distance(&gs, &gt).unwrap();
        prop_assert!((dst - (s - t).abs() * d).abs() <= 1e-7 * (1.0 + d), "{} vs {}", dst, (s - t).abs() * d);
    }

    #[test]
    fn linear_expressions_evaluate(c in prop::array::uniform3(-50i32..50), x in -10.0..10.0f64, y in -10.0..10.0f64) {
        let src = format!("{} * x1 + {} * x2 + ({})", c[0], c[1], c[2]);
        let e = Expr::parse(&src, &Signature::coords(2)).unwrap();
        let want = c[0] as f64 * x + c[1] as f64 * y + c[2] as f64;
        let got = e.eval(&[x, y]).unwrap();
        prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }
}

fn poly_instance(a: f64, b: f64, c: f64) -> Instance {
    let h = format!("({a}) * x1^3 + ({b}) * x1^2 + ({c}) * x1");
    Instance::parse(Manifold::euclidean(1), &[(-1.5, 2.0)], None, &h, None, "a - b").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reports_are_deterministic(seed in 0u64..1_000, a in -1.0..1.0f64, b in -1.0..1.0f64) {
        let inst = poly_instance(a, b, 0.5);
        let cfg = CheckConfig { seed, samples: 400, ..CheckConfig::default() };
        let r1 = check_geodesic_phie_convex_fn(&inst, &cfg, false);
        let r2 = check_geodesic_phie_convex_fn(&inst, &cfg, false);
        prop_assert_eq!(serde_json::to_string(&r1).unwrap(), serde_json::to_string(&r2).unwrap());
    }

    #[test]
    fn witnesses_reevaluate_as_violations(seed in 0u64..1_000, a in -1.0..1.0f64, b in -1.0..1.0f64) {
        let inst = poly_instance(a, b, 0.0);
        let cfg = CheckConfig { seed, samples: 400, ..CheckConfig::default() };
        let r = check_geodesic_phie_convex_fn(&inst, &cfg, false);
        if r.verdict == Verdict::Violated {
            let w = r.witness.as_ref().unwrap();
            let v = reevaluate_fn_witness(&inst, w, true).unwrap();
            prop_assert!(v > cfg.threshold(w.rhs), "{} vs threshold {}", v, cfg.threshold(w.rhs));
            for w in &r.refined {
                prop_assert!(reevaluate_fn_witness(&inst, w, true).unwrap() > cfg.threshold(w.rhs));
            }
        }
    }

    #[test]
    fn interval_and_slope_forms_agree(seed in 0u64..1_000, a in -1.0..1.0f64, b in -1.0..1.0f64) {
        // On intervals with E = id and φ = a − b both forms say "h is convex".
        let inst = poly_instance(a, b, 0.0);
        let cfg = CheckConfig { seed, samples: 2_000, ..CheckConfig::default() };
        let i = check_phie_convex_interval(&inst, &cfg).verdict;
        let s = check_slope_inequality(&inst, &cfg).verdict;
        // x³ terms with |a| well below b/4.5 keep h'' ≥ 0 on the box; the clearly
        // convex and clearly nonconvex cases must agree.
        let hpp_min = (6.0 * a * -1.5 + 2.0 * b).min(6.0 * a * 2.0 + 2.0 * b);
        prop_assume!(hpp_min.abs() > 0.2);
        prop_assert_eq!(i, s);
        prop_assert_eq!(i.holds(), hpp_min > 0.0);
    }
}

#[test]
fn tags_are_distinct() {
    let all = [
        tags::PAIRS,
        tags::TRIPLES,
        tags::PRODUCT,
        tags::BIFUNCTION,
        tags::INVERSE,
        tags::DIRECTIONS,
        tags::VALUES,
        tags::GENERATOR,
        tags::PROBE,
    ];
    let mut sorted = all.to_vec();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted.len(), all.len());
}
