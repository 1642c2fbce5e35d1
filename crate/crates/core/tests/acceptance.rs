//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always show up in
//! `cargo test` output; exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use geoconvex_core::algebra::{check_monotone, check_seq_upper_bounded, Instance, Monotonicity, ProductSet, SequencePair};
use geoconvex_core::checker::{
    check_geodesic_phie_convex_fn, check_geodesic_phie_convex_set, check_phie_convex_interval, check_slope_inequality,
    reevaluate_fn_witness, CheckConfig,
};
use geoconvex_core::cli::{run_job, Command, JobSpec, RunOptions};
use geoconvex_core::exprlang::{EndoMap, ScalarFn};
use geoconvex_core::generator::Generator;
use geoconvex_core::manifold::{Manifold, Point};
use geoconvex_core::report::{Verdict, Witness};
use geoconvex_core::rng::SampleStream;
use geoconvex_core::theorems::{
    verify_closure, verify_composition, verify_intersection, verify_mean_value, verify_strict_differential,
    verify_three_point, ClosureKind,
};

const PIECEWISE_H: &str = "if(x1 >= 0, 1, -(x1^2))";
const PIECEWISE_SAMPLES: u64 = 100_000;
const PIECEWISE_MAX_VIOLATION: f64 = 1e-9;
const PIECEWISE_WITNESS_FLOOR: f64 = 0.5 - 1e-9;
const PIECEWISE_RUNTIME: Duration = Duration::from_secs(2);
const AGREEMENT_INSTANCES: u64 = 100;
const EPIGRAPH_INSTANCES: u64 = 50;
const EPIGRAPH_TOL: f64 = 1e-8;
const CLOSURE_INSTANCES: usize = 100;
const GEOMETRY_SAMPLES: u64 = 1000;
const RK4_TOL: f64 = 1e-6;
const ADDITIVITY_TOL: f64 = 1e-8;
const ROUND_TRIP_TOL: f64 = 1e-9;
const THREE_POINT_INSTANCES: usize = 100;
const MEAN_VALUE_INSTANCES: u64 = 20;
const MEAN_VALUE_BUDGET: f64 = 1e4;
const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn cfg(samples: u64) -> CheckConfig {
    CheckConfig {
        seed: SEED,
        samples,
        ..CheckConfig::default()
    }
}

fn line(lo: f64, hi: f64, h: &str, e: Option<&[&str]>, phi: &str) -> Instance {
    Instance::parse(Manifold::euclidean(1), &[(lo, hi)], None, h, e, phi).unwrap()
}

fn piecewise_example() -> Outcome {
    let c = cfg(PIECEWISE_SAMPLES);
    let mut problems = Vec::new();

    let constant = line(0.5, 2.0, PIECEWISE_H, Some(&["-1"]), "a - 2*b");
    let start = Instant::now();
    let r = check_phie_convex_interval(&constant, &c);
    let t_const = start.elapsed();
    if r.verdict != Verdict::HoldsOnSamples || r.max_violation > PIECEWISE_MAX_VIOLATION || r.samples_used < PIECEWISE_SAMPLES {
        problems.push(format!("E = -1: {} max_violation {:e}", r.verdict, r.max_violation));
    }
    // The geodesic form needs E(B) inside B, so widen the domain to contain -1.
    let wide = line(-2.0, 2.0, PIECEWISE_H, Some(&["-1"]), "a - 2*b");
    let g = check_geodesic_phie_convex_fn(&wide, &c, false);
    if !g.holds() {
        problems.push(format!("geodesic E = -1 on [-2, 2]: {}", g.verdict));
    }

    let identity = line(0.5, 2.0, PIECEWISE_H, None, "a - 2*b");
    let start = Instant::now();
    let r = check_phie_convex_interval(&identity, &c);
    let t_id = start.elapsed();
    let reeval = r
        .witness
        .as_ref()
        .map(|w| reevaluate_fn_witness(&identity, w, false).unwrap_or(f64::NAN));
    match reeval {
        Some(v) if r.verdict == Verdict::Violated && v >= PIECEWISE_WITNESS_FLOOR => {}
        _ => problems.push(format!("E = id: {} re-evaluated {reeval:?}", r.verdict)),
    }
    let grid = Witness {
        sample_index: 0,
        points: vec![Point(vec![1.0]), Point(vec![1.0])],
        t: 0.5,
        lhs: 0.0,
        rhs: 0.0,
        violation: 0.0,
    };
    let at_grid = reevaluate_fn_witness(&identity, &grid, false).unwrap();
    if (at_grid - 0.5).abs() > 1e-12 {
        problems.push(format!("grid value at u1 = u2 = 1, t = 0.5 is {at_grid}"));
    }
    if t_const > PIECEWISE_RUNTIME || t_id > PIECEWISE_RUNTIME {
        problems.push(format!("runtime {t_const:?} / {t_id:?}"));
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!(
                "E=-1 holds (max_violation <= 1e-9, {PIECEWISE_SAMPLES} samples, {t_const:.2?}); E=id violated, witness {:.3} >= 0.5 ({t_id:.2?})",
                reeval.unwrap()
            )
        } else {
            problems.join("; ")
        },
    )
}

fn interval_vs_slope() -> Outcome {
    let g = Generator::new(SEED);
    let c = cfg(20_000);
    let mut disagree = Vec::new();
    let mut violated = 0;
    for i in 0..AGREEMENT_INSTANCES {
        let inst = g.interval_instance(i);
        let a = check_phie_convex_interval(&inst, &c).verdict;
        let b = check_slope_inequality(&inst, &c).verdict;
        violated += (a == Verdict::Violated) as u32;
        if a != b {
            disagree.push(format!("#{i} {a} vs {b}"));
        }
    }
    outcome(
        disagree.is_empty(),
        format!(
            "{}/{AGREEMENT_INSTANCES} agree ({violated} violated, {} hold){}",
            AGREEMENT_INSTANCES as usize - disagree.len(),
            AGREEMENT_INSTANCES - violated as u64,
            if disagree.is_empty() { String::new() } else { format!("; {}", disagree.join(", ")) }
        ),
    )
}

fn euclidean_reduction() -> Outcome {
    let g = Generator::new(SEED);
    let c = cfg(20_000);
    let mut disagree = Vec::new();
    let mut violated = 0;
    for i in 0..AGREEMENT_INSTANCES {
        let inst = g.interval_instance(i);
        let a = check_geodesic_phie_convex_fn(&inst, &c, false).verdict;
        let b = check_phie_convex_interval(&inst, &c).verdict;
        violated += (b == Verdict::Violated) as u32;
        if a != b {
            disagree.push(format!("#{i} {a} vs {b}"));
        }
    }
    outcome(
        disagree.is_empty(),
        format!(
            "{}/{AGREEMENT_INSTANCES} agree ({violated} violated){}",
            AGREEMENT_INSTANCES as usize - disagree.len(),
            if disagree.is_empty() { String::new() } else { format!("; {}", disagree.join(", ")) }
        ),
    )
}

fn epigraph_characterization() -> Outcome {
    let g = Generator::new(SEED);
    let c = CheckConfig {
        tol_abs: EPIGRAPH_TOL,
        tol_rel: EPIGRAPH_TOL,
        ..cfg(10_000)
    };
    let mut problems = Vec::new();
    let (mut both_hold, mut both_violated) = (0, 0);
    for i in 0..EPIGRAPH_INSTANCES {
        let inst = g.epigraph_instance(i);
        let mono = check_monotone(&inst.phi, &[Monotonicity::First, Monotonicity::OffsetSecond], 10.0, &c);
        if !mono.holds() {
            problems.push(format!("#{i} phi not non-decreasing"));
            continue;
        }
        let f = check_geodesic_phie_convex_fn(&inst, &c, false).verdict;
        let set = ProductSet::epigraph(&inst, ProductSet::default_v_range(&inst, c.seed));
        let s = check_geodesic_phie_convex_set(&inst.e, &inst.phi, &set, &c).verdict;
        match (f, s) {
            (Verdict::HoldsOnSamples, Verdict::HoldsOnSamples) => both_hold += 1,
            (Verdict::Violated, Verdict::Violated) => both_violated += 1,
            _ => problems.push(format!("#{i} fn {f} vs epigraph {s} ({})", inst.h.label)),
        }
    }
    outcome(
        problems.is_empty(),
        format!(
            "{both_hold} both hold, {both_violated} both violated of {EPIGRAPH_INSTANCES}{}",
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join(", ")) }
        ),
    )
}

/// Runs `verify` on generated instances until `CLOSURE_INSTANCES` pass their
/// premises; returns (premise-passing, conclusion violations, attempts).
fn closure_kind<F>(mut verify: F) -> (usize, Vec<String>, u64)
where
    F: FnMut(u64) -> Verdict,
{
    let mut passed = 0;
    let mut bad = Vec::new();
    let mut i = 0;
    while passed < CLOSURE_INSTANCES && i < 20 * CLOSURE_INSTANCES as u64 {
        match verify(i) {
            Verdict::PremiseFailed => {}
            Verdict::HoldsOnSamples => passed += 1,
            v => {
                passed += 1;
                bad.push(format!("#{i} {v}"));
            }
        }
        i += 1;
    }
    (passed, bad, i)
}

fn closure_suite() -> Outcome {
    let g = Generator::new(SEED);
    let c = cfg(3_000);
    let kinds: [(&str, Box<dyn Fn(u64) -> Verdict>); 5] = [
        (
            "Scaling",
            Box::new(|i| {
                let (insts, w) = g.closure_family(i, 1);
                verify_closure(ClosureKind::Scaling, &insts, &w, &c).unwrap().verdict
            }),
        ),
        (
            "Sum",
            Box::new(|i| {
                let (insts, _) = g.closure_family(i, 2);
                verify_closure(ClosureKind::Sum, &insts, &[], &c).unwrap().verdict
            }),
        ),
        (
            "WeightedSum",
            Box::new(|i| {
                let (insts, w) = g.closure_family(i, 3);
                verify_closure(ClosureKind::WeightedSum, &insts, &w, &c).unwrap().verdict
            }),
        ),
        (
            "Composition",
            Box::new(|i| {
                let (h1, h2) = g.composition_pair(i);
                verify_composition(&h1, &h2, &c).unwrap().verdict
            }),
        ),
        (
            "Intersection",
            Box::new(|i| {
                let (e, phi, sets) = g.intersection_sets(i);
                verify_intersection(&e, &phi, &sets, &c).unwrap().verdict
            }),
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, f) in &kinds {
        let (passed, bad, tried) = closure_kind(f);
        pass &= passed == CLOSURE_INSTANCES && bad.is_empty();
        parts.push(if bad.is_empty() {
            format!("{name} {passed}/{tried}")
        } else {
            format!("{name} {passed}/{tried} violations [{}]", bad.join(", "))
        });
    }
    outcome(pass, format!("premise-passing/attempted, zero conclusion violations: {}", parts.join(", ")))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn sphere_point(s: &mut SampleStream, n: usize) -> Point {
    let v: Vec<f64> = (0..n).map(|_| s.normal()).collect();
    let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Point(v.iter().map(|x| x / r).collect())
}

fn ball_point(s: &mut SampleStream, n: usize) -> Point {
    let dir = sphere_point(s, n);
    let r = 0.9 * s.uniform();
    Point(dir.0.iter().map(|x| r * x).collect())
}

/// RK4 for `x'' = -|x'|² x` on the unit sphere from `x(0) = p`, `x'(0) = v`.
fn rk4_sphere(p: &[f64], v: &[f64], t: f64, steps: usize) -> Vec<f64> {
    let n = p.len();
    let f = |y: &[f64]| -> Vec<f64> {
        let (x, w) = y.split_at(n);
        let s: f64 = w.iter().map(|a| a * a).sum();
        w.iter().copied().chain(x.iter().map(|a| -s * a)).collect()
    };
    let mut y: Vec<f64> = p.iter().chain(v).copied().collect();
    let h = t / steps as f64;
    let axpy = |y: &[f64], k: &[f64], c: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + c * b).collect() };
    for _ in 0..steps {
        let k1 = f(&y);
        let k2 = f(&axpy(&y, &k1, h / 2.0));
        let k3 = f(&axpy(&y, &k2, h / 2.0));
        let k4 = f(&axpy(&y, &k3, h));
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y.truncate(n);
    y
}

fn geometry_accuracy() -> Outcome {
    let mut worst_rk4: f64 = 0.0;
    let mut worst_add: f64 = 0.0;
    let mut worst_rt: f64 = 0.0;
    let mut problems = Vec::new();
    for dim in [2usize, 3] {
        let m = Manifold::sphere(dim);
        for i in 0..GEOMETRY_SAMPLES {
            let mut s = SampleStream::new(SEED, 100 + dim as u64, i);
            let (p1, p2) = (sphere_point(&mut s, dim + 1), sphere_point(&mut s, dim + 1));
            if dist(&p1.0, &p2.0.iter().map(|x| -x).collect::<Vec<_>>()) < 1e-3 {
                continue;
            }
            let t = s.uniform();
            let v = m.log_map(&p2, &p1).unwrap();
            let oracle = rk4_sphere(&p2.0, &v, t, 400);
            let got = m.geodesic(&p1, &p2, t).unwrap();
            worst_rk4 = worst_rk4.max(dist(&oracle, &got.0));
        }
    }
    let manifolds = [Manifold::euclidean(3), Manifold::sphere(2), Manifold::poincare_ball(3)];
    for m in manifolds {
        for i in 0..GEOMETRY_SAMPLES {
            let mut s = SampleStream::new(SEED, 200, i);
            let (p, q) = match m.kind {
                geoconvex_core::manifold::ManifoldKind::Euclidean => (
                    Point((0..3).map(|_| s.uniform_in(-5.0, 5.0)).collect()),
                    Point((0..3).map(|_| s.uniform_in(-5.0, 5.0)).collect()),
                ),
                geoconvex_core::manifold::ManifoldKind::Sphere => (sphere_point(&mut s, 3), sphere_point(&mut s, 3)),
                geoconvex_core::manifold::ManifoldKind::PoincareBall => (ball_point(&mut s, 3), ball_point(&mut s, 3)),
            };
            if m.kind == geoconvex_core::manifold::ManifoldKind::Sphere
                && dist(&p.0, &q.0.iter().map(|x| -x).collect::<Vec<_>>()) < 1e-3
            {
                continue;
            }
            let t = s.uniform();
            let total = m.distance(&p, &q).unwrap();
            let mid = m.geodesic(&p, &q, t).unwrap();
            let split = m.distance(&q, &mid).unwrap() + m.distance(&mid, &p).unwrap();
            worst_add = worst_add.max((split - total).abs());
            let v = m.log_map(&p, &q).unwrap();
            let back = m.exp_map(&p, &v).unwrap();
            worst_rt = worst_rt.max(dist(&back.0, &q.0));
        }
    }
    if worst_rk4 > RK4_TOL {
        problems.push("rk4");
    }
    if worst_add > ADDITIVITY_TOL {
        problems.push("additivity");
    }
    if worst_rt > ROUND_TRIP_TOL {
        problems.push("round trip");
    }
    outcome(
        problems.is_empty(),
        format!(
            "max |slerp - RK4| {worst_rk4:.1e} (tol 1e-6), additivity {worst_add:.1e} (tol 1e-8), exp/log {worst_rt:.1e} (tol 1e-9){}",
            if problems.is_empty() { String::new() } else { format!("; failed: {}", problems.join(", ")) }
        ),
    )
}

fn three_point() -> Outcome {
    let g = Generator::new(SEED);
    let c = cfg(3_000);
    let (mut passed, mut divided_failures, mut i) = (0, 0, 0u64);
    let mut bad = Vec::new();
    while passed < THREE_POINT_INSTANCES && i < 10 * THREE_POINT_INSTANCES as u64 {
        let (inst, mu) = g.three_point_case(i);
        let tr = verify_three_point(&inst, mu[0], mu[1], mu[2], &c);
        match tr.verdict {
            Verdict::PremiseFailed => {}
            v => {
                passed += 1;
                if v != Verdict::HoldsOnSamples {
                    bad.push(format!("#{i} {v}"));
                }
                if tr.flags.get("divided_form_holds") == Some(&false) {
                    divided_failures += 1;
                }
            }
        }
        i += 1;
    }
    outcome(
        passed == THREE_POINT_INSTANCES && bad.is_empty(),
        format!(
            "undivided form holds on {}/{passed} premise-passing ({i} attempted); printed divided form fails on {divided_failures} (logged only){}",
            passed - bad.len(),
            if bad.is_empty() { String::new() } else { format!("; {}", bad.join(", ")) }
        ),
    )
}

fn mean_value() -> Outcome {
    let g = Generator::new(SEED);
    let c = cfg(3_000);
    let mut bad = Vec::new();
    let mut max_evals: f64 = 0.0;
    for i in 0..MEAN_VALUE_INSTANCES {
        let (inst, u1, u2) = g.mean_value_case(i);
        let tr = verify_mean_value(&inst, u1, u2, &c);
        let evals = tr.values.get("evaluations").copied().unwrap_or(f64::INFINITY);
        max_evals = max_evals.max(evals);
        if tr.verdict != Verdict::HoldsOnSamples || evals > MEAN_VALUE_BUDGET {
            bad.push(format!("#{i} {} ({evals} evaluations)", tr.verdict));
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "witness pairs on {}/{MEAN_VALUE_INSTANCES}, max {max_evals} evaluations (budget 1e4){}",
            MEAN_VALUE_INSTANCES as usize - bad.len(),
            if bad.is_empty() { String::new() } else { format!("; {}", bad.join(", ")) }
        ),
    )
}

fn jobs() -> Vec<(Command, String)> {
    let g = Generator::new(SEED);
    let inst = g.interval_instance(3);
    let generated = format!(
        r#"{{"manifold": {{"kind": "euclidean", "dim": 1}}, "domain": {{"box": [[{lo}, {hi}]]}},
            "h": "{h}", "E": "{e}", "phi": "{phi}", "config": {{"samples": 20000}}}}"#,
        lo = inst.domain.base().lo[0],
        hi = inst.domain.base().hi[0],
        h = inst.h.label,
        e = inst.e.label.trim_matches(|c| c == '[' || c == ']'),
        phi = inst.phi.label,
    );
    let piecewise = |e: &str| {
        format!(
            r#"{{"manifold": {{"kind": "euclidean", "dim": 1}}, "domain": {{"box": [[0.5, 2.0]]}},
                "h": "{PIECEWISE_H}", "E": "{e}", "phi": "a - 2*b", "mode": "interval", "config": {{"samples": 100000}}}}"#
        )
    };
    let quad = r#"{"manifold": {"kind": "euclidean", "dim": 1}, "domain": {"box": [[-1, 1]]},
        "h": "x1^2", "theorem": "EpigraphEquiv", "config": {"samples": 20000}}"#;
    let cap = r#"{"manifold": {"kind": "sphere", "dim": 2},
        "domain": {"box": [[-1, 1], [-1, 1], [-1, 1]], "membership": "x3 - 0.5"},
        "h": "acos(x3)^2", "strict": true, "config": {"samples": 20000}}"#;
    vec![
        (Command::Check, piecewise("-1")),
        (Command::Check, piecewise("identity")),
        (Command::Check, generated),
        (Command::Verify, quad.to_string()),
        (Command::Check, cap.to_string()),
        (Command::Search, piecewise("identity")),
    ]
}

fn determinism() -> Outcome {
    let mut bad = Vec::new();
    let jobs = jobs();
    for (k, (cmd, src)) in jobs.iter().enumerate() {
        let spec = JobSpec::from_json(src).unwrap();
        let render = |workers: usize| {
            let opts = RunOptions {
                workers: Some(workers),
                ..RunOptions::default()
            };
            run_job(spec.clone(), *cmd, &opts).unwrap().to_json()
        };
        let one = render(1);
        let eight = render(8);
        let again = render(8);
        if one != eight || eight != again {
            bad.push(format!("job {k}"));
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "{}/{} jobs byte-identical across runs and 1 vs 8 workers{}",
            jobs.len() - bad.len(),
            jobs.len(),
            if bad.is_empty() { String::new() } else { format!("; differing: {}", bad.join(", ")) }
        ),
    )
}

fn negative_controls() -> Outcome {
    let c = cfg(5_000);
    let diff = geoconvex_core::exprlang::Bifunction::difference();
    let seqs = [SequencePair {
        u: vec![1.0, 0.0],
        v: vec![0.0, 1.0],
    }];
    let seq = check_seq_upper_bounded(&diff, &EndoMap::identity(1), &seqs, &c).unwrap();
    let affine = line(-1.0, 1.0, "2*x1 + 1", None, "a - b");
    let strict = verify_strict_differential(&affine, &c);
    let sq = line(-1.0, 1.0, "x1^2", None, "a - b");
    let exp = sq.with_h(ScalarFn::parse("exp(x1)", 1).unwrap());
    let sup = verify_closure(ClosureKind::SupFamily, &[sq, exp], &[], &c).unwrap();
    let ok_seq = seq.verdict == Verdict::Violated
        && seq
            .witness
            .as_ref()
            .is_some_and(|w| (w.lhs - 1.0).abs() < 1e-12 && w.rhs.abs() < 1e-12);
    let pass = ok_seq && strict.verdict == Verdict::PremiseFailed && sup.verdict == Verdict::PremiseFailed;
    outcome(
        pass,
        format!(
            "seq_upper_bounded(a-b) {} (sup 1 vs 0), strict-differential(affine) {}, SupFamily(a-b) {}",
            seq.verdict, strict.verdict, sup.verdict
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("piecewise example reproduction", piecewise_example),
        ("interval vs slope inequality", interval_vs_slope),
        ("Euclidean reduction", euclidean_reduction),
        ("epigraph characterization", epigraph_characterization),
        ("closure implications", closure_suite),
        ("geometry accuracy", geometry_accuracy),
        ("three-point undivided inequality", three_point),
        ("mean-value witnesses", mean_value),
        ("determinism", determinism),
        ("negative controls", negative_controls),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        failed += !o.pass as usize;
        println!(
            "{} criterion {:>2} {name} [{:.1?}]: {}",
            if o.pass { "PASS" } else { "FAIL" },
            k + 1,
            start.elapsed(),
            o.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
