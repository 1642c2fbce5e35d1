//! Implication soundness on generated instances: whenever every premise
//! holds on samples, the conclusion must hold too.

use geoconvex_core::algebra::Instance;
use geoconvex_core::checker::CheckConfig;
use geoconvex_core::exprlang::Bifunction;
use geoconvex_core::generator::Generator;
use geoconvex_core::manifold::{Manifold, Point};
use geoconvex_core::report::{TheoremReport, Verdict};
use geoconvex_core::space::Diffeo;
use geoconvex_core::theorems::*;

const PER_ID: u64 = 12;

fn cfg() -> CheckConfig {
    CheckConfig {
        seed: 99,
        samples: 1_500,
        ..CheckConfig::default()
    }
}

fn sound(tr: &TheoremReport) -> Result<(), String> {
    let premises_hold = tr.premise_reports.iter().all(|p| p.holds());
    match tr.verdict {
        Verdict::PremiseFailed => {
            if premises_hold || tr.conclusion_report.is_some() {
                return Err(format!("{}: PremiseFailed without a failing premise report", tr.id));
            }
        }
        v => {
            if !premises_hold {
                return Err(format!("{}: {v} with a failing premise", tr.id));
            }
            if v != Verdict::HoldsOnSamples {
                return Err(format!("{}: premises hold but conclusion is {v}: {tr:#?}", tr.id));
            }
        }
    }
    Ok(())
}

fn check_all(id: TheoremId, mut run: impl FnMut(u64) -> TheoremReport) {
    let mut passing = 0;
    for i in 0..PER_ID {
        let tr = run(i);
        assert_eq!(tr.id, id.name());
        if let Err(e) = sound(&tr) {
            panic!("instance {i}: {e}");
        }
        passing += tr.verdict.holds() as u32;
    }
    assert!(passing > 0, "{id}: no generated instance passed its premises");
}

fn gen() -> Generator {
    Generator::new(4242)
}

#[test]
fn calculus_results() {
    let g = gen();
    let c = cfg();
    check_all(TheoremId::MeanValue31, |i| {
        let (inst, u1, u2) = g.mean_value_case(i);
        verify_mean_value(&inst, u1, u2, &c)
    });
    check_all(TheoremId::ThreePoint32, |i| {
        let (inst, mu) = g.three_point_case(i);
        verify_three_point(&inst, mu[0], mu[1], mu[2], &c)
    });
    check_all(TheoremId::StrictDifferential, |i| {
        let (inst, _, _) = g.mean_value_case(i);
        verify_strict_differential(&inst, &c)
    });
}

#[test]
fn closure_results() {
    let g = gen();
    let c = cfg();
    check_all(TheoremId::Scaling41a, |i| {
        let (insts, w) = g.closure_family(i, 1);
        verify_closure(ClosureKind::Scaling, &insts, &w, &c).unwrap()
    });
    check_all(TheoremId::Sum41b, |i| {
        let (insts, _) = g.closure_family(i, 2);
        verify_closure(ClosureKind::Sum, &insts, &[], &c).unwrap()
    });
    check_all(TheoremId::WeightedSum, |i| {
        let (insts, w) = g.closure_family(i, 3);
        verify_closure(ClosureKind::WeightedSum, &insts, &w, &c).unwrap()
    });
    // A constant-shifted φ = a − b + 1 is sequentially upper bounded, so the
    // supremum closure has passing instances too.
    check_all(TheoremId::SupFamily, |i| {
        let (insts, _) = g.closure_family(i, 2);
        let phi = if i % 2 == 0 { Bifunction::parse("a - b + 1").unwrap() } else { insts[0].phi.clone() };
        let insts: Vec<Instance> = insts.iter().map(|x| x.with_phi(phi.clone())).collect();
        verify_closure(ClosureKind::SupFamily, &insts, &[], &c).unwrap()
    });
    check_all(TheoremId::Composition, |i| {
        let (h1, h2) = g.composition_pair(i);
        verify_composition(&h1, &h2, &c).unwrap()
    });
}

#[test]
fn limit_results() {
    let g = gen();
    let c = CheckConfig {
        samples: 600,
        ..cfg()
    };
    let limit = Bifunction::difference();
    let phis = expand_phi_template("a - b + 1/i", 12).unwrap();
    let terms = expand_phi_template("if(i <= 1, a - b + 1, -(2^(1 - i)))", 12).unwrap();
    check_all(TheoremId::PhiLimit, |i| {
        let (inst, _, _) = g.mean_value_case(i);
        verify_phi_limit(&inst, &phis, &limit, LimitMode::Pointwise, &c).unwrap()
    });
    check_all(TheoremId::PhiSeriesLimit, |i| {
        let (inst, _, _) = g.mean_value_case(i);
        verify_phi_limit(&inst, &terms, &limit, LimitMode::PartialSums, &c).unwrap()
    });
}

#[test]
fn geometry_results() {
    let g = gen();
    let c = cfg();
    check_all(TheoremId::DiffeoInvariance, |i| {
        let (insts, _) = g.closure_family(i, 1);
        let chart = Diffeo::affine(insts[0].dim(), 0.5 + (i % 4) as f64, -1.0).unwrap();
        verify_diffeo_invariance(&insts[0], &chart, &c).unwrap()
    });
    check_all(TheoremId::ChartContinuity, |i| {
        let (inst, _, _) = g.mean_value_case(i);
        let inst = inst.with_phi(Bifunction::parse("40").unwrap());
        let chart = Diffeo::affine(1, 2.0, 0.5).unwrap();
        verify_chart_continuity(&inst, &chart, 40.0, &c).unwrap()
    });
    check_all(TheoremId::ContinuityBound, |i| {
        let (inst, _, _) = g.mean_value_case(i);
        let inst = inst.with_phi(Bifunction::parse("40").unwrap());
        let dom = inst.domain.base();
        let eps = 0.1 * (dom.hi[0] - dom.lo[0]);
        verify_continuity_bound(&inst, 40.0, eps, &c).unwrap()
    });
    check_all(TheoremId::LocalMin, |i| {
        let (inst, _, _) = g.mean_value_case(i);
        // The grid minimizer of h; on the boundary the interior premise fails.
        let dom = inst.domain.base();
        let (lo, hi) = (dom.lo[0], dom.hi[0]);
        let best = (0..=2000)
            .map(|k| lo + (hi - lo) * k as f64 / 2000.0)
            .min_by(|a, b| inst.h.eval_coords(&[*a]).unwrap().total_cmp(&inst.h.eval_coords(&[*b]).unwrap()))
            .unwrap();
        verify_local_min(&inst, &Point(vec![best]), &c)
    });
}

#[test]
fn epigraph_results() {
    let g = gen();
    let c = cfg();
    check_all(TheoremId::EpigraphEquiv, |i| verify_epigraph_equiv(&g.epigraph_instance(i), &c));
    check_all(TheoremId::Intersection52, |i| {
        let (e, phi, sets) = g.intersection_sets(i);
        verify_intersection(&e, &phi, &sets, &c).unwrap()
    });
    check_all(TheoremId::SupEpigraphCor, |i| {
        let (insts, _) = g.closure_family(i, 2);
        verify_sup_epigraph_cor(&insts, &c).unwrap()
    });
}

#[test]
fn epigraph_agreement_runs_both_ways() {
    let c = cfg();
    let mut seen = (false, false);
    for i in 0..30 {
        let tr = verify_epigraph_equiv(&gen().epigraph_instance(i), &c);
        if tr.verdict.holds() {
            match tr.flags["function_convex"] {
                true => seen.0 = true,
                false => seen.1 = true,
            }
        }
    }
    assert!(seen.0 && seen.1, "both directions should occur: {seen:?}");
}

#[test]
fn sphere_cap_examples() {
    let c = cfg();
    let cap = Instance::parse(
        Manifold::sphere(2),
        &[(-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)],
        Some("x3 - 0.5"),
        "acos(x3)^2",
        None,
        "a - b",
    )
    .unwrap();
    sound(&verify_local_min(&cap, &Point(vec![0.0, 0.0, 1.0]), &c)).unwrap();
    let tr = verify_strict_differential(&cap, &c);
    sound(&tr).unwrap();
    assert!(tr.verdict.holds(), "{tr:#?}");
}
