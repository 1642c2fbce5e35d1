use super::{derivative_slack, fault_report, is_line, run_points, single, ParamProbe, SampleProbe, TheoremId};
use crate::algebra::{check_antisymmetric, Instance};
use crate::checker::engine::{self, golden_max, EngineOpts, Sides};
use crate::checker::probes::STRICT_MIN_SEPARATION;
use crate::checker::{apply_map, check_geodesic_phie_convex_fn, check_phie_convex_interval, CheckConfig};
use crate::exprlang::differentiate_numeric;
use crate::manifold::Point;
use crate::report::{Report, TheoremReport, Verdict, Witness};
use crate::rng::tags;
use crate::space::Fault;

/// Minimum gap between the endpoint derivatives counted as "different".
pub const STRICT_DERIVATIVE_GAP: f64 = 1e-6;

const MEAN_VALUE_GRID: usize = 64;

fn line_values(inst: &Instance, us: &[f64]) -> Result<(Vec<f64>, Vec<f64>), Fault> {
    let mut es = Vec::with_capacity(us.len());
    let mut hs = Vec::with_capacity(us.len());
    for &u in us {
        let e = apply_map(&inst.space, &inst.e, &Point(vec![u]))?;
        hs.push(inst.h_at(&e)?);
        es.push(e.0[0]);
    }
    Ok((es, hs))
}

fn derivative(inst: &Instance, x: f64) -> Result<f64, Fault> {
    Ok(differentiate_numeric(&inst.h, &Point(vec![x]), &[1.0])?)
}

fn in_domain(name: &str, inst: &Instance, us: &[f64], cfg: &CheckConfig) -> Report {
    match us.iter().find(|u| !inst.domain.contains(&[**u])) {
        Some(u) => Report::failed_condition(name, cfg.seed, format!("{u} is not in the domain")),
        None => Report::new(name, cfg.seed),
    }
}

/// Searches `E(α), E(β)` strictly between `E(u₂)` and `E(u₁)` with
/// `h′(E α) ≥ R·h′(E β) ≥ h′(E β)`, `R = φ(h(E u₁), h(E u₂)) / (h(E u₁) − h(E u₂))`.
///
/// A 64-point grid locates the best `α` (largest `h′`) and the best `β`
/// (largest margin of both inequalities), each then refined by golden-section
/// search within one grid cell.
pub fn verify_mean_value(inst: &Instance, u1: f64, u2: f64, cfg: &CheckConfig) -> TheoremReport {
    const NAME: &str = "mean_value_pair";
    let mut tr = TheoremReport::new(TheoremId::MeanValue31.name());
    if !is_line(inst) {
        return tr.conclude(Report::domain_error(NAME, cfg.seed, "needs a Euclidean(1) instance"));
    }
    if !tr.premise(in_domain("points_in_domain", inst, &[u1, u2], cfg)) {
        return tr.fail_premise();
    }
    let (es, hs) = match line_values(inst, &[u1, u2]) {
        Ok(v) => v,
        Err(f) => return tr.conclude(fault_report(NAME, cfg, f)),
    };
    let (e1, e2, h1, h2) = (es[0], es[1], hs[0], hs[1]);
    let distinct = if (h1 - h2).abs() > cfg.threshold(h2) {
        Report::new("distinct_values", cfg.seed)
    } else {
        Report::failed_condition("distinct_values", cfg.seed, format!("h(E u1) = h(E u2) = {h1}"))
    };
    if !tr.premise(distinct) {
        return tr.fail_premise();
    }
    if !tr.premise(check_phie_convex_interval(inst, cfg)) {
        return tr.fail_premise();
    }
    let phi = match inst.phi.eval(h1, h2) {
        Ok(v) => v,
        Err(f) => return tr.conclude(fault_report(NAME, cfg, f)),
    };
    let pts = vec![Point(vec![e1]), Point(vec![e2])];
    let dominates = single("phi_dominates_difference", cfg, pts.clone(), Sides::le(h1 - h2, phi, 1.0));
    if !tr.premise(dominates) {
        return tr.fail_premise();
    }

    let r = phi / (h1 - h2);
    let (lo, hi) = (e1.min(e2), e1.max(e2));
    let width = hi - lo;
    let inset = width * 1e-9;
    let (lo_in, hi_in) = (lo + inset, hi - inset);
    let cell = width / MEAN_VALUE_GRID as f64;
    let grid: Vec<f64> = (0..MEAN_VALUE_GRID).map(|k| lo + (k as f64 + 0.5) * cell).collect();
    let mut evaluations = 0u64;
    let mut fault = None;
    let mut d = |x: f64| -> f64 {
        evaluations += 1;
        match derivative(inst, x) {
            Ok(v) => v,
            Err(f) => {
                fault.get_or_insert(f);
                f64::NAN
            }
        }
    };
    let dgrid: Vec<f64> = grid.iter().map(|&x| d(x)).collect();
    let k_alpha = argmax(&dgrid);
    let (alpha, d_alpha) = {
        let c = grid[k_alpha];
        let (s, v) = golden_max(&mut |x| d(x), (c - cell).max(lo_in), (c + cell).min(hi_in));
        if v > dgrid[k_alpha] {
            (s, v)
        } else {
            (c, dgrid[k_alpha])
        }
    };
    let margin = |db: f64| (d_alpha - r * db).min((r - 1.0) * db);
    let mgrid: Vec<f64> = dgrid.iter().map(|&db| margin(db)).collect();
    let k_beta = argmax(&mgrid);
    let (beta, d_beta) = {
        let c = grid[k_beta];
        let mut best = (c, dgrid[k_beta]);
        let (s, _) = golden_max(&mut |x| margin(d(x)), (c - cell).max(lo_in), (c + cell).min(hi_in));
        let ds = d(s);
        if margin(ds) > margin(best.1) {
            best = (s, ds);
        }
        best
    };
    if let Some(f) = fault {
        return tr.conclude(fault_report(NAME, cfg, f));
    }
    let m = margin(d_beta);
    let rhs = r * d_beta;
    let threshold = cfg.threshold(rhs) + derivative_slack(&[d_alpha, rhs, d_beta]);
    let mut report = Report::new(NAME, cfg.seed);
    report.samples_used = evaluations;
    report.max_violation = -m;
    if -m > threshold {
        report.verdict = Verdict::Violated;
        report.witness = Some(Witness {
            sample_index: 0,
            points: vec![Point(vec![alpha]), Point(vec![beta])],
            t: r,
            lhs: d_alpha,
            rhs,
            violation: -m,
        });
    }
    for (k, v) in [
        ("R", r),
        ("alpha", alpha),
        ("beta", beta),
        ("h_prime_alpha", d_alpha),
        ("h_prime_beta", d_beta),
        ("margin", m),
        ("evaluations", evaluations as f64),
    ] {
        tr.value(k, v);
    }
    tr.conclude(report)
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] || v[best].is_nan() {
            best = i;
        }
    }
    best
}

/// Convexity of `h` along `[E μ_a, E μ_b]` with pair-specific dense `t`.
fn pair_convexity(name: &str, inst: &Instance, ea: f64, eb: f64, cfg: &CheckConfig) -> Report {
    let eval = |t: f64| -> Result<Option<Sides>, Fault> {
        let ha = inst.h_at(&Point(vec![ea]))?;
        let hb = inst.h_at(&Point(vec![eb]))?;
        let x = if t == 1.0 { ea } else { t * ea + (1.0 - t) * eb };
        let lhs = inst.h_at(&Point(vec![x]))?;
        let rhs = hb + t * inst.phi.eval(ha, hb)?;
        Ok(Some(Sides::le(lhs, rhs, t).trivial(t == 0.0)))
    };
    let probe = ParamProbe {
        points: vec![Point(vec![ea]), Point(vec![eb])],
        eval: &eval,
    };
    engine::run(&probe, cfg, name, EngineOpts::new(tags::PROBE))
}

/// `(E μ₁ − E μ₃)·(h′(E μ₂) + h′(E μ₃)) ≤ φ(h₁, h₂) + φ(h₂, h₃)` at one
/// ordered triple.
///
/// Premises: the ordering, convexity along both subintervals, and
/// `h′(E μ₂), h′(E μ₃) ≥ 0`, without which the step bounding
/// `(E μ₁ − E μ₃)·h′` by the subinterval terms does not hold (`h = x²` at
/// `(−3, −2, −1)` gives `12 ≤ 8`). The quotient form obtained by dividing by
/// `E μ₁ − E μ₃` is evaluated alongside and reported in `flags`/`values`.
pub fn verify_three_point(inst: &Instance, mu1: f64, mu2: f64, mu3: f64, cfg: &CheckConfig) -> TheoremReport {
    const NAME: &str = "three_point_undivided";
    let mut tr = TheoremReport::new(TheoremId::ThreePoint32.name());
    if !is_line(inst) {
        return tr.conclude(Report::domain_error(NAME, cfg.seed, "needs a Euclidean(1) instance"));
    }
    if !tr.premise(in_domain("points_in_domain", inst, &[mu1, mu2, mu3], cfg)) {
        return tr.fail_premise();
    }
    let (es, hs) = match line_values(inst, &[mu1, mu2, mu3]) {
        Ok(v) => v,
        Err(f) => return tr.conclude(fault_report(NAME, cfg, f)),
    };
    let (e1, e2, e3) = (es[0], es[1], es[2]);
    let ordered = if e1 < e2 && e2 < e3 {
        Report::new("ordering", cfg.seed)
    } else {
        Report::failed_condition(
            "ordering",
            cfg.seed,
            format!("E(mu1) < E(mu2) < E(mu3) fails: {e1}, {e2}, {e3}"),
        )
    };
    if !tr.premise(ordered) {
        return tr.fail_premise();
    }
    if !tr.premise(pair_convexity("convexity_W1", inst, e1, e2, cfg)) {
        return tr.fail_premise();
    }
    if !tr.premise(pair_convexity("convexity_W2", inst, e2, e3, cfg)) {
        return tr.fail_premise();
    }
    let ds = match (derivative(inst, e2), derivative(inst, e3)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(f), _) | (_, Err(f)) => return tr.conclude(fault_report(NAME, cfg, f)),
    };
    let (d2, d3) = ds;
    let slack = derivative_slack(&[d2, d3]);
    let nonneg = single(
        "derivative_nonnegative",
        cfg,
        vec![Point(vec![e2]), Point(vec![e3])],
        Sides::le(-d2.min(d3), 0.0, 0.0).with_threshold(cfg.threshold(0.0) + slack),
    )
    .with_note("h'(E mu2) >= 0 and h'(E mu3) >= 0");
    if !tr.premise(nonneg) {
        return tr.fail_premise();
    }
    let (phi12, phi23) = match (inst.phi.eval(hs[0], hs[1]), inst.phi.eval(hs[1], hs[2])) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(f), _) | (_, Err(f)) => return tr.conclude(fault_report(NAME, cfg, f)),
    };
    let span = e1 - e3;
    let lhs = span * (d2 + d3);
    let rhs = phi12 + phi23;
    let threshold = cfg.threshold(rhs) + span.abs() * derivative_slack(&[d2, d3, hs[1], hs[2]]);
    let pts = vec![Point(vec![e1]), Point(vec![e2]), Point(vec![e3])];
    let conclusion = single(NAME, cfg, pts, Sides::le(lhs, rhs, 0.0).with_threshold(threshold));

    let divided_rhs = rhs / span;
    let divided_holds = d2 + d3 <= divided_rhs + threshold / span.abs();
    tr.flags.insert("divided_form_holds".into(), divided_holds);
    for (k, v) in [
        ("h_prime_mu2", d2),
        ("h_prime_mu3", d3),
        ("undivided_lhs", lhs),
        ("undivided_rhs", rhs),
        ("divided_lhs", d2 + d3),
        ("divided_rhs", divided_rhs),
    ] {
        tr.value(k, v);
    }
    if !divided_holds {
        tr.notes.push(format!(
            "quotient form fails: h'(E mu2) + h'(E mu3) = {} > {} (dividing by E mu1 - E mu3 < 0 flips the inequality)",
            d2 + d3,
            divided_rhs
        ));
    }
    tr.conclude(conclusion)
}

/// Endpoint derivatives of `h` along `γ_{E μ₁, E μ₂}` differ by more than
/// [`STRICT_DERIVATIVE_GAP`] on every sampled pair with `E μ₁ ≠ E μ₂`.
pub fn verify_strict_differential(inst: &Instance, cfg: &CheckConfig) -> TheoremReport {
    const NAME: &str = "endpoint_derivatives_differ";
    let mut tr = TheoremReport::new(TheoremId::StrictDifferential.name());
    if !tr.premise(check_antisymmetric(&inst.phi, cfg)) {
        return tr.fail_premise();
    }
    if !tr.premise(check_geodesic_phie_convex_fn(inst, cfg, true)) {
        return tr.fail_premise();
    }
    let eval = |pts: &[Point], _: &[f64]| -> Result<Option<Sides>, Fault> {
        let e1 = apply_map(&inst.space, &inst.e, &pts[0])?;
        let e2 = apply_map(&inst.space, &inst.e, &pts[1])?;
        if inst.space.distance(&e1, &e2)? < STRICT_MIN_SEPARATION {
            return Ok(None);
        }
        let v1 = inst.space.velocity_at_end(&e1, &e2, true)?;
        let v2 = inst.space.velocity_at_end(&e1, &e2, false)?;
        let d1 = differentiate_numeric(&inst.h, &e1, &v1)?;
        let d2 = differentiate_numeric(&inst.h, &e2, &v2)?;
        Ok(Some(Sides::le(STRICT_DERIVATIVE_GAP, (d1 - d2).abs(), 0.0)))
    };
    let probe = SampleProbe::new(&inst.domain, &inst.space, 2, &eval);
    let mut r = run_points(NAME, &probe, cfg, tags::PAIRS);
    r.notes.push(format!(
        "pairs with d(E mu1, E mu2) < {STRICT_MIN_SEPARATION} are skipped; gap must exceed {STRICT_DERIVATIVE_GAP}"
    ));
    tr.notes.push("antisymmetry read as phi(a, b) = -phi(b, a)".into());
    tr.conclude(r)
}
