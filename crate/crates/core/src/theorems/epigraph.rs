use super::{check_family, fn_check, TheoremError, TheoremId};
use crate::algebra::{check_monotone, Instance, Monotonicity, ProductSet, VALUE_RANGE};
use crate::checker::{check_geodesic_e_convex_set, check_geodesic_phie_convex_set, CheckConfig};
use crate::exprlang::{Bifunction, Builtin, EndoMap, Expr, ScalarFn};
use crate::report::{Report, TheoremReport, Verdict};

/// Monotonicity of `φ` as used by the epigraph results: non-decreasing in
/// `a`, and `b ↦ b + φ(a, b)` non-decreasing. Monotonicity in both arguments
/// separately is probed too and recorded as a flag.
fn phi_monotone(phi: &Bifunction, range: f64, cfg: &CheckConfig, tr: &mut TheoremReport) -> Report {
    let both = check_monotone(phi, &[Monotonicity::First, Monotonicity::Second], range, cfg);
    tr.flags.insert("phi_nondecreasing_both_args".into(), both.holds());
    let mut r = check_monotone(phi, &[Monotonicity::First, Monotonicity::OffsetSecond], range, cfg);
    r.check = "phi_nondecreasing".into();
    r.with_note("non-decreasing in a, and b + phi(a, b) non-decreasing in b")
}

fn value_range(v_range: (f64, f64)) -> f64 {
    v_range.0.abs().max(v_range.1.abs()).max(VALUE_RANGE)
}

/// `epi(h)` is a geodesic φ_E-convex set iff `h` is geodesic φ_E-convex.
///
/// Both checks run; the conclusion holds when their verdicts agree. The two
/// reports are attached as evidence.
pub fn verify_epigraph_equiv(inst: &Instance, cfg: &CheckConfig) -> TheoremReport {
    const NAME: &str = "epigraph_agreement";
    let mut tr = TheoremReport::new(TheoremId::EpigraphEquiv.name());
    if !tr.premise(check_geodesic_e_convex_set(&inst.e, &inst.domain, cfg)) {
        return tr.fail_premise();
    }
    let v_range = ProductSet::default_v_range(inst, cfg.seed);
    let mono = phi_monotone(&inst.phi, value_range(v_range), cfg, &mut tr);
    if !tr.premise(mono) {
        return tr.fail_premise();
    }
    let f = fn_check(inst, cfg);
    let set = ProductSet::epigraph(inst, v_range);
    let s = check_geodesic_phie_convex_set(&inst.e, &inst.phi, &set, cfg);
    let mut r = Report::new(NAME, cfg.seed);
    r.samples_used = f.samples_used + s.samples_used;
    let decided = |v: Verdict| matches!(v, Verdict::HoldsOnSamples | Verdict::Violated);
    if !(decided(f.verdict) && decided(s.verdict)) {
        r.verdict = if f.verdict == Verdict::DomainError || s.verdict == Verdict::DomainError {
            Verdict::DomainError
        } else {
            Verdict::PremiseFailed
        };
        r.notes.push(format!("undecided: function check {}, set check {}", f.verdict, s.verdict));
    } else if f.verdict != s.verdict {
        r.verdict = Verdict::Violated;
        r.max_violation = f.max_violation.max(s.max_violation);
        r.witness = f.witness.clone().or_else(|| s.witness.clone());
        r.notes.push(format!("disagreement: function check {}, set check {}", f.verdict, s.verdict));
    } else {
        r.notes.push(format!("both checks {}", f.verdict));
    }
    tr.flags.insert("function_convex".into(), f.holds());
    tr.flags.insert("epigraph_convex".into(), s.holds());
    tr.value("v_range_lo", v_range.0);
    tr.value("v_range_hi", v_range.1);
    tr.evidence.push(f);
    tr.evidence.push(s);
    tr.conclude(r)
}

/// The intersection of geodesic φ_E-convex product sets over a common base.
pub fn verify_intersection(
    e: &EndoMap,
    phi: &Bifunction,
    sets: &[ProductSet],
    cfg: &CheckConfig,
) -> Result<TheoremReport, TheoremError> {
    let both = ProductSet::intersection(sets)?;
    let mut tr = TheoremReport::new(TheoremId::Intersection52.name());
    for s in sets {
        if !tr.premise(check_geodesic_phie_convex_set(e, phi, s, cfg)) {
            return Ok(tr.fail_premise());
        }
    }
    Ok(tr.conclude(check_geodesic_phie_convex_set(e, phi, &both, cfg)))
}

fn sup_of(insts: &[Instance]) -> Result<ScalarFn, TheoremError> {
    if insts.len() == 1 {
        return Ok(insts[0].h.clone());
    }
    let exprs: Vec<Expr> = insts.iter().map(|i| i.h.expr.clone()).collect();
    let label = insts.iter().map(|i| i.h.label.clone()).collect::<Vec<_>>().join(", ");
    Ok(ScalarFn::from_expr(Expr::call(Builtin::Max, &exprs)?, format!("max({label})")))
}

/// `sup_i h_i` is geodesic φ_E-convex when every epigraph is a geodesic
/// φ_E-convex set and `φ` is non-decreasing.
///
/// The conclusion is the function check of the pointwise maximum; the set
/// check of the intersection of the epigraphs (the epigraph of the maximum)
/// is a supporting report.
pub fn verify_sup_epigraph_cor(insts: &[Instance], cfg: &CheckConfig) -> Result<TheoremReport, TheoremError> {
    let base = check_family(insts)?;
    let mut tr = TheoremReport::new(TheoremId::SupEpigraphCor.name());
    if !tr.premise(check_geodesic_e_convex_set(&base.e, &base.domain, cfg)) {
        return Ok(tr.fail_premise());
    }
    let sup = base.with_h(sup_of(insts)?);
    let v_range = ProductSet::default_v_range(&sup, cfg.seed);
    let mono = phi_monotone(&base.phi, value_range(v_range), cfg, &mut tr);
    if !tr.premise(mono) {
        return Ok(tr.fail_premise());
    }
    let mut epis = Vec::with_capacity(insts.len());
    for inst in insts {
        let r = fn_check(inst, cfg).with_note(format!("h = {}", inst.h.label));
        if !tr.premise(r) {
            return Ok(tr.fail_premise());
        }
        let epi = ProductSet::epigraph(inst, v_range);
        let r = check_geodesic_phie_convex_set(&inst.e, &inst.phi, &epi, cfg).with_note(format!("epi({})", inst.h.label));
        if !tr.premise(r) {
            return Ok(tr.fail_premise());
        }
        epis.push(epi);
    }
    let both = ProductSet::intersection(&epis)?;
    tr.supporting_reports
        .push(check_geodesic_phie_convex_set(&base.e, &base.phi, &both, cfg).with_note("intersection of the epigraphs"));
    tr.notes.push(format!("supremum: {}", sup.h.label));
    Ok(tr.conclude(fn_check(&sup, cfg)))
}
