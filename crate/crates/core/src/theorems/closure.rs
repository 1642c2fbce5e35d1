use serde::{Deserialize, Serialize};

use super::{check_family, fn_check, TheoremError, TheoremId};
use crate::algebra::{
    check_additive, check_nondecreasing, check_nonneg_linear, check_seq_upper_bounded, DomainSet, Instance,
    SequencePair,
};
use crate::checker::{apply_map, check_phie_convex_interval, CheckConfig};
use crate::exprlang::{BinOp, Bifunction, Builtin, EndoMap, Expr, ParseError, ScalarFn, Signature};
use crate::manifold::Manifold;
use crate::report::{Report, TheoremReport};
use crate::rng::{tags, SampleStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClosureKind {
    Scaling,
    Sum,
    WeightedSum,
    SupFamily,
}

impl ClosureKind {
    pub fn theorem(self) -> TheoremId {
        match self {
            ClosureKind::Scaling => TheoremId::Scaling41a,
            ClosureKind::Sum => TheoremId::Sum41b,
            ClosureKind::WeightedSum => TheoremId::WeightedSum,
            ClosureKind::SupFamily => TheoremId::SupFamily,
        }
    }
}

/// Member pairs of the domain sampled for harvesting values of `h`.
const HARVEST_PAIRS: u64 = 64;

fn scaled(h: &ScalarFn, x: f64) -> Result<Expr, ParseError> {
    Expr::binary(BinOp::Mul, &Expr::constant(x, h.expr.signature()), &h.expr)
}

fn combined(kind: ClosureKind, insts: &[Instance], weights: &[f64]) -> Result<ScalarFn, ParseError> {
    let hs: Vec<&ScalarFn> = insts.iter().map(|i| &i.h).collect();
    let (expr, label) = match kind {
        ClosureKind::Scaling => (scaled(hs[0], weights[0])?, format!("{} * ({})", weights[0], hs[0].label)),
        ClosureKind::Sum => (
            Expr::sum(&hs.iter().map(|h| h.expr.clone()).collect::<Vec<_>>())?,
            join(hs.iter().map(|h| format!("({})", h.label)), " + "),
        ),
        ClosureKind::WeightedSum => (
            Expr::sum(
                &hs.iter()
                    .zip(weights)
                    .map(|(h, &x)| scaled(h, x))
                    .collect::<Result<Vec<_>, _>>()?,
            )?,
            join(hs.iter().zip(weights).map(|(h, x)| format!("{x} * ({})", h.label)), " + "),
        ),
        ClosureKind::SupFamily => {
            if hs.len() == 1 {
                (hs[0].expr.clone(), hs[0].label.clone())
            } else {
                (
                    Expr::call(Builtin::Max, &hs.iter().map(|h| h.expr.clone()).collect::<Vec<_>>())?,
                    format!("max({})", join(hs.iter().map(|h| h.label.clone()), ", ")),
                )
            }
        }
    };
    Ok(ScalarFn::from_expr(expr, label))
}

fn join(parts: impl Iterator<Item = String>, sep: &str) -> String {
    parts.collect::<Vec<_>>().join(sep)
}

/// Values `(h_i(E μ₁))_i, (h_i(E μ₂))_i` at sampled member pairs.
fn harvest_sequences(insts: &[Instance], seed: u64) -> Vec<SequencePair> {
    let base = &insts[0];
    let mut out = Vec::new();
    for j in 0..HARVEST_PAIRS {
        let mut s = SampleStream::new(seed, tags::VALUES, j);
        let (Some(p1), Some(p2)) = (base.domain.draw(&mut s), base.domain.draw(&mut s)) else {
            continue;
        };
        let (Ok(e1), Ok(e2)) = (
            apply_map(&base.space, &base.e, &p1),
            apply_map(&base.space, &base.e, &p2),
        ) else {
            continue;
        };
        let u: Result<Vec<f64>, _> = insts.iter().map(|i| i.h_at(&e1)).collect();
        let v: Result<Vec<f64>, _> = insts.iter().map(|i| i.h_at(&e2)).collect();
        if let (Ok(u), Ok(v)) = (u, v) {
            out.push(SequencePair { u, v });
        }
    }
    out
}

/// Scaling, sums, weighted sums and finite suprema of geodesic φ_E-convex
/// functions sharing domain, `E` and `φ`.
///
/// `weights` gives `x` for `Scaling` and `x_i` for `WeightedSum`; it is
/// ignored otherwise. For `SupFamily`, the sequences checked for sequential
/// upper boundedness are the values of the family at sampled E-image pairs.
pub fn verify_closure(
    kind: ClosureKind,
    insts: &[Instance],
    weights: &[f64],
    cfg: &CheckConfig,
) -> Result<TheoremReport, TheoremError> {
    let base = check_family(insts)?;
    match kind {
        ClosureKind::Scaling if insts.len() != 1 || weights.len() != 1 => {
            return Err(TheoremError::Arguments("scaling takes one function and one weight".into()))
        }
        ClosureKind::WeightedSum if weights.len() != insts.len() => {
            return Err(TheoremError::Arguments(format!(
                "{} weights for {} functions",
                weights.len(),
                insts.len()
            )))
        }
        _ => {}
    }
    let mut tr = TheoremReport::new(kind.theorem().name());
    if matches!(kind, ClosureKind::Scaling | ClosureKind::WeightedSum) {
        let bad = weights.iter().position(|x| !(x.is_finite() && *x >= 0.0));
        let r = match bad {
            Some(i) => Report::failed_condition("weights_nonnegative", cfg.seed, format!("weight {i} is {}", weights[i])),
            None => Report::new("weights_nonnegative", cfg.seed),
        };
        if !tr.premise(r) {
            return Ok(tr.fail_premise());
        }
    }
    for inst in insts {
        let r = fn_check(inst, cfg).with_note(format!("h = {}", inst.h.label));
        if !tr.premise(r) {
            return Ok(tr.fail_premise());
        }
    }
    let phi_premise = match kind {
        ClosureKind::Scaling | ClosureKind::WeightedSum => check_nonneg_linear(&base.phi, cfg),
        ClosureKind::Sum => check_additive(&base.phi, cfg),
        ClosureKind::SupFamily => {
            let seqs = harvest_sequences(insts, cfg.seed);
            check_seq_upper_bounded(&base.phi, &EndoMap::identity(1), &seqs, cfg)?
        }
    };
    if !tr.premise(phi_premise) {
        return Ok(tr.fail_premise());
    }
    let h = combined(kind, insts, weights)?;
    tr.notes.push(format!("combined function: {}", h.label));
    Ok(tr.conclude(fn_check(&base.with_h(h), cfg)))
}

/// Values of `h₁` at sampled geodesic points between E-images of members.
fn sampled_range(inst: &Instance, cfg: &CheckConfig) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let ts = cfg.t_values();
    for j in 0..1024 {
        let mut s = SampleStream::new(cfg.seed, tags::VALUES, j);
        let (Some(p1), Some(p2)) = (inst.domain.draw(&mut s), inst.domain.draw(&mut s)) else {
            continue;
        };
        let (Ok(e1), Ok(e2)) = (apply_map(&inst.space, &inst.e, &p1), apply_map(&inst.space, &inst.e, &p2)) else {
            continue;
        };
        for &t in &ts {
            if let Ok(v) = inst.space.geodesic(&e1, &e2, t).and_then(|p| inst.h_at(&p)) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    lo.is_finite().then_some((lo, hi))
}

/// `h₂ ∘ h₁` for `h₁` geodesic E-convex (`φ = a − b`) and `h₂` non-decreasing
/// and φ-convex on the sampled range of `h₁`.
pub fn verify_composition(h1: &Instance, h2: &ScalarFn, cfg: &CheckConfig) -> Result<TheoremReport, TheoremError> {
    if h2.arity() != 1 {
        return Err(TheoremError::Arguments("h2 must be a function of x1 only".into()));
    }
    let mut tr = TheoremReport::new(TheoremId::Composition.name());
    let convex = fn_check(&h1.with_phi(Bifunction::difference()), cfg).with_note("h1 checked with phi(a, b) = a - b");
    if !tr.premise(convex) {
        return Ok(tr.fail_premise());
    }
    let Some((mut lo, mut hi)) = sampled_range(h1, cfg) else {
        let r = Report::failed_condition("range_of_h1", cfg.seed, "no value of h1 could be sampled");
        tr.premise(r);
        return Ok(tr.fail_premise());
    };
    if hi - lo < 1e-9 {
        lo -= 1e-6;
        hi += 1e-6;
    }
    tr.value("range_lo", lo);
    tr.value("range_hi", hi);
    if !tr.premise(check_nondecreasing(h2, lo, hi, cfg)) {
        return Ok(tr.fail_premise());
    }
    let outer = Instance::new(
        h2.clone(),
        EndoMap::identity(1),
        h1.phi.clone(),
        DomainSet::new(Manifold::euclidean(1), &[(lo, hi)], None)?.into(),
    )?;
    let r = check_phie_convex_interval(&outer, cfg).with_note("h2 checked on the sampled range of h1 with E = identity");
    if !tr.premise(r) {
        return Ok(tr.fail_premise());
    }
    let inner = EndoMap {
        exprs: vec![h1.h.expr.clone()],
        label: h1.h.label.clone(),
    };
    let composed = h2.compose(&inner)?;
    tr.notes.push(format!("composed function: {}", composed.label));
    Ok(tr.conclude(fn_check(&h1.with_h(composed), cfg)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitMode {
    /// `φⁱ → φ`.
    Pointwise,
    /// `Σ_{l≤i} φˡ → φ`.
    PartialSums,
}

impl LimitMode {
    pub fn theorem(self) -> TheoremId {
        match self {
            LimitMode::Pointwise => TheoremId::PhiLimit,
            LimitMode::PartialSums => TheoremId::PhiSeriesLimit,
        }
    }
}

/// Instantiates a bifunction template over `a, b, i` for `i = 1..=count`.
pub fn expand_phi_template(src: &str, count: usize) -> Result<Vec<Bifunction>, ParseError> {
    let sig = Signature::new(["a", "b", "i"]);
    let template = Expr::parse(src, &sig)?;
    let bi = Signature::bifunction();
    (1..=count)
        .map(|i| {
            let subs = [Expr::var(0, &bi), Expr::var(1, &bi), Expr::constant(i as f64, &bi)];
            let expr = template.substitute(&subs, &bi)?;
            Ok(Bifunction::from_expr(expr, format!("{src} [i = {i}]")))
        })
        .collect()
}

/// Tail of the sequence considered for the convergence flag.
fn quarter(n: usize) -> usize {
    n.div_ceil(4).max(1)
}

/// `h` geodesic φⁱ_E-convex for every supplied `i` (or every partial sum)
/// implies geodesic φ_E-convexity for the limit `φ`.
///
/// Convergence evidence: `max |φⁱ − φ|` over sampled value pairs of `h`. The
/// flag `converged` holds when the largest deviation over the last quarter of
/// the sequence is at most `max(1e-6, 0.1 ×` the largest over the first
/// quarter`)`. It does not enter the verdict.
pub fn verify_phi_limit(
    inst: &Instance,
    phis: &[Bifunction],
    limit: &Bifunction,
    mode: LimitMode,
    cfg: &CheckConfig,
) -> Result<TheoremReport, TheoremError> {
    if phis.is_empty() {
        return Err(TheoremError::Arguments("the bifunction sequence is empty".into()));
    }
    let seq: Vec<Bifunction> = match mode {
        LimitMode::Pointwise => phis.to_vec(),
        LimitMode::PartialSums => (1..=phis.len())
            .map(|i| Bifunction::sum(&phis[..i]))
            .collect::<Result<_, _>>()?,
    };
    let mut tr = TheoremReport::new(mode.theorem().name());
    for phi in &seq {
        let r = fn_check(&inst.with_phi(phi.clone()), cfg).with_note(format!("phi = {}", phi.label));
        if !tr.premise(r) {
            return Ok(tr.fail_premise());
        }
    }
    let pairs = harvest_sequences(std::slice::from_ref(inst), cfg.seed);
    let values: Vec<(f64, f64)> = pairs.iter().map(|p| (p.u[0], p.v[0])).collect();
    let deviations: Vec<f64> = seq
        .iter()
        .map(|phi| {
            values
                .iter()
                .map(|&(a, b)| match (phi.eval(a, b), limit.eval(a, b)) {
                    (Ok(x), Ok(y)) => (x - y).abs(),
                    _ => f64::INFINITY,
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let q = quarter(deviations.len());
    let head = deviations[..q].iter().copied().fold(0.0, f64::max);
    let tail = deviations[deviations.len() - q..].iter().copied().fold(0.0, f64::max);
    let converged = tail <= (0.1 * head).max(1e-6);
    tr.flags.insert("converged".into(), converged);
    tr.value("deviation_head", head);
    tr.value("deviation_tail", tail);
    tr.value("deviation_last", *deviations.last().unwrap_or(&0.0));
    tr.notes
        .push("convergence judged pointwise on sampled value pairs; the flag does not enter the verdict".into());
    let conclusion = fn_check(&inst.with_phi(limit.clone()), cfg).with_note(format!("limit phi = {}", limit.label));
    Ok(tr.conclude(conclusion))
}
