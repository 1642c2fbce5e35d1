use super::{fault_report, fn_check, run_points, SampleProbe, Tally, TheoremError, TheoremId};
use crate::algebra::{Instance, Region};
use crate::checker::engine::Sides;
use crate::checker::{apply_map, CheckConfig};
use crate::manifold::{dist, norm, ManifoldKind, Point};
use crate::report::{Report, TheoremReport, Verdict};
use crate::rng::{tags, SampleStream};
use crate::space::{Diffeo, Fault};

/// Radii (as fractions of the domain scale) at which a local minimum is probed.
pub const LOCAL_MIN_RADII: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Directions sampled around a candidate minimum.
const LOCAL_MIN_DIRECTIONS: u64 = 256;

/// Tolerance of `H⁻¹∘H = id` and `H∘H⁻¹ = id` on samples.
const INVERSE_TOL: f64 = 1e-8;

fn inverse_check(inst: &Instance, chart: &Diffeo, cfg: &CheckConfig) -> Report {
    let eval = |pts: &[Point], _: &[f64]| -> Result<Option<Sides>, Fault> {
        let p = &pts[0].0;
        let y = chart.apply(p)?;
        let back = chart.invert(&y)?;
        let again = chart.apply(&back)?;
        let r = dist(&back, p).max(dist(&again, &y));
        Ok(Some(Sides::le(r, INVERSE_TOL, 0.0)))
    };
    let probe = SampleProbe::new(&inst.domain, &inst.space, 1, &eval);
    run_points("diffeo_inverse", &probe, cfg, tags::PROBE)
        .with_note(format!("H^-1 o H = id and H o H^-1 = id within {INVERSE_TOL}"))
}

/// `(h ∘ H⁻¹, E′ = H∘E∘H⁻¹, φ)` on `H(B)` with geodesics `H∘γ`.
fn transport(inst: &Instance, chart: &Diffeo) -> Result<Instance, TheoremError> {
    let Region::Domain(inner) = &inst.domain else {
        return Err(TheoremError::Arguments("the instance is already given through a chart".into()));
    };
    if chart.forward.input_arity() != inst.dim() || chart.inverse.output_arity() != inst.dim() {
        return Err(TheoremError::Arguments(format!(
            "H maps {} coordinates, points have {}",
            chart.forward.input_arity(),
            inst.dim()
        )));
    }
    let h = inst.h.compose(&chart.inverse)?;
    let e = chart.forward.compose(&inst.e.compose(&chart.inverse)?)?;
    let region = Region::Chart {
        inner: inner.clone(),
        chart: chart.clone(),
    };
    Ok(Instance::new(h, e, inst.phi.clone(), region)?)
}

/// `h ∘ H⁻¹` is geodesic φ_{E′}-convex on `H(B)`.
pub fn verify_diffeo_invariance(
    inst: &Instance,
    chart: &Diffeo,
    cfg: &CheckConfig,
) -> Result<TheoremReport, TheoremError> {
    let moved = transport(inst, chart)?;
    let mut tr = TheoremReport::new(TheoremId::DiffeoInvariance.name());
    tr.notes
        .push("transported map read as E' = H o E o H^-1; image geodesics are H o gamma".into());
    if !tr.premise(inverse_check(inst, chart, cfg)) {
        return Ok(tr.fail_premise());
    }
    if !tr.premise(fn_check(inst, cfg)) {
        return Ok(tr.fail_premise());
    }
    let r = fn_check(&moved, cfg).with_note(format!("transported through `{}`", chart.name));
    Ok(tr.conclude(r))
}

fn phi_bounded(inst: &Instance, k: f64, cfg: &CheckConfig) -> Report {
    let eval = |pts: &[Point], _: &[f64]| -> Result<Option<Sides>, Fault> {
        let mut vals = [0.0; 4];
        for (i, p) in pts.iter().enumerate() {
            vals[2 * i] = inst.h_at(p)?;
            vals[2 * i + 1] = inst.h_at(&apply_map(&inst.space, &inst.e, p)?)?;
        }
        let mut m = f64::NEG_INFINITY;
        for a in &vals[..2] {
            for b in &vals[2..] {
                m = m.max(inst.phi.eval(*a, *b)?).max(inst.phi.eval(*b, *a)?);
            }
        }
        Ok(Some(Sides::le(m, k, 0.0)))
    };
    let probe = SampleProbe::new(&inst.domain, &inst.space, 2, &eval);
    run_points("phi_bounded_above", &probe, cfg, tags::PAIRS).with_note(format!("phi <= {k} on h(B) x h(B)"))
}

/// `|h(E μ₁) − h(E μ₂)| ≤ (K/ε)·‖E μ₁ − E μ₂‖` for E-images in the box
/// inset by `ε`, given `φ ≤ K` on `h(B) × h(B)`.
pub fn verify_continuity_bound(
    inst: &Instance,
    k: f64,
    eps: f64,
    cfg: &CheckConfig,
) -> Result<TheoremReport, TheoremError> {
    const NAME: &str = "lipschitz_bound";
    if !(eps > 0.0 && eps.is_finite() && k.is_finite()) {
        return Err(TheoremError::Arguments("eps must be positive and K finite".into()));
    }
    let mut tr = TheoremReport::new(TheoremId::ContinuityBound.name());
    if inst.space.base.kind != ManifoldKind::Euclidean || inst.space.chart.is_some() {
        return Ok(tr.conclude(Report::domain_error(
            NAME,
            cfg.seed,
            "the Lipschitz bound is stated in linear coordinates; use ChartContinuity on other spaces",
        )));
    }
    if !tr.premise(phi_bounded(inst, k, cfg)) {
        return Ok(tr.fail_premise());
    }
    if !tr.premise(fn_check(inst, cfg)) {
        return Ok(tr.fail_premise());
    }
    let dom = inst.domain.base();
    let lo: Vec<f64> = dom.lo.iter().map(|x| x + eps).collect();
    let hi: Vec<f64> = dom.hi.iter().map(|x| x - eps).collect();
    if lo.iter().zip(&hi).any(|(l, h)| l > h) {
        let r = Report::failed_condition("inset_box", cfg.seed, format!("the box inset by {eps} is empty"));
        tr.premise(r);
        return Ok(tr.fail_premise());
    }
    let lipschitz = k / eps;
    tr.value("L", lipschitz);
    let inside = |p: &Point| {
        p.0.iter().zip(lo.iter().zip(&hi)).all(|(x, (l, h))| l <= x && x <= h) && inst.domain.contains(&p.0)
    };
    let eval = |pts: &[Point], _: &[f64]| -> Result<Option<Sides>, Fault> {
        let e1 = apply_map(&inst.space, &inst.e, &pts[0])?;
        let e2 = apply_map(&inst.space, &inst.e, &pts[1])?;
        if !inside(&e1) || !inside(&e2) {
            return Ok(None);
        }
        let diff = (inst.h_at(&e1)? - inst.h_at(&e2)?).abs();
        Ok(Some(Sides::le(diff, lipschitz * dist(&e1.0, &e2.0), 0.0)))
    };
    let probe = SampleProbe::new(&inst.domain, &inst.space, 2, &eval);
    let mut r = run_points(NAME, &probe, cfg, tags::PAIRS);
    if r.samples_used == 0 && r.verdict == Verdict::HoldsOnSamples {
        r.notes.push("no sampled E-image pair lies in the inset box".into());
    }
    Ok(tr.conclude(r))
}

/// Continuity of `h ∘ ψ⁻¹` on `ψ(B)` for a chart `ψ`.
///
/// Premises: `ψ` inverts on samples, `h` is geodesic φ_E-convex, and `φ ≤ K`
/// on `h(B) × h(B)`. The transported function is checked for geodesic
/// φ_{E′}-convexity (supporting report). The conclusion compares increments
/// of `h ∘ ψ⁻¹` at two step sizes along random chart directions: the
/// increment at `1e-5·scale` must be at most a tenth of the increment at
/// `1e-3·scale` (any Lipschitz function passes with a factor `1e-2`).
pub fn verify_chart_continuity(
    inst: &Instance,
    chart: &Diffeo,
    k: f64,
    cfg: &CheckConfig,
) -> Result<TheoremReport, TheoremError> {
    const NAME: &str = "chart_continuity";
    let moved = transport(inst, chart)?;
    let mut tr = TheoremReport::new(TheoremId::ChartContinuity.name());
    if !tr.premise(inverse_check(inst, chart, cfg)) {
        return Ok(tr.fail_premise());
    }
    if !tr.premise(fn_check(inst, cfg)) {
        return Ok(tr.fail_premise());
    }
    if !tr.premise(phi_bounded(inst, k, cfg)) {
        return Ok(tr.fail_premise());
    }
    tr.supporting_reports.push(fn_check(&moved, cfg));
    let scale = moved.domain.scale();
    let (big, small) = (1e-3 * scale, 1e-5 * scale);
    let eval = |pts: &[Point], dir: &[f64]| -> Result<Option<Sides>, Fault> {
        let y = &pts[0].0;
        let n = norm(dir);
        if n < 1e-12 {
            return Ok(None);
        }
        let step = |d: f64| -> Option<Vec<f64>> {
            let z: Vec<f64> = y.iter().zip(dir).map(|(a, v)| a + d * v / n).collect();
            moved.domain.contains(&z).then_some(z)
        };
        let (Some(zb), Some(zs)) = (step(big), step(small)) else {
            return Ok(None);
        };
        let hy = moved.h.eval_coords(y)?;
        // Oscillation over the large radius, so a lone near-equal value at
        // `big` cannot make the comparison degenerate.
        let mut db = (moved.h.eval_coords(&zb)? - hy).abs();
        for j in 1..8 {
            if let Some(z) = step(big * j as f64 / 8.0) {
                db = db.max((moved.h.eval_coords(&z)? - hy).abs());
            }
        }
        let ds = (moved.h.eval_coords(&zs)? - hy).abs();
        Ok(Some(Sides::le(ds, 0.1 * db, 0.0)))
    };
    let probe = SampleProbe::new(&moved.domain, &moved.space, 1, &eval).with_aux(moved.dim());
    let r = run_points(NAME, &probe, cfg, tags::DIRECTIONS);
    Ok(tr.conclude(r))
}

/// `φ(h(E μ), h(E μ*)) ≥ 0` on the domain when `h` has a local minimum at
/// `E(μ*)`.
///
/// The minimum is probed along geodesics from `E(μ*)` towards sampled
/// members, at each radius of [`LOCAL_MIN_RADII`] times the domain scale;
/// interiority requires every probe point at the largest radius to be a
/// member.
pub fn verify_local_min(inst: &Instance, mu_star: &Point, cfg: &CheckConfig) -> TheoremReport {
    const NAME: &str = "phi_nonnegative_at_minimum";
    let mut tr = TheoremReport::new(TheoremId::LocalMin.name());
    let (star, h_star) = match apply_map(&inst.space, &inst.e, mu_star).and_then(|p| Ok((inst.h_at(&p)?, p))) {
        Ok((v, p)) => (p, v),
        Err(f) => return tr.conclude(fault_report(NAME, cfg, f)),
    };
    let scale = inst.domain.scale();
    let mut interior = Tally::new("interior_point", cfg);
    let mut minimum = Tally::new("local_minimum", cfg);
    let member = inst.domain.contains(&star.0);
    interior.add(
        cfg,
        0,
        vec![star.clone()],
        Sides::le(if member { 0.0 } else { 1.0 }, 0.0, 0.0),
    );
    for j in 0..LOCAL_MIN_DIRECTIONS {
        let mut s = SampleStream::new(cfg.seed, tags::DIRECTIONS, j);
        let Some(q) = inst.domain.draw(&mut s) else { continue };
        let d = match inst.space.distance(&q, &star) {
            Ok(d) if d > 1e-12 => d,
            _ => continue,
        };
        for (ri, radius) in LOCAL_MIN_RADII.iter().enumerate() {
            let t = (radius * scale / d).min(1.0);
            let nb = match inst.space.geodesic(&q, &star, t) {
                Ok(p) => p,
                Err(f) => return tr.conclude(fault_report(NAME, cfg, f)),
            };
            if ri == 0 {
                let out = inst.domain.excess(&nb.0).unwrap_or(f64::INFINITY).max(0.0);
                interior.add(cfg, j, vec![nb.clone()], Sides::le(out, 0.0, t));
            }
            if !inst.domain.contains(&nb.0) {
                continue;
            }
            match inst.h_at(&nb) {
                Ok(v) => minimum.add(cfg, j, vec![nb], Sides::le(h_star, v, t)),
                Err(f) => return tr.conclude(fault_report(NAME, cfg, f)),
            }
        }
    }
    if !tr.premise(interior.finish()) {
        return tr.fail_premise();
    }
    if !tr.premise(minimum.finish()) {
        return tr.fail_premise();
    }
    if !tr.premise(fn_check(inst, cfg)) {
        return tr.fail_premise();
    }
    let eval = |pts: &[Point], _: &[f64]| -> Result<Option<Sides>, Fault> {
        let e = apply_map(&inst.space, &inst.e, &pts[0])?;
        let phi = inst.phi.eval(inst.h_at(&e)?, h_star)?;
        Ok(Some(Sides::le(0.0, phi, 0.0)))
    };
    let probe = SampleProbe::new(&inst.domain, &inst.space, 1, &eval);
    tr.value("h_at_minimum", h_star);
    tr.conclude(run_points(NAME, &probe, cfg, tags::PAIRS))
}
