//! Deterministic parallel sampling with local refinement.
//!
//! A [`Probe`] turns a per-sample stream into free variables and evaluates
//! one inequality instance per aspect parameter. The engine evaluates every
//! sample index independently, reduces in index order, and refines the
//! strongest near-violations by golden-section coordinate ascent.

use rayon::prelude::*;

use super::CheckConfig;
use crate::manifold::Point;
use crate::report::{Report, Verdict, Witness};
use crate::rng::SampleStream;
use crate::space::Fault;

/// One evaluated instance of a checked inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Sides {
    pub lhs: f64,
    pub rhs: f64,
    pub violation: f64,
    pub t: f64,
    /// Overrides the configured threshold (e.g. for rescaled inequalities).
    pub threshold: Option<f64>,
    /// Holds with equality by construction; never a refinement seed.
    pub trivial: bool,
}

impl Sides {
    pub fn le(lhs: f64, rhs: f64, t: f64) -> Self {
        Self {
            lhs,
            rhs,
            violation: lhs - rhs,
            t,
            threshold: None,
            trivial: false,
        }
    }

    pub fn eq(lhs: f64, rhs: f64, t: f64) -> Self {
        Self {
            violation: (lhs - rhs).abs(),
            ..Self::le(lhs, rhs, t)
        }
    }

    pub fn trivial(mut self, yes: bool) -> Self {
        self.trivial = yes;
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = Some(threshold);
        self
    }
}

pub(crate) trait Probe: Sync {
    /// Draws the free variables of one sample, or `None` if no admissible
    /// draw was found.
    fn draw(&self, stream: &mut SampleStream) -> Option<Vec<f64>>;

    /// Aspect parameters evaluated for every sample (usually the t-grid).
    fn params(&self) -> &[f64];

    /// Range in which the aspect parameter may be refined continuously.
    fn continuous_param(&self) -> Option<(f64, f64)> {
        None
    }

    /// Maps perturbed variables back to admissible ones, or rejects them.
    fn canonicalize(&self, vars: &[f64]) -> Option<Vec<f64>>;

    /// Characteristic scale of each variable, for refinement step sizes.
    fn widths(&self) -> Vec<f64>;

    /// `Ok(None)` means the inequality does not apply to this sample.
    fn eval(&self, vars: &[f64], param: f64) -> Result<Option<Sides>, Fault>;

    fn points(&self, vars: &[f64]) -> Vec<Point>;
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct EngineOpts {
    pub tag: u64,
    pub refine: bool,
    /// Refine the best candidates even when they are far from violating.
    pub exhaustive: bool,
}

impl EngineOpts {
    pub fn new(tag: u64) -> Self {
        Self {
            tag,
            refine: true,
            exhaustive: false,
        }
    }

    pub fn no_refine(mut self) -> Self {
        self.refine = false;
        self
    }
}

const MAX_CANDIDATES: usize = 8;
const NEAR_FACTOR: f64 = 10.0;
const GOLDEN_ITERS: usize = 12;
const STALL_SWEEPS: usize = 6;

#[derive(Debug, Clone)]
struct Eval {
    excess: f64,
    threshold: f64,
    param: f64,
    sides: Sides,
}

#[derive(Debug, Default)]
struct SampleOutcome {
    vars: Option<Vec<f64>>,
    fault: Option<(Fault, f64)>,
    max_violation: Option<f64>,
    best: Option<Eval>,
    best_nontrivial: Option<Eval>,
}

fn threshold_of(cfg: &CheckConfig, s: &Sides) -> f64 {
    s.threshold.unwrap_or_else(|| cfg.threshold(s.rhs))
}

fn evaluate_sample<P: Probe + ?Sized>(probe: &P, cfg: &CheckConfig, tag: u64, index: u64) -> SampleOutcome {
    let mut stream = SampleStream::new(cfg.seed, tag, index);
    let Some(vars) = probe.draw(&mut stream) else {
        return SampleOutcome::default();
    };
    let mut out = SampleOutcome::default();
    for &param in probe.params() {
        match probe.eval(&vars, param) {
            Err(f) => {
                out.fault = Some((f, param));
                break;
            }
            Ok(None) => {}
            Ok(Some(s)) => {
                let threshold = threshold_of(cfg, &s);
                let e = Eval {
                    excess: s.violation - threshold,
                    threshold,
                    param,
                    sides: s,
                };
                out.max_violation = Some(out.max_violation.map_or(s.violation, |m| m.max(s.violation)));
                if out.best.as_ref().is_none_or(|b| e.excess > b.excess) {
                    out.best = Some(e.clone());
                }
                if !s.trivial && out.best_nontrivial.as_ref().is_none_or(|b| e.excess > b.excess) {
                    out.best_nontrivial = Some(e);
                }
            }
        }
    }
    if out.max_violation.is_some() || out.fault.is_some() {
        out.vars = Some(vars);
    }
    out
}

fn score<P: Probe + ?Sized>(probe: &P, cfg: &CheckConfig, x: &[f64], nvars: usize, fixed: f64) -> Option<(Vec<f64>, f64, Sides)> {
    let (vars, param) = if x.len() > nvars {
        (&x[..nvars], x[nvars])
    } else {
        (x, fixed)
    };
    let canon = probe.canonicalize(vars)?;
    match probe.eval(&canon, param) {
        Ok(Some(s)) if s.violation.is_finite() => {
            let excess = s.violation - threshold_of(cfg, &s);
            Some((canon, excess, s))
        }
        _ => None,
    }
}

pub(crate) fn golden_max(f: &mut dyn FnMut(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_ITERS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for end in [lo, hi] {
        let v = f(end);
        if v > best.1 {
            best = (end, v);
        }
    }
    best
}

const BOUNDARY_BISECTIONS: usize = 48;

/// Pulls an infeasible bracket end back to the last admissible value along
/// coordinate `j`, so maxima on the boundary stay reachable.
fn feasible_end<P: Probe + ?Sized>(
    probe: &P,
    cfg: &CheckConfig,
    x: &[f64],
    j: usize,
    end: f64,
    nvars: usize,
    param: f64,
) -> f64 {
    let mut trial = x.to_vec();
    let mut ok = |s: f64| {
        trial[j] = s;
        score(probe, cfg, &trial, nvars, param).is_some()
    };
    if ok(end) {
        return end;
    }
    let (mut good, mut bad) = (x[j], end);
    for _ in 0..BOUNDARY_BISECTIONS {
        let mid = 0.5 * (good + bad);
        if ok(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    good
}

/// Golden-section coordinate ascent on the excess, starting from `x0`.
fn refine<P: Probe + ?Sized>(
    probe: &P,
    cfg: &CheckConfig,
    vars: &[f64],
    param: f64,
) -> Option<(Vec<f64>, f64, Sides)> {
    let nvars = vars.len();
    let mut widths = probe.widths();
    let mut x = vars.to_vec();
    let prange = probe.continuous_param();
    if let Some((lo, hi)) = prange {
        x.push(param);
        widths.push(hi - lo);
    }
    let mut best = score(probe, cfg, &x, nvars, param)?;
    let mut stall = 0;
    for sweep in 0..cfg.refine_steps {
        let shrink = 0.7f64.powi(sweep as i32);
        let mut improved = false;
        for j in 0..x.len() {
            let r = 0.25 * widths[j] * shrink;
            if !(r > 1e-13 * (1.0 + x[j].abs())) {
                continue;
            }
            let (mut lo, mut hi) = (x[j] - r, x[j] + r);
            if j == nvars {
                if let Some((plo, phi)) = prange {
                    lo = lo.max(plo);
                    hi = hi.min(phi);
                }
            }
            lo = feasible_end(probe, cfg, &x, j, lo, nvars, param);
            hi = feasible_end(probe, cfg, &x, j, hi, nvars, param);
            let mut trial = x.clone();
            let mut f = |s: f64| {
                trial[j] = s;
                score(probe, cfg, &trial, nvars, param).map_or(f64::NEG_INFINITY, |r| r.1)
            };
            let (s, v) = golden_max(&mut f, lo, hi);
            if v > best.1 {
                x[j] = s;
                if let Some(r) = score(probe, cfg, &x, nvars, param) {
                    // Canonicalization may move the point; keep the canonical form.
                    x[..nvars].copy_from_slice(&r.0);
                    best = r;
                    improved = true;
                }
            }
        }
        if improved {
            stall = 0;
        } else {
            stall += 1;
            if stall >= STALL_SWEEPS {
                break;
            }
        }
    }
    Some(best)
}

fn witness<P: Probe + ?Sized>(probe: &P, index: u64, vars: &[f64], s: &Sides) -> Witness {
    Witness {
        sample_index: index,
        points: probe.points(vars),
        t: s.t,
        lhs: s.lhs,
        rhs: s.rhs,
        violation: s.violation,
    }
}

/// Runs `probe` over `cfg.samples` indices and reduces to a [`Report`].
pub(crate) fn run<P: Probe + ?Sized>(probe: &P, cfg: &CheckConfig, name: &str, opts: EngineOpts) -> Report {
    let outcomes: Vec<SampleOutcome> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| evaluate_sample(probe, cfg, opts.tag, i))
        .collect();

    let mut report = Report::new(name, cfg.seed);
    let mut used = 0u64;
    let mut max_violation: Option<f64> = None;
    let mut best: Option<(u64, &Eval)> = None;
    let mut candidates: Vec<(u64, &Eval)> = Vec::new();
    for (i, o) in outcomes.iter().enumerate() {
        let i = i as u64;
        if let Some((fault, param)) = &o.fault {
            let points = o.vars.as_deref().map(|v| probe.points(v)).unwrap_or_default();
            let coords: Vec<&Vec<f64>> = points.iter().map(|p| &p.0).collect();
            return Report::domain_error(
                name,
                cfg.seed,
                format!("sample {i} (param {param}) at points {coords:?}: {fault}"),
            );
        }
        if o.max_violation.is_none() {
            continue;
        }
        used += 1;
        let mv = o.max_violation.unwrap_or(0.0);
        max_violation = Some(max_violation.map_or(mv, |m| m.max(mv)));
        if let Some(b) = &o.best {
            if b.excess > 0.0 && best.is_none_or(|(_, cur)| b.excess > cur.excess) {
                best = Some((i, b));
            }
        }
        if let Some(b) = &o.best_nontrivial {
            if opts.exhaustive || b.sides.violation >= -NEAR_FACTOR * b.threshold {
                candidates.push((i, b));
            }
        }
    }
    report.samples_used = used;
    report.max_violation = max_violation.unwrap_or(0.0);
    let mut best_witness =
        best.map(|(i, e)| (e.excess, witness(probe, i, o_vars(&outcomes, i), &e.sides)));

    if opts.refine && cfg.refine_steps > 0 && !candidates.is_empty() {
        candidates.sort_by(|a, b| b.1.excess.total_cmp(&a.1.excess).then(a.0.cmp(&b.0)));
        candidates.truncate(MAX_CANDIDATES);
        let refined: Vec<Option<(u64, Vec<f64>, f64, Sides)>> = candidates
            .par_iter()
            .map(|(i, e)| {
                refine(probe, cfg, o_vars(&outcomes, *i), e.param).map(|(v, ex, s)| (*i, v, ex, s))
            })
            .collect();
        let mut found: Vec<(f64, Witness)> = refined
            .into_iter()
            .flatten()
            .filter(|r| r.2 > 0.0)
            .map(|(i, v, ex, s)| (ex, witness(probe, i, &v, &s)))
            .collect();
        found.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.sample_index.cmp(&b.1.sample_index)));
        for (ex, w) in &found {
            report.max_violation = report.max_violation.max(w.violation);
            if best_witness.as_ref().is_none_or(|(bex, _)| ex > bex) {
                best_witness = Some((*ex, w.clone()));
            }
        }
        report.refined = found.into_iter().map(|(_, w)| w).collect();
    }

    if let Some((_, w)) = best_witness {
        report.verdict = Verdict::Violated;
        report.witness = Some(w);
    }
    report
}

fn o_vars(outcomes: &[SampleOutcome], i: u64) -> &[f64] {
    outcomes[i as usize].vars.as_deref().unwrap_or(&[])
}

/// Looks for any admissible draw among the first `budget` streams.
pub(crate) fn is_nonempty<P: Probe + ?Sized>(probe: &P, seed: u64, tag: u64, budget: u64) -> bool {
    (0..budget).any(|i| probe.draw(&mut SampleStream::new(seed, tag, i)).is_some())
}
