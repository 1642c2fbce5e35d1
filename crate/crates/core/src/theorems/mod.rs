//! Results about φ_E-convex functions as premise → conclusion tests.
//!
//! Each verifier checks the premises of one result on a concrete instance
//! with the sampled predicates of [`crate::checker`] and [`crate::algebra`],
//! stops with `PremiseFailed` at the first failing premise, and otherwise
//! checks the conclusion.

mod calculus;
mod closure;
mod epigraph;
mod geometry;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{AlgebraError, Instance, Region};
use crate::checker::engine::{self, EngineOpts, Probe, Sides};
use crate::checker::probes::Pairs;
use crate::checker::{check_geodesic_phie_convex_fn, CheckConfig};
use crate::exprlang::ParseError;
use crate::manifold::{ManifoldKind, Point};
use crate::report::{Report, Verdict, Witness};
use crate::rng::SampleStream;
use crate::space::{Fault, Space};

pub use calculus::{verify_mean_value, verify_strict_differential, verify_three_point, STRICT_DERIVATIVE_GAP};
pub use closure::{expand_phi_template, verify_closure, verify_composition, verify_phi_limit, ClosureKind, LimitMode};
pub use epigraph::{verify_epigraph_equiv, verify_intersection, verify_sup_epigraph_cor};
pub use geometry::{
    verify_chart_continuity, verify_continuity_bound, verify_diffeo_invariance, verify_local_min, LOCAL_MIN_RADII,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TheoremId {
    MeanValue31,
    ThreePoint32,
    Scaling41a,
    Sum41b,
    Composition,
    WeightedSum,
    DiffeoInvariance,
    ContinuityBound,
    SupFamily,
    LocalMin,
    ChartContinuity,
    PhiLimit,
    PhiSeriesLimit,
    StrictDifferential,
    EpigraphEquiv,
    Intersection52,
    SupEpigraphCor,
}

impl TheoremId {
    pub const ALL: [TheoremId; 17] = [
        TheoremId::MeanValue31,
        TheoremId::ThreePoint32,
        TheoremId::Scaling41a,
        TheoremId::Sum41b,
        TheoremId::Composition,
        TheoremId::WeightedSum,
        TheoremId::DiffeoInvariance,
        TheoremId::ContinuityBound,
        TheoremId::SupFamily,
        TheoremId::LocalMin,
        TheoremId::ChartContinuity,
        TheoremId::PhiLimit,
        TheoremId::PhiSeriesLimit,
        TheoremId::StrictDifferential,
        TheoremId::EpigraphEquiv,
        TheoremId::Intersection52,
        TheoremId::SupEpigraphCor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TheoremId::MeanValue31 => "MeanValue31",
            TheoremId::ThreePoint32 => "ThreePoint32",
            TheoremId::Scaling41a => "Scaling41a",
            TheoremId::Sum41b => "Sum41b",
            TheoremId::Composition => "Composition",
            TheoremId::WeightedSum => "WeightedSum",
            TheoremId::DiffeoInvariance => "DiffeoInvariance",
            TheoremId::ContinuityBound => "ContinuityBound",
            TheoremId::SupFamily => "SupFamily",
            TheoremId::LocalMin => "LocalMin",
            TheoremId::ChartContinuity => "ChartContinuity",
            TheoremId::PhiLimit => "PhiLimit",
            TheoremId::PhiSeriesLimit => "PhiSeriesLimit",
            TheoremId::StrictDifferential => "StrictDifferential",
            TheoremId::EpigraphEquiv => "EpigraphEquiv",
            TheoremId::Intersection52 => "Intersection52",
            TheoremId::SupEpigraphCor => "SupEpigraphCor",
        }
    }

    /// One-line statement of what is verified.
    pub fn summary(self) -> &'static str {
        match self {
            TheoremId::MeanValue31 => {
                "phi_E-convex differentiable h with h(E u1) != h(E u2): some alpha, beta give h'(alpha) >= R h'(beta) >= h'(beta)"
            }
            TheoremId::ThreePoint32 => {
                "E mu1 < E mu2 < E mu3: (E mu1 - E mu3)(h'(E mu2) + h'(E mu3)) <= phi12 + phi23"
            }
            TheoremId::Scaling41a => "x*h is geodesic phi_E-convex for x >= 0 when phi is nonnegatively linear",
            TheoremId::Sum41b => "h1 + h2 is geodesic phi_E-convex when phi is additive",
            TheoremId::Composition => "h2 o h1 for geodesic E-convex h1 and non-decreasing phi-convex h2",
            TheoremId::WeightedSum => "sum x_i h_i with x_i >= 0 when phi is nonnegatively linear",
            TheoremId::DiffeoInvariance => "h o H^-1 is geodesic phi_E'-convex on H(B) for a diffeomorphism H",
            TheoremId::ContinuityBound => "phi <= K on h(B) x h(B) gives the Lipschitz bound L = K/eps inside B",
            TheoremId::SupFamily => "sup of a finite family when phi is sequentially upper bounded",
            TheoremId::LocalMin => "local minimum at E(mu*) implies phi(h(E mu), h(E mu*)) >= 0",
            TheoremId::ChartContinuity => "continuity of h read through a chart diffeomorphism",
            TheoremId::PhiLimit => "geodesic phi^i_E-convexity passes to the limit bifunction",
            TheoremId::PhiSeriesLimit => "geodesic convexity under partial sums passes to their limit",
            TheoremId::StrictDifferential => {
                "strict convexity and antisymmetric phi separate the endpoint derivatives along the geodesic"
            }
            TheoremId::EpigraphEquiv => "epi(h) is a geodesic phi_E-convex set iff h is geodesic phi_E-convex",
            TheoremId::Intersection52 => "intersections of geodesic phi_E-convex sets are geodesic phi_E-convex",
            TheoremId::SupEpigraphCor => "sup of a family with geodesic phi_E-convex epigraphs",
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TheoremId {
    type Err = TheoremError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| TheoremError::UnknownTheorem(s.to_string()))
    }
}

/// Malformed verifier arguments (as opposed to failed premises).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TheoremError {
    #[error("unknown theorem id `{0}`")]
    UnknownTheorem(String),
    #[error("invalid arguments: {0}")]
    Arguments(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

fn is_line(inst: &Instance) -> bool {
    inst.space.base.kind == ManifoldKind::Euclidean && inst.dim() == 1 && inst.space.chart.is_none()
}

fn fn_check(inst: &Instance, cfg: &CheckConfig) -> Report {
    check_geodesic_phie_convex_fn(inst, cfg, false)
}

/// Instances of a family must share everything except `h`.
fn check_family(insts: &[Instance]) -> Result<&Instance, TheoremError> {
    let first = insts
        .first()
        .ok_or_else(|| TheoremError::Arguments("the family is empty".into()))?;
    for (i, other) in insts.iter().enumerate().skip(1) {
        if other.domain != first.domain || other.e != first.e || other.phi != first.phi {
            return Err(TheoremError::Arguments(format!(
                "instance {} does not share the domain, E and phi of instance 0",
                i
            )));
        }
    }
    Ok(first)
}

fn fault_report(name: &str, cfg: &CheckConfig, f: impl fmt::Display) -> Report {
    Report::domain_error(name, cfg.seed, f.to_string())
}

/// Deterministic accumulation of a short list of evaluations into a report.
struct Tally {
    report: Report,
    best: Option<f64>,
    threshold_floor: f64,
}

impl Tally {
    fn new(name: &str, cfg: &CheckConfig) -> Self {
        Self {
            report: Report::new(name, cfg.seed),
            best: None,
            threshold_floor: 0.0,
        }
    }

    fn add(&mut self, cfg: &CheckConfig, index: u64, points: Vec<Point>, s: Sides) {
        let threshold = s.threshold.unwrap_or_else(|| cfg.threshold(s.rhs)).max(self.threshold_floor);
        let excess = s.violation - threshold;
        let r = &mut self.report;
        r.max_violation = if r.samples_used == 0 {
            s.violation
        } else {
            r.max_violation.max(s.violation)
        };
        r.samples_used += 1;
        if excess > 0.0 && self.best.is_none_or(|b| excess > b) {
            self.best = Some(excess);
            r.verdict = Verdict::Violated;
            r.witness = Some(Witness {
                sample_index: index,
                points,
                t: s.t,
                lhs: s.lhs,
                rhs: s.rhs,
                violation: s.violation,
            });
        }
    }

    fn finish(self) -> Report {
        self.report
    }
}

/// A single inequality evaluated once.
fn single(name: &str, cfg: &CheckConfig, points: Vec<Point>, s: Sides) -> Report {
    let mut t = Tally::new(name, cfg);
    t.add(cfg, 0, points, s);
    t.finish()
}

type PointEval<'a> = dyn Fn(&[Point], &[f64]) -> Result<Option<Sides>, Fault> + Sync + 'a;

/// `k` member points of a region plus `aux` standard-normal variables,
/// evaluated by a closure.
struct SampleProbe<'a> {
    pairs: Pairs<'a>,
    k: usize,
    aux: usize,
    params: Vec<f64>,
    eval: &'a PointEval<'a>,
}

impl<'a> SampleProbe<'a> {
    fn new(region: &'a Region, space: &'a Space, k: usize, eval: &'a PointEval<'a>) -> Self {
        Self {
            pairs: Pairs::new(region, space),
            k,
            aux: 0,
            params: vec![0.0],
            eval,
        }
    }

    fn with_aux(mut self, aux: usize) -> Self {
        self.aux = aux;
        self
    }

    fn split_at(&self) -> usize {
        self.k * self.pairs.n
    }
}

impl Probe for SampleProbe<'_> {
    fn draw(&self, s: &mut SampleStream) -> Option<Vec<f64>> {
        let mut v = self.pairs.draw(s, self.k)?;
        v.extend((0..self.aux).map(|_| s.normal()));
        Some(v)
    }
    fn params(&self) -> &[f64] {
        &self.params
    }
    fn canonicalize(&self, v: &[f64]) -> Option<Vec<f64>> {
        let (pts, aux) = v.split_at(self.split_at());
        let mut out = self.pairs.canonical(pts)?;
        out.extend_from_slice(aux);
        Some(out)
    }
    fn widths(&self) -> Vec<f64> {
        let mut w = self.pairs.widths(self.k);
        w.extend(std::iter::repeat_n(1.0, self.aux));
        w
    }
    fn eval(&self, v: &[f64], _: f64) -> Result<Option<Sides>, Fault> {
        let (pts, aux) = v.split_at(self.split_at());
        (self.eval)(&self.pairs.split(pts), aux)
    }
    fn points(&self, v: &[f64]) -> Vec<Point> {
        self.pairs.split(&v[..self.split_at()])
    }
}

type ParamEval<'a> = dyn Fn(f64) -> Result<Option<Sides>, Fault> + Sync + 'a;

/// A single parameter `t ∈ [0, 1]` at fixed points.
struct ParamProbe<'a> {
    points: Vec<Point>,
    eval: &'a ParamEval<'a>,
}

impl Probe for ParamProbe<'_> {
    fn draw(&self, s: &mut SampleStream) -> Option<Vec<f64>> {
        Some(vec![s.uniform()])
    }
    fn params(&self) -> &[f64] {
        &[0.0]
    }
    fn canonicalize(&self, v: &[f64]) -> Option<Vec<f64>> {
        (0.0..=1.0).contains(&v[0]).then(|| v.to_vec())
    }
    fn widths(&self) -> Vec<f64> {
        vec![1.0]
    }
    fn eval(&self, v: &[f64], _: f64) -> Result<Option<Sides>, Fault> {
        (self.eval)(v[0])
    }
    fn points(&self, _: &[f64]) -> Vec<Point> {
        self.points.clone()
    }
}

fn run_points(name: &str, probe: &SampleProbe<'_>, cfg: &CheckConfig, tag: u64) -> Report {
    engine::run(probe, cfg, name, EngineOpts::new(tag))
}

/// Relative slack granted to quantities built from numeric derivatives.
const DERIVATIVE_SLACK: f64 = 1e-7;

fn derivative_slack(values: &[f64]) -> f64 {
    DERIVATIVE_SLACK * (1.0 + values.iter().map(|v| v.abs()).sum::<f64>())
}
