//! Domains, instances `(h, E, φ)` and sampled bifunction predicates.

use thiserror::Error;

use crate::checker::engine::{self, EngineOpts, Probe, Sides};
use crate::checker::CheckConfig;
use crate::exprlang::{Bifunction, EndoMap, Expr, ParseError, ScalarFn, Signature};
use crate::manifold::{GeometryError, Manifold, ManifoldKind, Point};
use crate::report::{Report, Verdict, Witness};
use crate::rng::{tags, SampleStream};
use crate::space::{Diffeo, Fault, Space};

/// Attempts per sample when drawing a member of a set.
pub const DRAW_ATTEMPTS: usize = 1000;
/// Draws used to decide that a set is empty.
pub const EMPTINESS_BUDGET: u64 = 1_000_000;
/// Default half-width of the value range probed by bifunction predicates.
pub const VALUE_RANGE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgebraError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("arity mismatch: {0}")]
    Arity(String),
    #[error("empty sequence in pair {0}")]
    EmptySequence(usize),
    #[error("no preimage of {point:?} found (best residual {residual:e})")]
    InverseSearchFailed { point: Vec<f64>, residual: f64 },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Fault(#[from] Fault),
}

impl From<GeometryError> for AlgebraError {
    fn from(e: GeometryError) -> Self {
        AlgebraError::Fault(e.into())
    }
}

/// Box in chart coordinates intersected with `{membership > 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSet {
    pub manifold: Manifold,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub membership: Option<Expr>,
}

impl DomainSet {
    pub fn new(
        manifold: Manifold,
        bounds: &[(f64, f64)],
        membership: Option<&str>,
    ) -> Result<Self, AlgebraError> {
        let n = manifold.ambient_dim();
        if bounds.len() != n {
            return Err(AlgebraError::InvalidDomain(format!(
                "box has {} intervals, manifold needs {n}",
                bounds.len()
            )));
        }
        if bounds
            .iter()
            .any(|(l, h)| !(l.is_finite() && h.is_finite() && l <= h))
        {
            return Err(AlgebraError::InvalidDomain(format!("box {bounds:?} is empty or non-finite")));
        }
        let membership = membership
            .map(|src| Expr::parse(src, &Signature::coords(n)))
            .transpose()?;
        Ok(Self {
            manifold,
            lo: bounds.iter().map(|b| b.0).collect(),
            hi: bounds.iter().map(|b| b.1).collect(),
            membership,
        })
    }

    /// The box `[lo, hi]ⁿ` (or `[-1, 1]ⁿ⁺¹` on the sphere) without predicate.
    pub fn cube(manifold: Manifold, lo: f64, hi: f64) -> Self {
        let n = manifold.ambient_dim();
        Self {
            manifold,
            lo: vec![lo; n],
            hi: vec![hi; n],
            membership: None,
        }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Self::cube(Manifold::euclidean(1), lo, hi)
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.lo.iter().copied().zip(self.hi.iter().copied()).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l).max(1e-12))
            .collect()
    }

    /// `max(box overshoot, −predicate)`: positive outside, nonpositive inside.
    pub fn excess(&self, p: &[f64]) -> Result<f64, Fault> {
        let mut e = f64::NEG_INFINITY;
        for ((x, l), h) in p.iter().zip(&self.lo).zip(&self.hi) {
            e = e.max(l - x).max(x - h);
        }
        if let Some(m) = &self.membership {
            e = e.max(-m.eval(p)?);
        }
        Ok(e)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        let in_box = p
            .iter()
            .zip(&self.lo)
            .zip(&self.hi)
            .all(|((x, l), h)| l <= x && x <= h);
        in_box
            && match &self.membership {
                Some(m) => m.eval(p).is_ok_and(|v| v > 0.0),
                None => true,
            }
    }

    fn candidate(&self, s: &mut SampleStream, attempt: usize) -> Option<Vec<f64>> {
        let boxed = |s: &mut SampleStream| -> Vec<f64> {
            self.lo
                .iter()
                .zip(&self.hi)
                .map(|(l, h)| s.uniform_in(*l, *h))
                .collect()
        };
        match self.manifold.kind {
            ManifoldKind::Euclidean => Some(boxed(s)),
            ManifoldKind::Sphere => {
                let raw: Vec<f64> = if attempt.is_multiple_of(2) {
                    (0..self.lo.len()).map(|_| s.normal()).collect()
                } else {
                    boxed(s)
                };
                self.manifold.project(&raw).map(|p| p.0)
            }
            ManifoldKind::PoincareBall => {
                let x = boxed(s);
                let r2: f64 = x.iter().map(|c| c * c).sum();
                (r2.sqrt() < 1.0 - 1e-9).then_some(x)
            }
        }
    }

    pub fn draw(&self, s: &mut SampleStream) -> Option<Point> {
        (0..DRAW_ATTEMPTS).find_map(|a| {
            self.candidate(s, a)
                .filter(|x| self.contains(x))
                .map(Point)
        })
    }
}

/// A domain on a [`Space`]: either a plain domain set or the image of one
/// under a chart.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Domain(DomainSet),
    Chart { inner: DomainSet, chart: Diffeo },
}

impl From<DomainSet> for Region {
    fn from(d: DomainSet) -> Self {
        Region::Domain(d)
    }
}

impl Region {
    pub fn space(&self) -> Space {
        match self {
            Region::Domain(d) => d.manifold.into(),
            Region::Chart { inner, chart } => Space::pushforward(inner.manifold, chart.clone()),
        }
    }

    pub fn base(&self) -> &DomainSet {
        match self {
            Region::Domain(d) | Region::Chart { inner: d, .. } => d,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Region::Domain(d) => d.manifold.ambient_dim(),
            Region::Chart { chart, .. } => chart.forward.output_arity(),
        }
    }

    pub fn draw(&self, s: &mut SampleStream) -> Option<Point> {
        let p = self.base().draw(s)?;
        match self {
            Region::Domain(_) => Some(p),
            Region::Chart { chart, .. } => chart.apply(&p.0).ok().map(Point),
        }
    }

    pub fn excess(&self, p: &[f64]) -> Result<f64, Fault> {
        match self {
            Region::Domain(d) => d.excess(p),
            Region::Chart { inner, chart } => {
                let x = chart.invert(p)?;
                let x = inner.manifold.admit(x, crate::manifold::MAP_OUTPUT_SLACK)?;
                inner.excess(&x.0)
            }
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        match self {
            Region::Domain(d) => d.contains(p),
            Region::Chart { inner, chart } => chart
                .invert(p)
                .ok()
                .and_then(|x| inner.manifold.admit(x, crate::manifold::MAP_OUTPUT_SLACK).ok())
                .is_some_and(|x| inner.contains(&x.0)),
        }
    }

    /// Per-coordinate extent, estimated from draws for chart images.
    pub fn widths(&self) -> Vec<f64> {
        match self {
            Region::Domain(d) => d.widths(),
            Region::Chart { .. } => {
                let n = self.ambient_dim();
                let mut lo = vec![f64::INFINITY; n];
                let mut hi = vec![f64::NEG_INFINITY; n];
                for i in 0..256 {
                    if let Some(p) = self.draw(&mut SampleStream::new(0, tags::PROBE, i)) {
                        for (j, c) in p.0.iter().enumerate() {
                            lo[j] = lo[j].min(*c);
                            hi[j] = hi[j].max(*c);
                        }
                    }
                }
                lo.iter()
                    .zip(&hi)
                    .map(|(l, h)| if h > l { h - l } else { 1.0 })
                    .collect()
            }
        }
    }

    /// Largest coordinate extent; used as the domain scale for radius ladders.
    pub fn scale(&self) -> f64 {
        self.widths().into_iter().fold(0.0, f64::max).max(1e-12)
    }

    /// Maps free coordinates to an admissible member, or rejects them.
    pub fn canonical(&self, space: &Space, coords: &[f64]) -> Option<Point> {
        let p = space.project(coords)?;
        self.contains(&p.0).then_some(p)
    }

    pub fn is_empty(&self, seed: u64) -> bool {
        let mut s = SampleStream::new(seed, tags::PROBE, u64::MAX);
        let attempts = (EMPTINESS_BUDGET as usize).div_ceil(DRAW_ATTEMPTS);
        (0..attempts).all(|_| self.draw(&mut s).is_none())
    }
}

/// The standing data `(h, E, φ)` on a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub space: Space,
    pub h: ScalarFn,
    pub e: EndoMap,
    pub phi: Bifunction,
    pub domain: Region,
}

impl Instance {
    pub fn new(h: ScalarFn, e: EndoMap, phi: Bifunction, domain: Region) -> Result<Self, AlgebraError> {
        let space = domain.space();
        let n = space.ambient_dim();
        if h.arity() != n {
            return Err(AlgebraError::Arity(format!(
                "h takes {} coordinates, points have {n}",
                h.arity()
            )));
        }
        if e.input_arity() != n || e.output_arity() != n {
            return Err(AlgebraError::Arity(format!(
                "E maps {} -> {} coordinates, points have {n}",
                e.input_arity(),
                e.output_arity()
            )));
        }
        Ok(Self {
            space,
            h,
            e,
            phi,
            domain,
        })
    }

    /// Parses an instance from expression sources; `e = None` means identity.
    pub fn parse(
        manifold: Manifold,
        bounds: &[(f64, f64)],
        membership: Option<&str>,
        h: &str,
        e: Option<&[&str]>,
        phi: &str,
    ) -> Result<Self, AlgebraError> {
        let n = manifold.ambient_dim();
        let domain = DomainSet::new(manifold, bounds, membership)?;
        let e = match e {
            Some(c) => EndoMap::parse(c, n)?,
            None => EndoMap::identity(n),
        };
        Self::new(ScalarFn::parse(h, n)?, e, Bifunction::parse(phi)?, domain.into())
    }

    pub fn manifold(&self) -> Manifold {
        self.space.base
    }

    pub fn dim(&self) -> usize {
        self.space.ambient_dim()
    }

    pub fn apply_e(&self, p: &Point) -> Result<Point, Fault> {
        if self.e.is_identity() {
            return Ok(p.clone());
        }
        self.space.admit(self.e.apply(&p.0)?)
    }

    pub fn h_at(&self, p: &Point) -> Result<f64, Fault> {
        Ok(self.h.eval(p)?)
    }

    pub fn with_h(&self, h: ScalarFn) -> Self {
        Self { h, ..self.clone() }
    }

    pub fn with_phi(&self, phi: Bifunction) -> Self {
        Self {
            phi,
            ..self.clone()
        }
    }

    pub fn with_e(&self, e: EndoMap) -> Self {
        Self { e, ..self.clone() }
    }

    pub fn with_domain(&self, domain: Region) -> Self {
        Self {
            space: domain.space(),
            domain,
            ..self.clone()
        }
    }
}

/// Tolerance on `‖E(x) − u‖` accepted as a preimage.
pub fn inverse_tol(u: &[f64]) -> f64 {
    1e-7 * (1.0 + crate::manifold::norm(u))
}

/// Sampled search for `x ∈ domain` with `E(x) = u`.
///
/// Tries the fixed point `x = u` first, then the best of a few draws under a
/// local golden-section polish, then the rest of `budget` draws likewise.
/// Returns the preimage and residual.
pub fn inverse_search(
    domain: &Region,
    e: &EndoMap,
    space: &Space,
    u: &[f64],
    budget: u64,
    seed: u64,
) -> Result<(Point, f64), AlgebraError> {
    let tol = inverse_tol(u);
    let residual = |x: &[f64]| -> f64 {
        match e.apply(x) {
            Ok(y) => crate::manifold::dist(&y, u),
            Err(_) => f64::INFINITY,
        }
    };
    if domain.contains(u) {
        let r = residual(u);
        if r <= tol {
            return Ok((Point(u.to_vec()), r));
        }
    }
    let draw_best = |range: std::ops::Range<u64>| -> Result<(Point, f64), AlgebraError> {
        let mut best: Option<(Point, f64)> = None;
        for j in range {
            let Some(x) = domain.draw(&mut SampleStream::new(seed, tags::INVERSE, j)) else {
                continue;
            };
            let r = residual(&x.0);
            if best.as_ref().is_none_or(|b| r < b.1) {
                best = Some((x, r));
            }
            if best.as_ref().is_some_and(|b| b.1 <= tol) {
                break;
            }
        }
        best.ok_or_else(|| AlgebraError::InverseSearchFailed {
            point: u.to_vec(),
            residual: f64::INFINITY,
        })
    };
    let widths = domain.widths();
    let polish = |(mut x, mut r): (Point, f64)| -> (Point, f64) {
        let mut stalled = 0;
        for sweep in 0..60 {
            if r <= tol || stalled == 3 {
                break;
            }
            let before = r;
            let shrink = 0.7f64.powi(sweep);
            for j in 0..x.0.len() {
                let rad = 0.25 * widths[j] * shrink;
                let mut trial = x.0.clone();
                let mut f = |s: f64| {
                    trial[j] = s;
                    match domain.canonical(space, &trial) {
                        Some(p) => -residual(&p.0),
                        None => f64::NEG_INFINITY,
                    }
                };
                let (s, v) = golden_min_helper(&mut f, x.0[j] - rad, x.0[j] + rad);
                if -v < r {
                    let mut cand = x.0.clone();
                    cand[j] = s;
                    if let Some(p) = domain.canonical(space, &cand) {
                        let rr = residual(&p.0);
                        if rr < r {
                            x = p;
                            r = rr;
                        }
                    }
                }
            }
            stalled = if r < before { 0 } else { stalled + 1 };
        }
        (x, r)
    };
    // A short draw plus polish usually succeeds; the full budget is the fallback.
    let quick = budget.min(64);
    let (mut x, mut r) = polish(draw_best(0..quick)?);
    if r > tol && quick < budget {
        if let Ok(best) = draw_best(quick..budget) {
            let (x2, r2) = polish(best);
            if r2 < r {
                (x, r) = (x2, r2);
            }
        }
    }
    if r <= tol {
        Ok((x, r))
    } else {
        Err(AlgebraError::InverseSearchFailed {
            point: u.to_vec(),
            residual: r,
        })
    }
}

fn golden_min_helper(f: &mut dyn FnMut(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..20 {
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
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// The `u`-component of a subset of `N × ℝ`.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseSet {
    Domain(Region),
    /// `E(domain)`, decided by inverse search.
    Image { domain: Region, map: EndoMap },
}

/// One constraint `g(u, v) ≥ 0` on a product set.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphBound {
    /// An expression over `x1..xk, v`.
    Expr(Expr),
    /// `v − h(u)`, the epigraph of `h`.
    Epigraph(ScalarFn),
}

impl GraphBound {
    pub fn parse(src: &str, coords: usize) -> Result<Self, ParseError> {
        Ok(GraphBound::Expr(Expr::parse(src, &Signature::coords_and_value(coords))?))
    }

    pub fn eval(&self, u: &[f64], v: f64) -> Result<f64, Fault> {
        match self {
            GraphBound::Epigraph(h) => Ok(v - h.eval_coords(u)?),
            GraphBound::Expr(e) => {
                let mut vars = u.to_vec();
                vars.push(v);
                Ok(e.eval(&vars)?)
            }
        }
    }
}

/// A subset of `N × ℝ`: `{(u, v) : u ∈ base, g_i(u, v) ≥ 0 ∀i}`, with `v`
/// sampled from `v_range`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSet {
    pub base: BaseSet,
    pub bounds: Vec<GraphBound>,
    pub v_range: (f64, f64),
    /// Draw budget for inverse searches deciding `u ∈ E(domain)`.
    pub inverse_budget: u64,
}

impl ProductSet {
    pub fn new(base: BaseSet, bounds: Vec<GraphBound>, v_range: (f64, f64)) -> Self {
        Self {
            base,
            bounds,
            v_range,
            inverse_budget: 2000,
        }
    }

    /// `epi(h) = {(u, v) ∈ E(B) × ℝ : h(u) ≤ v}`.
    pub fn epigraph(inst: &Instance, v_range: (f64, f64)) -> Self {
        let base = if inst.e.is_identity() {
            BaseSet::Domain(inst.domain.clone())
        } else {
            BaseSet::Image {
                domain: inst.domain.clone(),
                map: inst.e.clone(),
            }
        };
        Self::new(base, vec![GraphBound::Epigraph(inst.h.clone())], v_range)
    }

    /// Value window covering `h` on the (E-image of the) domain plus headroom.
    pub fn default_v_range(inst: &Instance, seed: u64) -> (f64, f64) {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..512 {
            let mut s = SampleStream::new(seed, tags::VALUES, i);
            let Some(p) = inst.domain.draw(&mut s) else { continue };
            if let Ok(v) = inst.apply_e(&p).and_then(|q| inst.h_at(&q)) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() {
            return (-VALUE_RANGE, VALUE_RANGE);
        }
        let span = (hi - lo).max(1.0);
        (lo - 0.5 * span, hi + span)
    }

    /// Intersection of product sets over a common base.
    pub fn intersection(sets: &[ProductSet]) -> Result<Self, AlgebraError> {
        let first = sets
            .first()
            .ok_or_else(|| AlgebraError::InvalidDomain("empty family".into()))?;
        if sets.iter().any(|s| s.base != first.base) {
            return Err(AlgebraError::InvalidDomain(
                "intersected product sets must share their base set".into(),
            ));
        }
        let lo = sets.iter().map(|s| s.v_range.0).fold(f64::NEG_INFINITY, f64::max);
        let hi = sets.iter().map(|s| s.v_range.1).fold(f64::INFINITY, f64::min);
        Ok(Self {
            base: first.base.clone(),
            bounds: sets.iter().flat_map(|s| s.bounds.iter().cloned()).collect(),
            v_range: (lo, hi.max(lo)),
            inverse_budget: first.inverse_budget,
        })
    }

    pub fn space(&self) -> Space {
        match &self.base {
            BaseSet::Domain(r) | BaseSet::Image { domain: r, .. } => r.space(),
        }
    }

    pub fn base_region(&self) -> &Region {
        match &self.base {
            BaseSet::Domain(r) | BaseSet::Image { domain: r, .. } => r,
        }
    }

    pub fn draw_u(&self, s: &mut SampleStream) -> Option<Point> {
        match &self.base {
            BaseSet::Domain(r) => r.draw(s),
            BaseSet::Image { domain, map } => {
                let x = domain.draw(s)?;
                let y = map.apply(&x.0).ok()?;
                self.space().admit(y).ok()
            }
        }
    }

    pub fn base_excess(&self, u: &[f64], seed: u64) -> Result<f64, Fault> {
        match &self.base {
            BaseSet::Domain(r) => r.excess(u),
            BaseSet::Image { domain, map } => {
                match inverse_search(domain, map, &self.space(), u, self.inverse_budget, seed) {
                    Ok(_) => Ok(0.0),
                    Err(AlgebraError::InverseSearchFailed { residual, .. }) => Ok(residual),
                    Err(AlgebraError::Fault(f)) => Err(f),
                    Err(e) => Err(Fault::Eval(crate::exprlang::EvalError {
                        reason: e.to_string(),
                        operands: u.to_vec(),
                    })),
                }
            }
        }
    }

    /// `min_i g_i(u, v)`.
    pub fn graph_margin(&self, u: &[f64], v: f64) -> Result<f64, Fault> {
        let mut m = f64::INFINITY;
        for g in &self.bounds {
            m = m.min(g.eval(u, v)?);
        }
        Ok(m)
    }

    /// `max(base excess, −min_i g_i)`: positive outside the set.
    pub fn excess(&self, u: &[f64], v: f64, seed: u64) -> Result<f64, Fault> {
        let g = self.graph_margin(u, v)?;
        if -g > 0.0 {
            // Already outside; skip a potentially costly inverse search.
            return Ok(-g);
        }
        Ok(self.base_excess(u, seed)?.max(-g))
    }

    /// Draws `v` in the slice over `u`: half uniform, half on the lower
    /// boundary of the slice (bisection towards `v_range.0`).
    pub fn draw_v(&self, u: &[f64], s: &mut SampleStream) -> Option<f64> {
        let (lo, hi) = self.v_range;
        let inside = |v: f64| self.graph_margin(u, v).is_ok_and(|g| g >= 0.0);
        let boundary = s.uniform() < 0.5;
        let mut v_in = None;
        for _ in 0..64 {
            let v = s.uniform_in(lo, hi);
            if inside(v) {
                v_in = Some(v);
                break;
            }
        }
        if v_in.is_none() && inside(hi) {
            v_in = Some(hi);
        }
        let v_in = v_in?;
        if !boundary {
            return Some(v_in);
        }
        if let [GraphBound::Epigraph(h)] = self.bounds.as_slice() {
            if let Ok(b) = h.eval_coords(u) {
                if b >= lo && inside(b) {
                    return Some(b);
                }
            }
        }
        if inside(lo) {
            return Some(lo);
        }
        let (mut out, mut inn) = (lo, v_in);
        for _ in 0..200 {
            let mid = 0.5 * (out + inn);
            if mid == out || mid == inn {
                break;
            }
            if inside(mid) {
                inn = mid;
            } else {
                out = mid;
            }
        }
        Some(inn)
    }

    pub fn with_inverse_budget(&self, budget: u64) -> Self {
        Self {
            inverse_budget: budget,
            ..self.clone()
        }
    }

    pub fn is_member(&self, u: &[f64], v: f64, seed: u64) -> Result<bool, Fault> {
        Ok(self.excess(u, v, seed)? <= 0.0)
    }
}

/// `(u, v) ∈ epi(h)`: `u` must have a preimage under `E`, then `h(u) ≤ v + tol`.
pub fn epigraph_membership(
    inst: &Instance,
    u: &Point,
    v: f64,
    cfg: &CheckConfig,
) -> Result<bool, AlgebraError> {
    if !inst.e.is_identity() {
        inverse_search(&inst.domain, &inst.e, &inst.space, &u.0, cfg.samples, cfg.seed)?;
    } else if !inst.domain.contains(&u.0) {
        return Err(AlgebraError::InverseSearchFailed {
            point: u.0.clone(),
            residual: inst.domain.excess(&u.0)?,
        });
    }
    let hu = inst.h_at(u)?;
    Ok(hu <= v + cfg.threshold(v))
}

struct ValueBox {
    range: f64,
}

impl ValueBox {
    fn draw(&self, s: &mut SampleStream, n: usize) -> Vec<f64> {
        (0..n).map(|_| s.uniform_in(-self.range, self.range)).collect()
    }

    fn canonical(&self, v: &[f64]) -> Option<Vec<f64>> {
        v.iter().all(|x| x.abs() <= self.range).then(|| v.to_vec())
    }
}

struct HomogeneousProbe<'a> {
    phi: &'a Bifunction,
    vals: ValueBox,
}

impl Probe for HomogeneousProbe<'_> {
    fn draw(&self, s: &mut SampleStream) -> Option<Vec<f64>> {
        let mut v = self.vals.draw(s, 2);
        v.push(s.uniform_in(0.0, 4.0));
        Some(v)
    }
    fn params(&self) -> &[f64] {
        &[0.0]
    }
    fn canonicalize(&self, v: &[f64]) -> Option<Vec<f64>> {
        (v[2] >= 0.0 && v[2] <= 4.0 && self.vals.canonical(&v[..2]).is_some()).then(|| v.to_vec())
    }
    fn widths(&self) -> Vec<f64> {
        vec![2.0 * self.vals.range, 2.0 * self.vals.range, 4.0]
    }
    fn eval(&self, v: &[f64], _: f64) -> Result<Option<Sides>, Fault> {
        let (a, b, t) = (v[0], v[1], v[2]);
        let lhs = self.phi.eval(t * a, t * b)?;
        let rhs = t * self.phi.eval(a, b)?;
        Ok(Some(Sides::eq(lhs, rhs, t)))
    }
    fn points(&self, v: &[f64]) -> Vec<Point> {
        vec![Point(vec![v[0], v[1]])]
    }
}

struct AdditiveProbe<'a> {
    phi: &'a Bifunction,
    vals: ValueBox,
}

impl Probe for AdditiveProbe<'_> {
    fn draw(&self, s: &mut SampleStream) -> Option<Vec<f64>> {
        Some(self.vals.draw(s, 4))
    }
    fn params(&self) -> &[f64] {
        &[0.0]
    }
    fn canonicalize(&self, v: &[f64]) -> Option<Vec<f64>> {
        self.vals.canonical(v)
    }
    fn widths(&self) -> Vec<f64> {
        vec![2.0 * self.vals.range; 4]
    }
    fn eval(&self, v: &[f64], _: f64) -> Result<Option<Sides>, Fault> {
        let lhs = self.phi.eval(v[0] + v[2], v[1] + v[3])?;
        let rhs = self.phi.eval(v[0], v[1])? + self.phi.eval(v[2], v[3])?;
        Ok(Some(Sides::eq(lhs, rhs, 0.0)))
    }
    fn points(&self, v: &[f64]) -> Vec<Point> {
        vec![Point(vec![v[0], v[1]]), Point(vec![v[2], v[3]])]
    }
}

struct AntisymmetricProbe<'a> {
    phi: &'a Bifunction,
    vals: ValueBox,
}

impl Probe for AntisymmetricProbe<'_> {
    fn draw(&self, s: &mut SampleStream) -> Option<Vec<f64>> {
        Some(self.vals.draw(s, 2))
    }
    fn params(&self) -> &[f64] {
        &[0.0]
    }
    fn canonicalize(&self, v: &[f64]) -> Option<Vec<f64>> {
        self.vals.canonical(v)
    }
    fn widths(&self) -> Vec<f64> {
        vec![2.0 * self.vals.range; 2]
    }
    fn eval(&self, v: &[f64], _: f64) -> Result<Option<Sides>, Fault> {
        let lhs = self.phi.eval(v[0], v[1])?;
        let rhs = -self.phi.eval(v[1], v[0])?;
        Ok(Some(Sides::eq(lhs, rhs, 0.0)))
    }
    fn points(&self, v: &[f64]) -> Vec<Point> {
        vec![Point(vec![v[0], v[1]])]
    }
}

/// Which monotonicity of `φ` to probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    /// `a ↦ φ(a, b)` non-decreasing.
    First,
    /// `b ↦ φ(a, b)` non-decreasing.
    Second,
    /// `b ↦ b + φ(a, b)` non-decreasing.
    OffsetSecond,
}

struct MonotoneProbe<'a> {
    phi: &'a Bifunction,
    vals: ValueBox,
    params: Vec<f64>,
}

impl Probe for MonotoneProbe<'_> {
    fn draw(&self, s: &mut SampleStream) -> Option<Vec<f64>> {
        let mut v = self.vals.draw(s, 2);
        v.push(s.uniform_in(1e-3, 1.0) * self.vals.range * 0.1);
        Some(v)
    }
    fn params(&self) -> &[f64] {
        &self.params
    }
    fn canonicalize(&self, v: &[f64]) -> Option<Vec<f64>> {
        (v[2] > 0.0 && v[2] <= self.vals.range * 0.1 && self.vals.canonical(&v[..2]).is_some())
            .then(|| v.to_vec())
    }
    fn widths(&self) -> Vec<f64> {
        vec![2.0 * self.vals.range, 2.0 * self.vals.range, 0.1 * self.vals.range]
    }
    fn eval(&self, v: &[f64], k: f64) -> Result<Option<Sides>, Fault> {
        let (a, b, d) = (v[0], v[1], v[2]);
        let s = match k as u8 {
            0 => Sides::le(self.phi.eval(a, b)?, self.phi.eval(a + d, b)?, d),
            1 => Sides::le(self.phi.eval(a, b)?, self.phi.eval(a, b + d)?, d),
            _ => Sides::le(b + self.phi.eval(a, b)?, b + d + self.phi.eval(a, b + d)?, d),
        };
        Ok(Some(s))
    }
    fn points(&self, v: &[f64]) -> Vec<Point> {
        vec![Point(vec![v[0], v[1]])]
    }
}

struct IncreasingProbe<'a> {
    f: &'a ScalarFn,
    lo: f64,
    hi: f64,
}

impl Probe for IncreasingProbe<'_> {
    fn draw(&self, s: &mut SampleStream) -> Option<Vec<f64>> {
        let x = s.uniform_in(self.lo, self.hi);
        let y = s.uniform_in(self.lo, self.hi);
        Some(vec![x.min(y), x.max(y)])
    }
    fn params(&self) -> &[f64] {
        &[0.0]
    }
    fn canonicalize(&self, v: &[f64]) -> Option<Vec<f64>> {
        (self.lo <= v[0] && v[0] <= v[1] && v[1] <= self.hi).then(|| v.to_vec())
    }
    fn widths(&self) -> Vec<f64> {
        vec![(self.hi - self.lo).max(1e-12); 2]
    }
    fn eval(&self, v: &[f64], _: f64) -> Result<Option<Sides>, Fault> {
        let fx = self.f.eval_coords(&v[..1])?;
        let fy = self.f.eval_coords(&v[1..])?;
        Ok(Some(Sides::le(fx, fy, 0.0)))
    }
    fn points(&self, v: &[f64]) -> Vec<Point> {
        vec![Point(vec![v[0]]), Point(vec![v[1]])]
    }
}

pub fn check_nonneg_homogeneous(phi: &Bifunction, cfg: &CheckConfig) -> Report {
    check_nonneg_homogeneous_in(phi, VALUE_RANGE, cfg)
}

pub fn check_nonneg_homogeneous_in(phi: &Bifunction, range: f64, cfg: &CheckConfig) -> Report {
    let probe = HomogeneousProbe {
        phi,
        vals: ValueBox { range },
    };
    engine::run(&probe, cfg, "nonneg_homogeneous", EngineOpts::new(tags::BIFUNCTION))
}

pub fn check_additive(phi: &Bifunction, cfg: &CheckConfig) -> Report {
    check_additive_in(phi, VALUE_RANGE, cfg)
}

pub fn check_additive_in(phi: &Bifunction, range: f64, cfg: &CheckConfig) -> Report {
    let probe = AdditiveProbe {
        phi,
        vals: ValueBox { range },
    };
    engine::run(&probe, cfg, "additive", EngineOpts::new(tags::BIFUNCTION))
}

/// `φ(a, b) = −φ(b, a)`.
pub fn check_antisymmetric(phi: &Bifunction, cfg: &CheckConfig) -> Report {
    let probe = AntisymmetricProbe {
        phi,
        vals: ValueBox { range: VALUE_RANGE },
    };
    engine::run(&probe, cfg, "antisymmetric", EngineOpts::new(tags::BIFUNCTION))
        .with_note("antisymmetry read as phi(a, b) = -phi(b, a)")
}

/// Homogeneity and additivity; the `nonneg_linear` flag is their conjunction.
pub fn check_nonneg_linear(phi: &Bifunction, cfg: &CheckConfig) -> Report {
    let hom = check_nonneg_homogeneous(phi, cfg);
    let add = check_additive(phi, cfg);
    let both = hom.holds() && add.holds();
    let failing = if !hom.holds() {
        Some(hom.clone())
    } else if !add.holds() {
        Some(add.clone())
    } else {
        None
    };
    let r = match failing {
        Some(f) if f.verdict == Verdict::Violated => {
            let mut r = Report::new("nonneg_linear", cfg.seed);
            r.verdict = Verdict::Violated;
            r.max_violation = f.max_violation;
            r.witness = f.witness.clone();
            r.samples_used = f.samples_used;
            r.notes.push(format!("{} failed", f.check));
            r.premise = Some(Box::new(f));
            r
        }
        Some(f) => Report::premise_failed("nonneg_linear", cfg.seed, f),
        None => {
            let mut r = Report::new("nonneg_linear", cfg.seed);
            r.samples_used = hom.samples_used + add.samples_used;
            r.max_violation = hom.max_violation.max(add.max_violation);
            r
        }
    };
    r.with_flag("nonneg_linear", both)
}

/// Probes monotonicity of `φ` on `[-range, range]²`.
pub fn check_monotone(phi: &Bifunction, which: &[Monotonicity], range: f64, cfg: &CheckConfig) -> Report {
    let params = which
        .iter()
        .map(|m| match m {
            Monotonicity::First => 0.0,
            Monotonicity::Second => 1.0,
            Monotonicity::OffsetSecond => 2.0,
        })
        .collect();
    let probe = MonotoneProbe {
        phi,
        vals: ValueBox { range },
        params,
    };
    engine::run(&probe, cfg, "phi_monotone", EngineOpts::new(tags::BIFUNCTION))
}

/// Finite-difference probe that `f` is non-decreasing on `[lo, hi]`.
pub fn check_nondecreasing(f: &ScalarFn, lo: f64, hi: f64, cfg: &CheckConfig) -> Report {
    let probe = IncreasingProbe { f, lo, hi };
    engine::run(&probe, cfg, "nondecreasing", EngineOpts::new(tags::VALUES))
}

/// A pair of finite real sequences `(u_i), (v_i)` of equal length.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SequencePair {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// `sup_i φ(E u_i, E v_i) ≤ φ(sup_i E u_i, sup_i E v_i)` on each supplied pair.
pub fn check_seq_upper_bounded(
    phi: &Bifunction,
    e: &EndoMap,
    pairs: &[SequencePair],
    cfg: &CheckConfig,
) -> Result<Report, AlgebraError> {
    if e.input_arity() != 1 || e.output_arity() != 1 {
        return Err(AlgebraError::Arity("E must map reals to reals".into()));
    }
    let mut r = Report::new("seq_upper_bounded", cfg.seed);
    r.notes
        .push("read componentwise: sup phi(E u_i, E v_i) <= phi(sup E u_i, sup E v_i)".into());
    let mut best: Option<(f64, Witness)> = None;
    let mut max_violation = f64::NEG_INFINITY;
    for (k, pair) in pairs.iter().enumerate() {
        let n = pair.u.len().min(pair.v.len());
        if n == 0 {
            return Err(AlgebraError::EmptySequence(k));
        }
        let eu: Vec<f64> = pair.u[..n]
            .iter()
            .map(|&x| e.apply(&[x]).map(|y| y[0]))
            .collect::<Result<_, _>>()
            .map_err(Fault::from)?;
        let ev: Vec<f64> = pair.v[..n]
            .iter()
            .map(|&x| e.apply(&[x]).map(|y| y[0]))
            .collect::<Result<_, _>>()
            .map_err(Fault::from)?;
        let mut lhs = f64::NEG_INFINITY;
        for (a, b) in eu.iter().zip(&ev) {
            lhs = lhs.max(phi.eval(*a, *b).map_err(Fault::from)?);
        }
        let su = eu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sv = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rhs = phi.eval(su, sv).map_err(Fault::from)?;
        let violation = lhs - rhs;
        max_violation = max_violation.max(violation);
        let excess = violation - cfg.threshold(rhs);
        if excess > 0.0 && best.as_ref().is_none_or(|(b, _)| excess > *b) {
            best = Some((
                excess,
                Witness {
                    sample_index: k as u64,
                    points: vec![Point(pair.u[..n].to_vec()), Point(pair.v[..n].to_vec())],
                    t: 0.0,
                    lhs,
                    rhs,
                    violation,
                },
            ));
        }
        r.samples_used += 1;
    }
    r.max_violation = if max_violation.is_finite() { max_violation } else { 0.0 };
    if let Some((_, w)) = best {
        r.verdict = Verdict::Violated;
        r.witness = Some(w);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> CheckConfig {
        CheckConfig {
            samples: 4000,
            ..CheckConfig::default()
        }
    }

    fn phi(s: &str) -> Bifunction {
        Bifunction::parse(s).unwrap()
    }

    #[test]
    fn homogeneity() {
        assert!(check_nonneg_homogeneous(&phi("a - 2*b"), &cfg()).holds());
        assert!(check_nonneg_homogeneous(&phi("0"), &cfg()).holds());
        let r = check_nonneg_homogeneous(&phi("a - b + 1"), &cfg());
        assert_eq!(r.verdict, Verdict::Violated);
        // |1 - t| is largest at t = 4.
        assert!((r.max_violation - 3.0).abs() < 1e-6, "{}", r.max_violation);
    }

    #[test]
    fn additivity() {
        assert!(check_additive(&phi("a - 2*b"), &cfg()).holds());
        assert!(check_additive(&phi("0"), &cfg()).holds());
        assert_eq!(check_additive(&phi("a*b"), &cfg()).verdict, Verdict::Violated);
    }

    #[test]
    fn antisymmetry() {
        assert!(check_antisymmetric(&phi("a - b"), &cfg()).holds());
        assert!(check_antisymmetric(&phi("0"), &cfg()).holds());
        assert_eq!(check_antisymmetric(&phi("a - 2*b"), &cfg()).verdict, Verdict::Violated);
    }

    #[test]
    fn nonneg_linear_flag_is_conjunction() {
        let r = check_nonneg_linear(&phi("a - 2*b"), &cfg());
        assert!(r.flags["nonneg_linear"]);
        let r = check_nonneg_linear(&phi("a*b"), &cfg());
        assert!(!r.flags["nonneg_linear"]);
        assert_eq!(r.verdict, Verdict::Violated);
    }

    #[test]
    fn seq_upper_bounded_examples() {
        let id = EndoMap::identity(1);
        let pair = SequencePair {
            u: vec![1.0, 0.0],
            v: vec![0.0, 1.0],
        };
        let r = check_seq_upper_bounded(&phi("a - b"), &id, std::slice::from_ref(&pair), &cfg()).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        let w = r.witness.unwrap();
        assert_eq!((w.lhs, w.rhs), (1.0, 0.0));
        let r = check_seq_upper_bounded(&phi("3"), &id, &[pair], &cfg()).unwrap();
        assert!(r.holds());
        assert_eq!(r.max_violation, 0.0);
        let empty = SequencePair { u: vec![], v: vec![] };
        assert!(matches!(
            check_seq_upper_bounded(&phi("a"), &id, &[empty], &cfg()),
            Err(AlgebraError::EmptySequence(0))
        ));
    }

    #[test]
    fn domain_membership_and_sampling() {
        let cap = DomainSet::new(
            Manifold::sphere(2),
            &[(-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)],
            Some("x3 - 0.5"),
        )
        .unwrap();
        let mut s = SampleStream::new(3, 0, 0);
        for _ in 0..100 {
            let p = cap.draw(&mut s).unwrap();
            assert!(p.0[2] > 0.5);
            assert!((p.norm() - 1.0).abs() < 1e-12);
        }
        let empty = DomainSet::new(Manifold::euclidean(1), &[(0.0, 1.0)], Some("-1")).unwrap();
        assert!(Region::from(empty).is_empty(0));
    }

    #[test]
    fn epigraph_membership_examples() {
        let c = cfg();
        let inst = Instance::parse(Manifold::euclidean(1), &[(-2.0, 2.0)], None, "x1^2", None, "a - b").unwrap();
        assert!(epigraph_membership(&inst, &Point(vec![0.5]), 0.25, &c).unwrap());
        assert!(!epigraph_membership(&inst, &Point(vec![0.5]), 0.2, &c).unwrap());

        let ex = Instance::parse(
            Manifold::euclidean(1),
            &[(0.5, 2.0)],
            None,
            "if(x1 >= 0, 1, -(x1^2))",
            Some(&["-1"]),
            "a - 2*b",
        )
        .unwrap();
        assert!(epigraph_membership(&ex, &Point(vec![-1.0]), -1.0, &c).unwrap());

        let sq = Instance::parse(Manifold::euclidean(1), &[(-1.0, 1.0)], None, "x1", Some(&["x1^2"]), "a - b").unwrap();
        assert!(matches!(
            epigraph_membership(&sq, &Point(vec![-0.5]), 10.0, &c),
            Err(AlgebraError::InverseSearchFailed { .. })
        ));
        assert!(epigraph_membership(&sq, &Point(vec![0.25]), 10.0, &c).unwrap());
    }

    #[test]
    fn product_set_boundary_draws() {
        let inst = Instance::parse(Manifold::euclidean(1), &[(-1.0, 1.0)], None, "x1^2", None, "a - b").unwrap();
        let set = ProductSet::epigraph(&inst, (-1.0, 3.0));
        let mut on_boundary = 0;
        for i in 0..200 {
            let mut s = SampleStream::new(1, 0, i);
            let u = set.draw_u(&mut s).unwrap();
            let v = set.draw_v(&u.0, &mut s).unwrap();
            assert!(set.is_member(&u.0, v, 0).unwrap());
            if v == u.0[0] * u.0[0] {
                on_boundary += 1;
            }
        }
        assert!(on_boundary > 50);
    }
}
