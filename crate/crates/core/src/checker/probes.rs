use super::engine::{Probe, Sides};
use super::CheckConfig;
use crate::algebra::{Instance, ProductSet, Region};
use crate::exprlang::{Bifunction, EndoMap};
use crate::manifold::Point;
use crate::rng::SampleStream;
use crate::space::{Fault, Space};

/// Pairs closer than this (in E-image distance) are exempt from strictness.
pub(crate) const STRICT_MIN_SEPARATION: f64 = 1e-3;

/// `E(p)` validated as a point of `space`.
pub fn apply_map(space: &Space, e: &EndoMap, p: &Point) -> Result<Point, Fault> {
    if e.is_identity() {
        return Ok(p.clone());
    }
    space.admit(e.apply(&p.0)?)
}

/// `t·a + (1−t)·b`, exact at the endpoints.
pub(crate) fn linear_combination(a: &Point, b: &Point, t: f64) -> Point {
    if t == 0.0 {
        return b.clone();
    }
    if t == 1.0 {
        return a.clone();
    }
    Point(a.0.iter().zip(&b.0).map(|(x, y)| t * x + (1.0 - t) * y).collect())
}

/// Sampling of `k` member points of a region, flattened into one vector.
pub(crate) struct Pairs<'a> {
    pub region: &'a Region,
    pub space: &'a Space,
    pub n: usize,
    widths: Vec<f64>,
}

impl<'a> Pairs<'a> {
    pub fn new(region: &'a Region, space: &'a Space) -> Self {
        Self {
            region,
            space,
            n: space.ambient_dim(),
            widths: region.widths(),
        }
    }

    pub fn draw(&self, s: &mut SampleStream, k: usize) -> Option<Vec<f64>> {
        let mut v = Vec::with_capacity(k * self.n);
        for _ in 0..k {
            v.extend(self.region.draw(s)?.0);
        }
        Some(v)
    }

    pub fn canonical(&self, v: &[f64]) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(v.len());
        for chunk in v.chunks(self.n) {
            out.extend(self.region.canonical(self.space, chunk)?.0);
        }
        Some(out)
    }

    pub fn widths(&self, k: usize) -> Vec<f64> {
        self.widths.iter().copied().cycle().take(k * self.n).collect()
    }

    pub fn split(&self, v: &[f64]) -> Vec<Point> {
        v.chunks(self.n).map(|c| Point(c.to_vec())).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Combine {
    /// `t·E(u₁) + (1−t)·E(u₂)` in chart coordinates.
    Linear,
    /// `γ_{E(u₁),E(u₂)}(t)`.
    Geodesic,
}

pub(crate) struct FnProbe<'a> {
    inst: &'a Instance,
    cfg: &'a CheckConfig,
    pairs: Pairs<'a>,
    t: &'a [f64],
    combine: Combine,
    strict: bool,
}

impl<'a> FnProbe<'a> {
    pub fn new(inst: &'a Instance, cfg: &'a CheckConfig, t: &'a [f64], combine: Combine, strict: bool) -> Self {
        Self {
            inst,
            cfg,
            pairs: Pairs::new(&inst.domain, &inst.space),
            t,
            combine,
            strict,
        }
    }
}

impl Probe for FnProbe<'_> {
    fn draw(&self, s: &mut SampleStream) -> Option<Vec<f64>> {
        self.pairs.draw(s, 2)
    }
    fn params(&self) -> &[f64] {
        self.t
    }
    fn continuous_param(&self) -> Option<(f64, f64)> {
        Some((0.0, 1.0))
    }
    fn canonicalize(&self, v: &[f64]) -> Option<Vec<f64>> {
        self.pairs.canonical(v)
    }
    fn widths(&self) -> Vec<f64> {
        self.pairs.widths(2)
    }
    fn eval(&self, v: &[f64], t: f64) -> Result<Option<Sides>, Fault> {
        let pts = self.pairs.split(v);
        let inst = self.inst;
        let e1 = apply_map(&inst.space, &inst.e, &pts[0])?;
        let e2 = apply_map(&inst.space, &inst.e, &pts[1])?;
        let h1 = inst.h_at(&e1)?;
        let h2 = inst.h_at(&e2)?;
        let p = match self.combine {
            Combine::Linear => linear_combination(&e1, &e2, t),
            Combine::Geodesic => inst.space.geodesic(&e1, &e2, t)?,
        };
        let lhs = inst.h_at(&p)?;
        let mut rhs = h2 + t * inst.phi.eval(h1, h2)?;
        if self.strict
            && t > 0.0
            && t < 1.0
            && inst.space.distance(&e1, &e2)? >= STRICT_MIN_SEPARATION
        {
            rhs -= 2.0 * self.cfg.threshold(rhs);
        }
        Ok(Some(Sides::le(lhs, rhs, t).trivial(t == 0.0)))
    }
    fn points(&self, v: &[f64]) -> Vec<Point> {
        self.pairs.split(v)
    }
}

pub(crate) struct SetProbe<'a> {
    pub pairs: &'a Pairs<'a>,
    pub e: &'a EndoMap,
    pub t: &'a [f64],
}

impl Probe for SetProbe<'_> {
    fn draw(&self, s: &mut SampleStream) -> Option<Vec<f64>> {
        self.pairs.draw(s, 2)
    }
    fn params(&self) -> &[f64] {
        self.t
    }
    fn continuous_param(&self) -> Option<(f64, f64)> {
        Some((0.0, 1.0))
    }
    fn canonicalize(&self, v: &[f64]) -> Option<Vec<f64>> {
        self.pairs.canonical(v)
    }
    fn widths(&self) -> Vec<f64> {
        self.pairs.widths(2)
    }
    fn eval(&self, v: &[f64], t: f64) -> Result<Option<Sides>, Fault> {
        let pts = self.pairs.split(v);
        let space = self.pairs.space;
        let e1 = apply_map(space, self.e, &pts[0])?;
        let e2 = apply_map(space, self.e, &pts[1])?;
        let p = space.geodesic(&e1, &e2, t)?;
        let excess = self.pairs.region.excess(&p.0)?;
        Ok(Some(Sides::le(excess, 0.0, t)))
    }
    fn points(&self, v: &[f64]) -> Vec<Point> {
        self.pairs.split(v)
    }
}

pub(crate) struct LengthProbe<'a> {
    pub pairs: &'a Pairs<'a>,
    pub e: &'a EndoMap,
}

impl Probe for LengthProbe<'_> {
    fn draw(&self, s: &mut SampleStream) -> Option<Vec<f64>> {
        self.pairs.draw(s, 2)
    }
    fn params(&self) -> &[f64] {
        &[0.0]
    }
    fn canonicalize(&self, v: &[f64]) -> Option<Vec<f64>> {
        self.pairs.canonical(v)
    }
    fn widths(&self) -> Vec<f64> {
        self.pairs.widths(2)
    }
    fn eval(&self, v: &[f64], _: f64) -> Result<Option<Sides>, Fault> {
        let pts = self.pairs.split(v);
        let space = self.pairs.space;
        let e1 = apply_map(space, self.e, &pts[0])?;
        let e2 = apply_map(space, self.e, &pts[1])?;
        let de = space.distance(&e1, &e2)?;
        let d = space.distance(&pts[0], &pts[1])?;
        Ok(Some(Sides::le((de - d).abs(), 0.0, 0.0)))
    }
    fn points(&self, v: &[f64]) -> Vec<Point> {
        self.pairs.split(v)
    }
}

pub(crate) struct SlopeProbe<'a> {
    inst: &'a Instance,
    cfg: &'a CheckConfig,
    pairs: Pairs<'a>,
}

impl<'a> SlopeProbe<'a> {
    pub fn new(inst: &'a Instance, cfg: &'a CheckConfig) -> Self {
        Self {
            inst,
            cfg,
            pairs: Pairs::new(&inst.domain, &inst.space),
        }
    }
}

const ORIENTATIONS: [f64; 2] = [0.0, 1.0];

fn separated(a: f64, b: f64) -> bool {
    b - a > 1e-9 * (1.0 + a.abs().max(b.abs()))
}

impl Probe for SlopeProbe<'_> {
    fn draw(&self, s: &mut SampleStream) -> Option<Vec<f64>> {
        self.pairs.draw(s, 3)
    }
    fn params(&self) -> &[f64] {
        &ORIENTATIONS
    }
    fn canonicalize(&self, v: &[f64]) -> Option<Vec<f64>> {
        self.pairs.canonical(v)
    }
    fn widths(&self) -> Vec<f64> {
        self.pairs.widths(3)
    }
    fn eval(&self, v: &[f64], orientation: f64) -> Result<Option<Sides>, Fault> {
        let inst = self.inst;
        let pts = self.pairs.split(v);
        let e1 = apply_map(&inst.space, &inst.e, &pts[0])?;
        let em = apply_map(&inst.space, &inst.e, &pts[1])?;
        let e2 = apply_map(&inst.space, &inst.e, &pts[2])?;
        let (x1, x, x2) = (e1.0[0], em.0[0], e2.0[0]);
        let forward = orientation == 0.0;
        let applies = if forward {
            separated(x1, x) && separated(x, x2)
        } else {
            separated(x2, x) && separated(x, x1)
        };
        if !applies {
            return Ok(None);
        }
        let h1 = inst.h_at(&e1)?;
        let h = inst.h_at(&em)?;
        let h2 = inst.h_at(&e2)?;
        let phi = inst.phi.eval(h1, h2)?;
        let t = (x2 - x) / (x2 - x1);
        // Both orientations are the φ_E-convexity inequality at this t,
        // divided by |E μ − E μ₂|; the threshold is scaled the same way.
        let gap = (x - x2).abs();
        let rounding = 4.0 * f64::EPSILON * (h.abs() + h2.abs() + (t * phi).abs());
        let threshold = (self.cfg.threshold(h2 + t * phi) + rounding) / gap;
        let quotient = phi / (x1 - x2);
        let s = if forward {
            Sides::le(quotient, (h2 - h) / (x2 - x), t)
        } else {
            Sides::le((h - h2) / (x - x2), quotient, t)
        };
        Ok(Some(s.with_threshold(threshold)))
    }
    fn points(&self, v: &[f64]) -> Vec<Point> {
        self.pairs.split(v)
    }
}

/// Variables: `[u₁…, v₁, u₂…, v₂]`.
pub(crate) struct ProductProbe<'a> {
    pub set: &'a ProductSet,
    pub members: &'a ProductSet,
    pub e: &'a EndoMap,
    pub phi: &'a Bifunction,
    pub space: &'a Space,
    pub t: &'a [f64],
    pub seed: u64,
}

impl ProductProbe<'_> {
    fn n(&self) -> usize {
        self.space.ambient_dim()
    }

    fn split(&self, v: &[f64]) -> (Point, f64, Point, f64) {
        let n = self.n();
        (
            Point(v[..n].to_vec()),
            v[n],
            Point(v[n + 1..2 * n + 1].to_vec()),
            v[2 * n + 1],
        )
    }
}

impl Probe for ProductProbe<'_> {
    fn draw(&self, s: &mut SampleStream) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(2 * self.n() + 2);
        for _ in 0..2 {
            let (u, v) = (0..crate::algebra::DRAW_ATTEMPTS.min(64)).find_map(|_| {
                let u = self.set.draw_u(s)?;
                let v = self.set.draw_v(&u.0, s)?;
                Some((u, v))
            })?;
            out.extend(u.0);
            out.push(v);
        }
        Some(out)
    }
    fn params(&self) -> &[f64] {
        self.t
    }
    fn continuous_param(&self) -> Option<(f64, f64)> {
        Some((0.0, 1.0))
    }
    fn canonicalize(&self, v: &[f64]) -> Option<Vec<f64>> {
        let (u1, v1, u2, v2) = self.split(v);
        let mut out = Vec::with_capacity(v.len());
        for (u, val) in [(u1, v1), (u2, v2)] {
            let u = self.space.project(&u.0)?;
            if !self.members.is_member(&u.0, val, self.seed).ok()? {
                return None;
            }
            out.extend(u.0);
            out.push(val);
        }
        Some(out)
    }
    fn widths(&self) -> Vec<f64> {
        let w = self.set.base_region().widths();
        let vw = (self.set.v_range.1 - self.set.v_range.0).max(1e-12);
        let mut out = w.clone();
        out.push(vw);
        out.extend(w);
        out.push(vw);
        out
    }
    fn eval(&self, v: &[f64], t: f64) -> Result<Option<Sides>, Fault> {
        let (u1, v1, u2, v2) = self.split(v);
        let e1 = apply_map(self.space, self.e, &u1)?;
        let e2 = apply_map(self.space, self.e, &u2)?;
        let p = self.space.geodesic(&e1, &e2, t)?;
        let vt = v2 + t * self.phi.eval(v1, v2)?;
        let excess = self.set.excess(&p.0, vt, self.seed)?;
        Ok(Some(Sides::le(excess, 0.0, t)))
    }
    fn points(&self, v: &[f64]) -> Vec<Point> {
        let (u1, v1, u2, v2) = self.split(v);
        let mut a = u1.0;
        a.push(v1);
        let mut b = u2.0;
        b.push(v2);
        vec![Point(a), Point(b)]
    }
}
