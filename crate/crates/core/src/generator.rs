//! Seeded random instances for the randomized acceptance and property suites.
//!
//! Instance `i` of a family depends only on `(seed, family, i)`, so suites can
//! skip or filter instances without shifting the rest.

use crate::algebra::{GraphBound, Instance, ProductSet};
use crate::exprlang::{Bifunction, EndoMap, ScalarFn};
use crate::manifold::Manifold;
use crate::rng::{splitmix64, tags, SampleStream};

const INTERVAL: u64 = 1;
const EPIGRAPH: u64 = 2;
const CLOSURE: u64 = 3;
const COMPOSITION: u64 = 4;
const INTERSECTION: u64 = 5;
const THREE_POINT: u64 = 6;
const MEAN_VALUE: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Generator {
    pub seed: u64,
}

/// Rounds to three decimals so generated sources stay readable.
fn r3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn num(x: f64) -> String {
    let x = r3(x);
    if x < 0.0 {
        format!("({x})")
    } else {
        format!("{x}")
    }
}

fn signed(s: &mut SampleStream, lo: f64, hi: f64) -> f64 {
    let m = s.uniform_in(lo, hi);
    if s.uniform() < 0.5 {
        -m
    } else {
        m
    }
}

struct Box1 {
    lo: f64,
    hi: f64,
}

impl Box1 {
    fn draw(s: &mut SampleStream) -> Self {
        let lo = r3(s.uniform_in(-2.0, 1.0));
        let hi = r3(lo + s.uniform_in(0.5, 2.0));
        Self { lo, hi }
    }

    fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Polynomial of degree 2 or 3 or an exponential term, not necessarily convex.
fn rough_h(s: &mut SampleStream) -> String {
    if s.uniform() < 0.6 {
        let deg = 2 + s.below(2) as i32;
        let mut terms = vec![num(s.uniform_in(-1.0, 1.0))];
        for k in 1..=deg {
            terms.push(format!("{}*x1^{k}", num(s.uniform_in(-2.0, 2.0))));
        }
        terms.join(" + ")
    } else {
        format!(
            "{}*exp({}*x1) + {}*x1",
            num(signed(&mut *s, 0.2, 2.0)),
            num(signed(&mut *s, 0.3, 1.5)),
            num(s.uniform_in(-1.0, 1.0))
        )
    }
}

/// Smooth convex function of `x1..x{dim}`.
fn convex_h(s: &mut SampleStream, dim: usize) -> String {
    let mut terms = vec![num(s.uniform_in(-1.0, 1.0))];
    for i in 1..=dim {
        terms.push(format!("{}*x{i}", num(s.uniform_in(-1.0, 1.0))));
        terms.push(format!("{}*(x{i} - {})^2", num(s.uniform_in(0.0, 2.0)), num(s.uniform_in(-1.0, 1.0))));
    }
    if s.uniform() < 0.5 {
        terms.push(format!("{}*exp({}*x1)", num(s.uniform_in(0.1, 1.0)), num(signed(&mut *s, 0.2, 1.2))));
    }
    if s.uniform() < 0.3 {
        terms.push(format!("{}*(x1 - {})^4", num(s.uniform_in(0.0, 0.5)), num(s.uniform_in(-1.0, 1.0))));
    }
    terms.join(" + ")
}

/// Non-decreasing and convex on all of ℝ.
fn increasing_convex(s: &mut SampleStream) -> String {
    format!(
        "{}*exp({}*x1) + {}*x1",
        num(s.uniform_in(0.1, 2.0)),
        num(s.uniform_in(0.2, 1.5)),
        num(s.uniform_in(0.0, 1.0))
    )
}

/// Affine map `a x + d` with `|a| ∈ [0.25, 0.99]` sending the box into itself.
fn affine_into(s: &mut SampleStream, b: &Box1, increasing: bool) -> String {
    let mut a = r3(s.uniform_in(0.25, 0.99));
    if !increasing && s.uniform() < 0.5 {
        a = -a;
    }
    let room = 0.5 * (1.0 - a.abs()) * b.width();
    let mut d = r3(b.mid() + s.uniform_in(-room, room) - a * b.mid());
    // Rounding can push the image out by a hair; step the offset back in.
    let (y0, y1) = (a * b.lo + d, a * b.hi + d);
    if y0.min(y1) < b.lo {
        d += 0.001;
    } else if y0.max(y1) > b.hi {
        d -= 0.001;
    }
    format!("{}*x1 + {}", num(a), num(d))
}

fn linear_phi(s: &mut SampleStream) -> String {
    if s.uniform() < 0.4 {
        return "a - b".into();
    }
    format!("{}*a + {}*b", num(s.uniform_in(-2.0, 2.0)), num(s.uniform_in(-2.0, 2.0)))
}

/// Non-decreasing in `a` with `b ↦ b + φ(a, b)` non-decreasing.
fn nondecreasing_phi(s: &mut SampleStream) -> String {
    if s.uniform() < 0.35 {
        return "a - b".into();
    }
    format!("{}*a + {}*b", num(s.uniform_in(0.0, 2.0)), num(s.uniform_in(-1.0, 1.0)))
}

fn line(b: &Box1, h: &str, e: Option<&str>, phi: &str) -> Instance {
    let e = e.map(|src| [src]);
    Instance::parse(
        Manifold::euclidean(1),
        &[(b.lo, b.hi)],
        None,
        h,
        e.as_ref().map(|a| a.as_slice()),
        phi,
    )
    .expect("generated instance parses")
}

impl Generator {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn stream(&self, family: u64, i: u64) -> SampleStream {
        SampleStream::new(splitmix64(self.seed ^ splitmix64(family)), tags::GENERATOR, i)
    }

    /// One-dimensional instance with polynomial or exponential `h`, an affine
    /// `E` of slope magnitude at least 0.25 mapping the interval into itself,
    /// and linear `φ`.
    pub fn interval_instance(&self, i: u64) -> Instance {
        let mut s = self.stream(INTERVAL, i);
        let b = Box1::draw(&mut s);
        let h = if s.uniform() < 0.35 { convex_h(&mut s, 1) } else { rough_h(&mut s) };
        let e = affine_into(&mut s, &b, false);
        let phi = linear_phi(&mut s);
        line(&b, &h, Some(&e), &phi)
    }

    /// One-dimensional instance with an idempotent `E` (identity, constant or
    /// clamp) and non-decreasing `φ`, for comparing function and epigraph checks.
    pub fn epigraph_instance(&self, i: u64) -> Instance {
        let mut s = self.stream(EPIGRAPH, i);
        let b = Box1::draw(&mut s);
        let h = if s.uniform() < 0.5 { convex_h(&mut s, 1) } else { rough_h(&mut s) };
        let phi = nondecreasing_phi(&mut s);
        let e = match s.below(3) {
            0 => None,
            1 => Some(num(s.uniform_in(b.lo, b.hi))),
            _ => {
                let l = r3(s.uniform_in(b.lo, b.mid()));
                let u = r3(s.uniform_in(b.mid(), b.hi));
                Some(format!("min(max(x1, {}), {})", num(l), num(u)))
            }
        };
        line(&b, &h, e.as_deref(), &phi)
    }

    /// A family of convex instances sharing domain, `E` and `φ`, with weights.
    ///
    /// Dimension 1 or 2; `E` is the identity, a contraction toward the box
    /// centre, or a constant; `φ` is usually `a − b`.
    pub fn closure_family(&self, i: u64, members: usize) -> (Vec<Instance>, Vec<f64>) {
        let mut s = self.stream(CLOSURE, i);
        let dim = 1 + s.below(2) as usize;
        let b = Box1::draw(&mut s);
        let bounds = vec![(b.lo, b.hi); dim];
        let (e, phi): (Option<Vec<String>>, String) = match s.below(4) {
            0 | 1 => (None, "a - b".into()),
            2 => {
                let k = r3(s.uniform_in(0.25, 1.0));
                let m = b.mid();
                let e = (1..=dim).map(|j| format!("{}*(x{j} - {}) + {}", num(k), num(m), num(m))).collect();
                (Some(e), "a - b".into())
            }
            _ => {
                let e = (0..dim).map(|_| num(s.uniform_in(b.lo, b.hi))).collect();
                (Some(e), linear_phi(&mut s))
            }
        };
        let insts = (0..members)
            .map(|_| {
                let h = convex_h(&mut s, dim);
                let e_refs: Option<Vec<&str>> = e.as_ref().map(|v| v.iter().map(String::as_str).collect());
                Instance::parse(Manifold::euclidean(dim), &bounds, None, &h, e_refs.as_deref(), &phi)
                    .expect("generated instance parses")
            })
            .collect();
        let weights = (0..members).map(|_| r3(s.uniform_in(0.0, 3.0))).collect();
        (insts, weights)
    }

    /// A convex inner instance (`φ = a − b`) and a non-decreasing convex outer
    /// function of one variable.
    pub fn composition_pair(&self, i: u64) -> (Instance, ScalarFn) {
        let mut s = self.stream(COMPOSITION, i);
        let b = Box1::draw(&mut s);
        let h1 = convex_h(&mut s, 1);
        let e = if s.uniform() < 0.5 { None } else { Some(affine_into(&mut s, &b, false)) };
        let h2 = increasing_convex(&mut s);
        (
            line(&b, &h1, e.as_deref(), "a - b"),
            ScalarFn::parse(&h2, 1).expect("generated function parses"),
        )
    }

    /// Two or three product sets over a common interval base (`E` identity,
    /// `φ = a − b`): epigraphs of convex functions and half-planes above lines.
    pub fn intersection_sets(&self, i: u64) -> (EndoMap, Bifunction, Vec<ProductSet>) {
        let mut s = self.stream(INTERSECTION, i);
        let b = Box1::draw(&mut s);
        let count = 2 + s.below(2) as usize;
        let mut sets = Vec::with_capacity(count);
        let v_range = (-8.0, 24.0);
        for _ in 0..count {
            let inst = line(&b, &convex_h(&mut s, 1), None, "a - b");
            let set = if s.uniform() < 0.7 {
                ProductSet::epigraph(&inst, v_range)
            } else {
                let g = format!("v - {}*x1 - {}", num(s.uniform_in(-2.0, 2.0)), num(s.uniform_in(-1.0, 1.0)));
                let base = ProductSet::epigraph(&inst, v_range).base;
                ProductSet::new(base, vec![GraphBound::parse(&g, 1).expect("bound parses")], v_range)
            };
            sets.push(set);
        }
        (EndoMap::identity(1), Bifunction::difference(), sets)
    }

    /// Smooth convex non-decreasing `h` with an increasing affine `E` and three
    /// ordered points whose images are at least a twentieth of the box apart.
    pub fn three_point_case(&self, i: u64) -> (Instance, [f64; 3]) {
        let mut s = self.stream(THREE_POINT, i);
        let b = Box1::draw(&mut s);
        let h = match s.below(3) {
            0 => increasing_convex(&mut s),
            1 => format!(
                "{}*(x1 - {})^2 + {}*x1",
                num(s.uniform_in(0.1, 2.0)),
                num(b.lo - s.uniform_in(0.0, 1.0)),
                num(s.uniform_in(0.0, 1.0))
            ),
            _ => format!(
                "{}*(x1 - {})^4 + {}*exp(x1)",
                num(s.uniform_in(0.0, 1.0)),
                num(b.lo - s.uniform_in(0.0, 0.5)),
                num(s.uniform_in(0.1, 1.0))
            ),
        };
        let e = if s.uniform() < 0.5 { None } else { Some(affine_into(&mut s, &b, true)) };
        let gap = 0.05 * b.width();
        let mut mu = [0.0; 3];
        loop {
            for m in &mut mu {
                *m = r3(s.uniform_in(b.lo, b.hi));
            }
            mu.sort_by(f64::total_cmp);
            if mu[1] - mu[0] >= gap && mu[2] - mu[1] >= gap {
                break;
            }
        }
        (line(&b, &h, e.as_deref(), "a - b"), mu)
    }

    /// Smooth convex `h` with `E` the identity and two points with distinct
    /// values of `h`.
    pub fn mean_value_case(&self, i: u64) -> (Instance, f64, f64) {
        let mut s = self.stream(MEAN_VALUE, i);
        let b = Box1::draw(&mut s);
        let inst = line(&b, &convex_h(&mut s, 1), None, "a - b");
        loop {
            let u1 = r3(s.uniform_in(b.lo, b.hi));
            let u2 = r3(s.uniform_in(b.lo, b.hi));
            let h = |u: f64| inst.h.eval_coords(&[u]).unwrap_or(f64::NAN);
            if (h(u1) - h(u2)).abs() > 1e-3 {
                return (inst.clone(), u1, u2);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_reproducible() {
        let g = Generator::new(7);
        for i in 0..20 {
            assert_eq!(g.interval_instance(i), g.interval_instance(i));
            assert_eq!(g.epigraph_instance(i).h.label, g.epigraph_instance(i).h.label);
        }
        assert_ne!(g.interval_instance(0).h.label, Generator::new(8).interval_instance(0).h.label);
    }

    #[test]
    fn affine_maps_stay_inside() {
        let g = Generator::new(3);
        for i in 0..200 {
            let inst = g.interval_instance(i);
            let dom = inst.domain.base();
            for x in [dom.lo[0], dom.hi[0]] {
                let y = inst.e.apply(&[x]).unwrap()[0];
                assert!(y >= dom.lo[0] - 1e-9 && y <= dom.hi[0] + 1e-9, "{i}: {} at {x}", inst.e.label);
            }
            let slope = inst.e.apply(&[dom.hi[0]]).unwrap()[0] - inst.e.apply(&[dom.lo[0]]).unwrap()[0];
            assert!(slope.abs() >= 0.25 * (dom.hi[0] - dom.lo[0]) - 1e-9);
        }
    }

    #[test]
    fn three_point_orders_images() {
        let g = Generator::new(5);
        for i in 0..100 {
            let (inst, mu) = g.three_point_case(i);
            let img: Vec<f64> = mu.iter().map(|&m| inst.e.apply(&[m]).unwrap()[0]).collect();
            assert!(img[0] < img[1] && img[1] < img[2]);
        }
    }
}
