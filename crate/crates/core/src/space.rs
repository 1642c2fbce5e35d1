//! Manifolds seen through an optional chart diffeomorphism `H`.
//!
//! A [`Space`] without a chart is the built-in manifold itself. With a chart
//! `(H, H⁻¹)` its points are `H`-images and its geodesics are the pushforwards
//! `H ∘ γ` of the base manifold's geodesics.

use serde::Serialize;
use thiserror::Error;

use crate::exprlang::{EndoMap, EvalError, ParseError};
use crate::manifold::{GeometryError, Manifold, ManifoldKind, Point, MAP_OUTPUT_SLACK};

/// Anything that can go wrong while evaluating one sample.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Fault {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiffeoError {
    #[error("unknown diffeomorphism `{0}`")]
    Unknown(String),
    #[error("diffeomorphism `{name}` does not apply: {reason}")]
    NotApplicable { name: String, reason: String },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// A map `H` together with its declared inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct Diffeo {
    pub name: String,
    pub forward: EndoMap,
    pub inverse: EndoMap,
}

/// Built-in diffeomorphism pairs, with a one-line description each.
pub const CATALOG: [(&str, &str); 3] = [
    ("identity", "H(x) = x"),
    ("affine", "H(x) = scale*x + shift componentwise; params [scale, shift]"),
    (
        "stereographic",
        "Sphere(n) -> R^n projection from the south pole, H(p) = p[..n] / (1 + p[n])",
    ),
];

impl Diffeo {
    pub fn new(name: impl Into<String>, forward: EndoMap, inverse: EndoMap) -> Self {
        Self {
            name: name.into(),
            forward,
            inverse,
        }
    }

    pub fn identity(coords: usize) -> Self {
        Self::new("identity", EndoMap::identity(coords), EndoMap::identity(coords))
    }

    pub fn affine(coords: usize, scale: f64, shift: f64) -> Result<Self, DiffeoError> {
        if scale == 0.0 || !scale.is_finite() || !shift.is_finite() {
            return Err(DiffeoError::NotApplicable {
                name: "affine".into(),
                reason: "scale must be finite and nonzero".into(),
            });
        }
        let fwd: Vec<String> = (1..=coords).map(|i| format!("{scale} * x{i} + {shift}")).collect();
        let inv: Vec<String> = (1..=coords).map(|i| format!("(x{i} - {shift}) / {scale}")).collect();
        Ok(Self::new(
            "affine",
            EndoMap::parse(&fwd, coords)?,
            EndoMap::parse(&inv, coords)?,
        ))
    }

    /// Projection of `Sphere(n)` from the south pole onto `ℝⁿ`.
    pub fn stereographic(n: usize) -> Result<Self, DiffeoError> {
        let last = n + 1;
        let fwd: Vec<String> = (1..=n).map(|i| format!("x{i} / (1 + x{last})")).collect();
        let sq = (1..=n).map(|i| format!("x{i}^2")).collect::<Vec<_>>().join(" + ");
        let mut inv: Vec<String> = (1..=n).map(|i| format!("2 * x{i} / (1 + {sq})")).collect();
        inv.push(format!("(1 - ({sq})) / (1 + {sq})"));
        Ok(Self::new(
            "stereographic",
            EndoMap::parse_between(&fwd, n + 1, n)?,
            EndoMap::parse_between(&inv, n, n + 1)?,
        ))
    }

    /// Looks up a catalog entry for the given base manifold.
    pub fn builtin(name: &str, base: &Manifold, params: &[f64]) -> Result<Self, DiffeoError> {
        let coords = base.ambient_dim();
        match name {
            "identity" => Ok(Self::identity(coords)),
            "affine" => {
                let scale = params.first().copied().unwrap_or(1.0);
                let shift = params.get(1).copied().unwrap_or(0.0);
                if base.kind != ManifoldKind::Euclidean {
                    return Err(DiffeoError::NotApplicable {
                        name: name.into(),
                        reason: "affine charts are only provided on Euclidean manifolds".into(),
                    });
                }
                Self::affine(coords, scale, shift)
            }
            "stereographic" => {
                if base.kind != ManifoldKind::Sphere {
                    return Err(DiffeoError::NotApplicable {
                        name: name.into(),
                        reason: "stereographic projection needs a sphere".into(),
                    });
                }
                Self::stereographic(base.dim)
            }
            other => Err(DiffeoError::Unknown(other.to_string())),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.forward.apply(x)
    }

    pub fn invert(&self, y: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.inverse.apply(y)
    }
}

/// A manifold, optionally pushed forward through a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Space {
    pub base: Manifold,
    pub chart: Option<Diffeo>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpaceSummary {
    pub manifold: String,
    pub dim: usize,
    pub chart: Option<String>,
}

impl From<Manifold> for Space {
    fn from(base: Manifold) -> Self {
        Space { base, chart: None }
    }
}

impl Space {
    pub fn pushforward(base: Manifold, chart: Diffeo) -> Self {
        Space {
            base,
            chart: Some(chart),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match &self.chart {
            Some(c) => c.forward.output_arity(),
            None => self.base.ambient_dim(),
        }
    }

    pub fn summary(&self) -> SpaceSummary {
        SpaceSummary {
            manifold: self.base.kind.name().to_string(),
            dim: self.base.dim,
            chart: self.chart.as_ref().map(|c| c.name.clone()),
        }
    }

    fn to_base(&self, p: &[f64]) -> Result<Point, Fault> {
        match &self.chart {
            Some(c) => Ok(self.base.admit(c.invert(p)?, MAP_OUTPUT_SLACK)?),
            None => Ok(self.base.admit(p.to_vec(), MAP_OUTPUT_SLACK)?),
        }
    }

    /// Validates coordinates produced by arithmetic (e.g. the output of `E`).
    pub fn admit(&self, coords: Vec<f64>) -> Result<Point, Fault> {
        match &self.chart {
            Some(_) => {
                if coords.len() != self.ambient_dim() || coords.iter().any(|x| !x.is_finite()) {
                    return Err(GeometryError::InvalidPoint {
                        coords,
                        reason: "wrong length or non-finite".into(),
                    }
                    .into());
                }
                self.to_base(&coords)?;
                Ok(Point(coords))
            }
            None => Ok(self.base.admit(coords, MAP_OUTPUT_SLACK)?),
        }
    }

    /// Closest admissible point to free coordinates, for local searches.
    pub fn project(&self, coords: &[f64]) -> Option<Point> {
        match &self.chart {
            Some(_) => self.admit(coords.to_vec()).ok(),
            None => self.base.project(coords),
        }
    }

    pub fn geodesic(&self, mu1: &Point, mu2: &Point, t: f64) -> Result<Point, Fault> {
        match &self.chart {
            None => Ok(self.base.geodesic_unchecked(mu1, mu2, t)?),
            Some(c) => {
                if t == 0.0 {
                    return Ok(mu2.clone());
                }
                if t == 1.0 {
                    return Ok(mu1.clone());
                }
                let a = self.to_base(&mu1.0)?;
                let b = self.to_base(&mu2.0)?;
                let g = self.base.geodesic_unchecked(&a, &b, t)?;
                Ok(Point(c.apply(&g.0)?))
            }
        }
    }

    pub fn distance(&self, p: &Point, q: &Point) -> Result<f64, Fault> {
        match &self.chart {
            None => Ok(self.base.distance_unchecked(p, q)),
            Some(_) => {
                let a = self.to_base(&p.0)?;
                let b = self.to_base(&q.0)?;
                Ok(self.base.distance_unchecked(&a, &b))
            }
        }
    }

    pub fn is_antipodal_pair(&self, p: &Point, q: &Point) -> bool {
        if self.base.kind != ManifoldKind::Sphere {
            return false;
        }
        match (self.to_base(&p.0), self.to_base(&q.0)) {
            (Ok(a), Ok(b)) => antipodal(&a, &b),
            _ => false,
        }
    }

    /// Chart-coordinate velocity of `γ_{mu1,mu2}` at `mu1` (`at_mu1`, t = 1)
    /// or at `mu2` (t = 0), by central differences for pushed-forward spaces.
    pub fn velocity_at_end(&self, mu1: &Point, mu2: &Point, at_mu1: bool) -> Result<Vec<f64>, Fault> {
        match &self.chart {
            None => Ok(self.base.geodesic_velocity_at_end(mu1, mu2, at_mu1)?),
            Some(_) => {
                let h = 1e-6;
                let (t0, sign, base) = if at_mu1 { (1.0 - h, 1.0, mu1) } else { (h, -1.0, mu2) };
                let inner = self.geodesic(mu1, mu2, t0)?;
                Ok(base
                    .0
                    .iter()
                    .zip(&inner.0)
                    .map(|(b, i)| sign * (b - i) / h)
                    .collect())
            }
        }
    }
}

fn antipodal(a: &Point, b: &Point) -> bool {
    let s: f64 = a.0.iter().zip(&b.0).map(|(x, y)| (x + y) * (x + y)).sum();
    s.sqrt() < 1e-9
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stereographic_round_trip_and_pole() {
        let d = Diffeo::stereographic(2).unwrap();
        assert_eq!(d.apply(&[0.0, 0.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        let p = [0.6, 0.0, 0.8];
        let y = d.apply(&p).unwrap();
        let back = d.invert(&y).unwrap();
        for (a, b) in p.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn affine_pushforward_geodesic_is_image_of_segment() {
        let m = Manifold::euclidean(1);
        let s = Space::pushforward(m, Diffeo::affine(1, 2.0, 1.0).unwrap());
        let g = s.geodesic(&Point(vec![5.0]), &Point(vec![1.0]), 0.25).unwrap();
        assert!((g.0[0] - 2.0).abs() < 1e-12);
        let d = s.distance(&Point(vec![5.0]), &Point(vec![1.0])).unwrap();
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn chart_velocity_matches_flat_velocity() {
        let s = Space::pushforward(Manifold::euclidean(1), Diffeo::affine(1, 3.0, 0.0).unwrap());
        let v = s
            .velocity_at_end(&Point(vec![3.0]), &Point(vec![0.0]), true)
            .unwrap();
        assert!((v[0] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn catalog_rejects_mismatched_manifolds() {
        assert!(Diffeo::builtin("stereographic", &Manifold::euclidean(2), &[]).is_err());
        assert!(Diffeo::builtin("affine", &Manifold::sphere(2), &[]).is_err());
        assert!(Diffeo::builtin("nope", &Manifold::sphere(2), &[]).is_err());
    }
}
