//! Closed-form geodesic geometry for the built-in manifolds.
//!
//! Geodesics follow the endpoint convention `γ_{μ₁,μ₂}(0) = μ₂` and
//! `γ_{μ₁,μ₂}(1) = μ₁`, parameterized at constant speed.
//!
//! * `Euclidean(n)`: chart coordinates are `ℝⁿ`.
//! * `Sphere(n)`: unit sphere embedded in `ℝⁿ⁺¹`; geodesics by spherical
//!   interpolation, renormalized on every evaluation.
//! * `PoincareBall(n)`: curvature −1 ball model; geodesics via Möbius
//!   gyro-operations.
//!
//! Tangent vectors are ambient coordinate vectors. On the sphere they must be
//! orthogonal to the base point.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the sphere constraint `|‖p‖ − 1|` and the ball margin.
pub const POINT_TOL: f64 = 1e-12;
/// Slack accepted for points produced by user expressions before renormalizing.
pub const MAP_OUTPUT_SLACK: f64 = 1e-9;
/// Tangency tolerance `|⟨p, v⟩| ≤ TANGENT_TOL · max(1, ‖v‖)` on the sphere.
pub const TANGENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid point {coords:?}: {reason}")]
    InvalidPoint { coords: Vec<f64>, reason: String },
    #[error("invalid tangent vector at {base:?}: {reason}")]
    InvalidTangent { base: Vec<f64>, reason: String },
    #[error("antipodal points {0:?} and {1:?} have no unique minimal geodesic")]
    AntipodalPoints(Vec<f64>, Vec<f64>),
    #[error("geodesic parameter {0} outside [0, 1]")]
    ParamOutOfRange(f64),
}

/// Chart coordinates of a manifold point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    Euclidean,
    Sphere,
    #[serde(alias = "poincare")]
    PoincareBall,
}

impl ManifoldKind {
    pub const ALL: [ManifoldKind; 3] = [
        ManifoldKind::Euclidean,
        ManifoldKind::Sphere,
        ManifoldKind::PoincareBall,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ManifoldKind::Euclidean => "euclidean",
            ManifoldKind::Sphere => "sphere",
            ManifoldKind::PoincareBall => "poincare_ball",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Manifold {
    pub kind: ManifoldKind,
    /// Intrinsic dimension.
    pub dim: usize,
}

/// The data of a geodesic `γ_{μ₁,μ₂}` between two points.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicSpec {
    pub manifold: Manifold,
    pub mu1: Point,
    pub mu2: Point,
}

impl GeodesicSpec {
    pub fn new(manifold: Manifold, mu1: Point, mu2: Point) -> Result<Self, GeometryError> {
        manifold.check_point(&mu1)?;
        manifold.check_point(&mu2)?;
        if manifold.kind == ManifoldKind::Sphere && manifold.is_antipodal(&mu1.0, &mu2.0) {
            return Err(GeometryError::AntipodalPoints(mu1.0, mu2.0));
        }
        Ok(Self { manifold, mu1, mu2 })
    }

    pub fn at(&self, t: f64) -> Result<Point, GeometryError> {
        self.manifold.geodesic(&self.mu1, &self.mu2, t)
    }
}

impl Manifold {
    pub fn new(kind: ManifoldKind, dim: usize) -> Result<Self, GeometryError> {
        if dim == 0 {
            return Err(GeometryError::InvalidPoint {
                coords: vec![],
                reason: "manifold dimension must be at least 1".into(),
            });
        }
        Ok(Self { kind, dim })
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::new(ManifoldKind::Euclidean, dim).expect("dim >= 1")
    }

    pub fn sphere(dim: usize) -> Self {
        Self::new(ManifoldKind::Sphere, dim).expect("dim >= 1")
    }

    pub fn poincare_ball(dim: usize) -> Self {
        Self::new(ManifoldKind::PoincareBall, dim).expect("dim >= 1")
    }

    /// Number of chart coordinates of a point.
    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Sphere => self.dim + 1,
            _ => self.dim,
        }
    }

    pub fn check_point(&self, p: &Point) -> Result<(), GeometryError> {
        let invalid = |reason: &str| GeometryError::InvalidPoint {
            coords: p.0.clone(),
            reason: reason.to_string(),
        };
        if p.len() != self.ambient_dim() {
            return Err(invalid(&format!(
                "expected {} coordinates, found {}",
                self.ambient_dim(),
                p.len()
            )));
        }
        if p.0.iter().any(|x| !x.is_finite()) {
            return Err(invalid("non-finite coordinate"));
        }
        match self.kind {
            ManifoldKind::Euclidean => Ok(()),
            ManifoldKind::Sphere => {
                if (p.norm() - 1.0).abs() > POINT_TOL {
                    Err(invalid("not on the unit sphere"))
                } else {
                    Ok(())
                }
            }
            ManifoldKind::PoincareBall => {
                if p.norm() >= 1.0 - POINT_TOL {
                    Err(invalid("outside the open unit ball"))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.check_point(p).is_ok()
    }

    /// Accepts coordinates produced by arithmetic (user maps, refinement
    /// perturbations), snapping sphere points within `slack` back onto the
    /// sphere.
    pub fn admit(&self, coords: Vec<f64>, slack: f64) -> Result<Point, GeometryError> {
        if coords.len() != self.ambient_dim() || coords.iter().any(|x| !x.is_finite()) {
            let p = Point(coords);
            self.check_point(&p)?;
            return Ok(p);
        }
        match self.kind {
            ManifoldKind::Euclidean => Ok(Point(coords)),
            ManifoldKind::Sphere => {
                let n = norm(&coords);
                if (n - 1.0).abs() > slack {
                    return Err(GeometryError::InvalidPoint {
                        coords,
                        reason: "not on the unit sphere".into(),
                    });
                }
                Ok(Point(normalized(&coords)))
            }
            ManifoldKind::PoincareBall => {
                let p = Point(coords);
                self.check_point(&p)?;
                Ok(p)
            }
        }
    }

    /// Maps arbitrary chart coordinates to the closest admissible point, used
    /// when a search perturbs coordinates freely.
    pub fn project(&self, coords: &[f64]) -> Option<Point> {
        if coords.len() != self.ambient_dim() || coords.iter().any(|x| !x.is_finite()) {
            return None;
        }
        match self.kind {
            ManifoldKind::Euclidean => Some(Point(coords.to_vec())),
            ManifoldKind::Sphere => {
                if norm(coords) < 1e-8 {
                    None
                } else {
                    Some(Point(normalized(coords)))
                }
            }
            ManifoldKind::PoincareBall => {
                if norm(coords) < 1.0 - 1e-9 {
                    Some(Point(coords.to_vec()))
                } else {
                    None
                }
            }
        }
    }

    fn is_antipodal(&self, p: &[f64], q: &[f64]) -> bool {
        let s: f64 = p.iter().zip(q).map(|(a, b)| (a + b) * (a + b)).sum();
        s.sqrt() < 1e-9
    }

    /// Point at parameter `t` on the minimal geodesic with `γ(0) = mu2`,
    /// `γ(1) = mu1`.
    pub fn geodesic(&self, mu1: &Point, mu2: &Point, t: f64) -> Result<Point, GeometryError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(GeometryError::ParamOutOfRange(t));
        }
        self.check_point(mu1)?;
        self.check_point(mu2)?;
        self.geodesic_unchecked(mu1, mu2, t)
    }

    pub(crate) fn geodesic_unchecked(
        &self,
        mu1: &Point,
        mu2: &Point,
        t: f64,
    ) -> Result<Point, GeometryError> {
        if t == 0.0 {
            return Ok(mu2.clone());
        }
        if t == 1.0 {
            return Ok(mu1.clone());
        }
        let (a, b) = (&mu1.0, &mu2.0);
        match self.kind {
            ManifoldKind::Euclidean => Ok(Point(
                a.iter().zip(b).map(|(x1, x2)| t * x1 + (1.0 - t) * x2).collect(),
            )),
            ManifoldKind::Sphere => {
                if self.is_antipodal(a, b) {
                    return Err(GeometryError::AntipodalPoints(a.clone(), b.clone()));
                }
                let theta = sphere_angle(a, b);
                let coords: Vec<f64> = if theta < 1e-9 {
                    a.iter().zip(b).map(|(x1, x2)| t * x1 + (1.0 - t) * x2).collect()
                } else {
                    let s = theta.sin();
                    let w2 = ((1.0 - t) * theta).sin() / s;
                    let w1 = (t * theta).sin() / s;
                    a.iter().zip(b).map(|(x1, x2)| w1 * x1 + w2 * x2).collect()
                };
                Ok(Point(normalized(&coords)))
            }
            ManifoldKind::PoincareBall => {
                let delta = mobius_add(&neg(b), a);
                let step = mobius_scale(t, &delta);
                Ok(Point(clamp_to_ball(mobius_add(b, &step))))
            }
        }
    }

    pub fn distance(&self, p: &Point, q: &Point) -> Result<f64, GeometryError> {
        self.check_point(p)?;
        self.check_point(q)?;
        Ok(self.distance_unchecked(p, q))
    }

    pub(crate) fn distance_unchecked(&self, p: &Point, q: &Point) -> f64 {
        match self.kind {
            ManifoldKind::Euclidean => dist(&p.0, &q.0),
            ManifoldKind::Sphere => sphere_angle(&p.0, &q.0),
            ManifoldKind::PoincareBall => {
                let w = mobius_add(&neg(&p.0), &q.0);
                2.0 * norm(&w).min(1.0 - f64::EPSILON).atanh()
            }
        }
    }

    /// Riemannian norm of a tangent vector `v` at `p`.
    pub fn tangent_norm(&self, p: &Point, v: &[f64]) -> f64 {
        match self.kind {
            ManifoldKind::Euclidean | ManifoldKind::Sphere => norm(v),
            ManifoldKind::PoincareBall => conformal_factor(&p.0) * norm(v),
        }
    }

    fn check_tangent(&self, p: &Point, v: &[f64]) -> Result<(), GeometryError> {
        let invalid = |reason: &str| GeometryError::InvalidTangent {
            base: p.0.clone(),
            reason: reason.to_string(),
        };
        if v.len() != self.ambient_dim() {
            return Err(invalid("dimension mismatch"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(invalid("non-finite component"));
        }
        if self.kind == ManifoldKind::Sphere && dot(&p.0, v).abs() > TANGENT_TOL * norm(v).max(1.0) {
            return Err(invalid("not orthogonal to the base point"));
        }
        Ok(())
    }

    pub fn exp_map(&self, p: &Point, v: &[f64]) -> Result<Point, GeometryError> {
        self.check_point(p)?;
        self.check_tangent(p, v)?;
        let x = &p.0;
        match self.kind {
            ManifoldKind::Euclidean => Ok(Point(x.iter().zip(v).map(|(a, b)| a + b).collect())),
            ManifoldKind::Sphere => {
                let theta = norm(v);
                if theta == 0.0 {
                    return Ok(p.clone());
                }
                let (c, s) = (theta.cos(), theta.sin() / theta);
                let coords: Vec<f64> = x.iter().zip(v).map(|(a, b)| c * a + s * b).collect();
                Ok(Point(normalized(&coords)))
            }
            ManifoldKind::PoincareBall => {
                let nv = norm(v);
                if nv == 0.0 {
                    return Ok(p.clone());
                }
                let lambda = conformal_factor(x);
                let scale = (lambda * nv / 2.0).tanh() / nv;
                let step: Vec<f64> = v.iter().map(|c| c * scale).collect();
                Ok(Point(clamp_to_ball(mobius_add(x, &step))))
            }
        }
    }

    pub fn log_map(&self, p: &Point, q: &Point) -> Result<Vec<f64>, GeometryError> {
        self.check_point(p)?;
        self.check_point(q)?;
        let (x, y) = (&p.0, &q.0);
        match self.kind {
            ManifoldKind::Euclidean => Ok(y.iter().zip(x).map(|(b, a)| b - a).collect()),
            ManifoldKind::Sphere => {
                if self.is_antipodal(x, y) {
                    return Err(GeometryError::AntipodalPoints(x.clone(), y.clone()));
                }
                let d = dot(x, y);
                let w: Vec<f64> = y.iter().zip(x).map(|(b, a)| b - d * a).collect();
                let nw = norm(&w);
                if nw < 1e-300 {
                    return Ok(vec![0.0; x.len()]);
                }
                let theta = sphere_angle(x, y);
                Ok(w.iter().map(|c| c * theta / nw).collect())
            }
            ManifoldKind::PoincareBall => {
                let w = mobius_add(&neg(x), y);
                let nw = norm(&w);
                if nw == 0.0 {
                    return Ok(vec![0.0; x.len()]);
                }
                let lambda = conformal_factor(x);
                let scale = 2.0 / lambda * nw.min(1.0 - f64::EPSILON).atanh() / nw;
                Ok(w.iter().map(|c| c * scale).collect())
            }
        }
    }

    /// Velocity of `γ_{mu1,mu2}` at parameter `t ∈ {0, 1}`:
    /// `γ̇(0) = log_{mu2}(mu1)` and `γ̇(1) = −log_{mu1}(mu2)`.
    pub fn geodesic_velocity_at_end(
        &self,
        mu1: &Point,
        mu2: &Point,
        at_mu1: bool,
    ) -> Result<Vec<f64>, GeometryError> {
        if at_mu1 {
            Ok(self.log_map(mu1, mu2)?.into_iter().map(|c| -c).collect())
        } else {
            self.log_map(mu2, mu1)
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn normalized(a: &[f64]) -> Vec<f64> {
    let n = norm(a);
    a.iter().map(|x| x / n).collect()
}

fn neg(a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| -x).collect()
}

/// Great-circle angle, stable at both small and near-π separations.
fn sphere_angle(a: &[f64], b: &[f64]) -> f64 {
    let mut diff = 0.0;
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b) {
        diff += (x - y) * (x - y);
        sum += (x + y) * (x + y);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

fn conformal_factor(x: &[f64]) -> f64 {
    2.0 / (1.0 - dot(x, x))
}

fn mobius_add(x: &[f64], y: &[f64]) -> Vec<f64> {
    let xy = dot(x, y);
    let x2 = dot(x, x);
    let y2 = dot(y, y);
    let a = 1.0 + 2.0 * xy + y2;
    let b = 1.0 - x2;
    let den = 1.0 + 2.0 * xy + x2 * y2;
    x.iter().zip(y).map(|(xi, yi)| (a * xi + b * yi) / den).collect()
}

fn mobius_scale(r: f64, x: &[f64]) -> Vec<f64> {
    let n = norm(x);
    if n == 0.0 {
        return x.to_vec();
    }
    let s = (r * n.min(1.0 - f64::EPSILON).atanh()).tanh() / n;
    x.iter().map(|c| c * s).collect()
}

fn clamp_to_ball(mut x: Vec<f64>) -> Vec<f64> {
    let n = norm(&x);
    let limit = 1.0 - 2.0 * POINT_TOL;
    if n >= limit {
        let s = limit / n;
        x.iter_mut().for_each(|c| *c *= s);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, SQRT_2};

    fn p(v: &[f64]) -> Point {
        Point(v.to_vec())
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn euclidean_endpoint_and_midpoint() {
        let m = Manifold::euclidean(2);
        let g = m.geodesic(&p(&[1.0, 0.0]), &p(&[0.0, 0.0]), 1.0).unwrap();
        assert_eq!(g.0, vec![1.0, 0.0]);
        let g = m.geodesic(&p(&[2.0, 0.0]), &p(&[0.0, 0.0]), 0.5).unwrap();
        assert_eq!(g.0, vec![1.0, 0.0]);
    }

    #[test]
    fn sphere_quarter_arc_midpoint() {
        let m = Manifold::sphere(2);
        let g = m
            .geodesic(&p(&[1.0, 0.0, 0.0]), &p(&[0.0, 1.0, 0.0]), 0.5)
            .unwrap();
        assert!(close(&g.0, &[SQRT_2 / 2.0, SQRT_2 / 2.0, 0.0], 1e-15));
    }

    #[test]
    fn distances() {
        assert_eq!(
            Manifold::euclidean(2)
                .distance(&p(&[0.0, 0.0]), &p(&[3.0, 4.0]))
                .unwrap(),
            5.0
        );
        let d = Manifold::sphere(2)
            .distance(&p(&[1.0, 0.0, 0.0]), &p(&[0.0, 1.0, 0.0]))
            .unwrap();
        assert!((d - FRAC_PI_2).abs() < 1e-15);
        let b = Manifold::poincare_ball(2);
        assert_eq!(b.distance(&p(&[0.0, 0.0]), &p(&[0.0, 0.0])).unwrap(), 0.0);
        let d = b.distance(&p(&[0.0, 0.0]), &p(&[0.5, 0.0])).unwrap();
        assert!((d - 1.0986122886681098).abs() < 1e-12);
    }

    #[test]
    fn flat_exp_log() {
        let m = Manifold::euclidean(2);
        assert_eq!(m.log_map(&p(&[1.0, 1.0]), &p(&[2.0, 3.0])).unwrap(), vec![1.0, 2.0]);
        assert_eq!(m.exp_map(&p(&[1.0, 1.0]), &[1.0, 2.0]).unwrap().0, vec![2.0, 3.0]);
    }

    #[test]
    fn sphere_log_at_coincident_point_is_zero() {
        let m = Manifold::sphere(2);
        let v = m.log_map(&p(&[1.0, 0.0, 0.0]), &p(&[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(v, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn antipodal_pairs_are_rejected() {
        let m = Manifold::sphere(2);
        let a = p(&[0.0, 0.0, 1.0]);
        let b = p(&[0.0, 0.0, -1.0]);
        assert!(matches!(
            m.geodesic(&a, &b, 0.5),
            Err(GeometryError::AntipodalPoints(..))
        ));
        assert!(matches!(m.log_map(&a, &b), Err(GeometryError::AntipodalPoints(..))));
        assert!(GeodesicSpec::new(m, a, b).is_err());
    }

    #[test]
    fn invalid_points_and_params() {
        let s = Manifold::sphere(2);
        assert!(s.check_point(&p(&[1.0, 1.0, 0.0])).is_err());
        assert!(s.check_point(&p(&[1.0, 0.0])).is_err());
        let b = Manifold::poincare_ball(2);
        assert!(b.check_point(&p(&[1.0, 0.0])).is_err());
        assert!(Manifold::euclidean(1).check_point(&p(&[f64::NAN])).is_err());
        let e = Manifold::euclidean(1);
        assert!(matches!(
            e.geodesic(&p(&[0.0]), &p(&[1.0]), 1.5),
            Err(GeometryError::ParamOutOfRange(_))
        ));
        assert!(Manifold::new(ManifoldKind::Euclidean, 0).is_err());
    }

    #[test]
    fn sphere_tangency_is_enforced() {
        let m = Manifold::sphere(2);
        assert!(matches!(
            m.exp_map(&p(&[1.0, 0.0, 0.0]), &[0.5, 0.1, 0.0]),
            Err(GeometryError::InvalidTangent { .. })
        ));
    }

    #[test]
    fn velocity_at_ends() {
        let m = Manifold::euclidean(1);
        let v0 = m.geodesic_velocity_at_end(&p(&[1.0]), &p(&[0.0]), false).unwrap();
        let v1 = m.geodesic_velocity_at_end(&p(&[1.0]), &p(&[0.0]), true).unwrap();
        assert_eq!(v0, vec![1.0]);
        assert_eq!(v1, vec![1.0]);
    }
}
