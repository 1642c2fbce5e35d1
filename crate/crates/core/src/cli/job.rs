use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{
    check_additive, check_antisymmetric, check_monotone, check_nonneg_homogeneous, check_nonneg_linear,
    check_seq_upper_bounded, epigraph_membership, AlgebraError, BaseSet, DomainSet, GraphBound, Instance,
    Monotonicity, ProductSet, Region, SequencePair, VALUE_RANGE,
};
use crate::checker::{
    check_geodesic_e_convex_set, check_geodesic_phie_convex_fn, check_geodesic_phie_convex_set,
    check_phie_convex_interval, search_counterexample, CheckConfig, ConfigError,
};
use crate::exprlang::{Bifunction, EndoMap, ParseError, ScalarFn};
use crate::manifold::{GeometryError, Manifold, Point};
use crate::report::{AnyReport, Report, Verdict};
use crate::space::{Diffeo, DiffeoError};
use crate::theorems::{self, ClosureKind, LimitMode, TheoremError, TheoremId};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Check,
    CheckSet,
    CheckProductSet,
    CheckEpigraph,
    Verify,
    Search,
    CheckPhi,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Check,
        Command::CheckSet,
        Command::CheckProductSet,
        Command::CheckEpigraph,
        Command::Verify,
        Command::Search,
        Command::CheckPhi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::CheckSet => "check-set",
            Command::CheckProductSet => "check-product-set",
            Command::CheckEpigraph => "check-epigraph",
            Command::Verify => "verify",
            Command::Search => "search",
            Command::CheckPhi => "check-phi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub membership: Option<String>,
}

/// `"identity"`, a single component expression, or one expression per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapSpec {
    Single(String),
    Components(Vec<String>),
}

impl Default for MapSpec {
    fn default() -> Self {
        MapSpec::Single("identity".into())
    }
}

impl MapSpec {
    pub fn build(&self, coords: usize) -> Result<EndoMap, ParseError> {
        match self {
            MapSpec::Single(s) if s.trim() == "identity" => Ok(EndoMap::identity(coords)),
            MapSpec::Single(s) => EndoMap::parse(&[s.as_str()], coords),
            MapSpec::Components(c) => {
                let refs: Vec<&str> = c.iter().map(String::as_str).collect();
                EndoMap::parse(&refs, coords)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Interval,
    #[default]
    Geodesic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TheoremParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u2: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub mu: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub mu_star: Vec<f64>,
    /// Further functions `h_2, h_3, …` sharing the job's domain, E and φ.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub family: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub weights: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h2: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub phis: Vec<String>,
    /// Template over `a`, `b` and the index `i`, expanded for `i = 1..=count`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_template: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    /// Limit bifunction; defaults to the job's `phi`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<String>,
}

impl TheoremParams {
    fn is_empty(&self) -> bool {
        *self == TheoremParams::default()
    }
}

/// A product set over the job's domain (or its E-image): constraints
/// `g(x, v) ≥ 0`, optionally with the epigraph of a function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductSetSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bounds: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epigraph_of: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub over_image: bool,
    pub v_range: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiPredicate {
    NonnegHomogeneous,
    Additive,
    Antisymmetric,
    NonnegLinear,
    /// Non-decreasing in `a` and `b ↦ b + φ(a, b)` non-decreasing.
    Monotone,
    /// Non-decreasing in each argument separately.
    MonotoneBoth,
    SeqUpperBounded,
}

fn default_phi() -> String {
    "a - b".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    pub manifold: Manifold,
    pub domain: DomainSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<String>,
    #[serde(rename = "E", default)]
    pub e: MapSpec,
    #[serde(default = "default_phi")]
    pub phi: String,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub config: CheckConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem: Option<TheoremId>,
    #[serde(default, skip_serializing_if = "TheoremParams::is_empty")]
    pub params: TheoremParams,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub product_sets: Vec<ProductSetSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sequences: Vec<SequencePair>,
    /// Queries `[u_1, …, u_n, v]` for epigraph membership.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub epigraph_points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub predicates: Vec<PhiPredicate>,
}

#[derive(Debug, Error)]
pub enum JobError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed job: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Spec(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Theorem(#[from] TheoremError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Diffeo(#[from] DiffeoError),
}

impl JobError {
    pub fn kind(&self) -> &'static str {
        match self {
            JobError::Io { .. } => "io",
            JobError::Json(_) => "json",
            JobError::Spec(_) => "spec",
            JobError::Config(_) => "config",
            JobError::Parse(_) => "parse",
            JobError::Algebra(_) => "algebra",
            JobError::Theorem(_) => "theorem",
            JobError::Geometry(_) => "geometry",
            JobError::Diffeo(_) => "diffeo",
        }
    }
}

fn spec_err(msg: impl Into<String>) -> JobError {
    JobError::Spec(msg.into())
}

fn need<T>(v: Option<T>, name: &str) -> Result<T, JobError> {
    v.ok_or_else(|| spec_err(format!("missing theorem parameter `{name}`")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobReport {
    pub schema_version: &'static str,
    pub job: JobSpec,
    pub reports: Vec<AnyReport>,
    pub wall_time_ms: u64,
}

impl JobReport {
    /// First verdict that is not `HoldsOnSamples`, in report order.
    pub fn top_verdict(&self) -> Verdict {
        self.reports
            .iter()
            .map(AnyReport::verdict)
            .find(|v| !v.holds())
            .unwrap_or(Verdict::HoldsOnSamples)
    }

    /// Pretty JSON with sorted keys and shortest round-trip floats.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("job reports serialize");
        let mut out = serde_json::to_string_pretty(&value).expect("values serialize");
        out.push('\n');
        out
    }
}

impl JobSpec {
    pub fn from_json(src: &str) -> Result<Self, JobError> {
        Ok(serde_json::from_str(src)?)
    }

    pub fn validate(&self) -> Result<(), JobError> {
        Manifold::new(self.manifold.kind, self.manifold.dim)?;
        self.config.validate()?;
        Ok(())
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        self.domain.bounds.iter().map(|b| (b[0], b[1])).collect()
    }

    fn coords(&self) -> usize {
        self.manifold.ambient_dim()
    }

    fn domain_set(&self) -> Result<DomainSet, JobError> {
        Ok(DomainSet::new(self.manifold, &self.bounds(), self.domain.membership.as_deref())?)
    }

    fn map(&self) -> Result<EndoMap, JobError> {
        Ok(self.e.build(self.coords())?)
    }

    fn phi_fn(&self) -> Result<Bifunction, JobError> {
        Ok(Bifunction::parse(&self.phi)?)
    }

    pub fn instance(&self) -> Result<Instance, JobError> {
        let h = self.h.as_deref().ok_or_else(|| spec_err("this command needs `h`"))?;
        self.instance_with(h)
    }

    fn instance_with(&self, h: &str) -> Result<Instance, JobError> {
        Ok(Instance::new(
            ScalarFn::parse(h, self.coords())?,
            self.map()?,
            self.phi_fn()?,
            self.domain_set()?.into(),
        )?)
    }

    fn family(&self) -> Result<Vec<Instance>, JobError> {
        let mut out = vec![self.instance()?];
        for h in &self.params.family {
            out.push(self.instance_with(h)?);
        }
        Ok(out)
    }

    fn product_sets(&self) -> Result<Vec<ProductSet>, JobError> {
        if self.product_sets.is_empty() {
            return Err(spec_err("this command needs `product_sets`"));
        }
        let region: Region = self.domain_set()?.into();
        let e = self.map()?;
        let n = self.coords();
        self.product_sets
            .iter()
            .map(|ps| {
                let base = if ps.over_image && !e.is_identity() {
                    BaseSet::Image {
                        domain: region.clone(),
                        map: e.clone(),
                    }
                } else {
                    BaseSet::Domain(region.clone())
                };
                let mut bounds = ps
                    .bounds
                    .iter()
                    .map(|g| GraphBound::parse(g, n))
                    .collect::<Result<Vec<_>, _>>()?;
                if let Some(h) = &ps.epigraph_of {
                    bounds.push(GraphBound::Epigraph(ScalarFn::parse(h, n)?));
                }
                let (lo, hi) = (ps.v_range[0], ps.v_range[1]);
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(spec_err(format!("v_range {:?} is empty or non-finite", ps.v_range)));
                }
                Ok(ProductSet::new(base, bounds, (lo, hi)))
            })
            .collect()
    }

    fn chart(&self) -> Result<Diffeo, JobError> {
        let c = need(self.params.chart.as_ref(), "chart")?;
        Ok(Diffeo::builtin(&c.name, &self.manifold, &c.params)?)
    }

    fn point(&self, coords: &[f64], name: &str) -> Result<Point, JobError> {
        if coords.len() != self.coords() {
            return Err(spec_err(format!(
                "`{name}` has {} coordinates, the manifold needs {}",
                coords.len(),
                self.coords()
            )));
        }
        Ok(Point(coords.to_vec()))
    }
}

/// Runs a validated job; `command` overrides the spec's own.
pub fn execute(spec: &JobSpec, command: Command) -> Result<Vec<AnyReport>, JobError> {
    spec.validate()?;
    let cfg = &spec.config;
    let one = |r: Report| Ok(vec![AnyReport::from(r)]);
    match command {
        Command::Check => {
            let inst = spec.instance()?;
            match spec.mode {
                Mode::Interval => one(check_phie_convex_interval(&inst, cfg)),
                Mode::Geodesic => one(check_geodesic_phie_convex_fn(&inst, cfg, spec.strict)),
            }
        }
        Command::Search => one(search_counterexample(&spec.instance()?, cfg)),
        Command::CheckSet => one(check_geodesic_e_convex_set(&spec.map()?, &spec.domain_set()?.into(), cfg)),
        Command::CheckProductSet => {
            let (e, phi) = (spec.map()?, spec.phi_fn()?);
            Ok(spec
                .product_sets()?
                .iter()
                .map(|s| check_geodesic_phie_convex_set(&e, &phi, s, cfg).into())
                .collect())
        }
        Command::CheckEpigraph => check_epigraph(spec, cfg),
        Command::CheckPhi => check_phi(spec, cfg),
        Command::Verify => {
            let id = spec
                .theorem
                .ok_or_else(|| spec_err("`verify` needs a theorem (config `theorem` or --theorem)"))?;
            Ok(vec![AnyReport::Theorem(verify(spec, id, cfg)?)])
        }
    }
}

fn check_epigraph(spec: &JobSpec, cfg: &CheckConfig) -> Result<Vec<AnyReport>, JobError> {
    let inst = spec.instance()?;
    let set = ProductSet::epigraph(&inst, ProductSet::default_v_range(&inst, cfg.seed));
    let mut out = vec![AnyReport::from(check_geodesic_phie_convex_set(&inst.e, &inst.phi, &set, cfg))];
    if !spec.epigraph_points.is_empty() {
        let n = spec.coords();
        let mut r = Report::new("epigraph_membership", cfg.seed);
        for (i, q) in spec.epigraph_points.iter().enumerate() {
            if q.len() != n + 1 {
                return Err(spec_err(format!("epigraph point {i} needs {} coordinates and a value", n)));
            }
            let key = format!("point_{i:03}");
            match epigraph_membership(&inst, &Point(q[..n].to_vec()), q[n], cfg) {
                Ok(member) => {
                    r.flags.insert(key, member);
                }
                Err(e) => {
                    r.verdict = Verdict::DomainError;
                    r.notes.push(format!("{key}: {e}"));
                }
            }
        }
        r.samples_used = spec.epigraph_points.len() as u64;
        out.push(r.into());
    }
    Ok(out)
}

fn check_phi(spec: &JobSpec, cfg: &CheckConfig) -> Result<Vec<AnyReport>, JobError> {
    use PhiPredicate::*;
    let phi = spec.phi_fn()?;
    let mut which = spec.predicates.clone();
    if which.is_empty() {
        which = vec![NonnegHomogeneous, Additive, Antisymmetric, NonnegLinear, Monotone];
        if !spec.sequences.is_empty() {
            which.push(SeqUpperBounded);
        }
    }
    let mut out = Vec::with_capacity(which.len());
    for p in which {
        let r = match p {
            NonnegHomogeneous => check_nonneg_homogeneous(&phi, cfg),
            Additive => check_additive(&phi, cfg),
            Antisymmetric => check_antisymmetric(&phi, cfg),
            NonnegLinear => check_nonneg_linear(&phi, cfg),
            Monotone => check_monotone(&phi, &[Monotonicity::First, Monotonicity::OffsetSecond], VALUE_RANGE, cfg),
            MonotoneBoth => check_monotone(&phi, &[Monotonicity::First, Monotonicity::Second], VALUE_RANGE, cfg),
            SeqUpperBounded => {
                if spec.sequences.is_empty() {
                    return Err(spec_err("seq_upper_bounded needs `sequences`"));
                }
                let e = if spec.coords() == 1 { spec.map()? } else { EndoMap::identity(1) };
                check_seq_upper_bounded(&phi, &e, &spec.sequences, cfg)?
            }
        };
        out.push(r.into());
    }
    Ok(out)
}

fn limit_phis(spec: &JobSpec) -> Result<Vec<Bifunction>, JobError> {
    let p = &spec.params;
    match (&p.phi_template, p.phis.is_empty()) {
        (Some(t), true) => Ok(theorems::expand_phi_template(t, need(p.count, "count")?)?),
        (None, false) => Ok(p.phis.iter().map(|s| Bifunction::parse(s)).collect::<Result<_, _>>()?),
        _ => Err(spec_err("give exactly one of `phis` and `phi_template`")),
    }
}

fn verify(spec: &JobSpec, id: TheoremId, cfg: &CheckConfig) -> Result<crate::report::TheoremReport, JobError> {
    use TheoremId::*;
    let p = &spec.params;
    let closure = |kind: ClosureKind| -> Result<_, JobError> {
        let weights = if p.weights.is_empty() && kind == ClosureKind::Scaling {
            vec![1.0]
        } else {
            p.weights.clone()
        };
        Ok(theorems::verify_closure(kind, &spec.family()?, &weights, cfg)?)
    };
    let tr = match id {
        MeanValue31 => theorems::verify_mean_value(&spec.instance()?, need(p.u1, "u1")?, need(p.u2, "u2")?, cfg),
        ThreePoint32 => {
            let [a, b, c] = <[f64; 3]>::try_from(p.mu.as_slice())
                .map_err(|_| spec_err("`mu` must hold exactly three values"))?;
            theorems::verify_three_point(&spec.instance()?, a, b, c, cfg)
        }
        Scaling41a => closure(ClosureKind::Scaling)?,
        Sum41b => closure(ClosureKind::Sum)?,
        WeightedSum => closure(ClosureKind::WeightedSum)?,
        SupFamily => closure(ClosureKind::SupFamily)?,
        Composition => {
            let h2 = ScalarFn::parse(need(p.h2.as_deref(), "h2")?, 1)?;
            theorems::verify_composition(&spec.instance()?, &h2, cfg)?
        }
        DiffeoInvariance => theorems::verify_diffeo_invariance(&spec.instance()?, &spec.chart()?, cfg)?,
        ContinuityBound => {
            theorems::verify_continuity_bound(&spec.instance()?, need(p.k, "k")?, need(p.eps, "eps")?, cfg)?
        }
        LocalMin => theorems::verify_local_min(&spec.instance()?, &spec.point(&p.mu_star, "mu_star")?, cfg),
        ChartContinuity => {
            theorems::verify_chart_continuity(&spec.instance()?, &spec.chart()?, need(p.k, "k")?, cfg)?
        }
        PhiLimit | PhiSeriesLimit => {
            let mode = if id == PhiLimit { LimitMode::Pointwise } else { LimitMode::PartialSums };
            let limit = Bifunction::parse(p.limit.as_deref().unwrap_or(&spec.phi))?;
            theorems::verify_phi_limit(&spec.instance()?, &limit_phis(spec)?, &limit, mode, cfg)?
        }
        StrictDifferential => theorems::verify_strict_differential(&spec.instance()?, cfg),
        EpigraphEquiv => theorems::verify_epigraph_equiv(&spec.instance()?, cfg),
        Intersection52 => theorems::verify_intersection(&spec.map()?, &spec.phi_fn()?, &spec.product_sets()?, cfg)?,
        SupEpigraphCor => theorems::verify_sup_epigraph_cor(&spec.family()?, cfg)?,
    };
    Ok(tr)
}

/// Everything a job can refer to by name.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Catalog {
    pub manifolds: Vec<&'static str>,
    pub diffeomorphisms: BTreeMap<&'static str, &'static str>,
    pub theorems: BTreeMap<&'static str, &'static str>,
    pub builtins: Vec<&'static str>,
    pub commands: Vec<&'static str>,
}

pub fn list_builtins() -> Catalog {
    Catalog {
        manifolds: crate::manifold::ManifoldKind::ALL.iter().map(|k| k.name()).collect(),
        diffeomorphisms: crate::space::CATALOG.iter().copied().collect(),
        theorems: TheoremId::ALL.iter().map(|t| (t.name(), t.summary())).collect(),
        builtins: crate::exprlang::Builtin::ALL.iter().map(|b| b.name()).collect(),
        commands: Command::ALL.iter().map(|c| c.name()).collect(),
    }
}
