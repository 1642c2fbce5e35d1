//! Sampled convexity predicates with counterexample refinement.
//!
//! Every check draws `cfg.samples` independent sample indices from the
//! counter-based streams in [`crate::rng`], evaluates the inequality on the
//! t-grid, and reports the strongest violation beyond
//! `tol_abs + tol_rel·max(1, |rhs|)`.

pub(crate) mod engine;
pub(crate) mod probes;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{Instance, ProductSet, Region};
use crate::exprlang::{Bifunction, EndoMap};
use crate::manifold::ManifoldKind;
use crate::report::{Report, Verdict, Witness};
use crate::rng::tags;
use crate::space::Fault;

use engine::EngineOpts;
use probes::{Combine, FnProbe, LengthProbe, Pairs, ProductProbe, SetProbe, SlopeProbe};

pub use probes::apply_map;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    pub seed: u64,
    pub samples: u64,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub refine_steps: u32,
    pub t_grid: u32,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            samples: 100_000,
            tol_abs: 1e-9,
            tol_rel: 1e-9,
            refine_steps: 50,
            t_grid: 17,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid check configuration: {0}")]
pub struct ConfigError(pub String);

impl CheckConfig {
    pub fn with_samples(&self, samples: u64) -> Self {
        Self {
            samples,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.samples < 1 {
            return Err(ConfigError("samples must be at least 1".into()));
        }
        if !(self.tol_abs > 0.0 && self.tol_rel > 0.0) {
            return Err(ConfigError("tolerances must be positive".into()));
        }
        if self.t_grid < 3 {
            return Err(ConfigError("t_grid must be at least 3".into()));
        }
        Ok(())
    }

    /// `tol_abs + tol_rel·max(1, |rhs|)`.
    pub fn threshold(&self, rhs: f64) -> f64 {
        self.tol_abs + self.tol_rel * rhs.abs().max(1.0)
    }

    /// `t_grid` equally spaced values in `[0, 1]`, endpoints included.
    pub fn t_values(&self) -> Vec<f64> {
        let n = self.t_grid.max(2) as usize;
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }
}

fn vacuous(name: &str, cfg: &CheckConfig) -> Report {
    Report::new(name, cfg.seed).with_note("no member samples: the set is empty on sampling, check holds vacuously")
}

/// `h(t·E(u₁) + (1−t)·E(u₂)) ≤ h(E(u₂)) + t·φ(h(E(u₁)), h(E(u₂)))` on a
/// Euclidean domain.
pub fn check_phie_convex_interval(inst: &Instance, cfg: &CheckConfig) -> Report {
    const NAME: &str = "phiE_convex_interval";
    if inst.space.base.kind != ManifoldKind::Euclidean || inst.space.chart.is_some() {
        return Report::domain_error(NAME, cfg.seed, "interval check needs a Euclidean instance");
    }
    let t = cfg.t_values();
    let probe = FnProbe::new(inst, cfg, &t, Combine::Linear, false);
    engine::run(&probe, cfg, NAME, EngineOpts::new(tags::PAIRS))
}

/// The slope form of the φ_E-convexity inequality on sampled triples with
/// `E(μ)` strictly between `E(μ₁)` and `E(μ₂)`.
///
/// For `E(μ₁) < E(μ) < E(μ₂)` it tests
/// `[h(E μ₂) − h(E μ)]/[E μ₂ − E μ] ≥ φ(h(E μ₁), h(E μ₂))/[E μ₁ − E μ₂]`,
/// and for the mirrored order `E(μ₂) < E(μ) < E(μ₁)` the same inequality
/// with the direction flipped, as dividing the φ_E-convexity inequality by
/// `E μ − E μ₂` requires. The witness `t` is `(E μ₂ − E μ)/(E μ₂ − E μ₁)`.
pub fn check_slope_inequality(inst: &Instance, cfg: &CheckConfig) -> Report {
    const NAME: &str = "slope_inequality";
    if inst.space.base.kind != ManifoldKind::Euclidean || inst.dim() != 1 || inst.space.chart.is_some() {
        return Report::domain_error(NAME, cfg.seed, "slope check needs a Euclidean(1) instance");
    }
    let probe = SlopeProbe::new(inst, cfg);
    let r = engine::run(&probe, cfg, NAME, EngineOpts::new(tags::TRIPLES));
    if r.verdict == Verdict::HoldsOnSamples && r.samples_used == 0 {
        return Report::failed_condition(NAME, cfg.seed, "no admissible triple E(mu1) < E(mu) < E(mu2) was sampled");
    }
    r
}

/// Geodesic containment `γ_{E(μ₁),E(μ₂)}(t) ∈ B` on sampled member pairs.
///
/// The length condition `d(E μ₁, E μ₂) = d(μ₁, μ₂)` is reported as the
/// separate flag `length_condition`.
pub fn check_geodesic_e_convex_set(e: &EndoMap, region: &Region, cfg: &CheckConfig) -> Report {
    const NAME: &str = "geodesic_E_convex_set";
    if region.is_empty(cfg.seed) {
        return vacuous(NAME, cfg);
    }
    let space = region.space();
    let t = cfg.t_values();
    let pairs = Pairs::new(region, &space);
    let probe = SetProbe {
        pairs: &pairs,
        e,
        t: &t,
    };
    let mut r = engine::run(&probe, cfg, NAME, EngineOpts::new(tags::PAIRS));
    if r.verdict == Verdict::DomainError {
        return r;
    }
    let length = LengthProbe { pairs: &pairs, e };
    let lr = engine::run(&length, cfg, "length_condition", EngineOpts::new(tags::PAIRS).no_refine());
    r.flags.insert("length_condition".into(), lr.holds());
    if let Some(w) = lr.witness {
        let coords: Vec<&Vec<f64>> = w.points.iter().map(|p| &p.0).collect();
        r.notes.push(format!(
            "length condition fails at {coords:?}: |d(E mu1, E mu2) - d(mu1, mu2)| = {}",
            w.lhs
        ));
    }
    r
}

fn fn_check(inst: &Instance, cfg: &CheckConfig, strict: bool, opts: EngineOpts, name: &str) -> Report {
    let set = check_geodesic_e_convex_set(&inst.e, &inst.domain, cfg);
    if !set.holds() {
        return Report::premise_failed(name, cfg.seed, set);
    }
    if set.samples_used == 0 {
        return vacuous(name, cfg);
    }
    let t = cfg.t_values();
    let probe = FnProbe::new(inst, cfg, &t, Combine::Geodesic, strict);
    let mut r = engine::run(&probe, cfg, name, opts);
    if let Some(&flag) = set.flags.get("length_condition") {
        r.flags.insert("length_condition".into(), flag);
    }
    if strict {
        r.notes.push(format!(
            "strict: rhs lowered by 2x threshold for pairs with d(E mu1, E mu2) >= {} and 0 < t < 1",
            probes::STRICT_MIN_SEPARATION
        ));
    }
    r
}

/// `h(γ_{E(μ₁),E(μ₂)}(t)) ≤ h(E μ₂) + t·φ(h(E μ₁), h(E μ₂))`, after
/// verifying that the domain is a geodesic E-convex set.
pub fn check_geodesic_phie_convex_fn(inst: &Instance, cfg: &CheckConfig, strict: bool) -> Report {
    let name = if strict {
        "strict_geodesic_phiE_convex_fn"
    } else {
        "geodesic_phiE_convex_fn"
    };
    fn_check(inst, cfg, strict, EngineOpts::new(tags::PAIRS), name)
}

/// The function check with refinement started from the best samples even
/// when none is close to violating.
pub fn search_counterexample(inst: &Instance, cfg: &CheckConfig) -> Report {
    let opts = EngineOpts {
        exhaustive: true,
        ..EngineOpts::new(tags::PAIRS)
    };
    fn_check(inst, cfg, false, opts, "counterexample_search")
}

/// Inverse-search budget when screening candidate members; the verdict
/// itself always uses the set's full budget.
const MEMBER_BUDGET: u64 = 64;

/// `(γ_{E(u₁),E(u₂)}(t), v₂ + t·φ(v₁, v₂)) ∈ S` for sampled members
/// `(u₁, v₁), (u₂, v₂)` of `S`.
pub fn check_geodesic_phie_convex_set(
    e: &EndoMap,
    phi: &Bifunction,
    set: &ProductSet,
    cfg: &CheckConfig,
) -> Report {
    const NAME: &str = "geodesic_phiE_convex_set";
    let space = set.space();
    let t = cfg.t_values();
    let members = set.with_inverse_budget(MEMBER_BUDGET);
    let probe = ProductProbe {
        set,
        members: &members,
        e,
        phi,
        space: &space,
        t: &t,
        seed: cfg.seed,
    };
    if !engine::is_nonempty(&probe, cfg.seed, tags::PRODUCT, 1000) {
        return vacuous(NAME, cfg);
    }
    engine::run(&probe, cfg, NAME, EngineOpts::new(tags::PRODUCT))
}

/// Recomputes `lhs − rhs` of the function inequality at a witness with
/// points `[μ₁, μ₂]`.
pub fn reevaluate_fn_witness(inst: &Instance, w: &Witness, geodesic: bool) -> Result<f64, Fault> {
    let (e1, e2) = (apply_map(&inst.space, &inst.e, &w.points[0])?, apply_map(&inst.space, &inst.e, &w.points[1])?);
    let h1 = inst.h_at(&e1)?;
    let h2 = inst.h_at(&e2)?;
    let p = if geodesic {
        inst.space.geodesic(&e1, &e2, w.t)?
    } else {
        probes::linear_combination(&e1, &e2, w.t)
    };
    let lhs = inst.h_at(&p)?;
    let rhs = h2 + w.t * inst.phi.eval(h1, h2)?;
    Ok(lhs - rhs)
}
