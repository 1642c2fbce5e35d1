use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::manifold::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    HoldsOnSamples,
    Violated,
    PremiseFailed,
    DomainError,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::HoldsOnSamples => "HoldsOnSamples",
            Verdict::Violated => "Violated",
            Verdict::PremiseFailed => "PremiseFailed",
            Verdict::DomainError => "DomainError",
        }
    }

    pub fn holds(self) -> bool {
        self == Verdict::HoldsOnSamples
    }

    /// Process exit code for a job whose top verdict is `self`.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::HoldsOnSamples => 0,
            Verdict::Violated => 1,
            Verdict::PremiseFailed | Verdict::DomainError => 2,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A concrete sample at which a checked inequality was evaluated.
///
/// `violation` is `lhs - rhs` for inequality checks and `|lhs - rhs|` for the
/// equality predicates on bifunctions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub sample_index: u64,
    pub points: Vec<Point>,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub check: String,
    pub verdict: Verdict,
    pub max_violation: f64,
    pub witness: Option<Witness>,
    pub samples_used: u64,
    pub seed: u64,
    #[serde(default)]
    pub flags: BTreeMap<String, bool>,
    #[serde(default)]
    pub notes: Vec<String>,
    /// Locally refined near-violations, strongest first.
    #[serde(default)]
    pub refined: Vec<Witness>,
    /// Failing prerequisite check when `verdict` is `PremiseFailed`.
    #[serde(default)]
    pub premise: Option<Box<Report>>,
}

impl Report {
    pub fn new(check: impl Into<String>, seed: u64) -> Self {
        Self {
            check: check.into(),
            verdict: Verdict::HoldsOnSamples,
            max_violation: 0.0,
            witness: None,
            samples_used: 0,
            seed,
            flags: BTreeMap::new(),
            notes: Vec::new(),
            refined: Vec::new(),
            premise: None,
        }
    }

    pub fn premise_failed(check: impl Into<String>, seed: u64, premise: Report) -> Self {
        let mut r = Self::new(check, seed);
        r.verdict = Verdict::PremiseFailed;
        r.notes.push(format!("premise `{}` returned {}", premise.check, premise.verdict));
        r.premise = Some(Box::new(premise));
        r
    }

    pub fn domain_error(check: impl Into<String>, seed: u64, detail: impl Into<String>) -> Self {
        let mut r = Self::new(check, seed);
        r.verdict = Verdict::DomainError;
        r.notes.push(detail.into());
        r
    }

    /// A report stating a precondition failure that is not itself a check.
    pub fn failed_condition(check: impl Into<String>, seed: u64, detail: impl Into<String>) -> Self {
        let mut r = Self::new(check, seed);
        r.verdict = Verdict::PremiseFailed;
        r.notes.push(detail.into());
        r
    }

    pub fn holds(&self) -> bool {
        self.verdict.holds()
    }

    pub fn with_flag(mut self, name: &str, value: bool) -> Self {
        self.flags.insert(name.to_string(), value);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub id: String,
    pub verdict: Verdict,
    pub premise_reports: Vec<Report>,
    pub conclusion_report: Option<Report>,
    /// Further conclusion-side checks for results with compound conclusions.
    #[serde(default)]
    pub supporting_reports: Vec<Report>,
    /// Informational reports that do not enter the verdict.
    #[serde(default)]
    pub evidence: Vec<Report>,
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(default)]
    pub values: BTreeMap<String, f64>,
    #[serde(default)]
    pub flags: BTreeMap<String, bool>,
}

impl TheoremReport {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            verdict: Verdict::HoldsOnSamples,
            premise_reports: Vec::new(),
            conclusion_report: None,
            supporting_reports: Vec::new(),
            evidence: Vec::new(),
            notes: Vec::new(),
            values: BTreeMap::new(),
            flags: BTreeMap::new(),
        }
    }

    /// Records a premise; returns whether it held.
    pub fn premise(&mut self, r: Report) -> bool {
        let ok = r.holds();
        self.premise_reports.push(r);
        ok
    }

    /// Finalizes as `PremiseFailed` (the failing report is the last premise).
    pub fn fail_premise(mut self) -> Self {
        self.verdict = Verdict::PremiseFailed;
        if let Some(p) = self.premise_reports.iter().find(|p| !p.holds()) {
            self.notes.push(format!("failing premise: {}", p.check));
        }
        self
    }

    /// Finalizes with a conclusion; the verdict follows the conclusion and
    /// any supporting reports.
    pub fn conclude(mut self, conclusion: Report) -> Self {
        self.verdict = if self.premise_reports.iter().any(|p| !p.holds()) {
            Verdict::PremiseFailed
        } else {
            std::iter::once(&conclusion)
                .chain(&self.supporting_reports)
                .map(|r| r.verdict)
                .find(|v| !v.holds())
                .unwrap_or(Verdict::HoldsOnSamples)
        };
        self.conclusion_report = Some(conclusion);
        self
    }

    pub fn value(&mut self, name: &str, v: f64) {
        if v.is_finite() {
            self.values.insert(name.to_string(), v);
        }
    }
}

/// Either kind of report, as emitted in a job's report list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnyReport {
    Theorem(TheoremReport),
    Check(Report),
}

impl AnyReport {
    pub fn verdict(&self) -> Verdict {
        match self {
            AnyReport::Theorem(t) => t.verdict,
            AnyReport::Check(r) => r.verdict,
        }
    }
}

impl From<Report> for AnyReport {
    fn from(r: Report) -> Self {
        AnyReport::Check(r)
    }
}

impl From<TheoremReport> for AnyReport {
    fn from(r: TheoremReport) -> Self {
        AnyReport::Theorem(r)
    }
}
