//! Randomized property checks for balayage, equilibrium and harmonic
//! measure computations.
//!
//! Every property draws its geometry and measures from a seeded stream, so
//! a case is reproduced exactly by `(property, seed, index)`.

pub mod geometry;
mod properties;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use balayage_core::domain::DomainSpec;
use balayage_core::{Error, Result};

pub use geometry::Family;

pub struct PropertyInfo {
    pub name: &'static str,
    pub description: &'static str,
    /// Cases run by the acceptance suite.
    pub default_cases: usize,
    check: properties::Check,
}

pub fn registry() -> &'static [PropertyInfo] {
    properties::REGISTRY
}

pub fn property_names() -> Vec<&'static str> {
    registry().iter().map(|p| p.name).collect()
}

fn lookup(name: &str) -> Result<&'static PropertyInfo> {
    registry().iter().find(|p| p.name == name).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "unknown property '{name}'; known: {}",
            property_names().join(", ")
        ))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseOutcome {
    Pass,
    Fail,
    Skipped,
}

/// One point mass of a drawn measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Vec<f64>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyCase {
    pub property: String,
    pub seed: u64,
    pub index: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub measure: Vec<Atom>,
    pub tol: f64,
    pub outcome: CaseOutcome,
    /// The checked quantity; compared against `tol` unless the evidence says otherwise.
    pub residual: f64,
    pub evidence: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub property: String,
    pub seed: u64,
    pub cases: usize,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    /// Largest residual over passing and failing cases.
    pub max_residual: f64,
    pub max_tol: f64,
    pub failures: Vec<PropertyCase>,
    #[serde(skip)]
    pub all: Vec<PropertyCase>,
}

impl Summary {
    pub fn ok(&self) -> bool {
        self.failed == 0
    }

    pub fn line(&self) -> String {
        format!(
            "{}: {} cases, {} passed, {} failed, {} skipped, max residual {:.3e}",
            self.property, self.cases, self.passed, self.failed, self.skipped, self.max_residual
        )
    }
}

fn case_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs a single case; failures of the numerical layer become `Fail`
/// with the error as evidence.
pub fn run_case(name: &str, seed: u64, index: u64) -> Result<PropertyCase> {
    let info = lookup(name)?;
    let mut draw = properties::Draw::new(case_rng(seed, index));
    let verdict = (info.check)(&mut draw);
    let (outcome, residual, evidence) = match verdict {
        Ok(v) => (v.outcome, v.residual, v.evidence),
        Err(e) => (CaseOutcome::Fail, f64::NAN, format!("error: {e}")),
    };
    Ok(PropertyCase {
        property: name.to_string(),
        seed,
        index,
        family: draw.family,
        alpha: draw.alpha,
        domain: draw.domain,
        measure: draw.measure,
        tol: draw.tol,
        outcome,
        residual,
        evidence,
    })
}

/// Runs `cases` seeded instances of a property in parallel.
pub fn run_property(name: &str, cases: usize, seed: u64) -> Result<Summary> {
    lookup(name)?;
    let results: Vec<PropertyCase> = (0..cases as u64)
        .into_par_iter()
        .map(|i| run_case(name, seed, i))
        .collect::<Result<_>>()?;
    let count = |o: CaseOutcome| results.iter().filter(|c| c.outcome == o).count();
    let decided = || results.iter().filter(|c| c.outcome != CaseOutcome::Skipped);
    Ok(Summary {
        property: name.to_string(),
        seed,
        cases,
        passed: count(CaseOutcome::Pass),
        failed: count(CaseOutcome::Fail),
        skipped: count(CaseOutcome::Skipped),
        max_residual: decided().map(|c| c.residual).fold(0.0, f64::max),
        max_tol: decided().map(|c| c.tol).fold(0.0, f64::max),
        failures: results.iter().filter(|c| c.outcome == CaseOutcome::Fail).cloned().collect(),
        all: results,
    })
}
