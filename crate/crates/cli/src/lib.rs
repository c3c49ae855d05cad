//! Scenario runner: TOML scenario files in, `report.json`, CSV tables and
//! SVG plots out.

pub mod catalog;
pub mod config;
pub mod plot;
pub mod report;
pub mod run;

use std::path::Path;

use balayage_core::domain::DomainSpec;
use balayage_core::region::Region;
use balayage_verify::{PropertyCase, Summary};

use config::{Experiment, Reproduction, ScenarioConfig};

/// Experiment whose operation chain a property exercises.
fn experiment_for(property: &str) -> Experiment {
    match property {
        "route-equivalence" => Experiment::RouteEquivalence,
        "equilibrium-potential-bounds" | "swept-mass-identity" => Experiment::Equilibrium,
        "trichotomy-consistency" => Experiment::MassTrichotomy,
        "deny-positive" => Experiment::DenyCheck,
        "deny-negative" => Experiment::DenyCounterexample,
        _ => Experiment::Sweep,
    }
}

/// Scenario that reruns one property case.
pub fn reproduction_config(case: &PropertyCase) -> ScenarioConfig {
    let domain = case.domain.clone().unwrap_or_else(|| {
        DomainSpec::new(
            3,
            Region::FullSpace,
            Region::Ball {
                center: vec![0.0; 3],
                radius: 1.0,
            },
        )
    });
    ScenarioConfig {
        name: format!("{}-{}", case.property, case.index),
        description: format!("reproduces case {} of {} at seed {}: {}", case.index, case.property, case.seed, case.evidence),
        experiment: experiment_for(&case.property),
        seed: domain.seed,
        alpha: case.alpha.unwrap_or(2.0),
        domain,
        measure: None,
        nu: None,
        options: Default::default(),
        series: Default::default(),
        tolerances: Default::default(),
        variants: Vec::new(),
        expectations: Vec::new(),
        output: None,
        scenarios: Vec::new(),
        reproduce: Some(Reproduction {
            property: case.property.clone(),
            seed: case.seed,
            index: case.index,
        }),
    }
}

/// Runs the named properties (all when empty), writing `summary.json` and
/// one reproduction scenario per failing case under `out`.
pub fn verify(names: &[String], cases: Option<usize>, seed: u64, out: &Path) -> balayage_core::Result<Vec<Summary>> {
    let registry = balayage_verify::registry();
    let selected: Vec<&balayage_verify::PropertyInfo> = if names.is_empty() {
        registry.iter().collect()
    } else {
        names
            .iter()
            .map(|n| {
                registry
                    .iter()
                    .find(|p| p.name == n)
                    .ok_or_else(|| balayage_core::Error::InvalidArgument(format!("unknown property '{n}'")))
            })
            .collect::<balayage_core::Result<_>>()?
    };
    let io = |e: std::io::Error| balayage_core::Error::InvalidArgument(format!("{}: {e}", out.display()));
    std::fs::create_dir_all(out).map_err(io)?;
    let mut summaries = Vec::new();
    for info in selected {
        let s = balayage_verify::run_property(info.name, cases.unwrap_or(info.default_cases), seed)?;
        for case in &s.failures {
            let dir = out.join("repro");
            std::fs::create_dir_all(&dir).map_err(io)?;
            let cfg = reproduction_config(case);
            std::fs::write(dir.join(format!("{}-{}.toml", case.property, case.index)), cfg.to_toml()).map_err(io)?;
        }
        summaries.push(s);
    }
    let json = serde_json::to_string_pretty(&summaries).expect("summaries serialize");
    std::fs::write(out.join("summary.json"), json + "\n").map_err(io)?;
    Ok(summaries)
}
