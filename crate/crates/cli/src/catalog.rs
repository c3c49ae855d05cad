//! Scenarios shipped with the binary.

use crate::config::{ConfigError, ScenarioConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuntimeClass {
    /// Under ten seconds.
    Fast,
    /// Under a minute.
    Medium,
    /// Up to a few minutes.
    Slow,
}

impl RuntimeClass {
    pub fn label(self) -> &'static str {
        match self {
            RuntimeClass::Fast => "fast",
            RuntimeClass::Medium => "medium",
            RuntimeClass::Slow => "slow",
        }
    }
}

pub struct Bundled {
    pub name: &'static str,
    /// The published example the scenario reproduces.
    pub reproduces: &'static str,
    pub runtime: RuntimeClass,
    pub text: &'static str,
}

impl Bundled {
    pub fn config(&self) -> Result<ScenarioConfig, ConfigError> {
        ScenarioConfig::parse(self.text, &format!("bundled:{}", self.name))
    }
}

macro_rules! bundled {
    ($name:literal, $what:literal, $rt:ident) => {
        Bundled {
            name: $name,
            reproduces: $what,
            runtime: RuntimeClass::$rt,
            text: include_str!(concat!("../scenarios/", $name, ".toml")),
        }
    };
}

static CATALOG: &[Bundled] = &[
    bundled!("example-3.2", "Newtonian sweep of the centre Dirac onto a shell keeps its mass", Fast),
    bundled!("example-3.3", "the equilibrium measure of a ball is its own sweep", Fast),
    bundled!("example-3.4", "finite Y: the sweep onto the exterior of the unit ball keeps its mass as R grows", Fast),
    bundled!("example-3.9", "exterior-of-ball domain: outside-domain harmonic measure positive yet no loss for measures on F", Fast),
    bundled!("example-3.10", "disconnected Omega: harmonic measure at infinity vanishes on the inner ball although F is thin", Fast),
    bundled!("example-4.4-f1f2f3", "rotation bodies: thinness at infinity and capacity growth", Fast),
    bundled!("example-4.5", "internally tangent ball: the equilibrium measure does not exist", Medium),
    bundled!("deny-section-5", "Deny principle: positive case on a tangent ball, counterexamples on thin rotation bodies", Medium),
];

/// The catalog in a fixed order.
pub fn catalog() -> &'static [Bundled] {
    CATALOG
}

pub fn find(name: &str) -> Option<&'static Bundled> {
    CATALOG.iter().find(|b| b.name == name)
}
