//! Scenario files: one TOML document per scenario.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use balayage_core::domain::DomainSpec;
use balayage_core::equilibrium::SeriesParams;
use balayage_core::measure::{DiscreteMeasure, Point};
use balayage_core::region::Region;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Sweep,
    Equilibrium,
    Thinness,
    Wiener,
    Harmonic,
    MassTrichotomy,
    DenyCheck,
    DenyCounterexample,
    RouteEquivalence,
    FullPaperSuite,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Sweep => "sweep",
            Experiment::Equilibrium => "equilibrium",
            Experiment::Thinness => "thinness",
            Experiment::Wiener => "wiener",
            Experiment::Harmonic => "harmonic",
            Experiment::MassTrichotomy => "mass-trichotomy",
            Experiment::DenyCheck => "deny-check",
            Experiment::DenyCounterexample => "deny-counterexample",
            Experiment::RouteEquivalence => "route-equivalence",
            Experiment::FullPaperSuite => "full-paper-suite",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureSpec {
    Dirac {
        point: Vec<f64>,
        #[serde(default = "one")]
        weight: f64,
    },
    Atoms {
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    /// The discrete Green equilibrium measure of F.
    Equilibrium,
}

fn one() -> f64 {
    1.0
}

impl MeasureSpec {
    /// The measure, or None for the equilibrium measure, which needs a problem.
    pub fn atoms(&self) -> balayage_core::Result<Option<DiscreteMeasure>> {
        match self {
            MeasureSpec::Dirac { point, weight } => Ok(Some(DiscreteMeasure::point_mass(&Point(point.clone()), *weight))),
            MeasureSpec::Atoms { points, weights } => {
                let pts: Vec<Point> = points.iter().cloned().map(Point).collect();
                DiscreteMeasure::from_points(&pts, weights).map(Some)
            }
            MeasureSpec::Equilibrium => Ok(None),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RouteChoice {
    #[default]
    Direct,
    Union,
    Integral,
    All,
}

/// Experiment-specific knobs; each experiment reads only the ones it needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    pub route: RouteChoice,
    /// Reruns at doubled truncation radius with the local resolution kept.
    pub doublings: usize,
    /// Decide existence of the equilibrium measure before computing it.
    pub existence: bool,
    /// Evaluation point (Wiener test, counterexample source, harmonic measure).
    pub point: Option<Vec<f64>>,
    /// Random (mu, nu) pairs for the deny check when `nu` is not given.
    pub pairs: usize,
    /// Capacity growth thresholds per doubling.
    pub growth: f64,
    pub saturation: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            route: RouteChoice::default(),
            doublings: 0,
            existence: false,
            point: None,
            pairs: 20,
            growth: 0.05,
            saturation: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative potential tolerance (hypotheses, mismatches, fixed points).
    pub tol: f64,
    /// Harmonic-measure values at or below this count as zero.
    pub zero_tol: f64,
    /// Smallest mass gap or deficit that counts.
    pub margin: f64,
    /// Solver KKT tolerance.
    pub solver: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol: 1e-6,
            zero_tol: 2e-2,
            margin: 1e-2,
            solver: 1e-8,
        }
    }
}

/// A labelled rerun of the scenario with some parts replaced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Replaces the whole domain table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    /// Replaces only F.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<Region>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Options>,
}

/// A declared assertion on the results document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    /// Dotted path into the results; array elements by index.
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equals: Option<serde_json::Value>,
}

/// Reruns one case of a property suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reproduction {
    pub property: String,
    pub seed: u64,
    pub index: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "newtonian")]
    pub alpha: f64,
    pub domain: DomainSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureSpec>,
    /// Comparison measure for the deny check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<MeasureSpec>,
    #[serde(default)]
    pub options: Options,
    #[serde(default)]
    pub series: SeriesParams,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<Variant>,
    #[serde(default, rename = "expect", skip_serializing_if = "Vec::is_empty")]
    pub expectations: Vec<Expectation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Bundled scenarios to run, for the full suite; empty means all.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scenarios: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reproduce: Option<Reproduction>,
}

fn newtonian() -> f64 {
    2.0
}

#[derive(Debug)]
pub struct ConfigError {
    pub source: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.source, self.message)
    }
}

impl std::error::Error for ConfigError {}

impl ScenarioConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError {
            source: source.to_string(),
            message: e.to_string().trim_end().to_string(),
        })?;
        cfg.validate().map_err(|message| ConfigError {
            source: source.to_string(),
            message,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            source: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario configs serialize")
    }

    /// Checks that need more than the schema; messages name the field.
    pub fn validate(&self) -> Result<(), String> {
        if self.name.trim().is_empty() {
            return Err("field `name` must not be empty".into());
        }
        check_alpha("alpha", self.alpha, self.domain.n)?;
        self.domain
            .validate()
            .map_err(|e| format!("field `domain`: {e}"))?;
        for (field, m) in [("measure", &self.measure), ("nu", &self.nu)] {
            if let Some(m) = m {
                check_measure(field, m, self.domain.n)?;
            }
        }
        if let Some(p) = &self.options.point {
            if p.len() != self.domain.n {
                return Err(format!("field `options.point` has {} coordinates, expected {}", p.len(), self.domain.n));
            }
        }
        let t = &self.tolerances;
        for (field, v) in [("tol", t.tol), ("zero_tol", t.zero_tol), ("margin", t.margin), ("solver", t.solver)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("field `tolerances.{field}` must be positive, got {v}"));
            }
        }
        if !(self.series.q > 1.0) || self.series.j_max == 0 {
            return Err("field `series`: q must exceed 1 and j_max must be positive".into());
        }
        let mut labels = std::collections::BTreeSet::new();
        for (i, v) in self.variants.iter().enumerate() {
            if v.label.is_empty() || !v.label.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return Err(format!("field `variants[{i}].label` must be a nonempty identifier, got '{}'", v.label));
            }
            if !labels.insert(v.label.clone()) {
                return Err(format!("field `variants[{i}].label`: duplicate label '{}'", v.label));
            }
            let spec = self.variant_spec(v);
            spec.validate()
                .map_err(|e| format!("field `variants[{i}]`: {e}"))?;
            check_alpha(&format!("variants[{i}].alpha"), v.alpha.unwrap_or(self.alpha), spec.n)?;
        }
        let mut runs = vec![("".to_string(), self.experiment, self.options.point.is_some())];
        runs.extend(self.variants.iter().enumerate().map(|(i, v)| {
            let point = v.options.as_ref().map_or(self.options.point.is_some(), |o| o.point.is_some());
            (format!("variants[{i}]: "), v.experiment.unwrap_or(self.experiment), point)
        }));
        for (at, exp, point) in runs {
            match exp {
                Experiment::Sweep | Experiment::RouteEquivalence if self.measure.is_none() && self.reproduce.is_none() => {
                    return Err(format!("{at}missing field `measure`, needed by the {} experiment", exp.name()));
                }
                Experiment::Wiener if !point => {
                    return Err(format!("{at}missing field `options.point`, needed by the Wiener test"));
                }
                Experiment::DenyCheck if self.measure.is_some() != self.nu.is_some() => {
                    return Err(format!("{at}fields `measure` and `nu` must be given together for the deny check"));
                }
                _ => {}
            }
        }
        for (i, e) in self.expectations.iter().enumerate() {
            if e.min.is_none() && e.max.is_none() && e.equals.is_none() {
                return Err(format!("field `expect[{i}]` needs one of min, max, equals"));
            }
        }
        Ok(())
    }

    pub fn variant_spec(&self, v: &Variant) -> DomainSpec {
        let mut spec = v.domain.clone().unwrap_or_else(|| self.domain.clone());
        if let Some(set) = &v.set {
            spec.set = set.clone();
        }
        spec
    }
}

fn check_alpha(field: &str, alpha: f64, n: usize) -> Result<(), String> {
    balayage_core::riesz::RieszKernel::new(alpha, n)
        .map(|_| ())
        .map_err(|e| format!("field `{field}`: {e}"))
}

fn check_measure(field: &str, m: &MeasureSpec, n: usize) -> Result<(), String> {
    let dims: Vec<usize> = match m {
        MeasureSpec::Dirac { point, weight } => {
            if !(*weight > 0.0) {
                return Err(format!("field `{field}.weight` must be positive"));
            }
            vec![point.len()]
        }
        MeasureSpec::Atoms { points, weights } => {
            if points.len() != weights.len() || points.is_empty() {
                return Err(format!("field `{field}`: points and weights must be nonempty and of equal length"));
            }
            if weights.iter().any(|w| !(*w >= 0.0)) {
                return Err(format!("field `{field}.weights` must be nonnegative"));
            }
            points.iter().map(|p| p.len()).collect()
        }
        MeasureSpec::Equilibrium => Vec::new(),
    };
    if let Some(d) = dims.into_iter().find(|&d| d != n) {
        return Err(format!("field `{field}` has a point with {d} coordinates, expected {n}"));
    }
    Ok(())
}
