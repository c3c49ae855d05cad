use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{Expectation, Experiment, ScenarioConfig};
use crate::plot::Plot;

pub const SCHEMA: &str = "report/v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub scenario: String,
    pub experiment: Experiment,
    pub seed: u64,
    pub alpha: f64,
    /// Seconds since the Unix epoch; the only field that changes between reruns.
    pub timestamp: u64,
    pub passed: bool,
    pub assertions: Vec<Assertion>,
    pub artifacts: Vec<String>,
    pub results: Value,
    pub config: ScenarioConfig,
}

impl Report {
    pub fn failed(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.passed)
    }

    /// Report as written to disk.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn lookup(&self, path: &str) -> Option<&Value> {
        lookup(&self.results, path)
    }
}

/// Output directory with a record of what was written to it.
pub struct Artifacts {
    dir: PathBuf,
    /// Comment line stamped on every file.
    stamp: String,
    prefix: String,
    pub files: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path, scenario: &str, seed: u64) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            stamp: format!("scenario={scenario} seed={seed}"),
            prefix: String::new(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// File names get `label_` in front until reset with an empty label.
    pub fn set_prefix(&mut self, label: &str) {
        self.prefix = if label.is_empty() { String::new() } else { format!("{label}_") };
    }

    fn name(&self, base: &str) -> String {
        format!("{}{base}", self.prefix)
    }

    /// CSV with a leading `# scenario=... seed=...` comment line.
    pub fn csv<F>(&mut self, base: &str, body: F) -> std::io::Result<()>
    where
        F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
    {
        let name = self.name(&format!("{base}.csv"));
        let mut w = BufWriter::new(File::create(self.dir.join(&name))?);
        writeln!(w, "# {}", self.stamp)?;
        body(&mut w)?;
        w.flush()?;
        self.files.push(name);
        Ok(())
    }

    pub fn svg(&mut self, base: &str, plot: &Plot) -> std::io::Result<()> {
        let name = self.name(&format!("{base}.svg"));
        std::fs::write(self.dir.join(&name), plot.render(&self.stamp))?;
        self.files.push(name);
        Ok(())
    }

    pub fn text(&mut self, name: &str, body: &str) -> std::io::Result<()> {
        std::fs::write(self.dir.join(name), body)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Follows a dotted path; array elements are addressed by index.
pub fn lookup<'a>(root: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').filter(|s| !s.is_empty()).try_fold(root, |v, key| match v {
        Value::Object(m) => m.get(key),
        Value::Array(a) => a.get(key.parse::<usize>().ok()?),
        _ => None,
    })
}

fn show(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn check(results: &Value, e: &Expectation) -> Assertion {
    let name = e.path.clone();
    let Some(v) = lookup(results, &e.path) else {
        return Assertion {
            name,
            passed: false,
            detail: "no such value in the results".into(),
        };
    };
    let mut problems = Vec::new();
    if let Some(want) = &e.equals {
        let same = match (v.as_f64(), want.as_f64()) {
            (Some(a), Some(b)) => a == b,
            _ => v == want,
        };
        if !same {
            problems.push(format!("expected {}", show(want)));
        }
    }
    if e.min.is_some() || e.max.is_some() {
        match v.as_f64() {
            None => problems.push("not a number".into()),
            Some(x) => {
                if let Some(lo) = e.min {
                    if !(x >= lo) {
                        problems.push(format!("below the minimum {lo}"));
                    }
                }
                if let Some(hi) = e.max {
                    if !(x <= hi) {
                        problems.push(format!("above the maximum {hi}"));
                    }
                }
            }
        }
    }
    Assertion {
        name,
        passed: problems.is_empty(),
        detail: if problems.is_empty() {
            format!("value {}", show(v))
        } else {
            format!("value {}: {}", show(v), problems.join(", "))
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn lookup_walks_objects_and_arrays() {
        let v = json!({"a": {"b": [1.0, {"c": "x"}]}});
        assert_eq!(lookup(&v, "a.b.0"), Some(&json!(1.0)));
        assert_eq!(lookup(&v, "a.b.1.c"), Some(&json!("x")));
        assert_eq!(lookup(&v, "a.z"), None);
        assert_eq!(lookup(&v, "a.b.7"), None);
    }

    #[test]
    fn expectations_compare_bounds_and_values() {
        let v = json!({"mass": 0.99, "verdict": "thin", "n": 3});
        let e = |path: &str, min, max, equals| Expectation {
            path: path.into(),
            min,
            max,
            equals,
        };
        assert!(check(&v, &e("mass", Some(0.98), Some(1.0), None)).passed);
        assert!(!check(&v, &e("mass", Some(0.995), None, None)).passed);
        assert!(check(&v, &e("verdict", None, None, Some(json!("thin")))).passed);
        assert!(!check(&v, &e("verdict", None, None, Some(json!("not-thin")))).passed);
        assert!(check(&v, &e("n", None, None, Some(json!(3.0)))).passed);
        assert!(!check(&v, &e("missing", None, None, Some(json!(1)))).passed);
        assert!(!check(&v, &e("verdict", Some(0.0), None, None)).passed);
    }
}
