use std::path::Path;
use std::process::{Command, Output};

use balayage_cli::catalog;
use balayage_cli::config::{Experiment, ScenarioConfig};
use balayage_cli::reproduction_config;

fn balayage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_balayage"))
        .args(args)
        .env_remove("BALAYAGE_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn catalog_lists_every_example_in_order() {
    let names: Vec<&str> = catalog::catalog().iter().map(|b| b.name).collect();
    assert_eq!(
        names,
        [
            "example-3.2",
            "example-3.3",
            "example-3.4",
            "example-3.9",
            "example-3.10",
            "example-4.4-f1f2f3",
            "example-4.5",
            "deny-section-5",
        ]
    );
    let a = stdout(&balayage(&["list"]));
    let b = stdout(&balayage(&["list"]));
    assert_eq!(a, b);
    let listed: Vec<&str> = a.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(listed, names);
}

#[test]
fn bundled_scenarios_parse_and_round_trip() {
    for b in catalog::catalog() {
        let cfg = b.config().unwrap_or_else(|e| panic!("{e}"));
        assert_eq!(cfg.name, b.name);
        let again = ScenarioConfig::parse(&cfg.to_toml(), "round trip").unwrap();
        assert_eq!(again, cfg, "{}", b.name);
        let o = balayage(&["validate", b.name]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn config_errors_exit_2_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let missing = write(dir.path(), "missing.toml", "name = \"x\"\nexperiment = \"sweep\"\n");
    let o = balayage(&["run", &missing]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("domain"), "{}", stderr(&o));

    let unknown = write(
        dir.path(),
        "unknown.toml",
        "name = \"x\"\nexperiment = \"sweep\"\nfrobnicate = 1\n[domain]\nn = 3\ndomain = { kind = \"full-space\" }\nset = { kind = \"empty\" }\n",
    );
    let o = balayage(&["validate", &unknown]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("frobnicate"), "{}", stderr(&o));

    let no_measure = write(
        dir.path(),
        "nomeasure.toml",
        "name = \"x\"\nexperiment = \"sweep\"\n[domain]\nn = 3\ndomain = { kind = \"full-space\" }\nset = { kind = \"ball\", center = [0.0, 0.0, 0.0], radius = 1.0 }\n",
    );
    let o = balayage(&["validate", &no_measure]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("measure"), "{}", stderr(&o));

    let bad_alpha = write(
        dir.path(),
        "alpha.toml",
        "name = \"x\"\nexperiment = \"harmonic\"\nalpha = 2.5\n[domain]\nn = 3\ndomain = { kind = \"full-space\" }\nset = { kind = \"ball\", center = [0.0, 0.0, 0.0], radius = 1.0 }\n",
    );
    let o = balayage(&["validate", &bad_alpha]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpha"), "{}", stderr(&o));

    let o = balayage(&["run", "no-such-scenario"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failing_expectation_exits_1_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "fail.toml",
        r#"name = "impossible"
experiment = "sweep"
alpha = 2.0
[domain]
n = 3
domain = { kind = "full-space" }
set = { kind = "ball", center = [0.0, 0.0, 0.0], radius = 1.0 }
resolution = { f_nodes = 150, probes = 2 }
[measure]
kind = "dirac"
point = [2.0, 0.0, 0.0]
[[expect]]
path = "mass_after"
min = 0.9
"#,
    );
    let out = dir.path().join("out");
    let o = balayage(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("mass_after"), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema"], "report/v1");
    assert_eq!(report["passed"], false);
    // Newtonian sweep of a Dirac at distance 2 onto the unit ball has mass 1/2.
    let m = report["results"]["mass_after"].as_f64().unwrap();
    assert!((m - 0.5).abs() < 0.02, "{m}");
    let csv = std::fs::read_to_string(out.join("sweep_direct.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("# scenario=impossible seed=0"));
}

#[test]
fn seed_and_out_flags_apply() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("seeded");
    let o = balayage(&["run", "example-3.3", "--seed", "7", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 7);
    assert_eq!(report["config"]["domain"]["seed"], 7);
    let svg = std::fs::read_to_string(out.join("sweep_direct_radial.svg")).unwrap();
    assert!(svg.contains("seed=7"));
}

#[test]
fn output_directory_follows_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_balayage"))
        .args(["run", "example-3.3"])
        .env("BALAYAGE_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("example-3.3").join("report.json").exists());
}

#[test]
fn reproduction_configs_rerun_the_case() {
    let case = balayage_verify::run_case("mass-bound", 3, 5).unwrap();
    let cfg = reproduction_config(&case);
    assert_eq!(cfg.experiment, Experiment::Sweep);
    let text = cfg.to_toml();
    let parsed = ScenarioConfig::parse(&text, "repro").unwrap();
    assert_eq!(parsed, cfg);

    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "repro.toml", &text);
    let out = dir.path().join("out");
    let o = balayage(&["run", &path, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let again: balayage_verify::PropertyCase = serde_json::from_value(report["results"].clone()).unwrap();
    assert_eq!(again.evidence, case.evidence);
    assert_eq!(again.domain, case.domain);
}

#[test]
fn verify_writes_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = balayage(&["verify", "solver-oracle", "--cases", "5", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("solver-oracle: 5 cases, 5 passed"));
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(s[0]["property"], "solver-oracle");
    let o = balayage(&["verify", "no-such-property", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
