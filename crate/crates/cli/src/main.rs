use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use balayage_cli::catalog;
use balayage_cli::config::{ConfigError, ScenarioConfig};
use balayage_cli::run::run_scenario;

#[derive(Parser)]
#[command(name = "balayage", version, about = "Run balayage and harmonic-measure scenarios")]
struct Cli {
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a bundled scenario by name.
    Run {
        scenario: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `tolerances.tol`.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// List the bundled scenarios.
    List,
    /// Parse and validate a scenario without running it.
    Validate { scenario: String },
    /// Run the randomized property suites.
    Verify {
        /// Properties to run; all when omitted.
        properties: Vec<String>,
        #[arg(long)]
        cases: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const CONFIG_ERROR: u8 = 2;

fn load(arg: &str) -> Result<ScenarioConfig, ConfigError> {
    let path = Path::new(arg);
    if path.exists() {
        return ScenarioConfig::load(path);
    }
    match catalog::find(arg) {
        Some(b) => b.config(),
        None => Err(ConfigError {
            source: arg.to_string(),
            message: "no such file and no bundled scenario of that name".into(),
        }),
    }
}

/// `$BALAYAGE_OUT/<name>`, else `balayage-out/<name>`.
fn default_out(name: &str) -> PathBuf {
    std::env::var_os("BALAYAGE_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("balayage-out"))
        .join(name)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    }
    match cli.command {
        Command::List => {
            for b in catalog::catalog() {
                println!("{:<20} {:<7} {}", b.name, b.runtime.label(), b.reproduces);
            }
            ExitCode::SUCCESS
        }
        Command::Validate { scenario } => match load(&scenario) {
            Ok(cfg) => {
                println!("{}: ok ({} experiment)", cfg.name, cfg.experiment.name());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("config error: {e}");
                ExitCode::from(CONFIG_ERROR)
            }
        },
        Command::Run { scenario, out, seed, tol } => {
            let mut cfg = match load(&scenario) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(CONFIG_ERROR);
                }
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = tol {
                cfg.tolerances.tol = t;
                if let Err(m) = cfg.validate() {
                    eprintln!("config error: --tol: {m}");
                    return ExitCode::from(CONFIG_ERROR);
                }
            }
            let dir = out
                .or_else(|| cfg.output.clone())
                .unwrap_or_else(|| default_out(&cfg.name));
            match run_scenario(&cfg, &dir) {
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
                Ok(report) => {
                    for a in &report.assertions {
                        println!("[{}] {}: {}", if a.passed { "pass" } else { "FAIL" }, a.name, a.detail);
                    }
                    println!("report: {}", dir.join("report.json").display());
                    if report.passed {
                        ExitCode::SUCCESS
                    } else {
                        let failed: Vec<&str> = report.failed().map(|a| a.name.as_str()).collect();
                        eprintln!("{}: failed: {}", report.scenario, failed.join(", "));
                        ExitCode::FAILURE
                    }
                }
            }
        }
        Command::Verify { properties, cases, seed, out } => {
            let dir = out.unwrap_or_else(|| default_out("verify"));
            match balayage_cli::verify(&properties, cases, seed, &dir) {
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(CONFIG_ERROR)
                }
                Ok(summaries) => {
                    for s in &summaries {
                        println!("{}", s.line());
                    }
                    let bad: Vec<&str> = summaries.iter().filter(|s| !s.ok()).map(|s| s.property.as_str()).collect();
                    if bad.is_empty() {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!("failing properties: {} (reproductions in {})", bad.join(", "), dir.join("repro").display());
                        ExitCode::FAILURE
                    }
                }
            }
        }
    }
}
