//! Runs one scenario: every experiment maps to a fixed chain of library
//! calls, and everything it computes lands in `results`.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use balayage_core::balayage::{compare_routes, sweep_green, Problem, Route, SweepResult};
use balayage_core::domain::DomainSpec;
use balayage_core::equilibrium::{
    equilibrium_exists, equilibrium_measure, equilibrium_with_doubling, thin_at_infinity, wiener_regular,
    DoublingThresholds, EquilibriumResult, ExistenceVerdict, SeriesParams,
};
use balayage_core::harmonic::{
    classify_mass_preservation, deny_check, deny_check_with, deny_counterexample, harmonic_measure,
    outside_domain_at_probes, probe_rows, write_probe_csv,
};
use balayage_core::balayage::Outcome;
use balayage_core::measure::{DiscreteMeasure, Point};
use balayage_core::region::Region;
use balayage_core::riesz::RieszKernel;
use balayage_core::solver::SolverOptions;
use balayage_core::{Error, Result};
use balayage_verify::geometry::{atoms, pick_probes};
use balayage_verify::CaseOutcome;

use crate::catalog;
use crate::config::{Experiment, MeasureSpec, Options, RouteChoice, ScenarioConfig};
use crate::plot::{Plot, Series};
use crate::report::{check, Artifacts, Assertion, Report, SCHEMA};

fn value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("results serialize")
}

fn io(e: std::io::Error) -> Error {
    Error::InvalidArgument(format!("writing output: {e}"))
}

/// One experiment on one geometry: the scenario itself or one variant.
struct Case<'a> {
    cfg: &'a ScenarioConfig,
    label: Option<&'a str>,
    experiment: Experiment,
    alpha: f64,
    spec: DomainSpec,
    options: Options,
}

impl Case<'_> {
    fn kernel(&self) -> Result<RieszKernel> {
        RieszKernel::new(self.alpha, self.spec.n)
    }

    fn solver(&self) -> SolverOptions {
        SolverOptions::with_tol(self.cfg.tolerances.solver)
    }

    fn problem(&self, spec: &DomainSpec) -> Result<Problem> {
        Ok(Problem::new(spec, &self.kernel()?)?.with_options(self.solver()))
    }

    fn series(&self) -> SeriesParams {
        SeriesParams {
            zero_tol: self.cfg.tolerances.zero_tol,
            ..self.cfg.series.clone()
        }
    }

    fn name(&self, what: &str) -> String {
        match self.label {
            Some(l) => format!("{l}: {what}"),
            None => what.to_string(),
        }
    }
}

/// Copies the scenario seed into every domain it describes.
pub fn effective(cfg: &ScenarioConfig) -> ScenarioConfig {
    let mut c = cfg.clone();
    c.domain.seed = c.seed;
    for v in &mut c.variants {
        if let Some(d) = &mut v.domain {
            d.seed = c.seed;
        }
    }
    c
}

#[derive(Debug)]
pub struct RunError(pub String);

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Runs the scenario into `out` and writes `report.json` there.
pub fn run_scenario(cfg: &ScenarioConfig, out: &Path) -> std::result::Result<Report, RunError> {
    let cfg = effective(cfg);
    let mut art = Artifacts::new(out, &cfg.name, cfg.seed).map_err(|e| RunError(format!("{}: {e}", out.display())))?;
    let mut assertions = Vec::new();

    let results = if let Some(r) = &cfg.reproduce {
        reproduce(r, &mut assertions)
    } else if cfg.experiment == Experiment::FullPaperSuite {
        full_suite(&cfg, out, &mut assertions)
    } else if cfg.variants.is_empty() {
        let case = Case {
            cfg: &cfg,
            label: None,
            experiment: cfg.experiment,
            alpha: cfg.alpha,
            spec: cfg.domain.clone(),
            options: cfg.options.clone(),
        };
        run_case(&case, &mut art, &mut assertions)
    } else {
        let mut all = Map::new();
        for v in &cfg.variants {
            let case = Case {
                cfg: &cfg,
                label: Some(&v.label),
                experiment: v.experiment.unwrap_or(cfg.experiment),
                alpha: v.alpha.unwrap_or(cfg.alpha),
                spec: cfg.variant_spec(v),
                options: v.options.clone().unwrap_or_else(|| cfg.options.clone()),
            };
            art.set_prefix(&v.label);
            all.insert(v.label.clone(), run_case(&case, &mut art, &mut assertions));
        }
        art.set_prefix("");
        Value::Object(all)
    };

    assertions.extend(cfg.expectations.iter().map(|e| check(&results, e)));
    let mut artifacts = art.files.clone();
    artifacts.push("report.json".into());
    let report = Report {
        schema: SCHEMA.into(),
        scenario: cfg.name.clone(),
        experiment: cfg.experiment,
        seed: cfg.seed,
        alpha: cfg.alpha,
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        passed: assertions.iter().all(|a| a.passed),
        assertions,
        artifacts,
        results,
        config: cfg,
    };
    std::fs::write(out.join("report.json"), report.to_json()).map_err(|e| RunError(format!("report.json: {e}")))?;
    Ok(report)
}

/// A failing experiment still produces a report, with the error recorded
/// as a failed assertion.
fn run_case(case: &Case, art: &mut Artifacts, assertions: &mut Vec<Assertion>) -> Value {
    let r = match case.experiment {
        Experiment::Sweep => sweep(case, art),
        Experiment::Equilibrium => equilibrium(case, art),
        Experiment::Thinness => thinness(case, art),
        Experiment::Wiener => wiener(case, art),
        Experiment::Harmonic => harmonic(case, art),
        Experiment::MassTrichotomy => trichotomy(case, art),
        Experiment::DenyCheck => deny(case, art, assertions),
        Experiment::DenyCounterexample => counterexample(case, art),
        Experiment::RouteEquivalence => routes(case),
        Experiment::FullPaperSuite => Err(Error::InvalidArgument("the full suite cannot be a variant".into())),
    };
    match r {
        Ok(v) => v,
        Err(e) => {
            assertions.push(Assertion {
                name: case.name(&format!("{} completes", case.experiment.name())),
                passed: false,
                detail: e.to_string(),
            });
            json!({ "error": e.to_string() })
        }
    }
}

fn route_key(r: Route) -> &'static str {
    match r {
        Route::ViaUnionSweep => "union",
        Route::DirectGreenProjection => "direct",
        Route::IntegralRepresentation => "integral",
        Route::Riesz => "riesz",
    }
}

fn routes_for(choice: RouteChoice) -> Vec<Route> {
    match choice {
        RouteChoice::Direct => vec![Route::DirectGreenProjection],
        RouteChoice::Union => vec![Route::ViaUnionSweep],
        RouteChoice::Integral => vec![Route::IntegralRepresentation],
        RouteChoice::All => vec![
            Route::DirectGreenProjection,
            Route::ViaUnionSweep,
            Route::IntegralRepresentation,
        ],
    }
}

/// The configured measure; the equilibrium measure is computed on `p`.
fn source(spec: Option<&MeasureSpec>, p: &Problem) -> Result<(DiscreteMeasure, Option<EquilibriumResult>)> {
    let spec = spec.ok_or_else(|| Error::InvalidArgument("the experiment needs a `measure`".into()))?;
    match spec.atoms()? {
        Some(m) => Ok((m, None)),
        None => {
            let eq = equilibrium_measure(p)?;
            Ok((eq.gamma.clone(), Some(eq)))
        }
    }
}

fn radial_histogram(m: &DiscreteMeasure, bins: usize) -> Vec<(f64, f64, f64)> {
    let r: Vec<f64> = (0..m.len()).map(|i| Point(m.point(i).to_vec()).norm()).collect();
    let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = r.iter().copied().fold(0.0, f64::max);
    if r.is_empty() {
        return Vec::new();
    }
    let width = ((hi - lo) / bins as f64).max(1e-12);
    let mut mass = vec![0.0; bins];
    for (ri, w) in r.iter().zip(m.weights()) {
        let b = (((ri - lo) / width) as usize).min(bins - 1);
        mass[b] += w;
    }
    (0..bins)
        .map(|b| (lo + b as f64 * width, lo + (b + 1) as f64 * width, mass[b]))
        .collect()
}

fn write_sweep(art: &mut Artifacts, key: &str, r: &SweepResult) -> Result<String> {
    let base = format!("sweep_{key}");
    art.csv(&base, |w| r.swept.write_csv(w)).map_err(io)?;
    let hist = radial_histogram(&r.swept, 24);
    art.csv(&format!("{base}_radial"), |w| {
        writeln!(w, "r_lo,r_hi,mass")?;
        for (a, b, m) in &hist {
            writeln!(w, "{a:.6},{b:.6},{m:.12e}")?;
        }
        Ok(())
    })
    .map_err(io)?;
    art.svg(
        &format!("{base}_radial"),
        &Plot {
            title: format!("swept mass by radius ({key} route)"),
            x_label: "|x|".into(),
            y_label: "mass".into(),
            log_y: false,
            series: vec![Series {
                label: key.into(),
                points: hist.iter().map(|(a, b, m)| (0.5 * (a + b), *m)).collect(),
            }],
        },
    )
    .map_err(io)?;
    Ok(format!("{base}.csv"))
}

fn sweep(case: &Case, art: &mut Artifacts) -> Result<Value> {
    let p = case.problem(&case.spec)?;
    let (mu, eq) = source(case.cfg.measure.as_ref(), &p)?;
    let routes = routes_for(case.options.route);
    let mut by_route = Map::new();
    let mut primary: Option<SweepResult> = None;
    for &route in &routes {
        let r = sweep_green(&p, &mu, route)?;
        let file = write_sweep(art, route_key(route), &r)?;
        by_route.insert(route_key(route).into(), value(&r.summary(Some(file))));
        if primary.is_none() {
            primary = Some(r);
        }
    }
    let primary = primary.expect("at least one route");
    let mut out = json!({
        "f_nodes": p.f_len(),
        "y_nodes": p.disc.y_nodes.len(),
        "mass_before": primary.mass_before,
        "mass_after": primary.mass_after,
        "mass_ratio": primary.mass_after / primary.mass_before,
        "routes": by_route,
    });
    if let Some(eq) = eq {
        let sys = p.full_green_system()?;
        let diff: Vec<f64> = primary.weights.iter().zip(eq.gamma.weights()).map(|(a, b)| a - b).collect();
        out["fixed_point_defect"] = json!(sys.energy_norm(&diff) / sys.energy_norm(eq.gamma.weights()));
        out["equilibrium"] = value(&eq.summary());
    }
    if case.options.doublings > 0 && !case.spec.set.is_bounded() {
        let mut rows = vec![(case.spec.truncation_radius, p.f_len(), primary.mass_after)];
        let mut pinned = p.disc.pinned_spec();
        drop(p);
        for _ in 0..case.options.doublings {
            pinned.truncation_radius *= 2.0;
            let q = case.problem(&pinned)?;
            let r = sweep_green(&q, &mu, routes[0])?;
            rows.push((pinned.truncation_radius, q.f_len(), r.mass_after));
        }
        art.csv("doubling", |w| {
            writeln!(w, "truncation_radius,f_nodes,mass_after")?;
            for (r, n, m) in &rows {
                writeln!(w, "{r},{n},{m:.12e}")?;
            }
            Ok(())
        })
        .map_err(io)?;
        art.svg(
            "doubling",
            &Plot {
                title: "swept mass under truncation doubling".into(),
                x_label: "truncation radius".into(),
                y_label: "mass".into(),
                log_y: false,
                series: vec![Series {
                    label: route_key(routes[0]).into(),
                    points: rows.iter().map(|(r, _, m)| (*r, *m)).collect(),
                }],
            },
        )
        .map_err(io)?;
        out["final_mass"] = json!(rows.last().map(|r| r.2));
        out["doubling"] = rows
            .iter()
            .map(|(r, n, m)| json!({ "truncation_radius": r, "f_nodes": n, "mass_after": m }))
            .collect();
    }
    Ok(out)
}

fn write_masses(art: &mut Artifacts, masses: &[(f64, f64)]) -> Result<()> {
    art.csv("capacity", |w| {
        writeln!(w, "truncation_radius,capacity")?;
        for (r, c) in masses {
            writeln!(w, "{r},{c:.12e}")?;
        }
        Ok(())
    })
    .map_err(io)?;
    if masses.len() > 1 {
        art.svg(
            "capacity",
            &Plot {
                title: "truncated capacity under doubling".into(),
                x_label: "truncation radius".into(),
                y_label: "capacity".into(),
                log_y: false,
                series: vec![Series {
                    label: "capacity".into(),
                    points: masses.to_vec(),
                }],
            },
        )
        .map_err(io)?;
    }
    Ok(())
}

fn doubled_equilibrium(case: &Case) -> Result<EquilibriumResult> {
    let th = DoublingThresholds {
        growth: case.options.growth,
        saturation: case.options.saturation,
    };
    equilibrium_with_doubling(&case.spec, &case.kernel()?, case.options.doublings, &th, &case.solver())
}

fn equilibrium(case: &Case, art: &mut Artifacts) -> Result<Value> {
    let mut out = Map::new();
    if case.options.existence {
        let rep = equilibrium_exists(&case.spec, &case.kernel()?, &case.series())?;
        let worst = rep.outside_domain.iter().map(|(_, v)| *v).fold(0.0, f64::max);
        let verdict = rep.verdict;
        out.insert("verdict".into(), value(&verdict));
        out.insert("max_outside_domain".into(), json!(worst));
        out.insert("existence".into(), value(&rep));
        if !rep.outside_domain.is_empty() {
            art.csv("outside_domain", |w| {
                writeln!(w, "probe,outside_domain")?;
                for (x, v) in &rep.outside_domain {
                    let p: Vec<String> = x.iter().map(|c| format!("{c:.6}")).collect();
                    writeln!(w, "{},{v:.12e}", p.join(" "))?;
                }
                Ok(())
            })
            .map_err(io)?;
        }
        if matches!(verdict, ExistenceVerdict::DoesNotExist | ExistenceVerdict::NonexistenceCertified) {
            out.insert("computed".into(), json!(false));
            return Ok(Value::Object(out));
        }
    }
    let eq = doubled_equilibrium(case)?;
    art.csv("gamma", |w| eq.gamma.write_csv(w)).map_err(io)?;
    write_masses(art, &eq.masses)?;
    out.insert("computed".into(), json!(true));
    out.insert("equilibrium".into(), value(&eq.summary()));
    Ok(Value::Object(out))
}

fn profile_samples(region: &Region, truncation: f64) -> Option<Vec<(f64, f64)>> {
    let Region::RotationBody { profile, start, end } = region else { return None };
    let stop = end.unwrap_or(truncation).min(truncation);
    let count = 200;
    Some(
        (0..=count)
            .map(|i| {
                let t = start + (stop - start) * i as f64 / count as f64;
                (t, profile.radius(t))
            })
            .filter(|(_, r)| r.is_finite())
            .collect(),
    )
}

fn thinness(case: &Case, art: &mut Artifacts) -> Result<Value> {
    let s = case.series();
    let th = thin_at_infinity(&case.spec.omega_complement(), &case.kernel()?, s.q, s.j_max, &s.thresholds, case.spec.seed)?;
    art.csv("series", |w| th.series.write_csv(w)).map_err(io)?;
    art.svg(
        "series",
        &Plot {
            title: "annular series terms".into(),
            x_label: "j".into(),
            y_label: "term".into(),
            log_y: true,
            series: vec![Series {
                label: "term".into(),
                points: th.series.terms.iter().map(|t| (t.j as f64, t.term)).collect(),
            }],
        },
    )
    .map_err(io)?;
    if let Some(prof) = profile_samples(&case.spec.set, case.spec.truncation_radius) {
        art.csv("profile", |w| {
            writeln!(w, "x1,radius")?;
            for (t, r) in &prof {
                writeln!(w, "{t:.6},{r:.12e}")?;
            }
            Ok(())
        })
        .map_err(io)?;
        art.svg(
            "profile",
            &Plot {
                title: "rotation body profile".into(),
                x_label: "x1".into(),
                y_label: "radius".into(),
                log_y: false,
                series: vec![
                    Series {
                        label: "upper".into(),
                        points: prof.clone(),
                    },
                    Series {
                        label: "lower".into(),
                        points: prof.iter().map(|(t, r)| (*t, -r)).collect(),
                    },
                ],
            },
        )
        .map_err(io)?;
    }
    let mut out = json!({
        "verdict": th.verdict,
        "series_sum": th.series.sum(),
        "thinness": th,
    });
    if case.options.doublings > 0 {
        let eq = doubled_equilibrium(case)?;
        write_masses(art, &eq.masses)?;
        out["trend"] = value(&eq.trend);
        out["increments"] = value(&eq.increments());
        out["equilibrium"] = value(&eq.summary());
    }
    Ok(out)
}

fn wiener(case: &Case, art: &mut Artifacts) -> Result<Value> {
    let x = case
        .options
        .point
        .clone()
        .ok_or_else(|| Error::InvalidArgument("the Wiener test needs `options.point`".into()))?;
    let s = case.series();
    let rep = wiener_regular(&x, &case.spec.omega_complement(), &case.kernel()?, 1.0 / s.q, s.j_max, &s.thresholds, case.spec.seed)?;
    art.csv("wiener", |w| rep.series.write_csv(w)).map_err(io)?;
    art.svg(
        "wiener",
        &Plot {
            title: "Wiener series terms".into(),
            x_label: "j".into(),
            y_label: "term".into(),
            log_y: true,
            series: vec![Series {
                label: "term".into(),
                points: rep.series.terms.iter().map(|t| (t.j as f64, t.term)).collect(),
            }],
        },
    )
    .map_err(io)?;
    Ok(json!({ "verdict": rep.verdict, "wiener": rep }))
}

fn harmonic(case: &Case, art: &mut Artifacts) -> Result<Value> {
    let p = case.problem(&case.spec)?;
    let rows = probe_rows(&p)?;
    art.csv("probes", |w| write_probe_csv(&rows, w)).map_err(io)?;
    let worst = rows.iter().map(|r| r.outside_domain).fold(0.0, f64::max);
    let mut out = json!({ "max_outside_domain": worst, "probes": rows });
    if let Some(x) = &case.options.point {
        let h = harmonic_measure(&p, x, &case.spec.outside_domain())?;
        out["point"] = json!({
            "x": x,
            "outside_domain": h.value_on_e,
            "mass_on_f": h.mass_on_f,
            "mass_on_y": h.mass_on_y,
            "mass_at_infinity": h.mass_at_infinity,
        });
    }
    Ok(out)
}

fn trichotomy(case: &Case, art: &mut Artifacts) -> Result<Value> {
    let p = case.problem(&case.spec)?;
    let tr = classify_mass_preservation(&p, &case.series())?;
    art.csv("probes", |w| write_probe_csv(&tr.probes, w)).map_err(io)?;
    art.csv("series", |w| tr.thinness.series.write_csv(w)).map_err(io)?;
    let mut out = json!({
        "condition_ii": tr.condition_ii,
        "condition_iii": tr.condition_iii,
        "agree": tr.agree,
        "thinness_verdict": tr.thinness.verdict,
        "max_outside_domain": tr.probes.iter().map(|r| r.outside_domain).fold(0.0, f64::max),
        "trichotomy": tr,
    });
    if case.cfg.measure.is_some() {
        let (mu, _) = source(case.cfg.measure.as_ref(), &p)?;
        let r = sweep_green(&p, &mu, Route::DirectGreenProjection)?;
        let file = write_sweep(art, "direct", &r)?;
        out["sweep"] = value(&r.summary(Some(file)));
        out["mass_ratio"] = json!(r.mass_after / r.mass_before);
    }
    Ok(out)
}

fn measure_of(spec: Option<&MeasureSpec>, what: &str) -> Result<Option<DiscreteMeasure>> {
    match spec {
        None => Ok(None),
        Some(s) => s
            .atoms()?
            .map(Some)
            .ok_or_else(|| Error::InvalidArgument(format!("`{what}` must be explicit atoms for the deny check"))),
    }
}

fn deny(case: &Case, art: &mut Artifacts, assertions: &mut Vec<Assertion>) -> Result<Value> {
    let p = case.problem(&case.spec)?;
    let t = &case.cfg.tolerances;
    let explicit = (measure_of(case.cfg.measure.as_ref(), "measure")?, measure_of(case.cfg.nu.as_ref(), "nu")?);
    let reports = match explicit {
        (Some(mu), Some(nu)) => vec![deny_check(&p, &mu, &nu, t.zero_tol, t.tol)?],
        (None, None) => {
            let worst = outside_domain_at_probes(&p)?.iter().map(|(_, v)| *v).fold(0.0, f64::max);
            // The discrete problem loses up to the harmonic measure of the
            // complement of D, which bounds the admissible mass excess.
            let tol = t.tol.max(worst);
            let mut rng = ChaCha8Rng::seed_from_u64(case.spec.seed);
            let mut out = Vec::new();
            for _ in 0..case.options.pairs {
                let idx = pick_probes(&mut rng, &p, 3)
                    .ok_or_else(|| Error::Precondition("the deny check needs at least 3 probes".into()))?;
                let mu0 = atoms(&mut rng, &p, &idx[..1])?;
                let k = rng.gen_range(1..=2);
                let nu = atoms(&mut rng, &p, &idx[1..1 + k])?;
                let all = p.all_f();
                let um = p.green_potential_on_f(&mu0, &all)?;
                let un = p.green_potential_on_f(&nu, &all)?;
                // Largest multiple of mu0 whose potential stays below that of nu on F.
                let s = um
                    .iter()
                    .zip(&un)
                    .filter(|(a, _)| **a > 0.0)
                    .map(|(a, b)| b / a)
                    .fold(f64::INFINITY, f64::min);
                if !(s.is_finite() && s > 0.0) {
                    return Err(Error::Precondition("potential of mu vanishes on F".into()));
                }
                out.push(deny_check_with(&p, &mu0.scaled(s), &nu, worst, t.zero_tol, tol)?);
            }
            out
        }
        _ => return Err(Error::InvalidArgument("give both `measure` and `nu`, or neither".into())),
    };
    art.csv("deny", |w| {
        writeln!(w, "pair,outcome,mass_mu,mass_nu,hypothesis_margin,worst_outside_domain")?;
        for (i, r) in reports.iter().enumerate() {
            writeln!(
                w,
                "{i},{},{:.12e},{:.12e},{:.6e},{:.6e}",
                value(&r.outcome).as_str().unwrap_or(""),
                r.mass_mu,
                r.mass_nu,
                r.hypothesis_margin,
                r.worst_outside_domain
            )?;
        }
        Ok(())
    })
    .map_err(io)?;
    let count = |o: Outcome| reports.iter().filter(|r| r.outcome == o).count();
    let failed = count(Outcome::Fail);
    assertions.push(Assertion {
        name: case.name("no deny pair fails"),
        passed: failed == 0,
        detail: format!("{failed} of {} pairs failed", reports.len()),
    });
    Ok(json!({
        "pairs": reports.len(),
        "passed": count(Outcome::Pass),
        "failed": failed,
        "precondition_failed": count(Outcome::PreconditionFailed),
        "max_outside_domain": reports.iter().map(|r| r.worst_outside_domain).fold(0.0, f64::max),
        "reports": reports,
    }))
}

fn counterexample(case: &Case, art: &mut Artifacts) -> Result<Value> {
    let p = case.problem(&case.spec)?;
    let x = match &case.options.point {
        Some(x) => x.clone(),
        None => p
            .disc
            .probes
            .first()
            .cloned()
            .ok_or_else(|| Error::Precondition("no probes in Omega".into()))?,
    };
    let t = &case.cfg.tolerances;
    match deny_counterexample(&p, &x, t.zero_tol, t.margin) {
        Err(Error::Precondition(m)) => Ok(json!({ "x": x, "found": false, "diagnostic": m })),
        Err(e) => Err(e),
        Ok(c) => {
            if let Some((_, nu0)) = &c.pair {
                art.csv("nu0", |w| nu0.write_csv(w)).map_err(io)?;
            }
            let mut out = value(&c.report);
            out["potentials_match"] = json!(c.report.potential_mismatch <= t.tol);
            Ok(out)
        }
    }
}

fn routes(case: &Case) -> Result<Value> {
    let p = case.problem(&case.spec)?;
    let (mu, _) = source(case.cfg.measure.as_ref(), &p)?;
    let (cmp, _, _) = compare_routes(&p, &mu)?;
    Ok(value(&cmp))
}

fn reproduce(r: &crate::config::Reproduction, assertions: &mut Vec<Assertion>) -> Value {
    match balayage_verify::run_case(&r.property, r.seed, r.index) {
        Ok(c) => {
            assertions.push(Assertion {
                name: format!("{} case {} does not fail", r.property, r.index),
                passed: c.outcome != CaseOutcome::Fail,
                detail: c.evidence.clone(),
            });
            value(&c)
        }
        Err(e) => {
            assertions.push(Assertion {
                name: format!("{} case {} runs", r.property, r.index),
                passed: false,
                detail: e.to_string(),
            });
            json!({ "error": e.to_string() })
        }
    }
}

fn full_suite(cfg: &ScenarioConfig, out: &Path, assertions: &mut Vec<Assertion>) -> Value {
    let names: Vec<String> = if cfg.scenarios.is_empty() {
        catalog::catalog().iter().map(|b| b.name.to_string()).collect()
    } else {
        cfg.scenarios.clone()
    };
    let mut all = Map::new();
    for name in names {
        let outcome = catalog::find(&name)
            .ok_or_else(|| format!("no bundled scenario named '{name}'"))
            .and_then(|b| b.config().map_err(|e| e.to_string()))
            .and_then(|c| run_scenario(&c, &out.join(&name)).map_err(|e| e.0));
        let (passed, detail, v) = match outcome {
            Ok(r) => {
                let failed: Vec<String> = r.failed().map(|a| a.name.clone()).collect();
                let detail = if failed.is_empty() { "all assertions pass".into() } else { failed.join("; ") };
                (r.passed, detail, json!({ "passed": r.passed, "failed": failed }))
            }
            Err(e) => (false, e.clone(), json!({ "passed": false, "error": e })),
        };
        assertions.push(Assertion {
            name: format!("{name} passes"),
            passed,
            detail,
        });
        all.insert(name, v);
    }
    Value::Object(all)
}
