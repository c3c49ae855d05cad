use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use balayage_core::balayage::{
    check_min_mass, check_min_potential, compare_routes, sweep_green, sweep_with_rest, ExtremalReport, Outcome, Problem,
    Route, MASS_TOL,
};
use balayage_core::domain::DomainSpec;
use balayage_core::equilibrium::{equilibrium_measure, swept_mass_identity, SeriesParams};
use balayage_core::green::check_symmetry_relation;
use balayage_core::harmonic::{check_mass_loss, classify_mass_preservation, deny_check_with, deny_counterexample, outside_domain_at_probes};
use balayage_core::measure::{DiscreteMeasure, Point};
use balayage_core::riesz::{gram_matrix, GramSystem};
use balayage_core::solver::{brute_force_oracle, project_onto_cone, SolverOptions};
use balayage_core::{Error, Result};

use crate::geometry::{self, Family};
use crate::{Atom, CaseOutcome, PropertyInfo};

pub(crate) type Check = fn(&mut Draw) -> Result<Verdict>;

pub(crate) struct Verdict {
    pub outcome: CaseOutcome,
    pub residual: f64,
    pub evidence: String,
}

fn judge(residual: f64, tol: f64, what: &str) -> Result<Verdict> {
    let outcome = if residual <= tol { CaseOutcome::Pass } else { CaseOutcome::Fail };
    Ok(Verdict {
        outcome,
        residual,
        evidence: format!("{what} = {residual:.3e} (tol {tol:.3e})"),
    })
}

fn skipped(reason: impl Into<String>) -> Result<Verdict> {
    Ok(Verdict {
        outcome: CaseOutcome::Skipped,
        residual: f64::NAN,
        evidence: reason.into(),
    })
}

/// Everything a case drew, kept for the reproduction record.
pub(crate) struct Draw {
    rng: ChaCha8Rng,
    pub family: Option<Family>,
    pub alpha: Option<f64>,
    pub domain: Option<DomainSpec>,
    pub measure: Vec<Atom>,
    pub tol: f64,
}

/// Floor of the calibrated tolerance.
const TOL_FLOOR: f64 = 1e-6;
/// Calibrated tolerance as a multiple of the route-equivalence indicator.
const TOL_FACTOR: f64 = 5.0;
/// Harmonic-measure values at or below this count as zero.
const ZERO_TOL: f64 = 2e-2;

const ALL: &[Family] = &[
    Family::BallInBall,
    Family::ShellInBall,
    Family::TangentBall,
    Family::BallComplement,
    Family::PointsBall,
    Family::PointsExterior,
    Family::PointsRotation,
    Family::PointsCylinder,
];

/// Families on which the Green equilibrium measure of F exists.
/// A shell reaching the boundary of D has infinite Green capacity.
const WITH_EQUILIBRIUM: &[Family] = &[Family::BallInBall, Family::BallComplement, Family::PointsBall];

const SOLID_Y: &[Family] = &[Family::BallInBall, Family::ShellInBall, Family::TangentBall, Family::BallComplement];

/// The cylinder is left out: its truncation error decays only like the
/// inverse log of the truncation radius.
const TRICHOTOMY: &[Family] = &[
    Family::BallInBall,
    Family::ShellInBall,
    Family::TangentBall,
    Family::BallComplement,
    Family::PointsBall,
    Family::PointsExterior,
    Family::PointsRotation,
];

const ALPHAS: &[f64] = &[1.0, 1.5, 2.0];

impl Draw {
    pub fn new(rng: ChaCha8Rng) -> Self {
        Draw {
            rng,
            family: None,
            alpha: None,
            domain: None,
            measure: Vec::new(),
            tol: 0.0,
        }
    }

    fn problem(&mut self, families: &[Family], alphas: &[f64]) -> Result<Problem> {
        let family = *families.choose(&mut self.rng).expect("nonempty family list");
        let alpha = *alphas.choose(&mut self.rng).expect("nonempty alpha list");
        // Volume sampling needs more nodes to leave room for probes.
        let budget = if alpha < 2.0 {
            self.rng.gen_range(400..=600)
        } else {
            self.rng.gen_range(250..=400)
        };
        let spec = geometry::draw(&mut self.rng, family, budget);
        self.family = Some(family);
        self.alpha = Some(alpha);
        self.domain = Some(spec.clone());
        Problem::new(&spec, &geometry::kernel(alpha))
    }

    /// Sets the tolerance from the largest route disagreement for Diracs at the probes.
    fn calibrate(&mut self, p: &Problem) -> Result<f64> {
        let all: Vec<usize> = (0..p.disc.probes.len()).collect();
        self.calibrate_at(p, &all)
    }

    fn calibrate_at(&mut self, p: &Problem, probes: &[usize]) -> Result<f64> {
        if probes.is_empty() {
            return Err(Error::EmptyCloud("probes"));
        }
        let mut indicator: f64 = 0.0;
        for &i in probes {
            let (cmp, _, _) = compare_routes(p, &DiscreteMeasure::dirac(&Point(p.disc.probes[i].clone())))?;
            indicator = indicator.max(cmp.potential_difference.max(cmp.mass_difference));
        }
        self.tol = TOL_FLOOR.max(TOL_FACTOR * indicator);
        Ok(self.tol)
    }

    /// Masses carry a quadrature error the route comparison cannot see when
    /// both routes share the F nodes (Y polar), so mass comparisons allow at
    /// least the quadrature tolerance of mass identities.
    fn mass_tol(&mut self) {
        self.tol = self.tol.max(MASS_TOL);
    }

    fn probes(&mut self, p: &Problem, count: usize) -> Option<Vec<usize>> {
        geometry::pick_probes(&mut self.rng, p, count)
    }

    fn atoms(&mut self, p: &Problem, idx: &[usize]) -> Result<DiscreteMeasure> {
        let m = geometry::atoms(&mut self.rng, p, idx)?;
        self.record(&m);
        Ok(m)
    }

    fn record(&mut self, m: &DiscreteMeasure) {
        self.measure.extend((0..m.len()).map(|i| Atom {
            point: m.point(i).to_vec(),
            weight: m.weights()[i],
        }));
    }

    /// Problem, calibrated tolerance and a measure with 1 to 3 atoms at probes.
    fn setup(&mut self, families: &[Family], alphas: &[f64], extra_probes: usize) -> Result<Option<Setup>> {
        let p = self.problem(families, alphas)?;
        let atoms = self.rng.gen_range(1..=3);
        let Some(idx) = self.probes(&p, atoms + extra_probes) else {
            return Ok(None);
        };
        self.calibrate(&p)?;
        let mu = self.atoms(&p, &idx[..atoms])?;
        Ok(Some(Setup {
            mu,
            rest: idx[atoms..].to_vec(),
            atoms: idx[..atoms].to_vec(),
            p,
        }))
    }
}

struct Setup {
    p: Problem,
    mu: DiscreteMeasure,
    atoms: Vec<usize>,
    /// Further distinct probe indices.
    rest: Vec<usize>,
}

fn too_few_probes() -> Result<Verdict> {
    skipped("too few probes in Omega")
}

fn max_of(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(f64::NEG_INFINITY, f64::max)
}

fn mass_bound(d: &mut Draw) -> Result<Verdict> {
    let Some(s) = d.setup(ALL, ALPHAS, 0)? else { return too_few_probes() };
    let r = sweep_green(&s.p, &s.mu, Route::DirectGreenProjection)?;
    d.mass_tol();
    judge((r.mass_after - r.mass_before) / r.mass_before, d.tol, "relative mass gain")
}

fn potential_domination(d: &mut Draw) -> Result<Verdict> {
    let Some(s) = d.setup(ALL, ALPHAS, 0)? else { return too_few_probes() };
    let r = sweep_green(&s.p, &s.mu, Route::DirectGreenProjection)?;
    let coords: Vec<f64> = (0..s.p.disc.probes.len())
        .filter(|i| !s.atoms.contains(i))
        .flat_map(|i| s.p.disc.probes[i].iter().copied())
        .collect();
    let swept = s.p.green.green_potential_at(&r.swept, &coords)?;
    let orig = s.p.green.green_potential_at(&s.mu, &coords)?;
    let scale = max_of(orig.iter().copied()).max(f64::MIN_POSITIVE);
    let worst = max_of(swept.iter().zip(&orig).map(|(a, b)| a - b)) / scale;
    judge(worst.max(0.0), d.tol, "max relative excess of the swept potential")
}

fn route_equivalence(d: &mut Draw) -> Result<Verdict> {
    let Some(s) = d.setup(ALL, ALPHAS, 1)? else { return too_few_probes() };
    // Calibrated away from the atoms of mu, so the check is not circular.
    let others: Vec<usize> = (0..s.p.disc.probes.len()).filter(|i| !s.atoms.contains(i)).collect();
    d.calibrate_at(&s.p, &others)?;
    let (cmp, _, _) = compare_routes(&s.p, &s.mu)?;
    judge(
        cmp.potential_difference.max(cmp.mass_difference),
        d.tol,
        "route difference",
    )
}

fn sweep_rest(d: &mut Draw) -> Result<Verdict> {
    let Some(s) = d.setup(ALL, ALPHAS, 0)? else { return too_few_probes() };
    let mut q = s.p.all_f();
    q.shuffle(&mut d.rng);
    q.truncate((q.len() / 2).max(1));
    q.sort_unstable();
    let r = sweep_with_rest(&s.p, &s.mu, &q)?;
    judge(r.energy_difference, d.tol, "relative energy difference")
}

/// Members of the admissible class: μ, μ^F plus a random measure on F,
/// and a multiple of a Dirac at another probe.
fn candidates(d: &mut Draw, s: &Setup) -> Result<Vec<DiscreteMeasure>> {
    let p = &s.p;
    let swept = sweep_green(p, &s.mu, Route::DirectGreenProjection)?;
    let mut idx = p.all_f();
    idx.shuffle(&mut d.rng);
    idx.truncate(d.rng.gen_range(1..=5).min(idx.len()));
    let w: Vec<f64> = idx.iter().map(|_| d.rng.gen_range(0.01..0.2)).collect();
    let rho = p.f_measure(&idx, &w);
    let mut out = vec![s.mu.clone(), swept.swept.positive_part().add(&rho)?];
    if let Some(&z) = s.rest.first() {
        let eps = DiscreteMeasure::dirac(&Point(p.disc.probes[z].clone()));
        let all = p.all_f();
        let um = p.green_potential_on_f(&s.mu, &all)?;
        let uz = p.green_potential_on_f(&eps, &all)?;
        let c = max_of(um.iter().zip(&uz).filter(|(_, b)| **b > 0.0).map(|(a, b)| a / b));
        if c.is_finite() && c > 0.0 {
            out.push(eps.scaled(c * (1.0 + 1e-6)));
        }
    }
    Ok(out)
}

fn extremal(r: &ExtremalReport, what: &str) -> Result<Verdict> {
    judge(r.worst_margin.max(0.0), r.tol, what)
}

fn min_potential(d: &mut Draw) -> Result<Verdict> {
    let Some(s) = d.setup(ALL, ALPHAS, 1)? else { return too_few_probes() };
    let cands = candidates(d, &s)?;
    extremal(&check_min_potential(&s.p, &s.mu, &cands, d.tol)?, "worst potential excess over a candidate")
}

fn min_mass(d: &mut Draw) -> Result<Verdict> {
    let Some(s) = d.setup(ALL, ALPHAS, 1)? else { return too_few_probes() };
    let cands = candidates(d, &s)?;
    d.mass_tol();
    extremal(&check_min_mass(&s.p, &s.mu, &cands, d.tol)?, "worst mass excess over a candidate")
}

fn symmetry_relation(d: &mut Draw) -> Result<Verdict> {
    let p = d.problem(ALL, ALPHAS)?;
    let Some(idx) = d.probes(&p, 2) else { return too_few_probes() };
    let m1 = d.atoms(&p, &idx[..1])?;
    let m2 = d.atoms(&p, &idx[1..])?;
    d.tol = 1e-3;
    let q = p.disc.omega_complement_nodes();
    let r = check_symmetry_relation(p.kernel(), &q, &m1, &m2, &p.opts)?;
    judge(r, d.tol, "relative asymmetry")
}

fn equilibrium_bounds(d: &mut Draw) -> Result<Verdict> {
    let p = d.problem(WITH_EQUILIBRIUM, ALPHAS)?;
    if p.disc.probes.is_empty() {
        return too_few_probes();
    }
    let tol = d.calibrate(&p)?;
    let eq = equilibrium_measure(&p)?;
    let top = eq.max_probe_potential.unwrap_or(f64::NEG_INFINITY);
    let residual = eq.potential_residual.max(top - 1.0);
    let y_polar = p.disc.spec.complement().is_polar();
    if !y_polar && top >= 1.0 {
        return Ok(Verdict {
            outcome: CaseOutcome::Fail,
            residual,
            evidence: format!("equilibrium potential reaches {top:.6} at a probe though Y is not polar"),
        });
    }
    let mut v = judge(residual, tol, "equilibrium potential defect")?;
    v.evidence += &format!("; max at probes {top:.6}, capacity {:.6}", eq.capacity);
    Ok(v)
}

fn swept_mass(d: &mut Draw) -> Result<Verdict> {
    let Some(s) = d.setup(WITH_EQUILIBRIUM, ALPHAS, 0)? else { return too_few_probes() };
    let eq = equilibrium_measure(&s.p)?;
    let r = swept_mass_identity(&s.p, &eq, &s.mu)?;
    let mut v = judge(r.relative_difference, d.tol, "relative difference")?;
    v.evidence += &format!("; swept mass {:.6}, integral {:.6}", r.swept_mass, r.integral);
    Ok(v)
}

/// Required deficit of mass for a strict loss.
const LOSS_MARGIN: f64 = 1e-3;

fn strict_loss(d: &mut Draw) -> Result<Verdict> {
    let p = d.problem(SOLID_Y, &[1.0, 1.5])?;
    let atoms = d.rng.gen_range(1..=3);
    let Some(idx) = d.probes(&p, atoms) else { return too_few_probes() };
    let mu = d.atoms(&p, &idx)?;
    d.tol = LOSS_MARGIN;
    let r = check_mass_loss(&p, &mu, LOSS_MARGIN)?;
    let evidence = format!(
        "deficit {:.4e} (margin {:.0e}), mass on Y {:.4e}",
        r.deficit, r.margin, r.y_mass
    );
    Ok(match r.outcome {
        Outcome::Pass => Verdict {
            outcome: CaseOutcome::Pass,
            residual: r.deficit,
            evidence,
        },
        Outcome::Fail => Verdict {
            outcome: CaseOutcome::Fail,
            residual: r.deficit,
            evidence,
        },
        _ => return skipped(r.reason.unwrap_or_default()),
    })
}

fn trichotomy(d: &mut Draw) -> Result<Verdict> {
    let p = d.problem(TRICHOTOMY, &[1.5, 2.0])?;
    if p.disc.probes.is_empty() {
        return too_few_probes();
    }
    d.tol = ZERO_TOL;
    let params = SeriesParams {
        zero_tol: ZERO_TOL,
        ..Default::default()
    };
    let r = classify_mass_preservation(&p, &params)?;
    let worst = max_of(r.probes.iter().map(|row| row.outside_domain));
    let evidence = format!(
        "(ii) {}, (iii) {:?}, thinness {:?}, worst outside-domain measure {worst:.3e}",
        r.condition_ii, r.condition_iii, r.thinness.verdict
    );
    match r.agree {
        Some(true) => Ok(Verdict {
            outcome: CaseOutcome::Pass,
            residual: 0.0,
            evidence,
        }),
        Some(false) => Ok(Verdict {
            outcome: CaseOutcome::Fail,
            residual: 1.0,
            evidence,
        }),
        None if !r.proviso_holds => skipped(format!("connectedness proviso does not hold; {evidence}")),
        None => skipped(format!("thinness inconclusive; {evidence}")),
    }
}

fn deny_positive(d: &mut Draw) -> Result<Verdict> {
    let Some(s) = d.setup(&[Family::PointsExterior], &[1.5, 2.0], 3)? else { return too_few_probes() };
    let p = &s.p;
    let nu_count = d.rng.gen_range(1..=s.rest.len());
    let nu = d.atoms(p, &s.rest[..nu_count])?;
    let all = p.all_f();
    let um = p.green_potential_on_f(&s.mu, &all)?;
    let un = p.green_potential_on_f(&nu, &all)?;
    let t = um
        .iter()
        .zip(&un)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| b / a)
        .fold(f64::INFINITY, f64::min);
    if !t.is_finite() || t <= 0.0 {
        return skipped("potential of mu vanishes on F");
    }
    let mu = s.mu.scaled(t);
    let worst = max_of(outside_domain_at_probes(p)?.into_iter().map(|(_, v)| v)).max(0.0);
    // Up to the harmonic measure of the complement of D the discrete
    // problem loses no mass, which bounds the admissible mass excess.
    d.tol = d.tol.max(worst);
    let r = deny_check_with(p, &mu, &nu, worst, ZERO_TOL, d.tol)?;
    let excess = (r.mass_mu - r.mass_nu) / r.mass_mu.max(r.mass_nu);
    let evidence = format!(
        "mass {:.6} vs {:.6}, hypothesis margin {:.3e}, outside-domain measure {:.3e}",
        r.mass_mu, r.mass_nu, r.hypothesis_margin, worst
    );
    Ok(match r.outcome {
        Outcome::Pass => Verdict {
            outcome: CaseOutcome::Pass,
            residual: excess.max(0.0),
            evidence,
        },
        Outcome::Fail => Verdict {
            outcome: CaseOutcome::Fail,
            residual: excess,
            evidence,
        },
        _ => return skipped(format!("{}; {evidence}", r.reason.unwrap_or_default())),
    })
}

/// Smallest mass gap that counts as a counterexample.
const GAP_MARGIN: f64 = 1e-2;

fn deny_negative(d: &mut Draw) -> Result<Verdict> {
    let p = d.problem(&[Family::PointsBall, Family::PointsRotation], &[1.5, 2.0])?;
    let Some(idx) = d.probes(&p, 1) else { return too_few_probes() };
    let tol = d.calibrate(&p)?;
    let x = p.disc.probes[idx[0]].clone();
    d.record(&DiscreteMeasure::dirac(&Point(x.clone())));
    let c = match deny_counterexample(&p, &x, ZERO_TOL, GAP_MARGIN) {
        Err(Error::Precondition(m)) => return skipped(m),
        r => r?,
    };
    let r = c.report;
    let evidence = format!(
        "mass gap {:.4e} (margin {GAP_MARGIN:.0e}), potential mismatch {:.3e}, outside-domain measure {:.3e}",
        r.mass_gap, r.potential_mismatch, r.outside_domain
    );
    let pass = r.found && r.potential_mismatch <= tol;
    Ok(Verdict {
        outcome: if pass { CaseOutcome::Pass } else { CaseOutcome::Fail },
        residual: r.potential_mismatch,
        evidence,
    })
}

/// Objective gap allowed between the cone projection and enumeration.
const ORACLE_GAP: f64 = 1e-8;

fn solver_oracle(d: &mut Draw) -> Result<Verdict> {
    let rng = &mut d.rng;
    let n = rng.gen_range(1..=4);
    let matrix = if rng.gen_bool(0.5) {
        let b: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..n).map(|k| b[k * n + i] * b[k * n + j]).sum::<f64>();
            }
            a[i * n + i] += 0.1;
        }
        a
    } else {
        let alpha = *ALPHAS.choose(rng).expect("alphas");
        let coords: Vec<f64> = (0..3 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let radii = vec![rng.gen_range(0.02..0.1); n];
        let nodes = balayage_core::cloud::Nodes::new(3, coords, radii);
        d.alpha = Some(alpha);
        gram_matrix(&geometry::kernel(alpha), &nodes)
    };
    let rhs: Vec<f64> = (0..n).map(|_| d.rng.gen_range(-1.0..1.0)).collect();
    d.tol = ORACLE_GAP;
    let sys = GramSystem::new(matrix, rhs)?;
    let a = project_onto_cone(&sys, &SolverOptions::with_tol(1e-12))?;
    let b = brute_force_oracle(&sys)?;
    let gap = (a.objective - b.objective).abs() / b.objective.abs().max(1.0);
    judge(gap, ORACLE_GAP, &format!("objective gap on a {n}-node system"))
}

pub(crate) static REGISTRY: &[PropertyInfo] = &[
    PropertyInfo {
        name: "mass-bound",
        description: "the swept measure is no heavier than the original",
        default_cases: 50,
        check: mass_bound,
    },
    PropertyInfo {
        name: "potential-domination",
        description: "the swept Green potential stays below the original one at the probes",
        default_cases: 50,
        check: potential_domination,
    },
    PropertyInfo {
        name: "route-equivalence",
        description: "union sweep restricted to F and direct Green projection agree",
        default_cases: 50,
        check: route_equivalence,
    },
    PropertyInfo {
        name: "sweep-with-rest",
        description: "sweeping onto Q through F equals sweeping onto Q directly",
        default_cases: 50,
        check: sweep_rest,
    },
    PropertyInfo {
        name: "min-potential",
        description: "the swept potential is the least among admissible measures",
        default_cases: 50,
        check: min_potential,
    },
    PropertyInfo {
        name: "min-mass",
        description: "the swept measure has the least mass among admissible measures",
        default_cases: 50,
        check: min_mass,
    },
    PropertyInfo {
        name: "symmetry-relation",
        description: "sweeping one measure and pairing with another is symmetric",
        default_cases: 50,
        check: symmetry_relation,
    },
    PropertyInfo {
        name: "equilibrium-potential-bounds",
        description: "the Green equilibrium potential is 1 on its support and at most 1 elsewhere",
        default_cases: 50,
        check: equilibrium_bounds,
    },
    PropertyInfo {
        name: "swept-mass-identity",
        description: "the swept mass equals the integral of the equilibrium potential",
        default_cases: 50,
        check: swept_mass,
    },
    PropertyInfo {
        name: "strict-loss",
        description: "for alpha < 2 and solid Y the sweep of a measure off F loses mass",
        default_cases: 20,
        check: strict_loss,
    },
    PropertyInfo {
        name: "trichotomy-consistency",
        description: "vanishing outside-domain harmonic measure agrees with non-thinness at infinity plus vanishing measure of Y",
        default_cases: 50,
        check: trichotomy,
    },
    PropertyInfo {
        name: "deny-positive",
        description: "domination of potentials on F implies domination of masses when no harmonic measure leaves D",
        default_cases: 20,
        check: deny_positive,
    },
    PropertyInfo {
        name: "deny-negative",
        description: "a Dirac and its sweep give equal potentials on F but different masses when harmonic measure leaves D",
        default_cases: 20,
        check: deny_negative,
    },
    PropertyInfo {
        name: "solver-oracle",
        description: "the cone projection matches exhaustive active-set enumeration on small systems",
        default_cases: 200,
        check: solver_oracle,
    },
];
