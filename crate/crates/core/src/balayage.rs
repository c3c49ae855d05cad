//! Green balayage onto the sampled set F: two independent routes (a Riesz
//! sweep onto F ∪ Y restricted to F, and the cone projection in the Green
//! energy), the integral representation, and checks of the extremal and
//! domination properties.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::cloud::Nodes;
use crate::domain::{Discretization, DomainSpec};
use crate::error::{Error, Result};
use crate::green::GreenKernel;
use crate::measure::DiscreteMeasure;
use crate::numeric::max_abs;
use crate::riesz::{gram_matrix, potential_on_nodes, GramSystem, RieszKernel};
use crate::solver::{solve_potential_match, SolverOptions};

/// Default tolerance for comparing masses of discrete sweeps: the node
/// quadrature overshoots exact mass identities by a few 1e-4 at desk scale.
pub const MASS_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    ViaUnionSweep,
    DirectGreenProjection,
    IntegralRepresentation,
    Riesz,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub route: Route,
    /// Weights aligned with the target nodes.
    pub weights: Vec<f64>,
    pub swept: DiscreteMeasure,
    pub mass_before: f64,
    pub mass_after: f64,
    /// max |U^swept − U^μ| over target nodes carrying weight, relative to max |U^μ|.
    pub potential_residual: f64,
    pub kkt_residual: f64,
    /// Mass the union sweep deposits on Y (union route only).
    pub y_mass: Option<f64>,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub route: Route,
    pub mass_before: f64,
    pub mass_after: f64,
    pub potential_residual: f64,
    pub kkt_residual: f64,
    pub nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights_csv_path: Option<String>,
}

impl SweepResult {
    pub fn summary(&self, weights_csv_path: Option<String>) -> SweepSummary {
        SweepSummary {
            route: self.route,
            mass_before: self.mass_before,
            mass_after: self.mass_after,
            potential_residual: self.potential_residual,
            kkt_residual: self.kkt_residual,
            nodes: self.weights.len(),
            y_mass: self.y_mass,
            weights_csv_path,
        }
    }
}

fn submatrix(full: &[f64], n: usize, idx: &[usize]) -> Vec<f64> {
    let m = idx.len();
    let mut out = vec![0.0; m * m];
    for (a, &i) in idx.iter().enumerate() {
        let row = &full[i * n..(i + 1) * n];
        for (b, &j) in idx.iter().enumerate() {
            out[a * m + b] = row[j];
        }
    }
    out
}

fn matvec(g: &[f64], w: &[f64]) -> Vec<f64> {
    let m = w.len();
    (0..m).map(|i| crate::numeric::dot(&g[i * m..(i + 1) * m], w)).collect()
}

/// Relative residual of `g w = b` on the support of `w`.
fn support_residual(g: &[f64], w: &[f64], b: &[f64]) -> f64 {
    let scale = max_abs(b).max(f64::MIN_POSITIVE);
    matvec(g, w)
        .iter()
        .zip(b)
        .zip(w)
        .filter(|(_, &wi)| wi > 0.0)
        .map(|((u, bi), _)| (u - bi).abs())
        .fold(0.0, f64::max)
        / scale
}

/// A discretized domain together with its Green kernel and lazily built
/// Gram matrices.
pub struct Problem {
    pub disc: Discretization,
    pub green: GreenKernel,
    pub opts: SolverOptions,
    f_gram: OnceLock<Vec<f64>>,
    union_gram: OnceLock<Vec<f64>>,
    f_system: OnceLock<GramSystem>,
    union_system: OnceLock<GramSystem>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("f_nodes", &self.disc.f_nodes.len())
            .field("y_nodes", &self.disc.y_nodes.len())
            .field("probes", &self.disc.probes.len())
            .finish()
    }
}

impl Problem {
    pub fn new(spec: &DomainSpec, kernel: &RieszKernel) -> Result<Self> {
        Self::from_discretization(spec.discretize(kernel)?)
    }

    pub fn from_discretization(disc: Discretization) -> Result<Self> {
        let green = GreenKernel::for_discretization(&disc)?;
        Ok(Problem {
            disc,
            green,
            opts: SolverOptions::default(),
            f_gram: OnceLock::new(),
            union_gram: OnceLock::new(),
            f_system: OnceLock::new(),
            union_system: OnceLock::new(),
        })
    }

    pub fn with_options(mut self, opts: SolverOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn kernel(&self) -> &RieszKernel {
        &self.disc.kernel
    }

    pub fn f_nodes(&self) -> &Nodes {
        &self.disc.f_nodes
    }

    pub fn f_len(&self) -> usize {
        self.disc.f_nodes.len()
    }

    pub fn all_f(&self) -> Vec<usize> {
        (0..self.f_len()).collect()
    }

    /// Green Gram matrix over all F nodes (row-major).
    pub fn green_gram(&self) -> &[f64] {
        self.f_gram.get_or_init(|| self.green.gram(&self.disc.f_nodes))
    }

    /// Riesz Gram matrix over F followed by Y.
    pub fn union_gram(&self) -> &[f64] {
        self.union_gram
            .get_or_init(|| gram_matrix(self.kernel(), &self.disc.omega_complement_nodes()))
    }

    pub fn green_system(&self, idx: &[usize], rhs: Vec<f64>) -> Result<GramSystem> {
        GramSystem::new(submatrix(self.green_gram(), self.f_len(), idx), rhs)
    }

    /// Factored Green system over all F nodes, built once.
    pub fn full_green_system(&self) -> Result<&GramSystem> {
        cached_system(&self.f_system, || {
            GramSystem::new(self.green_gram().to_vec(), vec![0.0; self.f_len()])
        })
    }

    /// Factored Riesz system over F followed by Y, built once.
    pub fn union_system(&self) -> Result<&GramSystem> {
        let m = self.f_len() + self.disc.y_nodes.len();
        cached_system(&self.union_system, || GramSystem::new(self.union_gram().to_vec(), vec![0.0; m]))
    }

    fn is_all_f(&self, idx: &[usize]) -> bool {
        idx.len() == self.f_len() && idx.iter().enumerate().all(|(a, &b)| a == b)
    }

    fn check_idx(&self, idx: &[usize]) -> Result<()> {
        if idx.is_empty() {
            return Err(Error::EmptyCloud("F"));
        }
        if let Some(&i) = idx.iter().find(|&&i| i >= self.f_len()) {
            return Err(Error::InvalidArgument(format!("node {i} is not an F node")));
        }
        Ok(())
    }

    /// Green potential of `m` at the F nodes `idx`.
    pub fn green_potential_on_f(&self, m: &DiscreteMeasure, idx: &[usize]) -> Result<Vec<f64>> {
        let nodes = self.disc.f_nodes.select(idx);
        self.green.green_potential_on_nodes(m, &nodes)
    }

    /// Green potential of weights living on the F nodes `idx`, at those nodes.
    pub fn green_potential_of_weights(&self, idx: &[usize], w: &[f64]) -> Vec<f64> {
        matvec(&submatrix(self.green_gram(), self.f_len(), idx), w)
    }

    /// Measure on the F nodes `idx` with the given weights.
    pub fn f_measure(&self, idx: &[usize], w: &[f64]) -> DiscreteMeasure {
        self.disc.f_nodes.select(idx).measure(w.to_vec())
    }

    /// Weights of `m` on all F nodes if every positive-weight node of `m`
    /// is one of them.
    fn embed_in_f(&self, m: &DiscreteMeasure) -> Option<Vec<f64>> {
        let mut w = vec![0.0; self.f_len()];
        for i in 0..m.len() {
            if m.weights()[i] == 0.0 {
                continue;
            }
            let j = self.disc.f_nodes.find(m.point(i), 1e-12)?;
            w[j] += m.weights()[i];
        }
        Some(w)
    }
}

fn cached_system<F: FnOnce() -> Result<GramSystem>>(cell: &OnceLock<GramSystem>, build: F) -> Result<&GramSystem> {
    if let Some(s) = cell.get() {
        return Ok(s);
    }
    let sys = build()?;
    Ok(cell.get_or_init(|| sys))
}

/// g-balayage of `mu` onto all F nodes.
pub fn sweep_green(p: &Problem, mu: &DiscreteMeasure, route: Route) -> Result<SweepResult> {
    sweep_green_onto(p, mu, &p.all_f(), route)
}

/// g-balayage of `mu` onto the F nodes `idx`.
pub fn sweep_green_onto(p: &Problem, mu: &DiscreteMeasure, idx: &[usize], route: Route) -> Result<SweepResult> {
    p.check_idx(idx)?;
    for i in 0..mu.len() {
        if mu.weights()[i] > 0.0 && !p.disc.spec.in_domain(mu.point(i)) {
            return Err(Error::OutsideSet {
                point: mu.point(i).to_vec(),
                set: "D".into(),
            });
        }
    }
    let b = p.green_potential_on_f(mu, idx)?;
    let g = submatrix(p.green_gram(), p.f_len(), idx);
    let (weights, kkt, iterations, y_mass) = match route {
        Route::DirectGreenProjection => {
            let sol = if p.is_all_f(idx) {
                solve_potential_match(p.full_green_system()?, &b, &p.opts)?
            } else {
                solve_potential_match(&GramSystem::new(g.clone(), b.clone())?, &b, &p.opts)?
            };
            (sol.weights, sol.kkt_residual, sol.iterations, None)
        }
        Route::ViaUnionSweep => {
            let (w, y, kkt, it) = union_sweep(p, mu, idx)?;
            (w, kkt, it, Some(y))
        }
        Route::IntegralRepresentation => {
            let mut w = vec![0.0; idx.len()];
            let mut y_total = 0.0;
            let mut kkt: f64 = 0.0;
            let mut iters = 0;
            for i in 0..mu.len() {
                let a = mu.weights()[i];
                if a == 0.0 {
                    continue;
                }
                let dirac = DiscreteMeasure::from_parts(
                    mu.dim(),
                    mu.point(i).to_vec(),
                    vec![1.0],
                    vec![mu.patch_radii()[i]],
                )?;
                let (wi, yi, k, it) = union_sweep(p, &dirac, idx)?;
                w.iter_mut().zip(&wi).for_each(|(acc, v)| *acc += a * v);
                y_total += a * yi;
                kkt = kkt.max(k);
                iters += it;
            }
            (w, kkt, iters, Some(y_total))
        }
        Route::Riesz => {
            return Err(Error::InvalidArgument(
                "use sweep_riesz for the Riesz route".into(),
            ))
        }
    };
    let potential_residual = support_residual(&g, &weights, &b);
    let swept = p.f_measure(idx, &weights);
    Ok(SweepResult {
        route,
        mass_before: mu.total_mass(),
        mass_after: swept.total_mass(),
        swept,
        weights,
        potential_residual,
        kkt_residual: kkt,
        y_mass,
        iterations,
    })
}

/// Riesz sweep onto the F nodes `idx` together with all of Y; returns the F
/// weights, the mass on Y, the KKT residual and the iteration count.
fn union_sweep(p: &Problem, mu: &DiscreteMeasure, idx: &[usize]) -> Result<(Vec<f64>, f64, f64, usize)> {
    let nf = p.f_len();
    let ny = p.disc.y_nodes.len();
    let mut all: Vec<usize> = idx.to_vec();
    all.extend(nf..nf + ny);
    let nodes = p.disc.omega_complement_nodes().select(&all);
    let target = potential_on_nodes(p.kernel(), mu, &nodes);
    let sol = if p.is_all_f(idx) {
        solve_potential_match(p.union_system()?, &target, &p.opts)?
    } else {
        let sys = GramSystem::new(submatrix(p.union_gram(), nf + ny, &all), target.clone())?;
        solve_potential_match(&sys, &target, &p.opts)?
    };
    let (wf, wy) = sol.weights.split_at(idx.len());
    Ok((wf.to_vec(), wy.iter().sum(), sol.kkt_residual, sol.iterations))
}

/// Riesz balayage of `nu` onto the nodes `q`.
pub fn sweep_riesz(k: &RieszKernel, nu: &DiscreteMeasure, q: &Nodes, opts: &SolverOptions) -> Result<SweepResult> {
    if q.is_empty() {
        return Err(Error::EmptyCloud("Q"));
    }
    let b = potential_on_nodes(k, nu, q);
    let sys = GramSystem::new(gram_matrix(k, q), b.clone())?;
    let sol = solve_potential_match(&sys, &b, opts)?;
    let potential_residual = support_residual(sys.matrix(), &sol.weights, &b);
    let swept = q.measure(sol.weights.clone());
    Ok(SweepResult {
        route: Route::Riesz,
        mass_before: nu.total_mass(),
        mass_after: swept.total_mass(),
        swept,
        weights: sol.weights,
        potential_residual,
        kkt_residual: sol.kkt_residual,
        y_mass: None,
        iterations: sol.iterations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteComparison {
    pub union: SweepSummary,
    pub direct: SweepSummary,
    /// max |U_g(union) − U_g(direct)| on F nodes relative to max U_g^μ there.
    pub potential_difference: f64,
    pub mass_difference: f64,
}

/// Runs both routes and compares their Green potentials on F and their masses.
pub fn compare_routes(p: &Problem, mu: &DiscreteMeasure) -> Result<(RouteComparison, SweepResult, SweepResult)> {
    let idx = p.all_f();
    let a = sweep_green(p, mu, Route::ViaUnionSweep)?;
    let b = sweep_green(p, mu, Route::DirectGreenProjection)?;
    let ua = p.green_potential_of_weights(&idx, &a.weights);
    let ub = p.green_potential_of_weights(&idx, &b.weights);
    let target = p.green_potential_on_f(mu, &idx)?;
    let scale = max_abs(&target).max(f64::MIN_POSITIVE);
    let pd = ua.iter().zip(&ub).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale;
    let md = (a.mass_after - b.mass_after).abs() / a.mass_after.max(b.mass_after).max(f64::MIN_POSITIVE);
    Ok((
        RouteComparison {
            union: a.summary(None),
            direct: b.summary(None),
            potential_difference: pd,
            mass_difference: md,
        },
        a,
        b,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalReport {
    /// Worst value of the checked difference, relative to the potential scale.
    pub worst_margin: f64,
    pub margins: Vec<f64>,
    pub tol: f64,
    pub passed: bool,
}

/// Green potential of `m` at the probes and the F nodes.
fn potential_everywhere(p: &Problem, m: &DiscreteMeasure) -> Result<Vec<f64>> {
    let probes: Vec<f64> = p.disc.probes.iter().flatten().copied().collect();
    let mut v = p.green.green_potential_at(m, &probes)?;
    v.extend(p.green.green_potential_on_nodes(m, &p.disc.f_nodes)?);
    Ok(v)
}

fn gamma_membership(p: &Problem, mu_on_f: &[f64], theta: &DiscreteMeasure, tol: f64, scale: f64, which: usize) -> Result<()> {
    let t = p.green.green_potential_on_nodes(theta, &p.disc.f_nodes)?;
    for (j, (a, b)) in t.iter().zip(mu_on_f).enumerate() {
        if *a < b - tol * scale {
            return Err(Error::Precondition(format!(
                "candidate {which} is not in the admissible class: potential {a:.6e} < {b:.6e} at F node {j}"
            )));
        }
    }
    Ok(())
}

/// U_g^{μ^F} ≤ U_g^θ at every probe and F node, for every candidate θ whose
/// potential dominates that of μ on F.
pub fn check_min_potential(p: &Problem, mu: &DiscreteMeasure, candidates: &[DiscreteMeasure], tol: f64) -> Result<ExtremalReport> {
    let swept = sweep_green(p, mu, Route::DirectGreenProjection)?;
    let mu_on_f = p.green_potential_on_f(mu, &p.all_f())?;
    let scale = max_abs(&mu_on_f).max(f64::MIN_POSITIVE);
    let us = potential_everywhere(p, &swept.swept)?;
    let mut margins = Vec::with_capacity(candidates.len());
    for (i, theta) in candidates.iter().enumerate() {
        gamma_membership(p, &mu_on_f, theta, tol, scale, i)?;
        let ut = potential_everywhere(p, theta)?;
        let m = us.iter().zip(&ut).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max) / scale;
        margins.push(m);
    }
    let worst = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ExtremalReport {
        worst_margin: worst,
        passed: margins.iter().all(|&m| m <= tol),
        margins,
        tol,
    })
}

/// mass(μ^F) ≤ mass(θ) for every admissible candidate θ; margins are
/// mass(μ^F) − mass(θ) relative to mass(μ^F).
pub fn check_min_mass(p: &Problem, mu: &DiscreteMeasure, candidates: &[DiscreteMeasure], tol: f64) -> Result<ExtremalReport> {
    let swept = sweep_green(p, mu, Route::DirectGreenProjection)?;
    let mu_on_f = p.green_potential_on_f(mu, &p.all_f())?;
    let scale = max_abs(&mu_on_f).max(f64::MIN_POSITIVE);
    let mass = swept.mass_after.max(f64::MIN_POSITIVE);
    let mut margins = Vec::with_capacity(candidates.len());
    for (i, theta) in candidates.iter().enumerate() {
        gamma_membership(p, &mu_on_f, theta, tol, scale, i)?;
        margins.push((swept.mass_after - theta.total_mass()) / mass);
    }
    let worst = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ExtremalReport {
        worst_margin: worst,
        passed: margins.iter().all(|&m| m <= tol),
        margins,
        tol,
    })
}

#[derive(Clone, Debug)]
pub struct RestComparison {
    pub one_stage: SweepResult,
    pub two_stage: SweepResult,
    /// Green energy norm of the difference relative to that of the one-stage sweep.
    pub energy_difference: f64,
}

/// Sweeps μ onto Q directly and via F (Q given as F node indices).
pub fn sweep_with_rest(p: &Problem, mu: &DiscreteMeasure, q_idx: &[usize]) -> Result<RestComparison> {
    p.check_idx(q_idx)?;
    let one = sweep_green_onto(p, mu, q_idx, Route::DirectGreenProjection)?;
    let via_f = sweep_green(p, mu, Route::DirectGreenProjection)?;
    let two = sweep_green_onto(p, &via_f.swept.positive_part(), q_idx, Route::DirectGreenProjection)?;
    let diff: Vec<f64> = one.weights.iter().zip(&two.weights).map(|(a, b)| a - b).collect();
    let g = submatrix(p.green_gram(), p.f_len(), q_idx);
    let en = |w: &[f64]| crate::numeric::dot(&matvec(&g, w), w).max(0.0).sqrt();
    let base = en(&one.weights).max(f64::MIN_POSITIVE);
    Ok(RestComparison {
        energy_difference: en(&diff) / base,
        one_stage: one,
        two_stage: two,
    })
}

/// Σ_x μ({x}) (ε_x)^{F∪Y}|_F computed node by node.
pub fn sweep_via_integral(p: &Problem, mu: &DiscreteMeasure) -> Result<SweepResult> {
    sweep_green(p, mu, Route::IntegralRepresentation)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Pass,
    Fail,
    PreconditionFailed,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub outcome: Outcome,
    /// max (U^ζ − U^θ) over the support of ζ, relative.
    pub hypothesis_margin: f64,
    /// max (U^ζ − U^θ) over probes and F nodes, relative.
    pub worst_margin: f64,
    pub tol: f64,
}

/// If U_g^ζ ≤ U_g^θ on the support of ζ then everywhere in D.
pub fn check_domination(p: &Problem, zeta: &DiscreteMeasure, theta: &DiscreteMeasure, tol: f64) -> Result<DominationReport> {
    let support = Nodes::from_measure(&zeta.positive_part());
    let uz = p.green.green_potential_on_nodes(zeta, &support)?;
    let ut = p.green.green_potential_on_nodes(theta, &support)?;
    let scale = max_abs(&uz).max(max_abs(&ut)).max(f64::MIN_POSITIVE);
    let hyp = uz.iter().zip(&ut).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max) / scale;
    let ez = potential_everywhere(p, zeta)?;
    let et = potential_everywhere(p, theta)?;
    let worst = ez.iter().zip(&et).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max) / scale;
    let outcome = if hyp > tol {
        Outcome::PreconditionFailed
    } else if worst <= tol {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    Ok(DominationReport {
        outcome,
        hypothesis_margin: hyp,
        worst_margin: worst,
        tol,
    })
}

/// Largest change of any weight when sweeping the swept measure again.
pub fn idempotence_defect(p: &Problem, swept: &SweepResult) -> Result<f64> {
    let again = sweep_green(p, &swept.swept.positive_part(), Route::DirectGreenProjection)?;
    let scale = max_abs(&swept.weights).max(f64::MIN_POSITIVE);
    Ok(again
        .weights
        .iter()
        .zip(&swept.weights)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale)
}

/// Sweep of a measure supported on the F nodes, returned as weights on all
/// F nodes; None if `m` is not carried by F.
pub fn weights_on_f(p: &Problem, m: &DiscreteMeasure) -> Option<Vec<f64>> {
    p.embed_in_f(m)
}
