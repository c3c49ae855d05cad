//! Equilibrium measures and capacities, truncation doubling for unbounded
//! sets, and the two annular capacity series: thinness at infinity and the
//! Wiener test at a point.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balayage::{sweep_green_onto, Problem, Route};
use crate::cloud::Nodes;
use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::green::GreenKernel;
use crate::harmonic::outside_domain_at_probes;
use crate::measure::DiscreteMeasure;
use crate::numeric::dot;
use crate::region::Region;
use crate::riesz::{gram_matrix, GramSystem, RieszKernel};
use crate::sampling::{annulus_radii, sample_annulus, sample_shell_piece, with_budget, SampleMode};
use crate::solver::{solve_potential_match, ProjectionSolution, SolverOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MassTrend {
    /// F is bounded; a single solve.
    Bounded,
    Saturating,
    Growing,
    Undecided,
}

/// Relative mass increase per truncation doubling that counts as growth,
/// and the one below which the mass counts as saturated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DoublingThresholds {
    pub growth: f64,
    pub saturation: f64,
}

impl Default for DoublingThresholds {
    fn default() -> Self {
        DoublingThresholds {
            growth: 0.05,
            saturation: 0.02,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EquilibriumResult {
    pub gamma: DiscreteMeasure,
    pub capacity: f64,
    /// γ-energy, equal to the capacity for an exact solution.
    pub energy: f64,
    /// max |U^γ − 1| over nodes carrying weight.
    pub potential_residual: f64,
    /// max U^γ over the probes, when probes were available.
    pub max_probe_potential: Option<f64>,
    pub truncation_radius: Option<f64>,
    /// (truncation radius, capacity) for every run, smallest radius first.
    pub masses: Vec<(f64, f64)>,
    pub trend: MassTrend,
    pub converged_in_r: bool,
    pub kkt_residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSummary {
    pub capacity: f64,
    pub energy: f64,
    pub potential_residual: f64,
    pub max_probe_potential: Option<f64>,
    pub truncation_radius: Option<f64>,
    pub masses: Vec<(f64, f64)>,
    pub trend: MassTrend,
    pub converged_in_r: bool,
    pub nodes: usize,
    pub kkt_residual: f64,
}

impl EquilibriumResult {
    pub fn summary(&self) -> EquilibriumSummary {
        EquilibriumSummary {
            capacity: self.capacity,
            energy: self.energy,
            potential_residual: self.potential_residual,
            max_probe_potential: self.max_probe_potential,
            truncation_radius: self.truncation_radius,
            masses: self.masses.clone(),
            trend: self.trend,
            converged_in_r: self.converged_in_r,
            nodes: self.gamma.len(),
            kkt_residual: self.kkt_residual,
        }
    }

    /// Relative mass increase at each doubling.
    pub fn increments(&self) -> Vec<f64> {
        self.masses
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / w[0].1.max(f64::MIN_POSITIVE))
            .collect()
    }
}

fn solve_unit_target(sys: &GramSystem, opts: &SolverOptions) -> Result<ProjectionSolution> {
    let ones = vec![1.0; sys.dim()];
    solve_potential_match(sys, &ones, opts)
}

fn finish(nodes: &Nodes, sys: &GramSystem, sol: ProjectionSolution) -> EquilibriumResult {
    let u = sys.matvec(&sol.weights);
    let potential_residual = u
        .iter()
        .zip(&sol.weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(v, _)| (v - 1.0).abs())
        .fold(0.0, f64::max);
    let energy = dot(&u, &sol.weights);
    let gamma = nodes.measure(sol.weights);
    let capacity = gamma.total_mass();
    EquilibriumResult {
        gamma,
        capacity,
        energy,
        potential_residual,
        max_probe_potential: None,
        truncation_radius: None,
        masses: Vec::new(),
        trend: MassTrend::Bounded,
        converged_in_r: true,
        kkt_residual: sol.kkt_residual,
        iterations: sol.iterations,
    }
}

/// Equilibrium measure of the given nodes for a Green kernel (pass
/// [`GreenKernel::full_space`] for the Riesz kernel).
pub fn equilibrium_on_nodes(green: &GreenKernel, nodes: &Nodes, opts: &SolverOptions) -> Result<EquilibriumResult> {
    if nodes.is_empty() {
        return Err(Error::EmptyCloud("F"));
    }
    for i in 0..nodes.len() {
        if !green.domain().contains_open(nodes.point(i)) {
            return Err(Error::OutsideSet {
                point: nodes.point(i).to_vec(),
                set: "D",
            });
        }
    }
    let sys = GramSystem::new(green.gram(nodes), vec![1.0; nodes.len()])?;
    let sol = solve_unit_target(&sys, opts)?;
    Ok(finish(nodes, &sys, sol))
}

pub fn riesz_equilibrium(k: &RieszKernel, nodes: &Nodes, opts: &SolverOptions) -> Result<EquilibriumResult> {
    if nodes.is_empty() {
        return Err(Error::EmptyCloud("F"));
    }
    let sys = GramSystem::new(gram_matrix(k, nodes), vec![1.0; nodes.len()])?;
    let sol = solve_unit_target(&sys, opts)?;
    Ok(finish(nodes, &sys, sol))
}

pub fn capacity(green: &GreenKernel, nodes: &Nodes, opts: &SolverOptions) -> Result<f64> {
    Ok(equilibrium_on_nodes(green, nodes, opts)?.capacity)
}

pub fn riesz_capacity(k: &RieszKernel, nodes: &Nodes, opts: &SolverOptions) -> Result<f64> {
    Ok(riesz_equilibrium(k, nodes, opts)?.capacity)
}

/// Green equilibrium measure of the F nodes of a problem, with the
/// potential checked at the probes.
pub fn equilibrium_measure(p: &Problem) -> Result<EquilibriumResult> {
    if p.f_len() == 0 {
        return Err(Error::EmptyCloud("F"));
    }
    let sys = p.full_green_system()?;
    let sol = solve_unit_target(sys, &p.opts)?;
    let mut r = finish(p.f_nodes(), sys, sol);
    let probes: Vec<f64> = p.disc.probes.iter().flatten().copied().collect();
    if !probes.is_empty() {
        let u = p.green.green_potential_at(&r.gamma, &probes)?;
        r.max_probe_potential = Some(u.into_iter().fold(f64::NEG_INFINITY, f64::max));
    }
    let spec = &p.disc.spec;
    if !spec.set.is_bounded() {
        r.truncation_radius = Some(spec.truncation_radius);
        r.trend = MassTrend::Undecided;
        r.converged_in_r = false;
    }
    r.masses = vec![(spec.truncation_radius, r.capacity)];
    Ok(r)
}

/// Equilibrium measure at the truncation radius of `spec` and at `doublings`
/// successive doublings of it, at fixed local resolution. Returns the
/// result at the largest radius with the whole mass sequence.
pub fn equilibrium_with_doubling(
    spec: &DomainSpec,
    k: &RieszKernel,
    doublings: usize,
    thresholds: &DoublingThresholds,
    opts: &SolverOptions,
) -> Result<EquilibriumResult> {
    let first = Problem::new(spec, k)?.with_options(opts.clone());
    let mut result = equilibrium_measure(&first)?;
    if spec.set.is_bounded() {
        return Ok(result);
    }
    let mut masses = result.masses.clone();
    let mut pinned = first.disc.pinned_spec();
    drop(first);
    for _ in 0..doublings {
        pinned.truncation_radius *= 2.0;
        let p = Problem::new(&pinned, k)?.with_options(opts.clone());
        result = equilibrium_measure(&p)?;
        masses.push((pinned.truncation_radius, result.capacity));
    }
    result.masses = masses;
    result.trend = match result.increments().last() {
        None => MassTrend::Undecided,
        Some(&inc) if inc > thresholds.growth => MassTrend::Growing,
        Some(&inc) if inc <= thresholds.saturation => MassTrend::Saturating,
        Some(_) => MassTrend::Undecided,
    };
    result.converged_in_r = result.trend == MassTrend::Saturating;
    Ok(result)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestrictionReport {
    pub capacity_direct: f64,
    pub capacity_swept: f64,
    /// Green energy norm of γ_Q − (γ_F)^Q relative to that of γ_Q.
    pub energy_difference: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Compares γ_Q computed directly with the sweep of γ_F onto Q; Q is
/// given as F node indices.
pub fn check_equilibrium_restriction(p: &Problem, q_idx: &[usize], tol: f64) -> Result<RestrictionReport> {
    if q_idx.is_empty() {
        return Err(Error::EmptyCloud("Q"));
    }
    let full = equilibrium_measure(p)?;
    let sys = p.green_system(q_idx, vec![1.0; q_idx.len()])?;
    let direct = solve_unit_target(&sys, &p.opts)?;
    let swept = sweep_green_onto(p, &full.gamma.positive_part(), q_idx, Route::DirectGreenProjection)?;
    let diff: Vec<f64> = direct.weights.iter().zip(&swept.weights).map(|(a, b)| a - b).collect();
    let base = sys.energy_norm(&direct.weights).max(f64::MIN_POSITIVE);
    let energy_difference = sys.energy_norm(&diff) / base;
    Ok(RestrictionReport {
        capacity_direct: direct.weights.iter().sum(),
        capacity_swept: swept.mass_after,
        energy_difference,
        tol,
        passed: energy_difference <= 5.0 * tol,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassIdentity {
    pub swept_mass: f64,
    /// ∫ U_g^γ dμ.
    pub integral: f64,
    pub relative_difference: f64,
}

/// Mass of μ^F against the integral of the equilibrium potential of F.
pub fn swept_mass_identity(p: &Problem, eq: &EquilibriumResult, mu: &DiscreteMeasure) -> Result<MassIdentity> {
    let swept = sweep_green_onto(p, mu, &p.all_f(), Route::DirectGreenProjection)?;
    let u = p.green.green_potential_at(&eq.gamma, mu.coords())?;
    let integral = dot(&u, mu.weights());
    let scale = swept.mass_after.abs().max(integral.abs()).max(f64::MIN_POSITIVE);
    Ok(MassIdentity {
        swept_mass: swept.mass_after,
        integral,
        relative_difference: (swept.mass_after - integral).abs() / scale,
    })
}

/// Heuristic thresholds for the annular series verdicts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeriesThresholds {
    /// Tail ratios below this count as geometric decay.
    pub decay_ratio: f64,
    /// Tail terms at least this fraction of the tail maximum count as non-decaying.
    pub floor_fraction: f64,
    /// Wiener tail ratios below this mark an irregular point.
    pub irregular_ratio: f64,
    /// Node budget per annulus.
    pub budget: usize,
}

impl Default for SeriesThresholds {
    fn default() -> Self {
        SeriesThresholds {
            decay_ratio: 0.8,
            floor_fraction: 0.4,
            irregular_ratio: 0.5,
            budget: 400,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusTerm {
    pub j: i32,
    pub inner: f64,
    pub outer: f64,
    pub nodes: usize,
    pub capacity: f64,
    pub term: f64,
    pub partial_sum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnularSeries {
    pub q: f64,
    pub n: usize,
    pub alpha: f64,
    pub terms: Vec<AnnulusTerm>,
}

impl AnnularSeries {
    /// t_{j+1} / t_j; 0 when both vanish, infinite when only t_j does.
    pub fn ratios(&self) -> Vec<f64> {
        self.terms
            .windows(2)
            .map(|w| match (w[0].term, w[1].term) {
                (a, b) if a > 0.0 => b / a,
                (_, b) if b > 0.0 => f64::INFINITY,
                _ => 0.0,
            })
            .collect()
    }

    pub fn sum(&self) -> f64 {
        self.terms.last().map_or(0.0, |t| t.partial_sum)
    }

    fn tail(&self) -> (Vec<f64>, &[AnnulusTerm]) {
        let r = self.ratios();
        let m = (self.terms.len().saturating_sub(1) + 1) / 2;
        let tail_r = r[r.len() - m.min(r.len())..].to_vec();
        let tail_t = &self.terms[self.terms.len() - (m + 1).min(self.terms.len())..];
        (tail_r, tail_t)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "j,capacity,term,partial_sum")?;
        for t in &self.terms {
            writeln!(w, "{},{:.12e},{:.12e},{:.12e}", t.j, t.capacity, t.term, t.partial_sum)?;
        }
        Ok(())
    }

    fn build(q: f64, k: &RieszKernel, mut terms: Vec<AnnulusTerm>) -> Self {
        let mut acc = 0.0;
        for t in &mut terms {
            acc += t.term;
            t.partial_sum = acc;
        }
        AnnularSeries {
            q,
            n: k.n,
            alpha: k.alpha,
            terms,
        }
    }
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", parts.join(", "))
}

fn annulus_capacity(k: &RieszKernel, nodes: &Nodes) -> Result<f64> {
    if nodes.is_empty() {
        return Ok(0.0);
    }
    riesz_capacity(k, nodes, &SolverOptions::default())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThinnessVerdict {
    Thin,
    NotThin,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThinnessReport {
    #[serde(flatten)]
    pub series: AnnularSeries,
    pub verdict: ThinnessVerdict,
    pub evidence: String,
    pub thresholds: SeriesThresholds,
}

/// Series Σ c(Q_j) / q^{j(n−α)} over the annuli q^j ≤ |x| ≤ q^{j+1},
/// j = 0..=j_max, with a verdict read off its tail.
pub fn thin_at_infinity(
    region: &Region,
    k: &RieszKernel,
    q: f64,
    j_max: usize,
    th: &SeriesThresholds,
    seed: u64,
) -> Result<ThinnessReport> {
    if !(q > 1.0) {
        return Err(Error::InvalidArgument(format!("thinness ratio must exceed 1, got {q}")));
    }
    if j_max < 4 {
        return Err(Error::InvalidArgument(format!("j_max must be at least 4, got {j_max}")));
    }
    let mode = SampleMode::for_alpha(k.alpha);
    let decay = k.n as f64 - k.alpha;
    let terms = (0..=j_max as i32)
        .into_par_iter()
        .map(|j| {
            let cloud = sample_annulus(region, k.n, j, q, th.budget, mode, seed.wrapping_add(j as u64))?;
            let cap = annulus_capacity(k, &cloud.nodes(k))?;
            let (inner, outer) = annulus_radii(j, q);
            Ok(AnnulusTerm {
                j,
                inner,
                outer,
                nodes: cloud.len(),
                capacity: cap,
                term: cap / q.powf(j as f64 * decay),
                partial_sum: 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let series = AnnularSeries::build(q, k, terms);
    let (verdict, evidence) = thinness_verdict(&series, th);
    Ok(ThinnessReport {
        series,
        verdict,
        evidence,
        thresholds: th.clone(),
    })
}

fn thinness_verdict(s: &AnnularSeries, th: &SeriesThresholds) -> (ThinnessVerdict, String) {
    if s.terms.iter().all(|t| t.term == 0.0) {
        return (ThinnessVerdict::Thin, "all annuli empty: degenerate series with sum 0".into());
    }
    let (ratios, window) = s.tail();
    if ratios.iter().all(|&r| r < th.decay_ratio) {
        return (
            ThinnessVerdict::Thin,
            format!("tail ratios {} all below {}", fmt_list(&ratios), th.decay_ratio),
        );
    }
    let hi = window.iter().map(|t| t.term).fold(0.0, f64::max);
    let lo = window.iter().map(|t| t.term).fold(f64::INFINITY, f64::min);
    if lo >= th.floor_fraction * hi {
        return (
            ThinnessVerdict::NotThin,
            format!(
                "tail terms stay within {:.3} of their maximum (floor {}), ratios {}",
                lo / hi,
                th.floor_fraction,
                fmt_list(&ratios)
            ),
        );
    }
    (
        ThinnessVerdict::Inconclusive,
        format!("tail ratios {} neither decay nor stay bounded below", fmt_list(&ratios)),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WienerVerdict {
    Regular,
    Irregular,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WienerReport {
    pub x: Vec<f64>,
    #[serde(flatten)]
    pub series: AnnularSeries,
    pub verdict: WienerVerdict,
    pub evidence: String,
    pub thresholds: SeriesThresholds,
}

/// Wiener series Σ c(F_j) / q^{j(n−α)} over the shells q^{j+1} ≤ |y − x| ≤ q^j,
/// j = 0..=j_max, q in (0, 1).
pub fn wiener_regular(
    x: &[f64],
    region: &Region,
    k: &RieszKernel,
    q: f64,
    j_max: usize,
    th: &SeriesThresholds,
    seed: u64,
) -> Result<WienerReport> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!("Wiener ratio must lie in (0, 1), got {q}")));
    }
    if x.len() != k.n {
        return Err(Error::DimensionMismatch {
            expected: k.n,
            got: x.len(),
        });
    }
    let mode = SampleMode::for_alpha(k.alpha);
    let decay = k.n as f64 - k.alpha;
    let terms = (0..=j_max as i32)
        .into_par_iter()
        .map(|j| {
            let (inner, outer) = annulus_radii(j, q);
            let (cloud, _) = with_budget(th.budget, outer - inner, |s| {
                sample_shell_piece(region, x, inner, outer, mode, s, seed.wrapping_add(j as u64))
            })?;
            let cap = annulus_capacity(k, &cloud.nodes(k))?;
            Ok(AnnulusTerm {
                j,
                inner,
                outer,
                nodes: cloud.len(),
                capacity: cap,
                term: cap / q.powf(j as f64 * decay),
                partial_sum: 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let series = AnnularSeries::build(q, k, terms);
    let (ratios, window) = series.tail();
    let (verdict, evidence) = if window.iter().all(|t| t.term == 0.0) {
        (WienerVerdict::Irregular, "shells near x are empty: degenerate finite series".to_string())
    } else if ratios.iter().all(|&r| r >= th.decay_ratio) {
        (
            WienerVerdict::Regular,
            format!("tail ratios {} do not decay (threshold {})", fmt_list(&ratios), th.decay_ratio),
        )
    } else if ratios.iter().all(|&r| r < th.irregular_ratio) {
        (
            WienerVerdict::Irregular,
            format!("tail ratios {} all below {}", fmt_list(&ratios), th.irregular_ratio),
        )
    } else {
        (WienerVerdict::Inconclusive, format!("tail ratios {}", fmt_list(&ratios)))
    };
    Ok(WienerReport {
        x: x.to_vec(),
        series,
        verdict,
        evidence,
        thresholds: th.clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExistenceVerdict {
    Exists,
    DoesNotExist,
    NonexistenceCertified,
    Unknown,
}

/// Annular series settings shared by the existence and trichotomy checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeriesParams {
    pub q: f64,
    pub j_max: usize,
    pub thresholds: SeriesThresholds,
    /// Harmonic-measure values at or below this count as zero.
    pub zero_tol: f64,
}

impl Default for SeriesParams {
    fn default() -> Self {
        SeriesParams {
            q: 2.0,
            j_max: 8,
            thresholds: SeriesThresholds::default(),
            zero_tol: 2e-2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExistenceReport {
    pub verdict: ExistenceVerdict,
    pub y_polar: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thinness: Option<ThinnessReport>,
    /// (probe, ω(x, closure minus D; Ω)) when Y is not polar.
    pub outside_domain: Vec<(Vec<f64>, f64)>,
    pub evidence: String,
}

/// Decides whether the Green equilibrium measure of F exists: through
/// thinness of Ω^c at infinity when Y is polar, otherwise only the
/// necessary condition on the harmonic measure of the complement of D.
pub fn equilibrium_exists(spec: &DomainSpec, k: &RieszKernel, params: &SeriesParams) -> Result<ExistenceReport> {
    let y = spec.complement();
    let y_polar = y.is_polar();
    if y_polar {
        let th = thin_at_infinity(&spec.omega_complement(), k, params.q, params.j_max, &params.thresholds, spec.seed)?;
        let verdict = match th.verdict {
            ThinnessVerdict::Thin => ExistenceVerdict::Exists,
            ThinnessVerdict::NotThin => ExistenceVerdict::DoesNotExist,
            ThinnessVerdict::Inconclusive => ExistenceVerdict::Unknown,
        };
        let evidence = format!("Y is polar; complement of Omega: {}", th.evidence);
        return Ok(ExistenceReport {
            verdict,
            y_polar,
            thinness: Some(th),
            outside_domain: Vec::new(),
            evidence,
        });
    }
    let p = Problem::new(spec, k)?;
    let values = outside_domain_at_probes(&p)?;
    let worst = values.iter().map(|(_, v)| *v).fold(0.0, f64::max);
    let (verdict, evidence) = if values.is_empty() {
        (ExistenceVerdict::Unknown, "no probes in Omega".to_string())
    } else if worst <= params.zero_tol {
        (
            ExistenceVerdict::NonexistenceCertified,
            format!(
                "harmonic measure of the complement of D is at most {worst:.3e} <= {} at all {} probes",
                params.zero_tol,
                values.len()
            ),
        )
    } else {
        (
            ExistenceVerdict::Unknown,
            format!("harmonic measure of the complement of D reaches {worst:.3e}; sufficiency is open"),
        )
    };
    Ok(ExistenceReport {
        verdict,
        y_polar,
        thinness: None,
        outside_domain: values,
        evidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::Profile;
    use crate::sampling::sample_region;

    fn ball(r: f64) -> Region {
        Region::Ball {
            center: vec![0.0; 3],
            radius: r,
        }
    }

    #[test]
    fn single_node_capacity_is_a_power_of_its_patch() {
        let k = RieszKernel::new(1.5, 3).unwrap();
        let nodes = Nodes::new(3, vec![0.0; 3], vec![0.01]);
        let c = riesz_capacity(&k, &nodes, &SolverOptions::default()).unwrap();
        assert!((c - 0.01f64.powf(1.5)).abs() < 1e-12 * c);
    }

    #[test]
    fn newtonian_ball_capacity_is_its_radius() {
        let k = RieszKernel::newtonian();
        let c = sample_region(&ball(0.7), 3, SampleMode::Boundary, 0.06, 8.0, 1).unwrap();
        let cap = riesz_capacity(&k, &c.nodes(&k), &SolverOptions::default()).unwrap();
        assert!((cap - 0.7).abs() < 0.007, "{cap}");
    }

    #[test]
    fn capacity_scales_homogeneously() {
        let k = RieszKernel::new(1.5, 3).unwrap();
        let c = sample_region(&ball(1.0), 3, SampleMode::Volume, 0.25, 8.0, 1).unwrap();
        let a = riesz_capacity(&k, &c.nodes(&k), &SolverOptions::default()).unwrap();
        let b = riesz_capacity(&k, &c.scaled(3.0).nodes(&k), &SolverOptions::default()).unwrap();
        assert!((b / a - 3f64.powf(1.5)).abs() < 0.02 * 3f64.powf(1.5));
    }

    #[test]
    fn compact_sets_are_thin() {
        let k = RieszKernel::newtonian();
        let r = thin_at_infinity(&ball(1.5), &k, 2.0, 5, &SeriesThresholds::default(), 0).unwrap();
        assert_eq!(r.verdict, ThinnessVerdict::Thin);
        assert!(r.series.terms[3..].iter().all(|t| t.term == 0.0));
        let sums: Vec<f64> = r.series.terms.iter().map(|t| t.partial_sum).collect();
        assert!(sums.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn interior_points_are_regular() {
        let k = RieszKernel::newtonian();
        let th = SeriesThresholds {
            budget: 200,
            ..Default::default()
        };
        let r = wiener_regular(&[0.0, 0.0, 0.0], &ball(2.0), &k, 0.5, 6, &th, 0).unwrap();
        assert_eq!(r.verdict, WienerVerdict::Regular, "{}", r.evidence);
    }

    #[test]
    fn far_points_give_a_degenerate_series() {
        let k = RieszKernel::newtonian();
        let th = SeriesThresholds {
            budget: 100,
            ..Default::default()
        };
        let r = wiener_regular(&[3.0, 0.0, 0.0], &ball(1.0), &k, 0.5, 6, &th, 0).unwrap();
        assert_eq!(r.verdict, WienerVerdict::Irregular);
        assert!(r.series.terms[2..].iter().all(|t| t.nodes == 0));
    }

    #[test]
    fn thorn_tip_is_irregular() {
        let k = RieszKernel::newtonian();
        let thorn = Region::RotationBody {
            profile: Profile::Thorn { scale: 1.0 },
            start: 0.0,
            end: Some(1.0),
        };
        let th = SeriesThresholds {
            budget: 150,
            ..Default::default()
        };
        let r = wiener_regular(&[0.0, 0.0, 0.0], &thorn, &k, 0.25, 6, &th, 0).unwrap();
        assert_eq!(r.verdict, WienerVerdict::Irregular, "{}", r.evidence);
    }
}
