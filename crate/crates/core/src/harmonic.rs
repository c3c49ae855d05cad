//! Harmonic measure of Ω (the Dirac measure at a point of Ω swept onto Ω^c
//! with the Riesz kernel, the lost mass sitting at infinity), the
//! mass-preservation trichotomy and the Deny positivity-of-mass checks.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::balayage::{sweep_green, Outcome, Problem, Route, MASS_TOL};
use crate::equilibrium::{thin_at_infinity, SeriesParams, ThinnessReport, ThinnessVerdict};
use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, Point, RegionPredicate};
use crate::numeric::max_abs;
use crate::riesz::potential_on_nodes;
use crate::sampling::SampleMode;
use crate::solver::solve_potential_match;

#[derive(Clone, Debug)]
pub struct HarmonicMeasureResult {
    pub x: Vec<f64>,
    /// Swept Dirac on the Ω^c nodes (F nodes first, then Y nodes).
    pub swept: DiscreteMeasure,
    pub mass_on_f: f64,
    pub mass_on_y: f64,
    pub value_on_e: f64,
    /// 1 − swept mass, clipped to [−MASS_TOL, 1].
    pub mass_at_infinity: f64,
    /// Value on the whole compactified space.
    pub total_check: f64,
    pub kkt_residual: f64,
}

/// Swept Dirac at `x` on the Ω^c nodes.
fn sweep_dirac(p: &Problem, x: &[f64]) -> Result<(DiscreteMeasure, f64)> {
    let spec = &p.disc.spec;
    if x.len() != spec.n {
        return Err(Error::DimensionMismatch {
            expected: spec.n,
            got: x.len(),
        });
    }
    if !spec.in_omega(x) {
        return Err(Error::OutsideSet {
            point: x.to_vec(),
            set: "Omega",
        });
    }
    let nodes = p.disc.omega_complement_nodes();
    if nodes.is_empty() {
        return Ok((DiscreteMeasure::zero(spec.n), 0.0));
    }
    let target = potential_on_nodes(p.kernel(), &DiscreteMeasure::dirac(&Point(x.to_vec())), &nodes);
    let sol = solve_potential_match(p.union_system()?, &target, &p.opts)?;
    Ok((nodes.measure(sol.weights), sol.kkt_residual))
}

/// ω(x, e; Ω).
pub fn harmonic_measure(p: &Problem, x: &[f64], e: &RegionPredicate) -> Result<HarmonicMeasureResult> {
    let (swept, kkt_residual) = sweep_dirac(p, x)?;
    let nf = p.f_len();
    let w = swept.weights();
    let mass_on_f: f64 = w[..nf.min(w.len())].iter().sum();
    let mass_on_y: f64 = w[nf.min(w.len())..].iter().sum();
    let total = mass_on_f + mass_on_y;
    let mass_at_infinity = (1.0 - total).clamp(-MASS_TOL, 1.0);
    let mut value_on_e: f64 = (0..swept.len())
        .filter(|&i| e.contains(swept.point(i)))
        .map(|i| w[i])
        .sum();
    if e.contains_infinity() {
        value_on_e += mass_at_infinity;
    }
    Ok(HarmonicMeasureResult {
        x: x.to_vec(),
        total_check: total + mass_at_infinity,
        swept,
        mass_on_f,
        mass_on_y,
        value_on_e,
        mass_at_infinity,
        kkt_residual,
    })
}

/// One row of a probe table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub probe: Vec<f64>,
    pub mass_on_f: f64,
    pub mass_on_y: f64,
    pub mass_at_infinity: f64,
    /// ω(x, closure minus D; Ω) = mass on Y plus mass at infinity.
    pub outside_domain: f64,
}

impl From<&HarmonicMeasureResult> for ProbeRow {
    fn from(h: &HarmonicMeasureResult) -> Self {
        ProbeRow {
            probe: h.x.clone(),
            mass_on_f: h.mass_on_f,
            mass_on_y: h.mass_on_y,
            mass_at_infinity: h.mass_at_infinity,
            outside_domain: h.mass_on_y + h.mass_at_infinity,
        }
    }
}

pub fn probe_rows(p: &Problem) -> Result<Vec<ProbeRow>> {
    let everything = RegionPredicate::everything();
    p.disc
        .probes
        .iter()
        .map(|x| harmonic_measure(p, x, &everything).map(|h| ProbeRow::from(&h)))
        .collect()
}

/// (probe, ω(x, closure minus D; Ω)) at every probe.
pub fn outside_domain_at_probes(p: &Problem) -> Result<Vec<(Vec<f64>, f64)>> {
    Ok(probe_rows(p)?.into_iter().map(|r| (r.probe, r.outside_domain)).collect())
}

pub fn write_probe_csv<W: Write>(rows: &[ProbeRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "probe,mass_on_f,mass_on_y,mass_at_infinity,outside_domain")?;
    for r in rows {
        let p: Vec<String> = r.probe.iter().map(|v| format!("{v:.6}")).collect();
        writeln!(
            w,
            "{},{:.12e},{:.12e},{:.12e},{:.12e}",
            p.join(" "),
            r.mass_on_f,
            r.mass_on_y,
            r.mass_at_infinity,
            r.outside_domain
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrichotomyReport {
    pub probes: Vec<ProbeRow>,
    /// ω(x, closure minus D) vanishes at every probe.
    pub condition_ii: bool,
    pub thinness: ThinnessReport,
    /// Ω^c not thin at infinity and ω(x, Y) vanishing at every probe; None
    /// when the thinness verdict is inconclusive.
    pub condition_iii: Option<bool>,
    /// Whether (ii) and (iii) agree; None when (iii) is undecided or the
    /// connectedness proviso does not hold.
    pub agree: Option<bool>,
    /// Verdict on mass preservation, read off (ii).
    pub mass_preserved: bool,
    pub proviso_holds: bool,
    pub zero_tol: f64,
    pub y_polar: bool,
}

/// Evaluates the harmonic-measure and thinness characterizations of mass
/// preservation at the problem's probes.
pub fn classify_mass_preservation(p: &Problem, params: &SeriesParams) -> Result<TrichotomyReport> {
    let spec = &p.disc.spec;
    if p.disc.probes.is_empty() {
        return Err(Error::Precondition("no probes in Omega".into()));
    }
    let rows = probe_rows(p)?;
    let tol = params.zero_tol;
    let condition_ii = rows.iter().all(|r| r.outside_domain <= tol);
    let thinness = thin_at_infinity(&spec.omega_complement(), p.kernel(), params.q, params.j_max, &params.thresholds, spec.seed)?;
    let y_vanishes = rows.iter().all(|r| r.mass_on_y <= tol);
    let condition_iii = match thinness.verdict {
        ThinnessVerdict::Inconclusive => None,
        v => Some(v == ThinnessVerdict::NotThin && y_vanishes),
    };
    let proviso_holds = p.disc.mode == SampleMode::Volume || spec.omega_connected;
    let agree = match (proviso_holds, condition_iii) {
        (true, Some(iii)) => Some(iii == condition_ii),
        _ => None,
    };
    Ok(TrichotomyReport {
        probes: rows,
        condition_ii,
        thinness,
        condition_iii,
        agree,
        mass_preserved: condition_ii,
        proviso_holds,
        zero_tol: tol,
        y_polar: spec.complement().is_polar(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassLossReport {
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub mass_before: f64,
    pub mass_after: f64,
    pub deficit: f64,
    /// Mass the union sweep leaves on Y.
    pub y_mass: f64,
    pub margin: f64,
}

fn refused(reason: String, mass_before: f64, margin: f64) -> MassLossReport {
    MassLossReport {
        outcome: Outcome::PreconditionFailed,
        reason: Some(reason),
        mass_before,
        mass_after: f64::NAN,
        deficit: f64::NAN,
        y_mass: f64::NAN,
        margin,
    }
}

/// Strict loss of mass under g-balayage for α < 2, Y with interior and μ
/// not carried by F.
pub fn check_mass_loss(p: &Problem, mu: &DiscreteMeasure, margin: f64) -> Result<MassLossReport> {
    let spec = &p.disc.spec;
    let before = mu.total_mass();
    if p.kernel().alpha >= 2.0 {
        return Ok(refused("requires alpha < 2".into(), before, margin));
    }
    if spec.complement().is_polar() || p.disc.y_nodes.is_empty() {
        return Ok(refused("requires Y with nonempty interior".into(), before, margin));
    }
    let off_f = (0..mu.len()).any(|i| mu.weights()[i] > 0.0 && !spec.set.contains(mu.point(i)));
    if !off_f {
        return Ok(refused("requires mu to charge a point off F".into(), before, margin));
    }
    let union = sweep_green(p, mu, Route::ViaUnionSweep)?;
    let direct = sweep_green(p, mu, Route::DirectGreenProjection)?;
    let deficit = before - direct.mass_after;
    let y_mass = union.y_mass.unwrap_or(0.0);
    let outcome = if deficit >= margin && y_mass > 0.0 {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    Ok(MassLossReport {
        outcome,
        reason: None,
        mass_before: before,
        mass_after: direct.mass_after,
        deficit,
        y_mass,
        margin,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenyReport {
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Largest ω(x, closure minus D; Ω) over the probes.
    pub worst_outside_domain: f64,
    /// max (U_g^μ − U_g^ν) over F nodes, relative to the potential scale.
    pub hypothesis_margin: f64,
    pub mass_mu: f64,
    pub mass_nu: f64,
    pub tol: f64,
}

/// μ(D) ≤ ν(D) whenever U_g^μ ≤ U_g^ν on F, provided the harmonic measure
/// of the complement of D vanishes on Ω.
pub fn deny_check(p: &Problem, mu: &DiscreteMeasure, nu: &DiscreteMeasure, zero_tol: f64, tol: f64) -> Result<DenyReport> {
    let worst = outside_domain_at_probes(p)?
        .iter()
        .map(|(_, v)| *v)
        .fold(0.0, f64::max);
    deny_check_with(p, mu, nu, worst, zero_tol, tol)
}

/// As [`deny_check`] with the probe maximum of ω(x, closure minus D; Ω)
/// already computed.
pub fn deny_check_with(
    p: &Problem,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    worst_outside_domain: f64,
    zero_tol: f64,
    tol: f64,
) -> Result<DenyReport> {
    let idx = p.all_f();
    let um = p.green_potential_on_f(mu, &idx)?;
    let un = p.green_potential_on_f(nu, &idx)?;
    let scale = max_abs(&um).max(max_abs(&un)).max(f64::MIN_POSITIVE);
    let hyp = um.iter().zip(&un).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max) / scale;
    let (mm, mn) = (mu.total_mass(), nu.total_mass());
    let (outcome, reason) = if worst_outside_domain > zero_tol {
        (
            Outcome::PreconditionFailed,
            Some(format!(
                "harmonic measure of the complement of D reaches {worst_outside_domain:.3e} > {zero_tol}"
            )),
        )
    } else if hyp > tol {
        (
            Outcome::PreconditionFailed,
            Some(format!("potential hypothesis violated on F by {hyp:.3e}")),
        )
    } else if mm <= mn + tol * mm.max(mn) {
        (Outcome::Pass, None)
    } else {
        (Outcome::Fail, Some(format!("mass {mm:.6e} exceeds {mn:.6e}")))
    };
    Ok(DenyReport {
        outcome,
        reason,
        worst_outside_domain,
        hypothesis_margin: hyp,
        mass_mu: mm,
        mass_nu: mn,
        tol,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub x: Vec<f64>,
    pub outside_domain: f64,
    /// max |U_g^ν₀ − U_g^μ₀| over F nodes, relative to max U_g^μ₀.
    pub potential_mismatch: f64,
    /// max (U_g^μ₀ − U_g^ν₀) over F nodes, relative.
    pub hypothesis_margin: f64,
    pub mass_mu: f64,
    pub mass_nu: f64,
    pub mass_gap: f64,
    pub margin: f64,
    pub found: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Counterexample {
    pub report: CounterexampleReport,
    /// (μ₀, ν₀) when a mass gap was found.
    pub pair: Option<(DiscreteMeasure, DiscreteMeasure)>,
}

/// μ₀ = ε_x and ν₀ = its g-balayage onto F: equal potentials on F, but
/// ν₀ lighter when the harmonic measure of the complement of D is
/// positive at x.
pub fn deny_counterexample(p: &Problem, x: &[f64], zero_tol: f64, margin: f64) -> Result<Counterexample> {
    let h = harmonic_measure(p, x, &p.disc.spec.outside_domain())?;
    if h.value_on_e <= zero_tol {
        return Err(Error::Precondition(format!(
            "harmonic measure of the complement of D at x is {:.3e} <= {zero_tol}; no counterexample exists",
            h.value_on_e
        )));
    }
    let mu0 = DiscreteMeasure::dirac(&Point(x.to_vec()));
    let sweep = sweep_green(p, &mu0, Route::DirectGreenProjection)?;
    let nu0 = sweep.swept.positive_part();
    let idx = p.all_f();
    let um = p.green_potential_on_f(&mu0, &idx)?;
    let un = p.green_potential_of_weights(&idx, &sweep.weights);
    let scale = max_abs(&um).max(f64::MIN_POSITIVE);
    let mismatch = um.iter().zip(&un).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
    let hyp = um.iter().zip(&un).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max) / scale;
    let gap = mu0.total_mass() - nu0.total_mass();
    let found = gap >= margin;
    let report = CounterexampleReport {
        x: x.to_vec(),
        outside_domain: h.value_on_e,
        potential_mismatch: mismatch,
        hypothesis_margin: hyp,
        mass_mu: mu0.total_mass(),
        mass_nu: nu0.total_mass(),
        mass_gap: gap,
        margin,
        found,
        diagnostic: (!found).then(|| format!("mass gap {gap:.3e} below the margin {margin}")),
    };
    Ok(Counterexample {
        pair: found.then_some((mu0, nu0)),
        report,
    })
}
