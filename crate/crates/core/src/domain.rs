//! Problem geometry: the domain D, its complement Y, the relatively closed
//! set F and the open set Ω = D \ F, together with their discretization.

use serde::{Deserialize, Serialize};

use crate::cloud::{Cell, CellKind, Cloud, Nodes};
use crate::error::{Error, Result};
use crate::measure::RegionPredicate;
use crate::numeric::norm;
use crate::region::Region;
use crate::riesz::RieszKernel;
use crate::sampling::{probe_points, sample_region, with_budget, SampleMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Resolution {
    /// Node budget for F.
    pub f_nodes: usize,
    /// Node budget for Y; defaults to `f_nodes`.
    pub y_nodes: Option<usize>,
    /// Fixed node spacing for F, overriding the budget.
    pub spacing: Option<f64>,
    /// Fixed node spacing for Y, overriding the budget.
    pub y_spacing: Option<f64>,
    /// Number of generated probes in Ω.
    pub probes: usize,
    /// Minimum probe distance to any node, in local spacings.
    pub probe_gap: f64,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution {
            f_nodes: 1000,
            y_nodes: None,
            spacing: None,
            y_spacing: None,
            probes: 16,
            probe_gap: 3.0,
        }
    }
}

/// Explicit nodes, each standing for a small ball of the given radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomCloud {
    pub points: Vec<Vec<f64>>,
    pub patch_radius: f64,
}

impl CustomCloud {
    fn cloud(&self, n: usize) -> Result<Cloud> {
        let mut c = Cloud::new(n);
        for p in &self.points {
            if p.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: p.len(),
                });
            }
            c.push(
                p,
                Cell {
                    kind: CellKind::Atom {
                        patch_radius: self.patch_radius,
                    },
                    size: 0.0,
                    spacing: 2.0 * self.patch_radius,
                },
            );
        }
        Ok(c)
    }
}

fn default_truncation() -> f64 {
    8.0
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub n: usize,
    /// The open domain D.
    pub domain: Region,
    /// The set F, relatively closed in D.
    #[serde(alias = "f")]
    pub set: Region,
    #[serde(default = "default_truncation")]
    pub truncation_radius: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub resolution: Resolution,
    /// For the Newtonian kernel the harmonic-measure statements need a
    /// connected Ω; otherwise `probe_region` must name the component.
    #[serde(default = "default_true")]
    pub omega_connected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_region: Option<Region>,
    /// Extra probes in Ω, used before the generated ones.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom_f: Option<CustomCloud>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom_y: Option<CustomCloud>,
}

impl DomainSpec {
    pub fn new(n: usize, domain: Region, set: Region) -> Self {
        DomainSpec {
            n,
            domain,
            set,
            truncation_radius: default_truncation(),
            seed: 0,
            resolution: Resolution::default(),
            omega_connected: true,
            probe_region: None,
            probes: Vec::new(),
            custom_f: None,
            custom_y: None,
        }
    }

    pub fn complement(&self) -> Region {
        self.domain.complement()
    }

    /// Ω^c = F ∪ Y.
    pub fn omega_complement(&self) -> Region {
        Region::Union {
            parts: vec![self.set.clone(), self.complement()],
        }
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        self.domain.contains_open(x)
    }

    pub fn in_omega(&self, x: &[f64]) -> bool {
        self.domain.contains_open(x) && !self.set.contains(x)
    }

    /// Predicate for Y ∪ ∂D ∪ {∞}, the part of the compactified space
    /// outside D.
    pub fn outside_domain(&self) -> RegionPredicate {
        let d = self.domain.clone();
        RegionPredicate::new("closure minus D", true, move |x| !d.contains_open(x))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n == 0 {
            return bad("dimension must be positive".into());
        }
        for (name, r) in [("domain", &self.domain), ("set", &self.set)] {
            r.validate(self.n)
                .map_err(|e| Error::InvalidArgument(format!("{name}: {e}")))?;
        }
        if let Some(p) = &self.probe_region {
            p.validate(self.n)
                .map_err(|e| Error::InvalidArgument(format!("probe_region: {e}")))?;
        }
        if !(self.truncation_radius > 0.0 && self.truncation_radius.is_finite()) {
            return bad(format!(
                "truncation_radius must be positive, got {}",
                self.truncation_radius
            ));
        }
        for (name, r) in [("set", &self.set), ("complement", &self.complement())] {
            if let Some(b) = r.bounding_radius() {
                if r.is_bounded() && !r.is_polar() && 2.0 * b >= self.truncation_radius {
                    return bad(format!(
                        "truncation_radius {} does not exceed the diameter {} of the bounded {name}",
                        self.truncation_radius,
                        2.0 * b
                    ));
                }
            }
        }
        for p in &self.probes {
            if p.len() != self.n {
                return Err(Error::DimensionMismatch {
                    expected: self.n,
                    got: p.len(),
                });
            }
            if !self.in_omega(p) {
                return Err(Error::OutsideSet {
                    point: p.clone(),
                    set: "Omega".into(),
                });
            }
        }
        let r = &self.resolution;
        if r.f_nodes == 0 || r.y_nodes == Some(0) {
            return bad("node budgets must be positive".into());
        }
        if r.spacing.map_or(false, |s| !(s > 0.0)) || r.y_spacing.map_or(false, |s| !(s > 0.0)) {
            return bad("spacings must be positive".into());
        }
        Ok(())
    }

    fn check_connectivity(&self, mode: SampleMode) -> Result<()> {
        if mode == SampleMode::Boundary && !self.omega_connected && self.probe_region.is_none() {
            return Err(Error::Precondition(
                "Omega is declared disconnected; name the component under study with probe_region"
                    .into(),
            ));
        }
        Ok(())
    }

    fn sample<K: Fn(&[f64]) -> bool>(
        &self,
        region: &Region,
        mode: SampleMode,
        spacing: Option<f64>,
        budget: usize,
        seed: u64,
        keep: K,
    ) -> Result<(Cloud, f64)> {
        let build = |s: f64| -> Result<Cloud> {
            Ok(sample_region(region, self.n, mode, s, self.truncation_radius, seed)?.filter(|x, _| keep(x)))
        };
        match spacing {
            Some(s) => Ok((build(s)?, s)),
            None => {
                let scale = region.bounding_radius().unwrap_or(self.truncation_radius).max(1e-6);
                with_budget(budget, scale / 4.0, build)
            }
        }
    }

    /// Samples F, Y and the probes for the given kernel.
    pub fn discretize(&self, k: &RieszKernel) -> Result<Discretization> {
        self.validate()?;
        if k.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: k.n,
            });
        }
        let mode = SampleMode::for_alpha(k.alpha);
        self.check_connectivity(mode)?;
        let res = &self.resolution;

        let (f_cloud, f_spacing) = match &self.custom_f {
            Some(c) => (c.cloud(self.n)?, 2.0 * c.patch_radius),
            None => self.sample(&self.set, mode, res.spacing, res.f_nodes, self.seed, |x| {
                self.domain.depth(x) > 1e-9 * (1.0 + norm(x)) && self.domain.contains_open(x)
            })?,
        };
        if let Some(c) = &self.custom_f {
            if c.points.iter().any(|p| !self.domain.contains_open(p)) {
                return Err(Error::InvalidArgument("custom F points must lie in D".into()));
            }
        }

        let y_region = self.complement();
        let (y_cloud, y_spacing) = match &self.custom_y {
            Some(c) => (c.cloud(self.n)?, 2.0 * c.patch_radius),
            None => {
                let budget = res.y_nodes.unwrap_or(res.f_nodes);
                self.sample(&y_region, mode, res.y_spacing.or(res.spacing), budget, self.seed ^ 0x9e37_79b9, |_| true)?
            }
        };
        let y_cloud = y_cloud.thinned_against(&f_cloud, 0.5);

        let f_nodes = f_cloud.nodes(k);
        let y_nodes = y_cloud.nodes(k);
        let probes = self.make_probes(&[&f_cloud, &y_cloud], res.probes);
        Ok(Discretization {
            spec: self.clone(),
            kernel: *k,
            mode,
            sampling_spacing: (f_spacing, y_spacing),
            f_cloud,
            y_cloud,
            f_nodes,
            y_nodes,
            probes,
        })
    }

    fn probe_box(&self) -> f64 {
        if let Some(b) = self.probe_region.as_ref().and_then(|r| r.bounding_radius()) {
            if self.probe_region.as_ref().map_or(false, |r| r.is_bounded()) {
                return b.min(0.9 * self.truncation_radius);
            }
        }
        let mut r: f64 = 1.0;
        for reg in [&self.set, &self.complement(), &self.domain] {
            if reg.is_bounded() {
                if let Some(b) = reg.bounding_radius() {
                    r = r.max(b);
                }
            }
        }
        (1.5 * r).min(0.9 * self.truncation_radius)
    }

    fn make_probes(&self, avoid: &[&Cloud], count: usize) -> Vec<Vec<f64>> {
        let mut out = self.probes.clone();
        let region = self.probe_region.clone();
        let omega = |x: &[f64]| self.in_omega(x) && region.as_ref().map_or(true, |r| r.contains(x));
        out.extend(probe_points(
            self.n,
            &omega,
            avoid,
            self.probe_box(),
            count,
            self.resolution.probe_gap,
            self.seed ^ 0x51ed,
        ));
        out
    }
}

/// Sampled version of a [`DomainSpec`] for one kernel.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub spec: DomainSpec,
    pub kernel: RieszKernel,
    pub mode: SampleMode,
    /// Spacing parameters the F and Y samplers ran at.
    pub sampling_spacing: (f64, f64),
    pub f_cloud: Cloud,
    pub y_cloud: Cloud,
    pub f_nodes: Nodes,
    pub y_nodes: Nodes,
    /// Probe points in Ω (user probes first).
    pub probes: Vec<Vec<f64>>,
}

impl Discretization {
    pub fn n(&self) -> usize {
        self.spec.n
    }

    /// Ω^c nodes: F followed by Y.
    pub fn omega_complement_nodes(&self) -> Nodes {
        self.f_nodes.concat(&self.y_nodes)
    }

    /// The spec with the sampling spacings pinned, so that a rerun at a
    /// different truncation radius keeps the local resolution.
    pub fn pinned_spec(&self) -> DomainSpec {
        let mut s = self.spec.clone();
        if s.custom_f.is_none() {
            s.resolution.spacing = Some(self.sampling_spacing.0);
        }
        if s.custom_y.is_none() {
            s.resolution.y_spacing = Some(self.sampling_spacing.1);
        }
        s
    }

    /// Largest nominal node spacing of F.
    pub fn f_spacing(&self) -> f64 {
        self.f_cloud.max_spacing()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball(r: f64) -> Region {
        Region::Ball {
            center: vec![0.0; 3],
            radius: r,
        }
    }

    #[test]
    fn round_trips_through_toml_like_json() {
        let mut s = DomainSpec::new(3, ball(1.0), ball(0.5));
        s.probes.push(vec![0.0, 0.0, 0.7]);
        let text = serde_json::to_string(&s).unwrap();
        let back: DomainSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn rejects_short_truncation() {
        let mut s = DomainSpec::new(3, Region::FullSpace, ball(1.0));
        s.truncation_radius = 1.5;
        assert!(s.validate().is_err());
    }

    #[test]
    fn clouds_respect_the_geometry() {
        let mut s = DomainSpec::new(
            3,
            ball(1.0),
            Region::Annulus {
                center: vec![0.0; 3],
                inner: 0.5,
                outer: 1.0,
            },
        );
        s.resolution.f_nodes = 300;
        let d = s.discretize(&RieszKernel::newtonian()).unwrap();
        assert!(d.f_cloud.len() > 100 && d.f_cloud.len() <= 300);
        for i in 0..d.f_cloud.len() {
            let x = d.f_cloud.point(i);
            assert!(s.in_domain(x) && s.set.contains(x));
        }
        for i in 0..d.y_cloud.len() {
            assert!(!s.domain.contains_open(d.y_cloud.point(i)));
        }
        assert_eq!(d.probes.len(), 16);
        for p in &d.probes {
            assert!(norm(p) < 0.5);
        }
    }

    #[test]
    fn disconnected_newtonian_needs_a_component() {
        let mut s = DomainSpec::new(3, Region::FullSpace, ball(1.0));
        s.omega_connected = false;
        assert!(s.discretize(&RieszKernel::newtonian()).is_err());
        s.probe_region = Some(ball(0.5));
        assert!(s.discretize(&RieszKernel::new(1.5, 3).unwrap()).is_ok());
    }
}
