//! Green kernel of a domain D: the Riesz kernel minus the potential of the
//! Dirac measure swept onto the complement Y.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use dashmap::DashMap;
use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::cloud::Nodes;
use crate::domain::Discretization;
use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::measure::{DiscreteMeasure, Point, DEFAULT_PATCH_RADIUS};
use crate::numeric::{dist2, gauss_legendre, CompensatedSum};
use crate::region::Region;
use crate::riesz::{cross_matrix, gram_matrix, mutual_energy, potential_at, potential_on_nodes, GramSystem, RieszKernel};
use crate::solver::{solve_potential_match, SolverOptions};

const CACHE_QUANTUM: f64 = 1e-12;

fn cache_key(x: &[f64]) -> Vec<i64> {
    x.iter().map(|v| (v / CACHE_QUANTUM).round() as i64).collect()
}

/// Green kernel handle. Sweeps onto the sampled complement are computed
/// with a single factorization of its Gram matrix; per-source results are
/// cached.
pub struct GreenKernel {
    kernel: RieszKernel,
    domain: Region,
    y_nodes: Nodes,
    factor: Option<Cholesky>,
    y_system: OnceLock<GramSystem>,
    cache: DashMap<Vec<i64>, Arc<Vec<f64>>>,
    opts: SolverOptions,
}

impl std::fmt::Debug for GreenKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GreenKernel")
            .field("kernel", &self.kernel)
            .field("y_nodes", &self.y_nodes.len())
            .field("cached", &self.cache.len())
            .finish()
    }
}

impl GreenKernel {
    pub fn new(kernel: RieszKernel, domain: Region, y_nodes: Nodes) -> Result<Self> {
        let factor = if y_nodes.is_empty() {
            None
        } else {
            Some(Cholesky::factor(&gram_matrix(&kernel, &y_nodes), y_nodes.len())?)
        };
        Ok(GreenKernel {
            kernel,
            domain,
            y_nodes,
            factor,
            y_system: OnceLock::new(),
            cache: DashMap::new(),
            opts: SolverOptions::default(),
        })
    }

    /// Kernel of the whole space: nothing to sweep onto, g = κ.
    pub fn full_space(kernel: RieszKernel) -> Self {
        GreenKernel {
            kernel,
            domain: Region::FullSpace,
            y_nodes: Nodes::empty(kernel.n),
            factor: None,
            y_system: OnceLock::new(),
            cache: DashMap::new(),
            opts: SolverOptions::default(),
        }
    }

    pub fn for_discretization(d: &Discretization) -> Result<Self> {
        Self::new(d.kernel, d.spec.domain.clone(), d.y_nodes.clone())
    }

    pub fn with_options(mut self, opts: SolverOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn kernel(&self) -> &RieszKernel {
        &self.kernel
    }

    pub fn domain(&self) -> &Region {
        &self.domain
    }

    pub fn y_nodes(&self) -> &Nodes {
        &self.y_nodes
    }

    pub fn cached_sources(&self) -> usize {
        self.cache.len()
    }

    fn check_support(&self, m: &DiscreteMeasure) -> Result<()> {
        for i in 0..m.len() {
            if m.weights()[i] > 0.0 && !self.domain.contains_open(m.point(i)) {
                return Err(Error::OutsideSet {
                    point: m.point(i).to_vec(),
                    set: "D".into(),
                });
            }
        }
        Ok(())
    }

    /// Weights on the Y nodes whose potential equals `target` there. Falls
    /// back to the cone projection if the plain solve goes negative.
    pub fn sweep_target(&self, target: &[f64]) -> Result<Vec<f64>> {
        let Some(f) = &self.factor else {
            return Ok(Vec::new());
        };
        let w = f.solve(target);
        let scale: f64 = w.iter().map(|v| v.abs()).sum();
        if w.iter().all(|&v| v >= -1e-9 * scale) {
            return Ok(w.into_iter().map(|v| v.max(0.0)).collect());
        }
        let sys = match self.y_system.get() {
            Some(s) => s,
            None => {
                let s = GramSystem::new(gram_matrix(&self.kernel, &self.y_nodes), vec![0.0; self.y_nodes.len()])?;
                let _ = self.y_system.set(s);
                self.y_system.get().expect("just set")
            }
        };
        Ok(solve_potential_match(sys, target, &self.opts)?.weights)
    }

    /// Swept Dirac at `x` as weights on the Y nodes, cached by position.
    pub fn dirac_sweep(&self, x: &[f64]) -> Result<Arc<Vec<f64>>> {
        let key = cache_key(x);
        if let Some(w) = self.cache.get(&key) {
            return Ok(w.clone());
        }
        let src = DiscreteMeasure::dirac(&Point(x.to_vec()));
        let target = potential_on_nodes(&self.kernel, &src, &self.y_nodes);
        let w = Arc::new(self.sweep_target(&target)?);
        Ok(self.cache.entry(key).or_insert(w).clone())
    }

    /// m swept onto Y in a single solve.
    pub fn swept_onto_y(&self, m: &DiscreteMeasure) -> Result<DiscreteMeasure> {
        if self.y_nodes.is_empty() {
            return Ok(DiscreteMeasure::zero(self.kernel.n));
        }
        let target = potential_on_nodes(&self.kernel, m, &self.y_nodes);
        let w = self.sweep_target(&target)?;
        Ok(self.y_nodes.measure(w))
    }

    /// g(x, y). Zero when y is outside D; coincident arguments use the
    /// default patch radius.
    pub fn green_eval(&self, x: &Point, y: &Point) -> Result<f64> {
        self.green_eval_patch(x, y, DEFAULT_PATCH_RADIUS)
    }

    pub fn green_eval_patch(&self, x: &Point, y: &Point, patch_radius: f64) -> Result<f64> {
        if x.dim() != self.kernel.n || y.dim() != self.kernel.n {
            return Err(Error::DimensionMismatch {
                expected: self.kernel.n,
                got: if x.dim() != self.kernel.n { x.dim() } else { y.dim() },
            });
        }
        if !self.domain.contains_open(&x.0) {
            return Err(Error::OutsideSet {
                point: x.0.clone(),
                set: "D".into(),
            });
        }
        if !self.domain.contains_open(&y.0) {
            return Ok(0.0);
        }
        let r2 = dist2(&x.0, &y.0);
        let direct = if r2.sqrt() < crate::measure::MERGE_DISTANCE {
            self.kernel.self_value(patch_radius)
        } else {
            self.kernel.of_dist2(r2)
        };
        if self.y_nodes.is_empty() {
            return Ok(direct);
        }
        let w = self.dirac_sweep(&x.0)?;
        let swept = self.y_nodes.measure(w.to_vec());
        Ok(direct - potential_at(&self.kernel, &swept, &y.0)[0])
    }

    /// Green potential of `m` at the given points; zero outside the closure of D.
    pub fn green_potential(&self, m: &DiscreteMeasure, probes: &[Point]) -> Result<Vec<f64>> {
        self.check_support(m)?;
        let flat: Vec<f64> = probes.iter().flat_map(|p| p.0.iter().copied()).collect();
        self.green_potential_at(m, &flat)
    }

    /// As [`Self::green_potential`] with flat probe coordinates.
    pub fn green_potential_at(&self, m: &DiscreteMeasure, coords: &[f64]) -> Result<Vec<f64>> {
        let n = self.kernel.n;
        if coords.len() % n != 0 {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: coords.len() % n,
            });
        }
        let direct = potential_at(&self.kernel, m, coords);
        let swept = self.swept_onto_y(m)?;
        let indirect = potential_at(&self.kernel, &swept, coords);
        Ok(coords
            .chunks(n)
            .zip(direct.iter().zip(&indirect))
            .map(|(x, (a, b))| if self.domain.contains(x) { a - b } else { 0.0 })
            .collect())
    }

    /// Green potential at target nodes, coincident pairs using the
    /// targets' patch radii.
    pub fn green_potential_on_nodes(&self, m: &DiscreteMeasure, nodes: &Nodes) -> Result<Vec<f64>> {
        let direct = potential_on_nodes(&self.kernel, m, nodes);
        if self.y_nodes.is_empty() {
            return Ok(direct);
        }
        let swept = self.swept_onto_y(m)?;
        let indirect = potential_at(&self.kernel, &swept, nodes.coords());
        Ok(direct.iter().zip(&indirect).map(|(a, b)| a - b).collect())
    }

    /// Green mutual energy of two measures on D.
    pub fn green_energy(&self, m1: &DiscreteMeasure, m2: &DiscreteMeasure) -> Result<f64> {
        self.check_support(m1)?;
        self.check_support(m2)?;
        if m1.is_empty() || m2.is_empty() {
            return Ok(0.0);
        }
        let direct = mutual_energy(&self.kernel, m1, m2);
        let Some(f) = &self.factor else {
            return Ok(direct);
        };
        let b1 = potential_on_nodes(&self.kernel, m1, &self.y_nodes);
        let b2 = potential_on_nodes(&self.kernel, m2, &self.y_nodes);
        let z1 = f.forward(&b1);
        let z2 = f.forward(&b2);
        let mut acc = CompensatedSum::new();
        for (a, b) in z1.iter().zip(&z2) {
            acc.add(a * b);
        }
        Ok(direct - acc.value())
    }

    /// Green Gram matrix on `nodes` (row-major): the Schur complement
    /// K_FF − K_FY K_YY⁻¹ K_YF, symmetric by construction.
    pub fn gram(&self, nodes: &Nodes) -> Vec<f64> {
        let mut g = gram_matrix(&self.kernel, nodes);
        let Some(f) = &self.factor else {
            return g;
        };
        let m = nodes.len();
        let ny = self.y_nodes.len();
        let kyf = cross_matrix(&self.kernel, nodes, &self.y_nodes);
        let z: Vec<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|i| f.forward(&kyf[i * ny..(i + 1) * ny]))
            .collect();
        g.par_chunks_mut(m.max(1)).enumerate().for_each(|(i, row)| {
            for j in 0..=i {
                row[j] -= crate::linalg::fdot(&z[i], &z[j]);
            }
        });
        for i in 0..m {
            for j in 0..i {
                g[j * m + i] = g[i * m + j];
            }
        }
        g
    }

    pub fn gram_system(&self, nodes: &Nodes, rhs: Vec<f64>) -> Result<GramSystem> {
        GramSystem::new(self.gram(nodes), rhs)
    }
}

/// Sweeps `m` onto the nodes `q` with the Riesz kernel.
fn riesz_sweep(k: &RieszKernel, q: &Nodes, sys: &GramSystem, m: &DiscreteMeasure, opts: &SolverOptions) -> Result<DiscreteMeasure> {
    let target = potential_on_nodes(k, m, q);
    let sol = solve_potential_match(sys, &target, opts)?;
    Ok(q.measure(sol.weights))
}

/// |I(μ^Q, ν) − I(μ, ν^Q)| / max(I(μ^Q, ν), I(μ, ν^Q), 1).
pub fn check_symmetry_relation(
    k: &RieszKernel,
    q: &Nodes,
    m1: &DiscreteMeasure,
    m2: &DiscreteMeasure,
    opts: &SolverOptions,
) -> Result<f64> {
    let sys = GramSystem::new(gram_matrix(k, q), vec![0.0; q.len()])?;
    let s1 = riesz_sweep(k, q, &sys, m1, opts)?;
    let s2 = riesz_sweep(k, q, &sys, m2, opts)?;
    let lhs = mutual_energy(k, &s1, m2);
    let rhs = mutual_energy(k, m1, &s2);
    Ok((lhs - rhs).abs() / lhs.max(rhs).max(1.0))
}

/// Newtonian Green function of the ball in R^3 by Kelvin reflection.
pub fn analytic_green_ball(x: &[f64], y: &[f64], radius: f64, center: &[f64]) -> Result<f64> {
    for p in [x, y] {
        if p.len() != 3 || center.len() != 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                got: p.len(),
            });
        }
        if dist2(p, center).sqrt() >= radius {
            return Err(Error::OutsideSet {
                point: p.to_vec(),
                set: "ball".into(),
            });
        }
    }
    let d = dist2(x, y).sqrt();
    if d == 0.0 {
        return Err(Error::InvalidArgument("coincident arguments".into()));
    }
    let xr: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
    let s2: f64 = xr.iter().map(|v| v * v).sum();
    if s2 == 0.0 {
        return Ok(1.0 / dist2(y, center).sqrt() - 1.0 / radius);
    }
    let star: Vec<f64> = center
        .iter()
        .zip(&xr)
        .map(|(c, v)| c + radius * radius * v / s2)
        .collect();
    Ok(1.0 / d - radius / s2.sqrt() / dist2(&star, y).sqrt())
}

/// Normalizing constant Γ(n/2) π^(−n/2−1) sin(πα/2) of the α-Poisson kernel.
pub fn alpha_poisson_constant(n: usize, alpha: f64) -> f64 {
    gamma(n as f64 / 2.0) * PI.powf(-(n as f64) / 2.0 - 1.0) * (PI * alpha / 2.0).sin()
}

/// Density at y of the Riesz sweep of ε_x onto the closed ball (α < 2).
pub fn alpha_poisson_ball_density(
    x: &[f64],
    y: &[f64],
    radius: f64,
    center: &[f64],
    alpha: f64,
) -> Result<f64> {
    let n = x.len();
    if y.len() != n || center.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::InvalidKernel { alpha, n });
    }
    let dx = dist2(x, center);
    let dy = dist2(y, center);
    let r2 = radius * radius;
    if dx <= r2 {
        return Err(Error::OutsideSet {
            point: x.to_vec(),
            set: "exterior of the ball".into(),
        });
    }
    if dy >= r2 {
        return Err(Error::OutsideSet {
            point: y.to_vec(),
            set: "interior of the ball".into(),
        });
    }
    Ok(alpha_poisson_constant(n, alpha)
        * ((dx - r2) / (r2 - dy)).powf(alpha / 2.0)
        * dist2(x, y).powf(-(n as f64) / 2.0))
}

/// Mass that the α-Poisson density of a source at distance `d` from the
/// centre puts on the part of the ball (in R^3) with radial coordinate in
/// [r0, r1] and cosine of the angle to the source direction in [c0, c1].
/// The angular integral is done in closed form; the radial one by
/// Gauss–Legendre after a substitution that removes the boundary singularity.
pub fn alpha_poisson_bin_mass(
    d: f64,
    radius: f64,
    alpha: f64,
    (r0, r1): (f64, f64),
    (c0, c1): (f64, f64),
) -> f64 {
    let c = alpha_poisson_constant(3, alpha);
    let angular = |rho: f64| {
        let a = rho * rho + d * d;
        let b = 2.0 * rho * d;
        if b < 1e-9 * a {
            (c1 - c0) * a.powf(-1.5)
        } else {
            2.0 / b * ((a - b * c1).powf(-0.5) - (a - b * c0).powf(-0.5))
        }
    };
    // gap = radius - rho, passed separately so that r² − ρ² keeps its digits
    let radial = |rho: f64, gap: f64| {
        c * ((d * d - radius * radius) / (gap * (radius + rho))).powf(alpha / 2.0)
            * 2.0
            * PI
            * rho
            * rho
            * angular(rho)
    };
    let p = 8.0;
    let (gx, gw) = gauss_legendre(20);
    let panels = 16;
    let mut acc = CompensatedSum::new();
    let len = r1 - r0;
    for k in 0..panels {
        let (ta, tb) = (k as f64 / panels as f64, (k + 1) as f64 / panels as f64);
        for (xi, wi) in gx.iter().zip(&gw) {
            let t = ta + 0.5 * (tb - ta) * (xi + 1.0);
            let drop = len * t.powf(p);
            let jac = len * p * t.powf(p - 1.0);
            acc.add(0.5 * (tb - ta) * wi * jac * radial(r1 - drop, (radius - r1) + drop));
        }
    }
    acc.value()
}

/// Total swept mass of an exterior Dirac at distance `d` onto the ball in R^3.
pub fn alpha_poisson_ball_mass(d: f64, radius: f64, alpha: f64) -> f64 {
    alpha_poisson_bin_mass(d, radius, alpha, (0.0, radius), (-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kelvin_centre_reduces() {
        let v = analytic_green_ball(&[0.0; 3], &[0.0, 0.5, 0.0], 1.0, &[0.0; 3]).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
        let a = analytic_green_ball(&[0.3, 0.1, 0.0], &[0.0, 0.4, 0.2], 1.0, &[0.0; 3]).unwrap();
        let b = analytic_green_ball(&[0.0, 0.4, 0.2], &[0.3, 0.1, 0.0], 1.0, &[0.0; 3]).unwrap();
        assert!((a - b).abs() < 1e-13);
        let edge = analytic_green_ball(&[0.3, 0.0, 0.0], &[0.0, 0.999, 0.0], 1.0, &[0.0; 3]).unwrap();
        assert!(edge.abs() < 5e-3);
    }

    #[test]
    fn poisson_constant_in_three_dimensions() {
        let a: f64 = 1.5;
        let c = alpha_poisson_constant(3, a);
        assert!((c - (PI * a / 2.0).sin() / (2.0 * PI * PI)).abs() < 1e-14);
    }

    #[test]
    fn poisson_mass_against_brute_quadrature() {
        // 2D tensor Gauss-Legendre in (rho, cos) after rho = 1 - t^4
        let (d, alpha) = (2.0, 1.5);
        let (gx, gw) = gauss_legendre(40);
        let mut brute = 0.0;
        for (ti, twi) in gx.iter().zip(&gw) {
            let t = 0.5 * (ti + 1.0);
            let rho: f64 = 1.0 - t.powi(4);
            let jac = 0.5 * 4.0 * t.powi(3);
            for (ci, cwi) in gx.iter().zip(&gw) {
                let y = [rho * ci, rho * (1.0 - ci * ci).sqrt(), 0.0];
                let dens = alpha_poisson_ball_density(&[d, 0.0, 0.0], &y, 1.0, &[0.0; 3], alpha).unwrap();
                brute += twi * cwi * jac * dens * 2.0 * PI * rho * rho;
            }
        }
        let m = alpha_poisson_ball_mass(d, 1.0, alpha);
        assert!((m - brute).abs() < 1e-5 * m, "{m} vs {brute}");
        assert!(m < 1.0);
        let parts: f64 = [(-1.0, 0.0), (0.0, 1.0)]
            .iter()
            .flat_map(|&c| [(0.0, 0.5), (0.5, 1.0)].map(|r| alpha_poisson_bin_mass(d, 1.0, alpha, r, c)))
            .sum();
        assert!((parts - m).abs() < 1e-10);
        assert!(alpha_poisson_ball_mass(100.0, 1.0, alpha) < alpha_poisson_ball_mass(10.0, 1.0, alpha));
    }

    #[test]
    fn full_space_green_is_riesz() {
        let g = GreenKernel::full_space(RieszKernel::new(1.5, 3).unwrap());
        let x = Point(vec![0.0, 0.0, 0.0]);
        let y = Point(vec![0.0, 2.0, 0.0]);
        assert_eq!(g.green_eval(&x, &y).unwrap(), g.kernel().eval(&x.0, &y.0));
    }
}
