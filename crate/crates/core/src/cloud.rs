//! Sampled sets: nodes carry a cell (the piece of the set they stand for),
//! from which kernel-specific patch radii are derived.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::OnceLock;

use statrs::function::gamma::gamma;

use crate::measure::{DiscreteMeasure, RegionPredicate};
use crate::numeric::{dist2, gauss_legendre, halton, norm};
use crate::riesz::RieszKernel;

/// Target nodes with patch radii.
#[derive(Clone, Debug, PartialEq)]
pub struct Nodes {
    dim: usize,
    coords: Vec<f64>,
    patch_radii: Vec<f64>,
}

impl Nodes {
    pub fn new(dim: usize, coords: Vec<f64>, patch_radii: Vec<f64>) -> Self {
        assert_eq!(coords.len(), dim * patch_radii.len());
        Nodes {
            dim,
            coords,
            patch_radii,
        }
    }

    pub fn empty(dim: usize) -> Self {
        Nodes::new(dim, Vec::new(), Vec::new())
    }

    /// Support and patch radii of a measure.
    pub fn from_measure(m: &DiscreteMeasure) -> Self {
        Nodes::new(m.dim(), m.coords().to_vec(), m.patch_radii().to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.patch_radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patch_radii.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn patch_radius(&self, i: usize) -> f64 {
        self.patch_radii[i]
    }

    pub fn patch_radii(&self) -> &[f64] {
        &self.patch_radii
    }

    pub fn concat(&self, other: &Nodes) -> Nodes {
        let mut c = self.coords.clone();
        c.extend_from_slice(&other.coords);
        let mut h = self.patch_radii.clone();
        h.extend_from_slice(&other.patch_radii);
        Nodes::new(self.dim, c, h)
    }

    pub fn select(&self, idx: &[usize]) -> Nodes {
        Nodes::new(
            self.dim,
            idx.iter().flat_map(|&i| self.point(i).to_vec()).collect(),
            idx.iter().map(|&i| self.patch_radii[i]).collect(),
        )
    }

    /// Index of the node within `tol` of `x`, if any.
    pub fn find(&self, x: &[f64], tol: f64) -> Option<usize> {
        (0..self.len()).find(|&i| dist2(self.point(i), x) <= tol * tol)
    }

    /// Measure on these nodes with the given weights.
    pub fn measure(&self, weights: Vec<f64>) -> DiscreteMeasure {
        DiscreteMeasure::from_parts(self.dim, self.coords.clone(), weights, self.patch_radii.clone())
            .expect("nodes carry valid patch radii and distinct points")
    }
}

/// Geometry of the piece of a set that a node stands for.
#[derive(Clone, Debug, PartialEq)]
pub enum CellKind {
    /// Full-dimensional cell.
    Volume,
    /// Flat patch of a hypersurface; `sphere` lets sub-quadrature points be
    /// projected back onto a spherical surface.
    Surface {
        normal: Vec<f64>,
        sphere: Option<(Vec<f64>, f64)>,
    },
    /// Axial segment of a slender tube of radius exp(ln_radius).
    Segment { axis: Vec<f64>, ln_radius: f64 },
    /// Isolated node with an explicit patch radius.
    Atom { patch_radius: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub kind: CellKind,
    /// Volume, area or length of the cell.
    pub size: f64,
    /// Nominal distance to neighbouring nodes.
    pub spacing: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Cloud {
    dim: usize,
    coords: Vec<f64>,
    cells: Vec<Cell>,
}

/// Unit-ball volume in dimension d.
pub fn unit_ball_volume(d: usize) -> f64 {
    PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0 + 1.0)
}

impl Cloud {
    pub fn new(dim: usize) -> Self {
        Cloud {
            dim,
            coords: Vec::new(),
            cells: Vec::new(),
        }
    }

    pub fn push(&mut self, x: &[f64], cell: Cell) {
        debug_assert_eq!(x.len(), self.dim);
        self.coords.extend_from_slice(x);
        self.cells.push(cell);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn cell(&self, i: usize) -> &Cell {
        &self.cells[i]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn extend(&mut self, other: &Cloud) {
        if self.cells.is_empty() {
            self.dim = other.dim;
        }
        self.coords.extend_from_slice(&other.coords);
        self.cells.extend(other.cells.iter().cloned());
    }

    pub fn select(&self, idx: &[usize]) -> Cloud {
        let mut c = Cloud::new(self.dim);
        for &i in idx {
            c.push(self.point(i), self.cells[i].clone());
        }
        c
    }

    pub fn filter<F: Fn(&[f64], &Cell) -> bool>(&self, keep: F) -> Cloud {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| keep(self.point(i), &self.cells[i]))
            .collect();
        self.select(&idx)
    }

    pub fn map_cells<F: Fn(&Cell) -> Cell>(&self, f: F) -> Cloud {
        Cloud {
            dim: self.dim,
            coords: self.coords.clone(),
            cells: self.cells.iter().map(f).collect(),
        }
    }

    pub fn restrict(&self, e: &RegionPredicate) -> Cloud {
        self.filter(|x, _| e.contains(x))
    }

    /// Drops nodes lying within `factor` times the larger nominal spacing of
    /// a node of `other`; used where two sampled sets touch.
    pub fn thinned_against(&self, other: &Cloud, factor: f64) -> Cloud {
        self.filter(|x, c| {
            (0..other.len()).all(|j| {
                let s = factor * c.spacing.max(other.cells[j].spacing);
                dist2(x, other.point(j)) >= s * s
            })
        })
    }

    pub fn max_spacing(&self) -> f64 {
        self.cells.iter().map(|c| c.spacing).fold(0.0, f64::max)
    }

    /// All coordinates and cells multiplied by `s > 0`.
    pub fn scaled(&self, s: f64) -> Cloud {
        let d = self.dim as i32;
        let cells = self
            .cells
            .iter()
            .map(|c| {
                let (kind, size) = match &c.kind {
                    CellKind::Volume => (CellKind::Volume, c.size * s.powi(d)),
                    CellKind::Surface { normal, sphere } => (
                        CellKind::Surface {
                            normal: normal.clone(),
                            sphere: sphere
                                .as_ref()
                                .map(|(cen, r)| (cen.iter().map(|v| v * s).collect(), r * s)),
                        },
                        c.size * s.powi(d - 1),
                    ),
                    CellKind::Segment { axis, ln_radius } => (
                        CellKind::Segment {
                            axis: axis.clone(),
                            ln_radius: ln_radius + s.ln(),
                        },
                        c.size * s,
                    ),
                    CellKind::Atom { patch_radius } => (
                        CellKind::Atom {
                            patch_radius: patch_radius * s,
                        },
                        c.size,
                    ),
                };
                Cell {
                    kind,
                    size,
                    spacing: c.spacing * s,
                }
            })
            .collect();
        Cloud {
            dim: self.dim,
            coords: self.coords.iter().map(|v| v * s).collect(),
            cells,
        }
    }

    /// Nodes with kernel-specific patch radii, see [`patch_radii`].
    pub fn nodes(&self, k: &RieszKernel) -> Nodes {
        Nodes::new(self.dim, self.coords.clone(), patch_radii(self, k))
    }

    /// Half the nearest-neighbour distance at every node.
    pub fn half_nn_spacing(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let x = self.point(i);
                let d2 = (0..self.len())
                    .filter(|&j| j != i)
                    .map(|j| dist2(x, self.point(j)))
                    .fold(f64::INFINITY, f64::min);
                if d2.is_finite() {
                    0.5 * d2.sqrt()
                } else {
                    0.5 * self.cells[i].spacing
                }
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W, k: &RieszKernel) -> std::io::Result<()> {
        self.nodes(k).measure(vec![0.0; self.len()]).write_csv(&mut w)
    }
}

/// Self value of a unit mass spread uniformly over the cell.
pub fn cell_self_value(cell: &Cell, k: &RieszKernel) -> f64 {
    let n = k.n;
    let p = k.exponent();
    match &cell.kind {
        CellKind::Atom { patch_radius } => k.self_value(*patch_radius),
        CellKind::Volume => {
            let a = (cell.size / unit_ball_volume(n)).powf(1.0 / n as f64);
            n as f64 / k.alpha * a.powf(p)
        }
        CellKind::Surface { .. } => {
            let a = (cell.size / unit_ball_volume(n - 1)).powf(1.0 / (n - 1) as f64);
            if k.alpha > 1.0 {
                (n - 1) as f64 / (k.alpha - 1.0) * a.powf(p)
            } else {
                n as f64 / k.alpha * a.powf(p)
            }
        }
        CellKind::Segment { ln_radius, .. } => segment_self_value(cell.size, *ln_radius, p),
    }
}

/// (1/l) ∫_{-l/2}^{l/2} (z² + ρ²)^{p/2} dz with ρ = exp(ln_rho), evaluated
/// through z = ρ sinh t so that vanishing radii stay finite in log space.
fn segment_self_value(l: f64, ln_rho: f64, p: f64) -> f64 {
    let ln_u = (0.5 * l).ln() - ln_rho;
    let big_t = if ln_u > 30.0 {
        ln_u + std::f64::consts::LN_2
    } else {
        ln_u.exp().asinh()
    };
    let q = p + 1.0;
    let integral = if q.abs() < 1e-14 {
        big_t
    } else {
        let upper = if q < 0.0 { big_t.min(60.0 / -q) } else { big_t };
        let (x, w) = gauss_legendre(24);
        let panels = 12;
        let h = upper / panels as f64;
        let mut s = 0.0;
        for k in 0..panels {
            for (xi, wi) in x.iter().zip(&w) {
                let t = h * (k as f64 + 0.5 * (xi + 1.0));
                s += wi * 0.5 * h * t.cosh().powf(q);
            }
        }
        s
    };
    let ln_val = std::f64::consts::LN_2 - l.ln() + q * ln_rho + integral.ln();
    ln_val.min(690.0).exp()
}

struct Offsets {
    ball: Vec<Vec<f64>>,
    disk: Vec<Vec<f64>>,
}

fn offsets(dim: usize) -> &'static Offsets {
    static CACHE: OnceLock<Vec<Offsets>> = OnceLock::new();
    let all = CACHE.get_or_init(|| (0..=8).map(build_offsets).collect());
    &all[dim.min(8)]
}

fn unit_ball_points(d: usize, count: usize) -> Vec<Vec<f64>> {
    if d == 0 {
        return vec![vec![]];
    }
    if d == 1 {
        let (x, _) = gauss_legendre(count.min(16));
        return x.into_iter().map(|v| vec![v]).collect();
    }
    let mut out = Vec::new();
    let mut buf = vec![0.0; d];
    let mut i = 1u64;
    while out.len() < count {
        halton(i, d, &[], &mut buf);
        let p: Vec<f64> = buf.iter().map(|v| 2.0 * v - 1.0).collect();
        if norm(&p) <= 1.0 {
            out.push(p);
        }
        i += 1;
    }
    out
}

fn build_offsets(d: usize) -> Offsets {
    if d == 0 {
        return Offsets {
            ball: vec![],
            disk: vec![],
        };
    }
    Offsets {
        ball: unit_ball_points(d, 64),
        disk: unit_ball_points(d - 1, 48),
    }
}

/// Orthonormal basis of the hyperplane orthogonal to `normal`.
pub fn tangent_basis(normal: &[f64]) -> Vec<Vec<f64>> {
    let d = normal.len();
    let nn = norm(normal);
    let u: Vec<f64> = normal.iter().map(|v| v / nn).collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    let mut axes: Vec<usize> = (0..d).collect();
    axes.sort_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs()));
    for &e in &axes {
        if basis.len() == d - 1 {
            break;
        }
        let mut v = vec![0.0; d];
        v[e] = 1.0;
        let c: f64 = v.iter().zip(&u).map(|(a, b)| a * b).sum();
        v.iter_mut().zip(&u).for_each(|(a, b)| *a -= c * b);
        for b in &basis {
            let c: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let l = norm(&v);
        if l > 1e-8 {
            v.iter_mut().for_each(|x| *x /= l);
            basis.push(v);
        }
    }
    basis
}

/// Sub-quadrature points (equal weights) filling the cell around `x`.
fn cell_points(x: &[f64], cell: &Cell) -> Vec<Vec<f64>> {
    let d = x.len();
    let off = offsets(d);
    match &cell.kind {
        CellKind::Volume => {
            let a = (cell.size / unit_ball_volume(d)).powf(1.0 / d as f64);
            off.ball
                .iter()
                .map(|o| x.iter().zip(o).map(|(c, v)| c + a * v).collect())
                .collect()
        }
        CellKind::Surface { normal, sphere } => {
            let a = (cell.size / unit_ball_volume(d - 1)).powf(1.0 / (d - 1) as f64);
            let basis = tangent_basis(normal);
            off.disk
                .iter()
                .map(|o| {
                    let mut p = x.to_vec();
                    for (coef, b) in o.iter().zip(&basis) {
                        p.iter_mut().zip(b).for_each(|(pi, bi)| *pi += a * coef * bi);
                    }
                    if let Some((c, r)) = sphere {
                        let dv: Vec<f64> = p.iter().zip(c).map(|(a, b)| a - b).collect();
                        let l = norm(&dv);
                        if l > 0.0 {
                            p = c.iter().zip(&dv).map(|(ci, v)| ci + r * v / l).collect();
                        }
                    }
                    p
                })
                .collect()
        }
        CellKind::Segment { axis, ln_radius } => {
            let rho = ln_radius.exp();
            let side = tangent_basis(axis).into_iter().next().unwrap_or(vec![0.0; d]);
            let (gx, _) = gauss_legendre(8);
            gx.iter()
                .map(|t| {
                    x.iter()
                        .zip(axis)
                        .zip(&side)
                        .map(|((c, a), s)| c + 0.5 * t * cell.size * a + rho * s)
                        .collect()
                })
                .collect()
        }
        CellKind::Atom { .. } => vec![x.to_vec()],
    }
}

fn near_radius(kind: &CellKind) -> f64 {
    match kind {
        CellKind::Volume => 3.0,
        CellKind::Surface { .. } => 4.0,
        CellKind::Segment { .. } => 4.0,
        CellKind::Atom { .. } => 0.0,
    }
}

fn same_kind(a: &CellKind, b: &CellKind) -> bool {
    std::mem::discriminant(a) == std::mem::discriminant(b)
}

/// Kernel-specific patch radius of every node: the radius `h` with
/// `h^(alpha-n)` equal to the cell's own smeared self value plus a
/// near-field correction that replaces the point-to-point kernel by its
/// cell average for close neighbours of the same kind.
pub fn patch_radii(cloud: &Cloud, k: &RieszKernel) -> Vec<f64> {
    use rayon::prelude::*;
    let n = cloud.len();
    let subpoints: Vec<Vec<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|j| cell_points(cloud.point(j), cloud.cell(j)))
        .collect();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let ci = cloud.cell(i);
            let base = cell_self_value(ci, k);
            let reach = near_radius(&ci.kind) * ci.spacing;
            let mut corr = 0.0;
            if reach > 0.0 {
                let x = cloud.point(i);
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let cj = cloud.cell(j);
                    if !same_kind(&ci.kind, &cj.kind) {
                        continue;
                    }
                    let d2 = dist2(x, cloud.point(j));
                    if d2 >= reach * reach || d2 == 0.0 {
                        continue;
                    }
                    let pts = &subpoints[j];
                    let avg = pts.iter().map(|y| k.eval(x, y)).filter(|v| v.is_finite()).sum::<f64>()
                        / pts.len() as f64;
                    corr += cj.size / ci.size * (avg - k.of_dist2(d2));
                }
            }
            let s = (base + corr).max(0.5 * base);
            k.radius_for_self_value(s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-12);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-12);
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn volume_self_value_matches_uniform_ball() {
        let k = RieszKernel::newtonian();
        let a: f64 = 0.2;
        let cell = Cell {
            kind: CellKind::Volume,
            size: 4.0 / 3.0 * PI * a.powi(3),
            spacing: 0.4,
        };
        // potential at the centre of a uniform unit-mass ball is 3/(2a)
        assert!((cell_self_value(&cell, &k) - 1.5 / a).abs() < 1e-12);
    }

    #[test]
    fn disk_self_value_newtonian() {
        let k = RieszKernel::newtonian();
        let a: f64 = 0.1;
        let cell = Cell {
            kind: CellKind::Surface {
                normal: vec![0.0, 0.0, 1.0],
                sphere: None,
            },
            size: PI * a * a,
            spacing: 0.2,
        };
        // uniform unit charge on a disk: potential 2/a at the centre
        assert!((cell_self_value(&cell, &k) - 2.0 / a).abs() < 1e-12);
    }

    #[test]
    fn segment_self_value_newtonian_closed_form() {
        let (l, rho) = (0.5_f64, 0.01_f64);
        let v = segment_self_value(l, rho.ln(), -1.0);
        let exact = 2.0 / l * (l / (2.0 * rho)).asinh();
        assert!((v - exact).abs() < 1e-12 * exact);
        let tiny = segment_self_value(l, -4096.0, -1.0);
        assert!((tiny - 2.0 / l * (l.ln() + 4096.0)).abs() < 1e-9 * tiny);
    }

    #[test]
    fn segment_self_value_general_exponent() {
        let (l, rho, p) = (0.3_f64, 0.05_f64, -1.5_f64);
        let v = segment_self_value(l, rho.ln(), p);
        let direct = crate::numeric::integrate(
            |z| (z * z + rho * rho).powf(0.5 * p),
            -0.5 * l,
            0.5 * l,
            64,
            16,
        ) / l;
        assert!((v - direct).abs() < 1e-8 * direct, "{v} {direct}");
    }

    #[test]
    fn tangent_basis_is_orthonormal() {
        let b = tangent_basis(&[1.0, 2.0, 2.0]);
        assert_eq!(b.len(), 2);
        for v in &b {
            assert!((norm(v) - 1.0).abs() < 1e-12);
            assert!((v[0] + 2.0 * v[1] + 2.0 * v[2]).abs() < 1e-12);
        }
        assert!(b[0].iter().zip(&b[1]).map(|(a, c)| a * c).sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn atom_patch_radius_is_kept() {
        let mut c = Cloud::new(3);
        c.push(
            &[0.0; 3],
            Cell {
                kind: CellKind::Atom { patch_radius: 0.25 },
                size: 1.0,
                spacing: 1.0,
            },
        );
        let h = patch_radii(&c, &RieszKernel::new(1.5, 3).unwrap());
        assert!((h[0] - 0.25).abs() < 1e-14);
    }
}
