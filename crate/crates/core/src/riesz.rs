//! Riesz kernel |x - y|^(alpha - n), potentials, energies and Gram systems.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::Nodes;
use crate::error::{Error, Result};
use crate::linalg::{smallest_eigenvalue_estimate, Cholesky};
use crate::measure::{DiscreteMeasure, Point, MERGE_DISTANCE};
use crate::numeric::{dist2, CompensatedSum};

/// Above this size positive definiteness is checked by a Lanczos estimate
/// instead of a full factorisation.
pub const PD_FACTOR_LIMIT: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RieszKernel {
    pub alpha: f64,
    pub n: usize,
}

impl RieszKernel {
    pub fn new(alpha: f64, n: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0 && alpha < n as f64) {
            return Err(Error::InvalidKernel { alpha, n });
        }
        Ok(RieszKernel { alpha, n })
    }

    /// Newtonian kernel in R^3.
    pub fn newtonian() -> Self {
        RieszKernel { alpha: 2.0, n: 3 }
    }

    pub fn exponent(&self) -> f64 {
        self.alpha - self.n as f64
    }

    /// Kernel value as a function of the squared distance.
    #[inline]
    pub fn of_dist2(&self, r2: f64) -> f64 {
        if r2 == 0.0 {
            return f64::INFINITY;
        }
        let p = self.exponent();
        if p == -1.0 {
            1.0 / r2.sqrt()
        } else if p == -1.5 {
            1.0 / (r2 * r2.sqrt()).sqrt()
        } else if p == -2.0 {
            1.0 / r2
        } else {
            r2.powf(0.5 * p)
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.of_dist2(dist2(x, y))
    }

    /// Self-interaction of a unit mass smeared at scale `h`.
    #[inline]
    pub fn self_value(&self, h: f64) -> f64 {
        h.powf(self.exponent())
    }

    /// Patch radius whose self value equals `s`.
    pub fn radius_for_self_value(&self, s: f64) -> f64 {
        s.powf(1.0 / self.exponent())
    }
}

/// `|x - y|^(alpha - n)`, or infinity when the points coincide.
pub fn kernel_eval(k: &RieszKernel, x: &Point, y: &Point) -> Result<f64> {
    for p in [x, y] {
        if p.dim() != k.n {
            return Err(Error::DimensionMismatch {
                expected: k.n,
                got: p.dim(),
            });
        }
    }
    Ok(k.eval(&x.0, &y.0))
}

fn potential_one(k: &RieszKernel, m: &DiscreteMeasure, x: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    let w = m.weights();
    let h = m.patch_radii();
    for i in 0..m.len() {
        if w[i] == 0.0 {
            continue;
        }
        let r2 = dist2(x, m.point(i));
        let v = if r2.sqrt() < MERGE_DISTANCE {
            k.self_value(h[i])
        } else {
            k.of_dist2(r2)
        };
        acc.add(w[i] * v);
    }
    acc.value()
}

/// Riesz potential of `m` at each probe; a probe that coincides with a
/// support node picks up that node's patch self value.
pub fn potential(k: &RieszKernel, m: &DiscreteMeasure, probes: &[Point]) -> Vec<f64> {
    probes.par_iter().map(|p| potential_one(k, m, &p.0)).collect()
}

/// Same as [`potential`] with probes given as flat coordinates.
pub fn potential_at(k: &RieszKernel, m: &DiscreteMeasure, coords: &[f64]) -> Vec<f64> {
    coords
        .par_chunks(k.n)
        .map(|x| potential_one(k, m, x))
        .collect()
}

/// Potential at target nodes, using the targets' patch radii for coincident pairs.
pub fn potential_on_nodes(k: &RieszKernel, m: &DiscreteMeasure, nodes: &Nodes) -> Vec<f64> {
    (0..nodes.len())
        .into_par_iter()
        .map(|i| {
            let x = nodes.point(i);
            let mut acc = CompensatedSum::new();
            for j in 0..m.len() {
                let w = m.weights()[j];
                if w == 0.0 {
                    continue;
                }
                let r2 = dist2(x, m.point(j));
                let v = if r2.sqrt() < MERGE_DISTANCE {
                    k.self_value(nodes.patch_radius(i))
                } else {
                    k.of_dist2(r2)
                };
                acc.add(w * v);
            }
            acc.value()
        })
        .collect()
}

/// Mutual energy; coincident nodes use the geometric mean of their patch radii.
pub fn mutual_energy(k: &RieszKernel, m1: &DiscreteMeasure, m2: &DiscreteMeasure) -> f64 {
    let mut acc = CompensatedSum::new();
    for i in 0..m1.len() {
        let wi = m1.weights()[i];
        if wi == 0.0 {
            continue;
        }
        for j in 0..m2.len() {
            let wj = m2.weights()[j];
            if wj == 0.0 {
                continue;
            }
            let r2 = dist2(m1.point(i), m2.point(j));
            let v = if r2.sqrt() < MERGE_DISTANCE {
                k.self_value((m1.patch_radii()[i] * m2.patch_radii()[j]).sqrt())
            } else {
                k.of_dist2(r2)
            };
            acc.add(wi * wj * v);
        }
    }
    acc.value()
}

/// Kernel matrix between nodes with the patch rule on the diagonal (row-major).
pub fn gram_matrix(k: &RieszKernel, nodes: &Nodes) -> Vec<f64> {
    let n = nodes.len();
    let mut a = vec![0.0; n * n];
    a.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
        let x = nodes.point(i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = if i == j {
                k.self_value(nodes.patch_radius(i))
            } else {
                k.of_dist2(dist2(x, nodes.point(j)))
            };
        }
    });
    a
}

/// Cross kernel matrix (rows: `a`, columns: `b`).
pub fn cross_matrix(k: &RieszKernel, a: &Nodes, b: &Nodes) -> Vec<f64> {
    let (m, n) = (a.len(), b.len());
    let mut out = vec![0.0; m * n];
    if n == 0 {
        return out;
    }
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let x = a.point(i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = k.of_dist2(dist2(x, b.point(j)));
        }
    });
    out
}

/// Symmetric positive definite system `matrix * w = rhs` over target nodes.
#[derive(Clone, Debug)]
pub struct GramSystem {
    dim: usize,
    matrix: Vec<f64>,
    rhs: Vec<f64>,
    index: Vec<usize>,
    factor: Option<Arc<Cholesky>>,
}

impl GramSystem {
    /// Wraps a matrix after a symmetry and positive-definiteness check.
    pub fn new(matrix: Vec<f64>, rhs: Vec<f64>) -> Result<Self> {
        let dim = rhs.len();
        if matrix.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: matrix.len(),
            });
        }
        let mut sys = GramSystem {
            dim,
            matrix,
            rhs,
            index: (0..dim).collect(),
            factor: None,
        };
        sys.check()?;
        Ok(sys)
    }

    fn check(&mut self) -> Result<()> {
        let n = self.dim;
        for i in 0..n {
            let d = self.matrix[i * n + i];
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: i, value: d });
            }
            for j in 0..i {
                let (a, b) = (self.matrix[i * n + j], self.matrix[j * n + i]);
                if (a - b).abs() > 1e-12 * (a.abs() + b.abs()) {
                    return Err(Error::InvalidArgument(format!(
                        "matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if n == 0 {
            return Ok(());
        }
        if n <= PD_FACTOR_LIMIT {
            self.factor = Some(Arc::new(Cholesky::factor(&self.matrix, n)?));
        } else {
            let lmin = smallest_eigenvalue_estimate(&self.matrix, n, 80);
            if !(lmin > 0.0) {
                return Err(Error::NotPositiveDefinite {
                    pivot: usize::MAX,
                    value: lmin,
                });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Position of each row in the originating target cloud.
    pub fn index(&self) -> &[usize] {
        &self.index
    }

    pub fn with_index(mut self, index: Vec<usize>) -> Self {
        assert_eq!(index.len(), self.dim);
        self.index = index;
        self
    }

    pub fn factor(&self) -> Option<&Cholesky> {
        self.factor.as_deref()
    }

    /// Same matrix with a new right-hand side.
    pub fn with_rhs(&self, rhs: Vec<f64>) -> Result<Self> {
        if rhs.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: rhs.len(),
            });
        }
        Ok(GramSystem {
            rhs,
            ..self.clone()
        })
    }

    pub fn matvec(&self, w: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| crate::numeric::dot(self.row(i), w))
            .collect()
    }

    /// ½ wᵀGw − bᵀw.
    pub fn objective(&self, w: &[f64]) -> f64 {
        let gw = self.matvec(w);
        0.5 * crate::numeric::dot(&gw, w) - crate::numeric::dot(&self.rhs, w)
    }

    /// `w` ↦ sqrt(wᵀGw).
    pub fn energy_norm(&self, w: &[f64]) -> f64 {
        crate::numeric::dot(&self.matvec(w), w).max(0.0).sqrt()
    }

    /// Writes the `GRAMSYS1` binary dump: header, row-major matrix, then rhs,
    /// all little-endian f64.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(b"GRAMSYS1")?;
        for v in self.matrix.iter().chain(&self.rhs) {
            f.write_all(&v.to_le_bytes())?;
        }
        f.flush()?;
        Ok(())
    }

    /// Reads a dump produced by [`write_binary`](Self::write_binary).
    pub fn read_binary(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 8 || &bytes[..8] != b"GRAMSYS1" {
            return Err(Error::InvalidArgument("missing GRAMSYS1 header".into()));
        }
        let vals: Vec<f64> = bytes[8..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let total = vals.len();
        let n = ((-1.0 + (1.0 + 4.0 * total as f64).sqrt()) / 2.0).round() as usize;
        if n * n + n != total {
            return Err(Error::InvalidArgument("truncated GRAMSYS1 payload".into()));
        }
        Ok((vals[..n * n].to_vec(), vals[n * n..].to_vec()))
    }
}

/// Gram system over `targets` with right-hand side the potential of `external`.
pub fn assemble_gram(
    k: &RieszKernel,
    targets: &Nodes,
    external: &DiscreteMeasure,
) -> Result<GramSystem> {
    if targets.dim() != k.n || (!external.is_empty() && external.dim() != k.n) {
        return Err(Error::DimensionMismatch {
            expected: k.n,
            got: targets.dim(),
        });
    }
    let rhs = potential_on_nodes(k, external, targets);
    GramSystem::new(gram_matrix(k, targets), rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k3() -> RieszKernel {
        RieszKernel::newtonian()
    }

    #[test]
    fn kernel_values() {
        let k = RieszKernel::new(1.5, 3).unwrap();
        let o = Point::origin(3);
        assert_eq!(kernel_eval(&k, &o, &Point(vec![0.0, 1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(
            kernel_eval(&k3(), &o, &Point(vec![2.0, 0.0, 0.0])).unwrap(),
            0.5
        );
        assert!(kernel_eval(&k, &o, &o).unwrap().is_infinite());
        assert!(kernel_eval(&k, &o, &Point(vec![0.0, 0.0])).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(RieszKernel::new(2.5, 3).is_err());
        assert!(RieszKernel::new(2.0, 2).is_err());
        assert!(RieszKernel::new(0.0, 3).is_err());
    }

    #[test]
    fn potential_linearity() {
        let m = DiscreteMeasure::from_points(
            &[Point(vec![1.0, 0.0, 0.0]), Point(vec![0.0, 2.0, 0.0])],
            &[1.0, 1.0],
        )
        .unwrap();
        let v = potential(&k3(), &m, &[Point::origin(3)]);
        assert!((v[0] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn mutual_energy_symmetric_and_bilinear() {
        let k = RieszKernel::new(1.2, 3).unwrap();
        let a = DiscreteMeasure::from_points(
            &[Point(vec![0.0, 0.0, 0.0]), Point(vec![1.0, 1.0, 0.0])],
            &[0.3, 0.9],
        )
        .unwrap();
        let b = DiscreteMeasure::from_points(&[Point(vec![0.0, 0.5, 2.0])], &[1.7]).unwrap();
        assert_eq!(mutual_energy(&k, &a, &b), mutual_energy(&k, &b, &a));
        let e2 = mutual_energy(&k, &a.scaled(2.0), &b);
        assert!((e2 - 2.0 * mutual_energy(&k, &a, &b)).abs() < 1e-14);
    }

    #[test]
    fn gram_examples() {
        let t = Nodes::new(3, vec![0.0; 3], vec![0.1]);
        let ext = DiscreteMeasure::dirac(&Point(vec![1.0, 0.0, 0.0]));
        let sys = assemble_gram(&k3(), &t, &ext).unwrap();
        assert!((sys.entry(0, 0) - 10.0).abs() < 1e-12);
        assert!((sys.rhs()[0] - 1.0).abs() < 1e-15);

        let t2 = Nodes::new(3, vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0], vec![0.1, 0.1]);
        let sys2 = assemble_gram(&k3(), &t2, &DiscreteMeasure::zero(3)).unwrap();
        assert_eq!(sys2.entry(0, 1), 1.0);
        assert_eq!(sys2.entry(1, 0), 1.0);
        assert!((sys2.entry(1, 1) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn overlapping_patches_are_rejected() {
        let t = Nodes::new(3, vec![0.0, 0.0, 0.0, 0.01, 0.0, 0.0], vec![0.1, 0.1]);
        assert!(matches!(
            assemble_gram(&k3(), &t, &DiscreteMeasure::zero(3)),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn binary_round_trip() {
        let t2 = Nodes::new(3, vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0], vec![0.1, 0.2]);
        let ext = DiscreteMeasure::dirac(&Point(vec![0.0, 3.0, 0.0]));
        let sys = assemble_gram(&k3(), &t2, &ext).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.bin");
        sys.write_binary(&p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..8], b"GRAMSYS1");
        assert_eq!(bytes.len(), 8 + 8 * 6);
        let (m, r) = GramSystem::read_binary(&p).unwrap();
        assert_eq!(m, sys.matrix());
        assert_eq!(r, sys.rhs());
    }
}
