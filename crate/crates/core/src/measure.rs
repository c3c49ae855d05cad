//! Points, discrete measures and region predicates.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

/// Nodes closer than this are merged into a single node.
pub const MERGE_DISTANCE: f64 = 1e-12;

/// Patch radius given to point masses created without an explicit smearing scale.
pub const DEFAULT_PATCH_RADIUS: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn origin(n: usize) -> Self {
        Point(vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        crate::numeric::norm(&self.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl From<&[f64]> for Point {
    fn from(v: &[f64]) -> Self {
        Point(v.to_vec())
    }
}

/// Weighted point cloud standing for a positive measure. Coordinates are
/// stored flat, `dim` entries per node.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    patch_radii: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn zero(dim: usize) -> Self {
        DiscreteMeasure {
            dim,
            coords: Vec::new(),
            weights: Vec::new(),
            patch_radii: Vec::new(),
        }
    }

    /// Unit point mass at `x`.
    pub fn dirac(x: &Point) -> Self {
        Self::point_mass(x, 1.0)
    }

    pub fn point_mass(x: &Point, weight: f64) -> Self {
        DiscreteMeasure {
            dim: x.dim(),
            coords: x.0.clone(),
            weights: vec![weight],
            patch_radii: vec![DEFAULT_PATCH_RADIUS],
        }
    }

    /// Builds a measure, validating the invariants and merging nodes that
    /// are closer than [`MERGE_DISTANCE`].
    pub fn from_parts(
        dim: usize,
        coords: Vec<f64>,
        weights: Vec<f64>,
        patch_radii: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 || coords.len() != dim * weights.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * weights.len(),
                got: coords.len(),
            });
        }
        if patch_radii.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} weights but {} patch radii",
                weights.len(),
                patch_radii.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidArgument(format!("invalid weight {w}")));
        }
        if let Some(h) = patch_radii.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
            return Err(Error::InvalidArgument(format!("invalid patch radius {h}")));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coordinate".into()));
        }
        let mut m = DiscreteMeasure {
            dim,
            coords,
            weights,
            patch_radii,
        };
        m.merge_close_nodes();
        Ok(m)
    }

    /// Same as [`from_parts`](Self::from_parts) with every patch radius set to the default.
    pub fn from_points(points: &[Point], weights: &[f64]) -> Result<Self> {
        let dim = points.first().map(|p| p.dim()).unwrap_or(1);
        if points.iter().any(|p| p.dim() != dim) {
            return Err(Error::InvalidArgument("points of mixed dimension".into()));
        }
        let coords = points.iter().flat_map(|p| p.0.iter().copied()).collect();
        Self::from_parts(
            dim,
            coords,
            weights.to_vec(),
            vec![DEFAULT_PATCH_RADIUS; weights.len()],
        )
    }

    fn merge_close_nodes(&mut self) {
        let n = self.len();
        if n < 2 {
            return;
        }
        let d = self.dim;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.coords[a * d].total_cmp(&self.coords[b * d]));
        let mut target: Vec<usize> = (0..n).collect();
        for (k, &i) in order.iter().enumerate() {
            if target[i] != i {
                continue;
            }
            for &j in &order[k + 1..] {
                if self.coords[j * d] - self.coords[i * d] > MERGE_DISTANCE {
                    break;
                }
                if target[j] == j
                    && crate::numeric::dist2(self.point(i), self.point(j)).sqrt() < MERGE_DISTANCE
                {
                    target[j] = i.min(j);
                    target[i] = i.min(j);
                }
            }
        }
        if target.iter().enumerate().all(|(i, &t)| i == t) {
            return;
        }
        let mut keep = Vec::new();
        let mut weights = self.weights.clone();
        for i in 0..n {
            let t = target[i];
            if t == i {
                keep.push(i);
            } else {
                weights[t] += weights[i];
            }
        }
        self.coords = keep
            .iter()
            .flat_map(|&i| self.coords[i * d..(i + 1) * d].to_vec())
            .collect();
        self.patch_radii = keep.iter().map(|&i| self.patch_radii[i]).collect();
        self.weights = keep.iter().map(|&i| weights[i]).collect();
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn patch_radii(&self) -> &[f64] {
        &self.patch_radii
    }

    pub fn support(&self) -> Vec<Point> {
        (0..self.len()).map(|i| Point::from(self.point(i))).collect()
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    pub fn scaled(&self, c: f64) -> Self {
        assert!(c >= 0.0, "negative scaling of a positive measure");
        let mut m = self.clone();
        m.weights.iter_mut().for_each(|w| *w *= c);
        m
    }

    /// Same support and patch radii, new weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: weights.len(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidArgument(format!("invalid weight {w}")));
        }
        Ok(DiscreteMeasure {
            weights,
            ..self.clone()
        })
    }

    /// Sum of two measures; coincident nodes are merged.
    pub fn add(&self, other: &DiscreteMeasure) -> Result<Self> {
        if self.is_empty() {
            return Ok(other.clone());
        }
        if other.is_empty() {
            return Ok(self.clone());
        }
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        let mut weights = self.weights.clone();
        weights.extend_from_slice(&other.weights);
        let mut radii = self.patch_radii.clone();
        radii.extend_from_slice(&other.patch_radii);
        Self::from_parts(self.dim, coords, weights, radii)
    }

    /// Sub-measure of the nodes lying in `e`, weights unchanged.
    pub fn restrict(&self, e: &RegionPredicate) -> Self {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| e.contains(self.point(i))).collect();
        self.select(&keep)
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let d = self.dim;
        DiscreteMeasure {
            dim: d,
            coords: indices
                .iter()
                .flat_map(|&i| self.coords[i * d..(i + 1) * d].iter().copied())
                .collect(),
            weights: indices.iter().map(|&i| self.weights[i]).collect(),
            patch_radii: indices.iter().map(|&i| self.patch_radii[i]).collect(),
        }
    }

    /// Drops nodes whose weight is exactly zero.
    pub fn positive_part(&self) -> Self {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.weights[i] > 0.0).collect();
        self.select(&keep)
    }

    /// Writes `x1,...,xn,weight,patch_radius` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.dim)
            .map(|i| format!("x{i}"))
            .chain(["weight".to_string(), "patch_radius".to_string()])
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.point(i).iter().map(|c| format!("{c:.17e}")).collect();
            row.push(format!("{:.17e}", self.weights[i]));
            row.push(format!("{:.17e}", self.patch_radii[i]));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Membership test for subsets of the one-point compactification of R^n.
#[derive(Clone)]
pub struct RegionPredicate {
    test: Arc<dyn Fn(&[f64]) -> bool + Send + Sync>,
    contains_infinity: bool,
    label: String,
}

impl fmt::Debug for RegionPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RegionPredicate")
            .field("label", &self.label)
            .field("contains_infinity", &self.contains_infinity)
            .finish()
    }
}

impl RegionPredicate {
    pub fn new<F>(label: impl Into<String>, contains_infinity: bool, test: F) -> Self
    where
        F: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        RegionPredicate {
            test: Arc::new(test),
            contains_infinity,
            label: label.into(),
        }
    }

    /// The whole compactified space.
    pub fn everything() -> Self {
        Self::new("everything", true, |_| true)
    }

    pub fn nothing() -> Self {
        Self::new("nothing", false, |_| false)
    }

    /// Only the point at infinity.
    pub fn infinity() -> Self {
        Self::new("infinity", true, |_| false)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (self.test)(x)
    }

    pub fn contains_infinity(&self) -> bool {
        self.contains_infinity
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn complement(&self) -> Self {
        let t = self.test.clone();
        RegionPredicate {
            test: Arc::new(move |x| !t(x)),
            contains_infinity: !self.contains_infinity,
            label: format!("not({})", self.label),
        }
    }

    pub fn union(&self, other: &RegionPredicate) -> Self {
        let (a, b) = (self.test.clone(), other.test.clone());
        RegionPredicate {
            test: Arc::new(move |x| a(x) || b(x)),
            contains_infinity: self.contains_infinity || other.contains_infinity,
            label: format!("({})|({})", self.label, other.label),
        }
    }

    pub fn intersection(&self, other: &RegionPredicate) -> Self {
        let (a, b) = (self.test.clone(), other.test.clone());
        RegionPredicate {
            test: Arc::new(move |x| a(x) && b(x)),
            contains_infinity: self.contains_infinity && other.contains_infinity,
            label: format!("({})&({})", self.label, other.label),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_nodes() -> DiscreteMeasure {
        DiscreteMeasure::from_parts(
            1,
            vec![0.0, 1.0, 2.0],
            vec![1.0, 2.0, 3.0],
            vec![0.1; 3],
        )
        .unwrap()
    }

    #[test]
    fn restrict_keeps_selected_nodes() {
        let m = three_nodes();
        let e = RegionPredicate::new("even", false, |x| x[0] != 1.0);
        let r = m.restrict(&e);
        assert_eq!(r.len(), 2);
        assert_eq!(r.total_mass(), 4.0);
        assert_eq!(m.restrict(&RegionPredicate::everything()), m);
        assert_eq!(m.restrict(&RegionPredicate::nothing()).total_mass(), 0.0);
    }

    #[test]
    fn restrict_partitions() {
        let m = three_nodes();
        let e = RegionPredicate::new("left", false, |x| x[0] < 1.5);
        let a = m.restrict(&e);
        let b = m.restrict(&e.complement());
        assert_eq!(a.add(&b).unwrap(), m);
    }

    #[test]
    fn total_mass_cases() {
        assert_eq!(DiscreteMeasure::dirac(&Point::origin(3)).total_mass(), 1.0);
        assert_eq!(DiscreteMeasure::zero(3).total_mass(), 0.0);
        let m = DiscreteMeasure::from_parts(1, vec![0.0, 1.0], vec![0.25, 0.75], vec![0.1; 2]).unwrap();
        assert_eq!(m.total_mass(), 1.0);
    }

    #[test]
    fn close_nodes_are_merged() {
        let m = DiscreteMeasure::from_parts(
            2,
            vec![0.0, 0.0, 1.0, 1.0, 1e-14, 0.0],
            vec![1.0, 2.0, 0.5],
            vec![0.1; 3],
        )
        .unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.weights(), &[1.5, 2.0]);
    }

    #[test]
    fn rejects_negative_weights() {
        assert!(DiscreteMeasure::from_parts(1, vec![0.0], vec![-1.0], vec![0.1]).is_err());
    }

    #[test]
    fn csv_header() {
        let mut buf = Vec::new();
        DiscreteMeasure::dirac(&Point(vec![1.0, 2.0, 3.0]))
            .write_csv(&mut buf)
            .unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("x1,x2,x3,weight,patch_radius\n"));
    }

    #[test]
    fn predicate_algebra_tracks_infinity() {
        let e = RegionPredicate::infinity();
        assert!(e.contains_infinity());
        assert!(!e.complement().contains_infinity());
        assert!(e.union(&RegionPredicate::nothing()).contains_infinity());
        assert!(!e.intersection(&RegionPredicate::nothing()).contains_infinity());
    }
}
