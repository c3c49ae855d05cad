//! Random geometries and measures for the property cases.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use balayage_core::balayage::Problem;
use balayage_core::domain::DomainSpec;
use balayage_core::measure::{DiscreteMeasure, Point};
use balayage_core::region::{Profile, Region};
use balayage_core::riesz::RieszKernel;
use balayage_core::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// D a ball, F a smaller ball inside it.
    BallInBall,
    /// D a ball, F a shell along its boundary.
    ShellInBall,
    /// D a ball, Ω an internally tangent ball.
    TangentBall,
    /// D the exterior of the unit ball, F a ball in D.
    BallComplement,
    /// D the space minus a few points, F a ball.
    PointsBall,
    /// D the space minus a few points inside the unit ball, F its exterior.
    PointsExterior,
    /// D the space minus a few points, F a body of rotation with
    /// exponentially shrinking profile.
    PointsRotation,
    /// D the space minus a few points, F a half-infinite cylinder.
    PointsCylinder,
}

fn origin() -> Vec<f64> {
    vec![0.0; 3]
}

fn random_direction(rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 0.1 && r <= 1.0 {
            return v.iter().map(|x| x / r).collect();
        }
    }
}

fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| x * s).collect()
}

/// Random finite point set in the half-space x1 < -1.
fn far_points(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let k = rng.gen_range(1..=3);
    (0..k)
        .map(|_| {
            vec![
                rng.gen_range(-3.0..-1.5),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ]
        })
        .collect()
}

/// Draws a geometry of the family; `budget` is the F node budget.
pub fn draw(rng: &mut ChaCha8Rng, family: Family, budget: usize) -> DomainSpec {
    let mut spec = match family {
        Family::BallInBall => {
            let big = rng.gen_range(1.0..1.4);
            let r = rng.gen_range(0.2..0.4);
            let c = scaled(&random_direction(rng), rng.gen_range(0.0..(big - r - 0.15)));
            let mut s = DomainSpec::new(
                3,
                Region::Ball {
                    center: origin(),
                    radius: big,
                },
                Region::Ball { center: c, radius: r },
            );
            s.truncation_radius = 4.0 * big;
            s
        }
        Family::ShellInBall => {
            let big = rng.gen_range(1.0..1.4);
            let inner = big * rng.gen_range(0.5..0.8);
            let mut s = DomainSpec::new(
                3,
                Region::Ball {
                    center: origin(),
                    radius: big,
                },
                Region::Annulus {
                    center: origin(),
                    inner,
                    outer: big,
                },
            );
            s.truncation_radius = 4.0 * big;
            s
        }
        Family::TangentBall => {
            let big = rng.gen_range(1.6..2.2);
            let small = big * rng.gen_range(0.4..0.6);
            let dir = random_direction(rng);
            let mut s = DomainSpec::new(
                3,
                Region::Ball {
                    center: origin(),
                    radius: big,
                },
                Region::BallMinusBall {
                    center: origin(),
                    radius: big,
                    hole_center: scaled(&dir, big - small),
                    hole_radius: small,
                },
            );
            s.truncation_radius = 4.0 * big;
            s
        }
        Family::BallComplement => {
            let r = rng.gen_range(0.4..0.8);
            let d = rng.gen_range(1.3 + r..2.5 + r);
            let c = scaled(&random_direction(rng), d);
            let mut s = DomainSpec::new(
                3,
                Region::ComplementOfBall {
                    center: origin(),
                    radius: 1.0,
                },
                Region::Ball { center: c, radius: r },
            );
            s.truncation_radius = 2.0 * (d + r) + 1.0;
            s
        }
        Family::PointsBall => {
            let r = rng.gen_range(0.5..1.0);
            let c = vec![rng.gen_range(0.0..1.0), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
            let mut s = DomainSpec::new(
                3,
                Region::ComplementOfFinitePointSet {
                    points: far_points(rng),
                },
                Region::Ball { center: c, radius: r },
            );
            s.truncation_radius = 6.0;
            s
        }
        Family::PointsExterior => {
            let k = rng.gen_range(1..=3);
            let points = (0..k)
                .map(|_| scaled(&random_direction(rng), rng.gen_range(0.2..0.8)))
                .collect();
            let mut s = DomainSpec::new(
                3,
                Region::ComplementOfFinitePointSet { points },
                Region::ComplementOfBall {
                    center: origin(),
                    radius: 1.0,
                },
            );
            s.truncation_radius = 8.0;
            s
        }
        Family::PointsRotation | Family::PointsCylinder => {
            let profile = match (family, rng.gen_bool(0.5)) {
                (Family::PointsCylinder, _) => Profile::Cylinder {
                    radius: rng.gen_range(0.3..0.8),
                },
                (_, true) => Profile::ExpPower {
                    exponent: 1.0,
                    scale: rng.gen_range(0.5..1.0),
                },
                _ => Profile::ExpPower {
                    exponent: 2.0,
                    scale: rng.gen_range(0.5..1.0),
                },
            };
            let mut s = DomainSpec::new(
                3,
                Region::ComplementOfFinitePointSet {
                    points: far_points(rng),
                },
                Region::RotationBody {
                    profile,
                    start: 0.0,
                    end: None,
                },
            );
            s.truncation_radius = 6.0;
            s
        }
    };
    // Kept below 2^63 so that reproduction files can carry it as a TOML integer.
    spec.seed = rng.gen::<u64>() >> 1;
    spec.resolution.f_nodes = budget;
    spec.resolution.y_nodes = Some(budget);
    spec.resolution.probes = 8;
    spec.resolution.probe_gap = 1.5;
    spec
}

pub fn kernel(alpha: f64) -> RieszKernel {
    RieszKernel::new(alpha, 3).expect("alpha in (0, 2] with n = 3")
}

/// Picks `count` distinct probe indices.
pub fn pick_probes(rng: &mut ChaCha8Rng, p: &Problem, count: usize) -> Option<Vec<usize>> {
    let n = p.disc.probes.len();
    if n < count {
        return None;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.truncate(count);
    Some(idx)
}

/// Measure with random weights at the given probes.
pub fn atoms(rng: &mut ChaCha8Rng, p: &Problem, idx: &[usize]) -> Result<DiscreteMeasure> {
    let pts: Vec<_> = idx.iter().map(|&i| Point(p.disc.probes[i].clone())).collect();
    let w: Vec<f64> = idx.iter().map(|_| rng.gen_range(0.2..1.0)).collect();
    DiscreteMeasure::from_points(&pts, &w)
}
