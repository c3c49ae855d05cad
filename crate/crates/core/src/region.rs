//! Closed and open subsets of R^n described by a small set of primitives.

use serde::{Deserialize, Serialize};

use crate::measure::RegionPredicate;
use crate::numeric::{dist2, norm};

/// Cross-section radius of a body of rotation about the first axis, as a
/// function of the axial coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    /// radius = scale * t^(-exponent)
    Power {
        exponent: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// radius = scale * exp(-t^exponent)
    ExpPower {
        exponent: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// radius = scale * exp(-1/t), a Lebesgue-type thorn with its tip at t = 0
    Thorn {
        #[serde(default = "one")]
        scale: f64,
    },
    Cylinder { radius: f64 },
}

fn one() -> f64 {
    1.0
}

impl Profile {
    /// Natural log of the radius at axial coordinate `t`; `-inf` where the body is degenerate.
    pub fn ln_radius(&self, t: f64) -> f64 {
        match *self {
            Profile::Power { exponent, scale } => {
                if t <= 0.0 {
                    f64::INFINITY
                } else {
                    scale.ln() - exponent * t.ln()
                }
            }
            Profile::ExpPower { exponent, scale } => scale.ln() - t.max(0.0).powf(exponent),
            Profile::Thorn { scale } => {
                if t <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    scale.ln() - 1.0 / t
                }
            }
            Profile::Cylinder { radius } => radius.ln(),
        }
    }

    pub fn radius(&self, t: f64) -> f64 {
        self.ln_radius(t).exp()
    }

    /// d(radius)/dt by central differences.
    pub fn slope(&self, t: f64) -> f64 {
        let h = 1e-6 * t.abs().max(1e-3);
        (self.radius(t + h) - self.radius((t - h).max(0.0))) / (t + h - (t - h).max(0.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Region {
    Empty,
    FullSpace,
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// {|x - center| >= radius}
    ComplementOfBall {
        center: Vec<f64>,
        radius: f64,
    },
    /// {inner <= |x - center| <= outer}
    Annulus {
        center: Vec<f64>,
        inner: f64,
        outer: f64,
    },
    /// Closed ball with an open ball removed.
    BallMinusBall {
        center: Vec<f64>,
        radius: f64,
        hole_center: Vec<f64>,
        hole_radius: f64,
    },
    FinitePointSet {
        points: Vec<Vec<f64>>,
    },
    ComplementOfFinitePointSet {
        points: Vec<Vec<f64>>,
    },
    /// {x_1 >= start, |(x_2, ..., x_n)| <= profile(x_1)}, optionally capped at x_1 <= end.
    RotationBody {
        profile: Profile,
        start: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        end: Option<f64>,
    },
    RotationBodyComplement {
        profile: Profile,
        start: f64,
    },
    Union {
        parts: Vec<Region>,
    },
    Complement {
        of: Box<Region>,
    },
}

fn radial(x: &[f64], c: &[f64]) -> f64 {
    dist2(x, c).sqrt()
}

fn transverse(x: &[f64]) -> f64 {
    norm(&x[1..])
}

impl Region {
    /// Approximate signed distance: positive in the interior, negative outside.
    pub fn depth(&self, x: &[f64]) -> f64 {
        match self {
            Region::Empty => f64::NEG_INFINITY,
            Region::FullSpace => f64::INFINITY,
            Region::Ball { center, radius } => radius - radial(x, center),
            Region::ComplementOfBall { center, radius } => radial(x, center) - radius,
            Region::Annulus {
                center,
                inner,
                outer,
            } => {
                let r = radial(x, center);
                (r - inner).min(outer - r)
            }
            Region::BallMinusBall {
                center,
                radius,
                hole_center,
                hole_radius,
            } => (radius - radial(x, center)).min(radial(x, hole_center) - hole_radius),
            Region::FinitePointSet { points } => -points
                .iter()
                .map(|p| radial(x, p))
                .fold(f64::INFINITY, f64::min),
            Region::ComplementOfFinitePointSet { points } => points
                .iter()
                .map(|p| radial(x, p))
                .fold(f64::INFINITY, f64::min),
            Region::RotationBody {
                profile,
                start,
                end,
            } => {
                let t = x[0];
                let mut d = t - start;
                if let Some(e) = end {
                    d = d.min(e - t);
                }
                let rho = if t >= *start { profile.radius(t) } else { 0.0 };
                d.min(rho - transverse(x))
            }
            Region::RotationBodyComplement { profile, start } => -Region::RotationBody {
                profile: profile.clone(),
                start: *start,
                end: None,
            }
            .depth(x),
            Region::Union { parts } => parts
                .iter()
                .map(|p| p.depth(x))
                .fold(f64::NEG_INFINITY, f64::max),
            Region::Complement { of } => -of.depth(x),
        }
    }

    /// Closed-set membership (boundary included).
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::FinitePointSet { points } => points.iter().any(|p| radial(x, p) < 1e-12),
            _ => self.depth(x) >= -1e-12,
        }
    }

    /// Open-set membership (boundary excluded).
    pub fn contains_open(&self, x: &[f64]) -> bool {
        match self {
            Region::ComplementOfFinitePointSet { points } => {
                points.iter().all(|p| radial(x, p) >= 1e-12)
            }
            _ => self.depth(x) > 1e-12,
        }
    }

    pub fn complement(&self) -> Region {
        match self {
            Region::Empty => Region::FullSpace,
            Region::FullSpace => Region::Empty,
            Region::Ball { center, radius } => Region::ComplementOfBall {
                center: center.clone(),
                radius: *radius,
            },
            Region::ComplementOfBall { center, radius } => Region::Ball {
                center: center.clone(),
                radius: *radius,
            },
            Region::Annulus {
                center,
                inner,
                outer,
            } => Region::Union {
                parts: vec![
                    Region::Ball {
                        center: center.clone(),
                        radius: *inner,
                    },
                    Region::ComplementOfBall {
                        center: center.clone(),
                        radius: *outer,
                    },
                ],
            },
            Region::BallMinusBall {
                center,
                radius,
                hole_center,
                hole_radius,
            } => Region::Union {
                parts: vec![
                    Region::Ball {
                        center: hole_center.clone(),
                        radius: *hole_radius,
                    },
                    Region::ComplementOfBall {
                        center: center.clone(),
                        radius: *radius,
                    },
                ],
            },
            Region::FinitePointSet { points } => Region::ComplementOfFinitePointSet {
                points: points.clone(),
            },
            Region::ComplementOfFinitePointSet { points } => Region::FinitePointSet {
                points: points.clone(),
            },
            Region::RotationBody {
                profile,
                start,
                end: None,
            } => Region::RotationBodyComplement {
                profile: profile.clone(),
                start: *start,
            },
            Region::RotationBodyComplement { profile, start } => Region::RotationBody {
                profile: profile.clone(),
                start: *start,
                end: None,
            },
            Region::Complement { of } => (**of).clone(),
            other => Region::Complement {
                of: Box::new(other.clone()),
            },
        }
    }

    /// Radius of a ball about the origin containing the set, if bounded.
    pub fn bounding_radius(&self) -> Option<f64> {
        match self {
            Region::Empty => Some(0.0),
            Region::Ball { center, radius } => Some(norm(center) + radius),
            Region::Annulus { center, outer, .. } => Some(norm(center) + outer),
            Region::BallMinusBall { center, radius, .. } => Some(norm(center) + radius),
            Region::FinitePointSet { points } => {
                Some(points.iter().map(|p| norm(p)).fold(0.0, f64::max))
            }
            Region::RotationBody {
                profile,
                start,
                end: Some(e),
            } => {
                let rmax = max_profile_radius(profile, *start, *e);
                Some((e.abs().max(start.abs()).powi(2) + rmax * rmax).sqrt())
            }
            Region::Union { parts } => parts
                .iter()
                .map(|p| p.bounding_radius())
                .try_fold(0.0_f64, |m, r| r.map(|r| m.max(r))),
            _ => None,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.bounding_radius().is_some()
    }

    /// Sets the model treats as polar (zero capacity): empty and finite sets.
    pub fn is_polar(&self) -> bool {
        match self {
            Region::Empty | Region::FinitePointSet { .. } => true,
            Region::Union { parts } => parts.iter().all(|p| p.is_polar()),
            _ => false,
        }
    }

    pub fn predicate(&self, label: &str) -> RegionPredicate {
        let r = self.clone();
        RegionPredicate::new(label, !self.is_bounded(), move |x| r.contains(x))
    }

    /// Ambient dimension implied by the coordinates, if any are present.
    pub fn dim_hint(&self) -> Option<usize> {
        match self {
            Region::Ball { center, .. }
            | Region::ComplementOfBall { center, .. }
            | Region::Annulus { center, .. }
            | Region::BallMinusBall { center, .. } => Some(center.len()),
            Region::FinitePointSet { points } | Region::ComplementOfFinitePointSet { points } => {
                points.first().map(|p| p.len())
            }
            Region::Union { parts } => parts.iter().find_map(|p| p.dim_hint()),
            Region::Complement { of } => of.dim_hint(),
            _ => None,
        }
    }

    /// Checks radii, dimensions and profile parameters.
    pub fn validate(&self, n: usize) -> std::result::Result<(), String> {
        let dim_ok = |v: &Vec<f64>, what: &str| {
            if v.len() != n {
                Err(format!("{what} has {} coordinates, expected {n}", v.len()))
            } else if v.iter().any(|c| !c.is_finite()) {
                Err(format!("{what} has a non-finite coordinate"))
            } else {
                Ok(())
            }
        };
        let pos = |r: f64, what: &str| {
            if r.is_finite() && r > 0.0 {
                Ok(())
            } else {
                Err(format!("{what} must be positive, got {r}"))
            }
        };
        match self {
            Region::Empty | Region::FullSpace => Ok(()),
            Region::Ball { center, radius } | Region::ComplementOfBall { center, radius } => {
                dim_ok(center, "center")?;
                pos(*radius, "radius")
            }
            Region::Annulus {
                center,
                inner,
                outer,
            } => {
                dim_ok(center, "center")?;
                pos(*inner, "inner")?;
                pos(*outer, "outer")?;
                if inner >= outer {
                    return Err("annulus needs inner < outer".into());
                }
                Ok(())
            }
            Region::BallMinusBall {
                center,
                radius,
                hole_center,
                hole_radius,
            } => {
                dim_ok(center, "center")?;
                dim_ok(hole_center, "hole_center")?;
                pos(*radius, "radius")?;
                pos(*hole_radius, "hole_radius")
            }
            Region::FinitePointSet { points } | Region::ComplementOfFinitePointSet { points } => {
                points.iter().try_for_each(|p| dim_ok(p, "point"))
            }
            Region::RotationBody { profile, start, .. }
            | Region::RotationBodyComplement { profile, start } => {
                if n < 2 {
                    return Err("rotation bodies need n >= 2".into());
                }
                if !start.is_finite() {
                    return Err("start must be finite".into());
                }
                match profile {
                    Profile::Power { exponent, scale } => {
                        pos(*scale, "scale")?;
                        if *start <= 0.0 {
                            return Err("power profiles need start > 0".into());
                        }
                        pos(*exponent, "exponent")
                    }
                    Profile::ExpPower { exponent, scale } => {
                        pos(*scale, "scale")?;
                        pos(*exponent, "exponent")
                    }
                    Profile::Thorn { scale } => pos(*scale, "scale"),
                    Profile::Cylinder { radius } => pos(*radius, "radius"),
                }
            }
            Region::Union { parts } => parts.iter().try_for_each(|p| p.validate(n)),
            Region::Complement { of } => of.validate(n),
        }
    }
}

pub(crate) fn max_profile_radius(profile: &Profile, a: f64, b: f64) -> f64 {
    (0..=64)
        .map(|k| profile.radius(a + (b - a) * k as f64 / 64.0))
        .filter(|r| r.is_finite())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_membership_and_complement() {
        let b = Region::Ball {
            center: vec![0.0; 3],
            radius: 1.0,
        };
        assert!(b.contains(&[0.5, 0.0, 0.0]));
        assert!(b.contains(&[1.0, 0.0, 0.0]));
        assert!(!b.contains_open(&[1.0, 0.0, 0.0]));
        let c = b.complement();
        assert!(c.contains(&[2.0, 0.0, 0.0]));
        assert!(!c.contains(&[0.5, 0.0, 0.0]));
        assert!(b.is_bounded() && !c.is_bounded());
    }

    #[test]
    fn rotation_body_radius() {
        let f1 = Region::RotationBody {
            profile: Profile::Power {
                exponent: 1.0,
                scale: 1.0,
            },
            start: 1.0,
            end: None,
        };
        assert!(f1.contains(&[4.0, 0.2, 0.0]));
        assert!(!f1.contains(&[4.0, 0.3, 0.0]));
        assert!(!f1.contains(&[0.5, 0.0, 0.0]));
    }

    #[test]
    fn profile_log_radius_survives_underflow() {
        let p = Profile::ExpPower {
            exponent: 2.0,
            scale: 1.0,
        };
        assert_eq!(p.ln_radius(64.0), -4096.0);
        assert_eq!(p.radius(64.0), 0.0);
    }

    #[test]
    fn finite_sets_are_polar() {
        let y = Region::FinitePointSet {
            points: vec![vec![0.0; 3]],
        };
        assert!(y.is_polar());
        assert!(!y.complement().is_polar());
    }

    #[test]
    fn toml_round_trip_shape() {
        let r = Region::BallMinusBall {
            center: vec![0.0; 3],
            radius: 2.0,
            hole_center: vec![1.0, 0.0, 0.0],
            hole_radius: 1.0,
        };
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"kind\":\"ball-minus-ball\""));
        let back: Region = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }
}
