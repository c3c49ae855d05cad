//! Node clouds for the sets that appear in balayage problems.
//!
//! Two modes: `Boundary` puts nodes on the boundary of a set only (enough for
//! the Newtonian kernel, where sweeping never charges the interior), while
//! `Volume` fills it with boundary-aligned layers so that the singular layer
//! that fractional kernels put along the boundary is resolved.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::cloud::{unit_ball_volume, Cell, CellKind, Cloud};
use crate::error::{Error, Result};
use crate::numeric::{dist2, halton, norm};
use crate::region::{Profile, Region};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMode {
    Boundary,
    Volume,
}

impl SampleMode {
    pub fn for_alpha(alpha: f64) -> Self {
        if (alpha - 2.0).abs() < 1e-12 {
            SampleMode::Boundary
        } else {
            SampleMode::Volume
        }
    }
}

/// Surface area of the unit sphere in R^n.
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

fn rotation_matrix(seed: u64) -> [[f64; 3]; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (w, x, y, z) = (
        a * (tau * u2).sin(),
        a * (tau * u2).cos(),
        b * (tau * u3).sin(),
        b * (tau * u3).cos(),
    );
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

/// `count` nearly uniform unit vectors in R^n.
pub fn sphere_directions(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    if count == 0 {
        return vec![];
    }
    match n {
        1 => (0..count)
            .map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }])
            .collect(),
        2 => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let off: f64 = rng.gen();
            (0..count)
                .map(|i| {
                    let t = std::f64::consts::TAU * (i as f64 + off) / count as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect()
        }
        3 => {
            let rot = rotation_matrix(seed);
            let golden = std::f64::consts::PI * (1.0 + 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let fi = i as f64 + 0.5;
                    let z = 1.0 - 2.0 * fi / count as f64;
                    let s = (1.0 - z * z).max(0.0).sqrt();
                    let th = golden * fi;
                    let p = [th.cos() * s, th.sin() * s, z];
                    (0..3)
                        .map(|r| rot[r][0] * p[0] + rot[r][1] * p[1] + rot[r][2] * p[2])
                        .collect()
                })
                .collect()
        }
        _ => {
            let normal = Normal::new(0.0, 1.0).expect("standard normal");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let shift: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let mut buf = vec![0.0; n];
            let mut out = Vec::with_capacity(count);
            let mut i = 1u64;
            while out.len() < count {
                halton(i, n, &shift, &mut buf);
                i += 1;
                let g: Vec<f64> = buf
                    .iter()
                    .map(|&u| normal.inverse_cdf(u.clamp(1e-12, 1.0 - 1e-12)))
                    .collect();
                let r = norm(&g);
                if r > 1e-9 {
                    out.push(g.iter().map(|v| v / r).collect());
                }
            }
            out
        }
    }
}

fn translate(center: &[f64], dir: &[f64], r: f64) -> Vec<f64> {
    center.iter().zip(dir).map(|(c, d)| c + r * d).collect()
}

/// Nodes on the sphere |x - center| = radius, one per area spacing².
pub fn sphere_surface(center: &[f64], radius: f64, spacing: f64, seed: u64) -> Cloud {
    let n = center.len();
    let area = unit_sphere_area(n) * radius.powi(n as i32 - 1);
    let count = ((area / spacing.powi(n as i32 - 1)).round() as usize).max(4);
    let mut cloud = Cloud::new(n);
    let cell_area = area / count as f64;
    let local = cell_area.powf(1.0 / (n as f64 - 1.0).max(1.0));
    for d in sphere_directions(n, count, seed) {
        let x = translate(center, &d, radius);
        cloud.push(
            &x,
            Cell {
                kind: CellKind::Surface {
                    normal: d,
                    sphere: Some((center.to_vec(), radius)),
                },
                size: cell_area,
                spacing: local,
            },
        );
    }
    cloud
}

/// Shell layer with nodes on a sphere and a prescribed total volume.
fn push_layer(cloud: &mut Cloud, center: &[f64], r: f64, volume: f64, spacing: f64, min: usize, seed: u64) {
    let n = center.len();
    let count = ((volume / spacing.powi(n as i32)).round() as usize).max(min);
    let size = volume / count as f64;
    let local = size.powf(1.0 / n as f64);
    for d in sphere_directions(n, count, seed) {
        cloud.push(
            &translate(center, &d, r),
            Cell {
                kind: CellKind::Volume,
                size,
                spacing: local,
            },
        );
    }
}

fn shell_volume_between(n: usize, a: f64, b: f64) -> f64 {
    unit_ball_volume(n) * (b.powi(n as i32) - a.powi(n as i32))
}

/// Solid ball filled with concentric layers, the outermost on the boundary,
/// plus a node at the centre.
pub fn ball_volume(center: &[f64], radius: f64, spacing: f64, seed: u64) -> Cloud {
    let n = center.len();
    let layers = ((radius / spacing).round() as usize).max(1);
    let h = radius / layers as f64;
    let mut cloud = Cloud::new(n);
    for k in 0..layers {
        let r = radius - k as f64 * h;
        let lo = (r - 0.5 * h).max(0.0);
        let hi = (r + 0.5 * h).min(radius);
        let v = shell_volume_between(n, lo, hi);
        push_layer(&mut cloud, center, r, v, h, 1, seed.wrapping_add(k as u64));
    }
    let v = unit_ball_volume(n) * (0.5 * h).powi(n as i32);
    cloud.push(
        center,
        Cell {
            kind: CellKind::Volume,
            size: v,
            spacing: h,
        },
    );
    cloud
}

/// Solid shell inner <= |x - center| <= outer with layers on both spheres.
/// With `graded` the layer gap grows in proportion to the radius, starting
/// from `spacing` at the inner sphere.
pub fn shell_volume(
    center: &[f64],
    inner: f64,
    outer: f64,
    spacing: f64,
    graded: bool,
    seed: u64,
) -> Cloud {
    let n = center.len();
    let mut cloud = Cloud::new(n);
    if outer <= inner {
        return cloud;
    }
    let radii: Vec<f64> = if graded && inner > 0.0 {
        let g = spacing / inner;
        let ratio = outer / inner;
        let k = (ratio.ln() / (1.0 + g).ln()).ceil().max(1.0) as usize;
        (0..=k)
            .map(|i| inner * ratio.powf(i as f64 / k as f64))
            .collect()
    } else {
        let k = ((outer - inner) / spacing).ceil().max(1.0) as usize;
        (0..=k)
            .map(|i| inner + (outer - inner) * i as f64 / k as f64)
            .collect()
    };
    let last = radii.len() - 1;
    for (i, &r) in radii.iter().enumerate() {
        let (lo, hi) = if graded && inner > 0.0 {
            (
                if i == 0 { r } else { (radii[i - 1] * r).sqrt() },
                if i == last { r } else { (radii[i + 1] * r).sqrt() },
            )
        } else {
            (
                if i == 0 { r } else { 0.5 * (radii[i - 1] + r) },
                if i == last { r } else { 0.5 * (radii[i + 1] + r) },
            )
        };
        let gap = if i == last {
            r - radii[i - 1]
        } else {
            radii[i + 1] - r
        };
        let v = shell_volume_between(n, lo, hi);
        push_layer(&mut cloud, center, r, v, gap, 8, seed.wrapping_add(i as u64));
    }
    cloud
}

/// Flat disk x_1 = t, |x'| <= radius in R^3, rings centred in their annuli.
fn axial_disk(cloud: &mut Cloud, t: f64, radius: f64, spacing: f64, outward: f64) {
    let rings = ((radius / spacing).round() as usize).max(1);
    let h = radius / rings as f64;
    let normal = vec![outward, 0.0, 0.0];
    for k in 0..rings {
        let r = (k as f64 + 0.5) * h;
        let m = ((std::f64::consts::TAU * r / h).round() as usize).max(1);
        let area = std::f64::consts::PI * h * h * ((k + 1).pow(2) - k.pow(2)) as f64 / m as f64;
        for i in 0..m {
            let phi = std::f64::consts::TAU * (i as f64 + 0.5 * (k % 2) as f64) / m as f64;
            cloud.push(
                &[t, r * phi.cos(), r * phi.sin()],
                Cell {
                    kind: CellKind::Surface {
                        normal: normal.clone(),
                        sphere: None,
                    },
                    size: area,
                    spacing: h,
                },
            );
        }
    }
}

/// Body of rotation about the first axis in R^3 for axial range [t_a, t_b].
/// Parts too thin to carry a ring of three nodes become axial segments that
/// remember their tube radius in log form.
pub fn rotation_body(
    profile: &Profile,
    t_a: f64,
    t_b: f64,
    spacing: f64,
    mode: SampleMode,
    caps: (bool, bool),
) -> Cloud {
    let mut cloud = Cloud::new(3);
    if t_b <= t_a {
        return cloud;
    }
    let tau = std::f64::consts::TAU;
    let fat = |rho: f64| tau * rho >= 3.0 * spacing;
    let steps = ((t_b - t_a) / spacing).ceil().max(1.0) as usize;
    let dt = (t_b - t_a) / steps as f64;
    for s in 0..steps {
        let t = t_a + (s as f64 + 0.5) * dt;
        let ln_rho = profile.ln_radius(t);
        let rho = ln_rho.exp();
        if !fat(rho) {
            cloud.push(
                &[t, 0.0, 0.0],
                Cell {
                    kind: CellKind::Segment {
                        axis: vec![1.0, 0.0, 0.0],
                        ln_radius: ln_rho,
                    },
                    size: dt,
                    spacing: dt,
                },
            );
            continue;
        }
        match mode {
            SampleMode::Boundary => {
                let slope = profile.slope(t);
                let stretch = (1.0 + slope * slope).sqrt();
                let m = ((tau * rho / spacing).round() as usize).max(3);
                let area = tau * rho * stretch * dt / m as f64;
                for i in 0..m {
                    let phi = tau * (i as f64 + 0.5 * (s % 2) as f64) / m as f64;
                    let (c, sn) = (phi.cos(), phi.sin());
                    cloud.push(
                        &[t, rho * c, rho * sn],
                        Cell {
                            kind: CellKind::Surface {
                                normal: vec![-slope / stretch, c / stretch, sn / stretch],
                                sphere: None,
                            },
                            size: area,
                            spacing: area.sqrt(),
                        },
                    );
                }
            }
            SampleMode::Volume => {
                let rings = ((rho / spacing).round() as usize).max(1);
                let h = rho / rings as f64;
                for k in 0..rings {
                    let r = rho - k as f64 * h;
                    let lo = (r - 0.5 * h).max(0.0);
                    let hi = (r + 0.5 * h).min(rho);
                    let m = ((tau * r / h).round() as usize).max(3);
                    let size = std::f64::consts::PI * (hi * hi - lo * lo) * dt / m as f64;
                    for i in 0..m {
                        let phi = tau * (i as f64 + 0.5 * ((s + k) % 2) as f64) / m as f64;
                        cloud.push(
                            &[t, r * phi.cos(), r * phi.sin()],
                            Cell {
                                kind: CellKind::Volume,
                                size,
                                spacing: size.cbrt(),
                            },
                        );
                    }
                }
                let size = std::f64::consts::PI * (0.5 * h).powi(2) * dt;
                cloud.push(
                    &[t, 0.0, 0.0],
                    Cell {
                        kind: CellKind::Volume,
                        size,
                        spacing: size.cbrt(),
                    },
                );
            }
        }
    }
    if mode == SampleMode::Boundary {
        for (on, t, sign) in [(caps.0, t_a, -1.0), (caps.1, t_b, 1.0)] {
            let rho = profile.radius(t);
            if on && rho.is_finite() && fat(rho) {
                axial_disk(&mut cloud, t, rho, spacing, sign);
            }
        }
    }
    cloud
}

/// Spheres whose pieces make up the boundary of a region.
fn region_spheres(region: &Region, out: &mut Vec<(Vec<f64>, f64)>) {
    match region {
        Region::Ball { center, radius } | Region::ComplementOfBall { center, radius } => {
            out.push((center.clone(), *radius))
        }
        Region::Annulus {
            center,
            inner,
            outer,
        } => {
            out.push((center.clone(), *inner));
            out.push((center.clone(), *outer));
        }
        Region::BallMinusBall {
            center,
            radius,
            hole_center,
            hole_radius,
        } => {
            out.push((center.clone(), *radius));
            out.push((hole_center.clone(), *hole_radius));
        }
        Region::Union { parts } => parts.iter().for_each(|p| region_spheres(p, out)),
        Region::Complement { of } => region_spheres(of, out),
        _ => {}
    }
}

fn is_boundary_point(inside: &dyn Fn(&[f64]) -> f64, x: &[f64], normal: &[f64]) -> bool {
    let eps = 1e-7 * (1.0 + norm(x));
    let plus: Vec<f64> = x.iter().zip(normal).map(|(a, b)| a + eps * b).collect();
    let minus: Vec<f64> = x.iter().zip(normal).map(|(a, b)| a - eps * b).collect();
    (inside(&plus) > 0.0) != (inside(&minus) > 0.0)
}

fn surface_normal(cell: &Cell) -> Option<&[f64]> {
    match &cell.kind {
        CellKind::Surface { normal, .. } => Some(normal),
        _ => None,
    }
}

fn check_dim(region: &Region, n: usize) -> Result<()> {
    region.validate(n).map_err(Error::InvalidArgument)
}

/// Cloud for a closed set, truncated at |x| <= truncation when unbounded.
pub fn sample_region(
    region: &Region,
    n: usize,
    mode: SampleMode,
    spacing: f64,
    truncation: f64,
    seed: u64,
) -> Result<Cloud> {
    check_dim(region, n)?;
    if !(spacing > 0.0) {
        return Err(Error::InvalidArgument(format!("spacing must be positive, got {spacing}")));
    }
    let origin = vec![0.0; n];
    let cloud = match region {
        Region::Empty | Region::FinitePointSet { .. } => Cloud::new(n),
        Region::FullSpace | Region::ComplementOfFinitePointSet { .. } => match mode {
            SampleMode::Boundary => Cloud::new(n),
            SampleMode::Volume => ball_volume(&origin, truncation, spacing, seed),
        },
        Region::Ball { center, radius } => match mode {
            SampleMode::Boundary => sphere_surface(center, *radius, spacing, seed),
            SampleMode::Volume => ball_volume(center, *radius, spacing, seed),
        },
        Region::ComplementOfBall { center, radius } => match mode {
            SampleMode::Boundary => sphere_surface(center, *radius, spacing, seed),
            SampleMode::Volume => {
                let outer = truncation.max(*radius + norm(center));
                shell_volume(center, *radius, outer, spacing, true, seed)
            }
        },
        Region::Annulus {
            center,
            inner,
            outer,
        } => match mode {
            SampleMode::Boundary => {
                let mut c = sphere_surface(center, *inner, spacing, seed);
                c.extend(&sphere_surface(center, *outer, spacing, seed ^ 0x5a5a));
                c
            }
            SampleMode::Volume => shell_volume(center, *inner, *outer, spacing, false, seed),
        },
        Region::BallMinusBall {
            center,
            radius,
            hole_center,
            hole_radius,
        } => {
            let outer_ok = |x: &[f64]| dist2(x, hole_center).sqrt() >= *hole_radius;
            let hole_ok = |x: &[f64]| dist2(x, center).sqrt() <= *radius;
            match mode {
                SampleMode::Boundary => {
                    let mut c = sphere_surface(center, *radius, spacing, seed).filter(|x, _| outer_ok(x));
                    c.extend(
                        &sphere_surface(hole_center, *hole_radius, spacing, seed ^ 0x5a5a)
                            .filter(|x, _| hole_ok(x)),
                    );
                    c
                }
                SampleMode::Volume => {
                    let mut c = ball_volume(center, *radius, spacing, seed).filter(|x, cell| {
                        dist2(x, hole_center).sqrt() - hole_radius >= 0.5 * cell.spacing
                    });
                    let mut layer = sphere_surface(hole_center, *hole_radius, spacing, seed ^ 0x5a5a)
                        .filter(|x, _| hole_ok(x) && dist2(x, center).sqrt() < radius - 0.5 * spacing);
                    let shell = shell_volume_between(n, *hole_radius, hole_radius + 0.5 * spacing);
                    let sphere_area = unit_sphere_area(n) * hole_radius.powi(n as i32 - 1);
                    layer = layer.map_cells(|cell| Cell {
                        kind: CellKind::Volume,
                        size: cell.size * shell / sphere_area,
                        spacing: cell.spacing,
                    });
                    c.extend(&layer);
                    c
                }
            }
        }
        Region::RotationBody {
            profile,
            start,
            end,
        } => {
            if n != 3 {
                return Err(Error::InvalidArgument(
                    "bodies of rotation are sampled in three dimensions only".into(),
                ));
            }
            let stop = end.unwrap_or(f64::INFINITY).min(truncation);
            let capped_end = end.map_or(false, |e| e <= truncation);
            rotation_body(profile, *start, stop, spacing, mode, (true, capped_end))
        }
        Region::RotationBodyComplement { profile, start } => {
            if n != 3 {
                return Err(Error::InvalidArgument(
                    "bodies of rotation are sampled in three dimensions only".into(),
                ));
            }
            match mode {
                SampleMode::Boundary => {
                    rotation_body(profile, *start, truncation, spacing, mode, (true, false))
                        .filter(|_, cell| surface_normal(cell).is_some())
                }
                SampleMode::Volume => {
                    ball_volume(&origin, truncation, spacing, seed).filter(|x, _| region.contains(x))
                }
            }
        }
        Region::Union { parts } => {
            let mut c = Cloud::new(n);
            for (i, p) in parts.iter().enumerate() {
                let piece = sample_region(p, n, mode, spacing, truncation, seed.wrapping_add(i as u64 * 7919))?;
                let others: Vec<&Region> = parts.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, r)| r).collect();
                // nodes buried in another part are not on the union's boundary
                let piece = match mode {
                    SampleMode::Boundary => piece.filter(|x, _| others.iter().all(|o| o.depth(x) <= 1e-12)),
                    SampleMode::Volume => piece,
                };
                c.extend(&piece.thinned_against(&c, 0.5));
            }
            c
        }
        Region::Complement { of } => {
            let simplified = of.complement();
            if matches!(simplified, Region::Complement { .. }) {
                return Err(Error::InvalidArgument(format!(
                    "cannot sample the complement of {of:?}"
                )));
            }
            sample_region(&simplified, n, mode, spacing, truncation, seed)?
        }
    };
    Ok(cloud)
}

/// Runs `build` over spacings until the cloud size is as large as possible
/// without exceeding `budget`. Returns the cloud and the spacing used.
pub fn with_budget<F>(budget: usize, guess: f64, build: F) -> Result<(Cloud, f64)>
where
    F: Fn(f64) -> Result<Cloud>,
{
    if budget == 0 {
        return Err(Error::InvalidArgument("node budget must be positive".into()));
    }
    let mut hi = guess.max(1e-9);
    let mut c_hi = build(hi)?;
    let mut tries = 0;
    while c_hi.len() > budget {
        hi *= 2.0;
        c_hi = build(hi)?;
        tries += 1;
        if tries > 60 {
            return Ok((c_hi, hi));
        }
    }
    if c_hi.is_empty() {
        return Ok((c_hi, hi));
    }
    let mut lo = hi * 0.5;
    tries = 0;
    loop {
        let c = build(lo)?;
        if c.len() > budget {
            break;
        }
        hi = lo;
        c_hi = c;
        lo *= 0.5;
        tries += 1;
        if tries > 40 {
            return Ok((c_hi, hi));
        }
    }
    for _ in 0..18 {
        let mid = (lo * hi).sqrt();
        let c = build(mid)?;
        if c.len() > budget {
            lo = mid;
        } else {
            hi = mid;
            c_hi = c;
        }
    }
    Ok((c_hi, hi))
}

/// `sample_region` at the finest spacing that stays within a node budget.
pub fn sample_region_budget(
    region: &Region,
    n: usize,
    mode: SampleMode,
    budget: usize,
    truncation: f64,
    seed: u64,
) -> Result<(Cloud, f64)> {
    let scale = region.bounding_radius().unwrap_or(truncation).max(1e-6);
    with_budget(budget, scale / 4.0, |s| sample_region(region, n, mode, s, truncation, seed))
}

/// Nodes for `region ∩ {r_in <= |x - center| <= r_out}` at a given spacing.
pub fn sample_shell_piece(
    region: &Region,
    center: &[f64],
    r_in: f64,
    r_out: f64,
    mode: SampleMode,
    spacing: f64,
    seed: u64,
) -> Result<Cloud> {
    let n = center.len();
    check_dim(region, n)?;
    let in_shell = |x: &[f64]| {
        let r = dist2(x, center).sqrt();
        r >= r_in * (1.0 - 1e-12) && r <= r_out * (1.0 + 1e-12)
    };
    match region {
        Region::Empty | Region::FinitePointSet { .. } => Ok(Cloud::new(n)),
        Region::RotationBody {
            profile,
            start,
            end,
        } => {
            let t_a = start.max(center[0] - r_out);
            let stop = end.unwrap_or(f64::INFINITY).min(center[0] + r_out);
            let cap_a = *start >= center[0] - r_out;
            let cap_b = end.map_or(false, |e| e <= center[0] + r_out);
            let body = rotation_body(profile, t_a, stop, spacing, mode, (cap_a, cap_b));
            Ok(body.filter(|x, _| in_shell(x)))
        }
        Region::Union { parts } => {
            let mut c = Cloud::new(n);
            for (i, p) in parts.iter().enumerate() {
                let piece = sample_shell_piece(p, center, r_in, r_out, mode, spacing, seed.wrapping_add(i as u64))?;
                c.extend(&piece.thinned_against(&c, 0.5));
            }
            Ok(c)
        }
        _ => match mode {
            SampleMode::Volume => {
                let c = if r_in > 0.0 {
                    shell_volume(center, r_in, r_out, spacing, false, seed)
                } else {
                    ball_volume(center, r_out, spacing, seed)
                };
                Ok(c.filter(|x, _| region.contains(x)))
            }
            SampleMode::Boundary => {
                let mut spheres = Vec::new();
                region_spheres(region, &mut spheres);
                if r_in > 0.0 {
                    spheres.push((center.to_vec(), r_in));
                }
                spheres.push((center.to_vec(), r_out));
                let inside = |x: &[f64]| {
                    let r = dist2(x, center).sqrt();
                    region.depth(x).min(r - r_in).min(r_out - r)
                };
                let mut c = Cloud::new(n);
                for (i, (sc, sr)) in spheres.iter().enumerate() {
                    let s = sphere_surface(sc, *sr, spacing, seed.wrapping_add(31 * i as u64));
                    let keep = s.filter(|x, cell| {
                        in_shell(x)
                            && surface_normal(cell).map_or(false, |nrm| is_boundary_point(&inside, x, nrm))
                    });
                    c.extend(&keep.thinned_against(&c, 0.5));
                }
                if let Region::RotationBodyComplement { profile, start } = region {
                    let body = Region::RotationBody {
                        profile: profile.clone(),
                        start: *start,
                        end: None,
                    };
                    let lateral = sample_shell_piece(&body, center, r_in, r_out, mode, spacing, seed)?;
                    c.extend(&lateral);
                }
                Ok(c)
            }
        },
    }
}

/// Radii of the j-th annulus for ratio q, ordered inner to outer.
pub fn annulus_radii(j: i32, q: f64) -> (f64, f64) {
    let a = q.powi(j);
    let b = q.powi(j + 1);
    (a.min(b), a.max(b))
}

/// Nodes for `region ∩ {q^j <= |x| <= q^(j+1)}` using at most `budget` nodes.
pub fn sample_annulus(
    region: &Region,
    n: usize,
    j: i32,
    q: f64,
    budget: usize,
    mode: SampleMode,
    seed: u64,
) -> Result<Cloud> {
    if !(q > 0.0) || (q - 1.0).abs() < 1e-12 {
        return Err(Error::InvalidArgument(format!("annulus ratio must be positive and not 1, got {q}")));
    }
    let (a, b) = annulus_radii(j, q);
    let center = vec![0.0; n];
    let (c, _) = with_budget(budget, (b - a).max(b * 0.05), |s| {
        sample_shell_piece(region, &center, a, b, mode, s, seed)
    })?;
    Ok(c)
}

/// Deterministic probe points inside `omega`, kept at least `gap` local
/// spacings away from every node of the given clouds.
pub fn probe_points(
    n: usize,
    omega: &dyn Fn(&[f64]) -> bool,
    avoid: &[&Cloud],
    box_radius: f64,
    count: usize,
    gap: f64,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
    let mut buf = vec![0.0; n];
    let mut out = Vec::new();
    let max_tries = 20_000u64.max(200 * count as u64);
    let mut i = 1u64;
    while out.len() < count && i <= max_tries {
        halton(i, n, &shift, &mut buf);
        i += 1;
        let x: Vec<f64> = buf.iter().map(|u| box_radius * (2.0 * u - 1.0)).collect();
        if !omega(&x) {
            continue;
        }
        let clear = avoid.iter().all(|c| {
            (0..c.len()).all(|k| {
                let s = gap * c.cell(k).spacing;
                dist2(&x, c.point(k)) >= s * s
            })
        });
        if clear {
            out.push(x);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total_size(c: &Cloud) -> f64 {
        c.cells().iter().map(|c| c.size).sum()
    }

    #[test]
    fn sphere_area_matches() {
        let c = sphere_surface(&[0.0, 0.0, 0.0], 2.0, 0.1, 1);
        let exact = 4.0 * std::f64::consts::PI * 4.0;
        assert!((total_size(&c) - exact).abs() < 1e-9 * exact);
        for i in 0..c.len() {
            assert!((norm(c.point(i)) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn directions_are_unit_in_any_dimension() {
        for n in 2..=5 {
            let d = sphere_directions(n, 50, 3);
            assert_eq!(d.len(), 50);
            for v in d {
                assert!((norm(&v) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ball_volume_sums_to_ball() {
        let c = ball_volume(&[1.0, 0.0, 0.0], 1.0, 0.15, 2);
        let exact = 4.0 / 3.0 * std::f64::consts::PI;
        assert!((total_size(&c) - exact).abs() < 1e-9);
        let on_boundary = (0..c.len())
            .filter(|&i| (dist2(c.point(i), &[1.0, 0.0, 0.0]).sqrt() - 1.0).abs() < 1e-12)
            .count();
        assert!(on_boundary > 100);
    }

    #[test]
    fn graded_shell_volume() {
        let c = shell_volume(&[0.0, 0.0, 0.0], 1.0, 8.0, 0.3, true, 5);
        let exact = 4.0 / 3.0 * std::f64::consts::PI * (512.0 - 1.0);
        assert!((total_size(&c) - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn cylinder_surface_area() {
        let p = Profile::Cylinder { radius: 0.5 };
        let c = rotation_body(&p, 0.0, 2.0, 0.05, SampleMode::Boundary, (true, true));
        let exact = std::f64::consts::TAU * 0.5 * 2.0 + 2.0 * std::f64::consts::PI * 0.25;
        assert!((total_size(&c) - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn cylinder_volume() {
        let p = Profile::Cylinder { radius: 0.5 };
        let c = rotation_body(&p, 0.0, 2.0, 0.1, SampleMode::Volume, (true, true));
        let exact = std::f64::consts::PI * 0.25 * 2.0;
        assert!((total_size(&c) - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn slender_parts_become_segments() {
        let p = Profile::ExpPower { exponent: 1.0, scale: 1.0 };
        let c = rotation_body(&p, 0.0, 30.0, 0.1, SampleMode::Boundary, (true, false));
        let segs: Vec<_> = c
            .cells()
            .iter()
            .filter_map(|c| match c.kind {
                CellKind::Segment { ln_radius, .. } => Some(ln_radius),
                _ => None,
            })
            .collect();
        assert!(!segs.is_empty());
        assert!(segs.iter().any(|&l| l < -25.0));
    }

    #[test]
    fn budget_is_respected() {
        let r = Region::Ball {
            center: vec![0.0; 3],
            radius: 1.0,
        };
        let (c, s) = sample_region_budget(&r, 3, SampleMode::Boundary, 500, 10.0, 0).unwrap();
        assert!(c.len() <= 500 && c.len() > 400, "{} nodes at {s}", c.len());
    }

    #[test]
    fn annulus_piece_of_ball_boundary() {
        // the unit ball meets the shell 0.5 <= |x| <= 2 in the unit sphere
        // and the inner sphere of radius 0.5
        let r = Region::Ball {
            center: vec![0.0; 3],
            radius: 1.0,
        };
        let c = sample_shell_piece(&r, &[0.0; 3], 0.5, 2.0, SampleMode::Boundary, 0.05, 1).unwrap();
        let exact = 4.0 * std::f64::consts::PI * (1.0 + 0.25);
        assert!((total_size(&c) - exact).abs() < 0.02 * exact);
    }

    #[test]
    fn probes_avoid_nodes() {
        let c = sphere_surface(&[0.0; 3], 1.0, 0.1, 0);
        let omega = |x: &[f64]| norm(x) < 1.0;
        let p = probe_points(3, &omega, &[&c], 1.0, 10, 3.0, 0);
        assert_eq!(p.len(), 10);
        for x in p {
            assert!(norm(&x) < 1.0 - 0.25);
        }
    }
}
