use balayage_core::balayage::{sweep_green, Problem, Route};
use balayage_core::domain::DomainSpec;
use balayage_core::equilibrium::equilibrium_measure;
use balayage_core::green::GreenKernel;
use balayage_core::measure::{DiscreteMeasure, Point};
use balayage_core::region::Region;
use balayage_core::riesz::RieszKernel;

fn unit_ball() -> Region {
    Region::Ball {
        center: vec![0.0; 3],
        radius: 1.0,
    }
}

fn ball(radius: f64) -> Region {
    Region::Ball {
        center: vec![0.0; 3],
        radius,
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

// Kelvin image for 1/|x - y| on the ball of radius R about the origin.
fn kelvin_green(x: &[f64], y: &[f64], r: f64) -> f64 {
    let ny = norm(y);
    let image: Vec<f64> = y.iter().map(|v| v * r * r / (ny * ny)).collect();
    1.0 / dist(x, y) - (r / ny) / dist(x, &image)
}

#[test]
fn newtonian_sweep_of_an_exterior_dirac_has_mass_r_over_d() {
    let k = RieszKernel::newtonian();
    let mut spec = DomainSpec::new(3, Region::FullSpace, unit_ball());
    spec.resolution.f_nodes = 800;
    spec.resolution.probes = 2;
    let p = Problem::new(&spec, &k).unwrap();
    for d in [1.5, 3.0] {
        let mu = DiscreteMeasure::dirac(&Point::new(vec![d, 0.0, 0.0]));
        let s = sweep_green(&p, &mu, Route::DirectGreenProjection).unwrap();
        assert!((s.mass_after - 1.0 / d).abs() < 0.01, "d={d}: {}", s.mass_after);
    }
}

#[test]
fn newtonian_capacity_of_a_ball_is_its_radius() {
    let k = RieszKernel::newtonian();
    let mut spec = DomainSpec::new(3, Region::FullSpace, ball(0.6));
    spec.resolution.f_nodes = 800;
    spec.resolution.probes = 2;
    let p = Problem::new(&spec, &k).unwrap();
    let eq = equilibrium_measure(&p).unwrap();
    assert!((eq.capacity - 0.6).abs() < 0.01 * 0.6, "{}", eq.capacity);
    assert!(eq.potential_residual < 1e-6, "{}", eq.potential_residual);
}

#[test]
fn green_function_of_the_ball_matches_the_kelvin_image() {
    let k = RieszKernel::newtonian();
    let mut spec = DomainSpec::new(3, unit_ball(), Region::Empty);
    spec.resolution.y_nodes = Some(1500);
    spec.resolution.probes = 0;
    let disc = spec.discretize(&k).unwrap();
    let g = GreenKernel::for_discretization(&disc).unwrap();
    let pairs = [
        ([0.2, 0.1, 0.0], [-0.3, 0.2, 0.1]),
        ([0.5, 0.0, 0.0], [0.0, 0.5, 0.0]),
        ([0.1, -0.4, 0.2], [0.3, 0.3, -0.3]),
    ];
    for (x, y) in pairs {
        let want = kelvin_green(&x, &y, 1.0);
        let got = g.green_eval(&Point::new(x.to_vec()), &Point::new(y.to_vec())).unwrap();
        assert!((got - want).abs() < 0.02 * want, "{x:?} {y:?}: {got} vs {want}");
    }
}

#[test]
fn sweep_routes_agree_on_a_newtonian_ball() {
    let k = RieszKernel::newtonian();
    let mut spec = DomainSpec::new(3, Region::FullSpace, unit_ball());
    spec.resolution.f_nodes = 600;
    spec.resolution.probes = 2;
    let p = Problem::new(&spec, &k).unwrap();
    let mu = DiscreteMeasure::dirac(&Point::new(vec![0.0, 2.0, 0.0]));
    let a = sweep_green(&p, &mu, Route::DirectGreenProjection).unwrap();
    let b = sweep_green(&p, &mu, Route::ViaUnionSweep).unwrap();
    assert!((a.mass_after - b.mass_after).abs() < 1e-3, "{} vs {}", a.mass_after, b.mass_after);
}
