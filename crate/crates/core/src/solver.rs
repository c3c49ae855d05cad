//! Projection onto the nonnegative cone in the energy norm:
//! minimise ½ wᵀGw − bᵀw subject to w ≥ 0.

use std::io::Write;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{fdot, Cholesky};
use crate::numeric::max_abs;
use crate::riesz::GramSystem;

/// Active-set is used up to this many unknowns, projected gradient above.
pub const ACTIVE_SET_LIMIT: usize = 3000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Auto,
    ActiveSet,
    ProjectedGradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// KKT tolerance relative to the largest right-hand-side entry.
    pub tol: f64,
    /// Defaults to ten times the dimension.
    pub max_iter: Option<usize>,
    pub algorithm: Algorithm,
    /// Iteration trace CSV (`iter,objective,kkt_residual,active_count`).
    #[serde(skip)]
    pub trace: Option<PathBuf>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: None,
            algorithm: Algorithm::Auto,
            trace: None,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions {
            tol,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSolution {
    pub weights: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub objective: f64,
}

/// Largest violation of the KKT conditions, relative to ‖b‖∞.
pub fn kkt_residual(sys: &GramSystem, b: &[f64], w: &[f64]) -> f64 {
    let scale = max_abs(b);
    if scale == 0.0 {
        return max_abs(w);
    }
    let gw = sys.matvec(w);
    let mut worst = 0.0_f64;
    for i in 0..w.len() {
        let r = gw[i] - b[i];
        let v = if w[i] > 0.0 { r.abs() } else { (-r).max(0.0) };
        worst = worst.max(v);
    }
    worst / scale
}

fn objective(sys: &GramSystem, b: &[f64], w: &[f64]) -> f64 {
    let gw = sys.matvec(w);
    0.5 * crate::numeric::dot(&gw, w) - crate::numeric::dot(b, w)
}

struct Trace {
    out: Option<std::io::BufWriter<std::fs::File>>,
}

impl Trace {
    fn open(path: &Option<PathBuf>) -> Result<Self> {
        let out = match path {
            Some(p) => {
                let mut f = std::io::BufWriter::new(std::fs::File::create(p)?);
                writeln!(f, "iter,objective,kkt_residual,active_count")?;
                Some(f)
            }
            None => None,
        };
        Ok(Trace { out })
    }

    fn enabled(&self) -> bool {
        self.out.is_some()
    }

    fn row(&mut self, iter: usize, obj: f64, kkt: f64, active: usize) -> Result<()> {
        if let Some(f) = self.out.as_mut() {
            writeln!(f, "{iter},{obj:.17e},{kkt:.17e},{active}")?;
        }
        Ok(())
    }
}

/// Cone projection of the system's own right-hand side.
pub fn project_onto_cone(sys: &GramSystem, opts: &SolverOptions) -> Result<ProjectionSolution> {
    solve_potential_match(sys, sys.rhs(), opts)
}

/// Cone projection with the right-hand side replaced by `target`: the
/// returned potential matches `target` on the support and is not below it
/// (up to tol) elsewhere.
pub fn solve_potential_match(
    sys: &GramSystem,
    target: &[f64],
    opts: &SolverOptions,
) -> Result<ProjectionSolution> {
    let n = sys.dim();
    if target.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: target.len(),
        });
    }
    if !(opts.tol > 0.0 && opts.tol < 1.0) {
        return Err(Error::InvalidArgument(format!("tol {} not in (0, 1)", opts.tol)));
    }
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite target value".into()));
    }
    if n == 0 || target.iter().all(|&v| v == 0.0) {
        return Ok(ProjectionSolution {
            weights: vec![0.0; n],
            kkt_residual: 0.0,
            iterations: 0,
            objective: 0.0,
        });
    }
    let max_iter = opts.max_iter.unwrap_or(10 * n).max(1);
    let use_active = match opts.algorithm {
        Algorithm::ActiveSet => true,
        Algorithm::ProjectedGradient => false,
        Algorithm::Auto => n <= ACTIVE_SET_LIMIT,
    };
    let mut trace = Trace::open(&opts.trace)?;
    let (w, iterations) = if use_active {
        active_set(sys, target, opts.tol, max_iter, &mut trace)?
    } else {
        projected_gradient(sys, target, opts.tol, max_iter, &mut trace)?
    };
    let kkt = kkt_residual(sys, target, &w);
    Ok(ProjectionSolution {
        objective: objective(sys, target, &w),
        weights: w,
        kkt_residual: kkt,
        iterations,
    })
}

/// Lawson–Hanson active-set iteration on the Gram form, with an
/// incrementally updated Cholesky factor of the passive block.
fn active_set(
    sys: &GramSystem,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    trace: &mut Trace,
) -> Result<(Vec<f64>, usize)> {
    let n = sys.dim();
    let g = sys.matrix();
    let tol_abs = tol * max_abs(b);
    let mut x = vec![0.0; n];

    // Warm start: solve on everything, then repeatedly drop nonpositive entries.
    let mut passive: Vec<usize> = (0..n).collect();
    let mut factor = Cholesky::empty();
    for round in 0..50 {
        if passive.is_empty() {
            break;
        }
        let f = if round == 0 && sys.factor().is_some() {
            sys.factor().unwrap().clone()
        } else {
            Cholesky::factor_subset(g, n, &passive)?
        };
        let bp: Vec<f64> = passive.iter().map(|&i| b[i]).collect();
        let z = f.solve(&bp);
        if z.iter().all(|&v| v > 0.0) {
            for (k, &i) in passive.iter().enumerate() {
                x[i] = z[k];
            }
            factor = f;
            break;
        }
        passive = passive
            .iter()
            .zip(&z)
            .filter(|(_, &v)| v > 0.0)
            .map(|(&i, _)| i)
            .collect();
        if round == 49 {
            passive.clear();
        }
    }
    if factor.dim() != passive.len() {
        passive.clear();
        factor = Cholesky::empty();
        x.iter_mut().for_each(|v| *v = 0.0);
    }

    let mut in_p = vec![false; n];
    passive.iter().for_each(|&i| in_p[i] = true);
    let mut blocked = vec![false; n];
    let mut r = residual(g, n, b, &x, &passive);
    let mut iter = 0;
    loop {
        if trace.enabled() {
            let gw = sys.matvec(&x);
            let obj = 0.5 * fdot(&gw, &x) - fdot(b, &x);
            let kkt = kkt_residual(sys, b, &x);
            trace.row(iter, obj, kkt, passive.len())?;
        }
        // Entering index: largest positive dual, smallest index on ties.
        let mut best: Option<usize> = None;
        for j in 0..n {
            if in_p[j] || blocked[j] || r[j] <= tol_abs {
                continue;
            }
            if best.map_or(true, |k| r[j] > r[k]) {
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        iter += 1;
        if iter > max_iter {
            let res = kkt_residual(sys, b, &x);
            return Err(Error::NonConvergence {
                iterations: iter - 1,
                residual: res,
                best: x,
            });
        }
        let col: Vec<f64> = passive.iter().map(|&i| g[i * n + j]).collect();
        if !factor.append(&col, g[j * n + j]) {
            blocked[j] = true;
            continue;
        }
        passive.push(j);
        in_p[j] = true;
        loop {
            let bp: Vec<f64> = passive.iter().map(|&i| b[i]).collect();
            let z = factor.solve(&bp);
            if z.iter().all(|&v| v > 0.0) {
                for (k, &i) in passive.iter().enumerate() {
                    x[i] = z[k];
                }
                break;
            }
            // Newly entered index going nonpositive means no descent: undo it.
            let last = passive.len() - 1;
            if passive[last] == j && z[last] <= 0.0 && x[j] == 0.0 {
                factor.remove(last);
                passive.pop();
                in_p[j] = false;
                blocked[j] = true;
                break;
            }
            let mut step = f64::INFINITY;
            let mut leave = usize::MAX;
            for (k, &i) in passive.iter().enumerate() {
                if z[k] <= 0.0 {
                    let t = x[i] / (x[i] - z[k]);
                    if t < step || (t == step && i < passive[leave]) {
                        step = t;
                        leave = k;
                    }
                }
            }
            for (k, &i) in passive.iter().enumerate() {
                x[i] += step * (z[k] - x[i]);
            }
            let leaving = passive[leave];
            x[leaving] = 0.0;
            let mut k = passive.len();
            while k > 0 {
                k -= 1;
                let i = passive[k];
                if x[i] <= 0.0 {
                    x[i] = 0.0;
                    factor.remove(k);
                    passive.remove(k);
                    in_p[i] = false;
                }
            }
            if passive.is_empty() {
                break;
            }
        }
        if !blocked[j] {
            blocked.iter_mut().for_each(|v| *v = false);
        }
        r = residual(g, n, b, &x, &passive);
    }
    Ok((x, iter))
}

/// r = b − G x using only the passive columns.
fn residual(g: &[f64], n: usize, b: &[f64], x: &[f64], passive: &[usize]) -> Vec<f64> {
    let xp: Vec<f64> = passive.iter().map(|&i| x[i]).collect();
    (0..n)
        .map(|i| {
            let row = &g[i * n..(i + 1) * n];
            let s: f64 = passive.iter().zip(&xp).map(|(&k, &v)| row[k] * v).sum();
            b[i] - s
        })
        .collect()
}

/// Projected gradient with Barzilai–Borwein steps, restarted every 200 iterations.
fn projected_gradient(
    sys: &GramSystem,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    trace: &mut Trace,
) -> Result<(Vec<f64>, usize)> {
    let n = sys.dim();
    let tol_abs = tol * max_abs(b);
    let lmax = (0..n)
        .map(|i| sys.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let base_step = 1.0 / lmax;
    let mut x: Vec<f64> = (0..n).map(|i| (b[i] / sys.entry(i, i)).max(0.0)).collect();
    let mut grad: Vec<f64> = sys.matvec(&x).iter().zip(b).map(|(a, c)| a - c).collect();
    let mut step = base_step;
    for it in 0..max_iter {
        let kkt = (0..n)
            .map(|i| if x[i] > 0.0 { grad[i].abs() } else { (-grad[i]).max(0.0) })
            .fold(0.0, f64::max);
        if trace.enabled() {
            let obj = 0.5 * fdot(&sys.matvec(&x), &x) - fdot(b, &x);
            trace.row(it, obj, kkt / max_abs(b), x.iter().filter(|&&v| v > 0.0).count())?;
        }
        if kkt <= tol_abs {
            return Ok((x, it));
        }
        if it % 200 == 0 {
            step = base_step;
        }
        let xn: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| (xi - step * gi).max(0.0)).collect();
        let gn: Vec<f64> = sys.matvec(&xn).iter().zip(b).map(|(a, c)| a - c).collect();
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, c)| a - c).collect();
        let y: Vec<f64> = gn.iter().zip(&grad).map(|(a, c)| a - c).collect();
        let sy = fdot(&s, &y);
        step = if sy > 0.0 { fdot(&s, &s) / sy } else { base_step };
        x = xn;
        grad = gn;
    }
    let res = kkt_residual(sys, b, &x);
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: res,
        best: x,
    })
}

/// Exact cone projection by enumerating every active set (dimension ≤ 12).
pub fn brute_force_oracle(sys: &GramSystem) -> Result<ProjectionSolution> {
    let n = sys.dim();
    if n > 12 {
        return Err(Error::TooLarge(n));
    }
    let b = sys.rhs();
    let mut best = vec![0.0; n];
    let mut best_obj = 0.0;
    for mask in 1u32..(1u32 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let k = idx.len();
        let a = DMatrix::from_fn(k, k, |i, j| sys.entry(idx[i], idx[j]));
        let rhs = DVector::from_fn(k, |i, _| b[idx[i]]);
        let Some(z) = a.lu().solve(&rhs) else { continue };
        if z.iter().any(|&v| v < 0.0) {
            continue;
        }
        let mut w = vec![0.0; n];
        for (t, &i) in idx.iter().enumerate() {
            w[i] = z[t];
        }
        let obj = objective(sys, b, &w);
        if obj < best_obj {
            best_obj = obj;
            best = w;
        }
    }
    Ok(ProjectionSolution {
        kkt_residual: kkt_residual(sys, b, &best),
        objective: best_obj,
        weights: best,
        iterations: 1 << n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sys(m: Vec<f64>, b: Vec<f64>) -> GramSystem {
        GramSystem::new(m, b).unwrap()
    }

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let a: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = (0..n).map(|k| a[i * n + k] * a[j * n + k]).sum::<f64>();
            }
            m[i * n + i] += 0.1;
        }
        m
    }

    #[test]
    fn separable_clamp() {
        let s = sys(vec![1.0, 0.0, 0.0, 1.0], vec![1.0, -1.0]);
        let sol = project_onto_cone(&s, &SolverOptions::default()).unwrap();
        assert_eq!(sol.weights, vec![1.0, 0.0]);
    }

    #[test]
    fn interior_identity() {
        let s = sys(vec![1.0, 0.0, 0.0, 1.0], vec![0.5, 2.0]);
        let sol = project_onto_cone(&s, &SolverOptions::default()).unwrap();
        assert!((sol.weights[0] - 0.5).abs() < 1e-15 && (sol.weights[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn two_by_two_interior() {
        let s = sys(vec![2.0, 1.0, 1.0, 2.0], vec![1.0, 1.0]);
        let sol = project_onto_cone(&s, &SolverOptions::default()).unwrap();
        for w in &sol.weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_target_gives_zero() {
        let s = sys(vec![2.0, 1.0, 1.0, 2.0], vec![1.0, 1.0]);
        let sol = solve_potential_match(&s, &[0.0, 0.0], &SolverOptions::default()).unwrap();
        assert_eq!(sol.weights, vec![0.0, 0.0]);
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn oracle_clamps_negative_rhs() {
        let s = sys(vec![1.0, 0.0, 0.0, 1.0], vec![-1.0, -1.0]);
        assert_eq!(brute_force_oracle(&s).unwrap().weights, vec![0.0, 0.0]);
    }

    #[test]
    fn recovers_cone_element() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 8;
        let m = random_spd(n, &mut rng);
        let w: Vec<f64> = (0..n).map(|i| if i % 3 == 0 { 0.0 } else { rng.gen_range(0.1..1.0) }).collect();
        let s0 = sys(m, vec![0.0; n]);
        let b = s0.matvec(&w);
        let sol = solve_potential_match(&s0, &b, &SolverOptions::default()).unwrap();
        for (a, c) in sol.weights.iter().zip(&w) {
            assert!((a - c).abs() < 1e-8);
        }
    }

    #[test]
    fn forced_inactive_node_matches_enumeration() {
        // node 2 sits behind node 1 and is shadowed by it
        let m = vec![4.0, 1.0, 0.5, 1.0, 4.0, 3.5, 0.5, 3.5, 4.0];
        let s = sys(m, vec![1.0, 1.0, 0.6]);
        let a = project_onto_cone(&s, &SolverOptions::default()).unwrap();
        let o = brute_force_oracle(&s).unwrap();
        assert_eq!(a.weights[2], 0.0);
        assert!((a.objective - o.objective).abs() < 1e-9);
    }

    #[test]
    fn agrees_with_oracle_on_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = 4;
            let m = random_spd(n, &mut rng);
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = sys(m, b);
            let a = project_onto_cone(&s, &SolverOptions::default()).unwrap();
            let o = brute_force_oracle(&s).unwrap();
            assert!((a.objective - o.objective).abs() <= 1e-8, "{} {}", a.objective, o.objective);
            assert!(a.kkt_residual <= 1e-8);
        }
    }

    #[test]
    fn objective_beats_random_feasible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10;
        let s = sys(random_spd(n, &mut rng), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let sol = project_onto_cone(&s, &SolverOptions::default()).unwrap();
        for _ in 0..100 {
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            assert!(sol.objective <= s.objective(&w) + 1e-12);
        }
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 30;
        let s = sys(random_spd(n, &mut rng), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let a = project_onto_cone(&s, &SolverOptions::default()).unwrap();
        let b = project_onto_cone(&s, &SolverOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn projected_gradient_matches_active_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 12;
        let mut m = random_spd(n, &mut rng);
        for i in 0..n {
            m[i * n + i] += 2.0;
        }
        let s = sys(m, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let a = project_onto_cone(&s, &SolverOptions::default()).unwrap();
        let opts = SolverOptions {
            algorithm: Algorithm::ProjectedGradient,
            max_iter: Some(20000),
            ..Default::default()
        };
        let p = project_onto_cone(&s, &opts).unwrap();
        assert!((a.objective - p.objective).abs() < 1e-9);
    }

    #[test]
    fn trace_file_has_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let s = sys(vec![2.0, 1.0, 1.0, 2.0], vec![1.0, -1.0]);
        let opts = SolverOptions {
            trace: Some(path.clone()),
            ..Default::default()
        };
        project_onto_cone(&s, &opts).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.starts_with("iter,objective,kkt_residual,active_count\n"));
    }

    #[test]
    fn too_large_for_oracle() {
        let n = 13;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = 1.0;
        }
        assert!(matches!(
            brute_force_oracle(&sys(m, vec![1.0; n])),
            Err(Error::TooLarge(13))
        ));
    }
}
