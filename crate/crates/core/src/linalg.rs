//! Dense Cholesky factorisation with row append/delete, used by the
//! active-set solver and the Green kernel.

use crate::error::{Error, Result};

/// Unrolled dot product; not compensated, used in factorisation kernels.
#[inline]
pub fn fdot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut s = [0.0f64; 4];
    let chunks = n / 4;
    for k in 0..chunks {
        let i = 4 * k;
        s[0] += a[i] * b[i];
        s[1] += a[i + 1] * b[i + 1];
        s[2] += a[i + 2] * b[i + 2];
        s[3] += a[i + 3] * b[i + 3];
    }
    let mut t = (s[0] + s[1]) + (s[2] + s[3]);
    for i in 4 * chunks..n {
        t += a[i] * b[i];
    }
    t
}

/// Lower-triangular factor `L` with `A = L Lᵀ`, stored by rows.
#[derive(Clone, Debug, Default)]
pub struct Cholesky {
    rows: Vec<Vec<f64>>,
}

impl Cholesky {
    pub fn empty() -> Self {
        Cholesky { rows: Vec::new() }
    }

    /// Factors the principal submatrix of the row-major `n x n` matrix `a`
    /// selected by `idx` (in that order).
    pub fn factor_subset(a: &[f64], n: usize, idx: &[usize]) -> Result<Self> {
        let mut f = Cholesky {
            rows: Vec::with_capacity(idx.len()),
        };
        for (i, &p) in idx.iter().enumerate() {
            let mut row = vec![0.0; i + 1];
            let arow = &a[p * n..(p + 1) * n];
            for j in 0..i {
                let s = arow[idx[j]] - fdot(&row[..j], &f.rows[j][..j]);
                row[j] = s / f.rows[j][j];
            }
            let d = arow[p] - fdot(&row[..i], &row[..i]);
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: i, value: d });
            }
            row[i] = d.sqrt();
            f.rows.push(row);
        }
        Ok(f)
    }

    pub fn factor(a: &[f64], n: usize) -> Result<Self> {
        let idx: Vec<usize> = (0..n).collect();
        Self::factor_subset(a, n, &idx)
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.rows[i][i]
    }

    /// Appends one row/column given the new column `col` (entries against the
    /// existing ordering) and the new diagonal entry. Fails without modifying
    /// the factor if the extended matrix is numerically singular.
    pub fn append(&mut self, col: &[f64], diag: f64) -> bool {
        let k = self.rows.len();
        let mut l = vec![0.0; k + 1];
        for i in 0..k {
            let s = col[i] - fdot(&self.rows[i][..i], &l[..i]);
            l[i] = s / self.rows[i][i];
        }
        let d = diag - fdot(&l[..k], &l[..k]);
        if !(d > 1e-13 * diag.abs()) || !d.is_finite() {
            return false;
        }
        l[k] = d.sqrt();
        self.rows.push(l);
        true
    }

    /// Removes row/column `q`, restoring triangular form with Givens rotations.
    pub fn remove(&mut self, q: usize) {
        self.rows.remove(q);
        let k = self.rows.len();
        for r in q..k {
            let a = self.rows[r][r];
            let b = self.rows[r][r + 1];
            let rho = a.hypot(b);
            let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (a / rho, b / rho) };
            for i in r..k {
                let row = &mut self.rows[i];
                let x = row[r];
                let y = row[r + 1];
                row[r] = c * x + s * y;
                row[r + 1] = -s * x + c * y;
            }
            self.rows[r].pop();
            if self.rows[r][r] < 0.0 {
                for i in r..k {
                    self.rows[i][r] = -self.rows[i][r];
                }
            }
        }
    }

    /// Solves `L Lᵀ x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let k = self.rows.len();
        let mut y = vec![0.0; k];
        for i in 0..k {
            let s = b[i] - fdot(&self.rows[i][..i], &y[..i]);
            y[i] = s / self.rows[i][i];
        }
        for i in (0..k).rev() {
            y[i] /= self.rows[i][i];
            let xi = y[i];
            let row = &self.rows[i];
            for j in 0..i {
                y[j] -= row[j] * xi;
            }
        }
        y
    }

    /// Solves `L y = b` only.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let k = self.rows.len();
        let mut y = vec![0.0; k];
        for i in 0..k {
            let s = b[i] - fdot(&self.rows[i][..i], &y[..i]);
            y[i] = s / self.rows[i][i];
        }
        y
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.rows.iter().enumerate().map(|(i, r)| r[i].ln()).sum::<f64>()
    }
}

/// Smallest eigenvalue estimate by Lanczos iteration with full
/// reorthogonalisation; deterministic start vector.
pub fn smallest_eigenvalue_estimate(a: &[f64], n: usize, steps: usize) -> f64 {
    let m = steps.min(n);
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 101) as f64 / 101.0).collect();
    let nv = fdot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= nv);
    q.push(v);
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    for j in 0..m {
        let qj = &q[j];
        let mut w: Vec<f64> = (0..n).map(|i| fdot(&a[i * n..(i + 1) * n], qj)).collect();
        let aj = fdot(&w, qj);
        alpha.push(aj);
        for qi in &q {
            let c = fdot(&w, qi);
            w.iter_mut().zip(qi).for_each(|(x, y)| *x -= c * y);
        }
        let b = fdot(&w, &w).sqrt();
        if b < 1e-12 || j + 1 == m {
            break;
        }
        beta.push(b);
        w.iter_mut().for_each(|x| *x /= b);
        q.push(w);
    }
    let k = alpha.len();
    let mut t = nalgebra::DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize, seed: u64) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..n).map(|k| b[i * n + k] * b[j * n + k]).sum::<f64>();
            }
            a[i * n + i] += n as f64;
        }
        a
    }

    fn matvec(a: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
        (0..n).map(|i| fdot(&a[i * n..(i + 1) * n], x)).collect()
    }

    #[test]
    fn factor_and_solve() {
        let n = 7;
        let a = spd(n, 1);
        let f = Cholesky::factor(&a, n).unwrap();
        let x: Vec<f64> = (0..n).map(|i| i as f64 - 3.0).collect();
        let b = matvec(&a, n, &x);
        let y = f.solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn detects_indefinite() {
        let a = vec![1.0, 2.0, 2.0, 1.0];
        assert!(matches!(
            Cholesky::factor(&a, 2),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn append_and_remove_match_fresh_factor() {
        let n = 9;
        let a = spd(n, 2);
        let mut f = Cholesky::factor_subset(&a, n, &[0, 3, 5, 7]).unwrap();
        let mut order = vec![0, 3, 5, 7];
        let col: Vec<f64> = order.iter().map(|&i| a[i * n + 2]).collect();
        assert!(f.append(&col, a[2 * n + 2]));
        order.push(2);
        f.remove(1);
        order.remove(1);
        let g = Cholesky::factor_subset(&a, n, &order).unwrap();
        for i in 0..order.len() {
            for j in 0..=i {
                assert!((f.rows[i][j] - g.rows[i][j]).abs() < 1e-12, "{i} {j}");
            }
        }
    }

    #[test]
    fn lanczos_estimate_matches_known_spectrum() {
        let n = 30;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 1.0 + i as f64;
        }
        let l = smallest_eigenvalue_estimate(&a, n, 30);
        assert!((l - 1.0).abs() < 1e-8);
    }
}
