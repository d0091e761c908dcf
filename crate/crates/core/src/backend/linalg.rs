//! Dense symmetric linear algebra in double precision: Cholesky
//! factorization, triangular solves, and a cyclic Jacobi eigensolver.
//! Sizes here are the embedding dimension (a few hundred), where these
//! classics are entirely adequate.

use crate::nn::Mat;

#[derive(Debug, Clone, PartialEq)]
pub enum LinalgError {
    /// Cholesky pivot failed: matrix is not positive definite.
    NotPositiveDefinite { pivot: usize },
    /// Jacobi sweep limit exceeded before convergence.
    NoConvergence,
}

impl std::fmt::Display for LinalgError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LinalgError::NotPositiveDefinite { pivot } => {
                write!(f, "matrix not positive definite (pivot {pivot})")
            }
            LinalgError::NoConvergence => write!(f, "eigensolver did not converge"),
        }
    }
}

impl std::error::Error for LinalgError {}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &Mat<f64>) -> Result<Mat<f64>, LinalgError> {
    assert_eq!(a.rows, a.cols, "cholesky needs a square matrix");
    let n = a.rows;
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(LinalgError::NotPositiveDefinite { pivot: i });
                }
                l.set(i, j, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Solve `L y = b` (forward substitution).
pub fn solve_lower(l: &Mat<f64>, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    y
}

/// Solve `L^T x = y` (backward substitution with the lower factor).
pub fn solve_lower_transpose(l: &Mat<f64>, y: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    x
}

/// Solve `A x = b` given the Cholesky factor of A.
pub fn chol_solve(l: &Mat<f64>, b: &[f64]) -> Vec<f64> {
    solve_lower_transpose(l, &solve_lower(l, b))
}

/// `log det A` from its Cholesky factor.
pub fn chol_logdet(l: &Mat<f64>) -> f64 {
    (0..l.rows).map(|i| l.get(i, i).ln()).sum::<f64>() * 2.0
}

/// Quadratic form `b^T A^{-1} b` from the Cholesky factor of A.
pub fn chol_quad_form(l: &Mat<f64>, b: &[f64]) -> f64 {
    let y = solve_lower(l, b);
    y.iter().map(|v| v * v).sum()
}

/// `A^{-1} B` column by column from the Cholesky factor of A.
pub fn chol_solve_mat(l: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    let n = l.rows;
    assert_eq!(b.rows, n);
    let mut out = Mat::zeros(n, b.cols);
    let mut col = vec![0.0; n];
    for c in 0..b.cols {
        for r in 0..n {
            col[r] = b.get(r, c);
        }
        let x = chol_solve(l, &col);
        for r in 0..n {
            out.set(r, c, x[r]);
        }
    }
    out
}

/// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
/// Returns eigenvalues and the orthogonal matrix with eigenvectors in its
/// columns (`a = v diag(vals) v^T`), unsorted.
pub fn jacobi_eigh(a: &Mat<f64>, max_sweeps: usize) -> Result<(Vec<f64>, Mat<f64>), LinalgError> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut m = a.clone();
    let mut v = Mat::zeros(n, n);
    for i in 0..n {
        v.set(i, i, 1.0);
    }
    if n == 1 {
        return Ok((vec![m.get(0, 0)], v));
    }
    let frob: f64 = a.data.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = (frob * 1e-14).max(1e-300);
    for _ in 0..max_sweeps {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off += m.get(p, q) * m.get(p, q);
            }
        }
        if off.sqrt() <= tol {
            let vals = (0..n).map(|i| m.get(i, i)).collect();
            return Ok((vals, v));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // Rotate rows/columns p and q.
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    Err(LinalgError::NoConvergence)
}

/// `out = a * b` for small dense matrices.
pub fn matmul(a: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    assert_eq!(a.cols, b.rows);
    let mut out = Mat::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let av = a.get(i, k);
            if av == 0.0 {
                continue;
            }
            for j in 0..b.cols {
                out.data[i * b.cols + j] += av * b.get(k, j);
            }
        }
    }
    out
}

/// Symmetrize in place: `a = (a + a^T) / 2`.
pub fn symmetrize(a: &mut Mat<f64>) {
    for i in 0..a.rows {
        for j in i + 1..a.cols {
            let m = 0.5 * (a.get(i, j) + a.get(j, i));
            a.set(i, j, m);
            a.set(j, i, m);
        }
    }
}

/// Outer product accumulate: `acc += scale * x x^T`.
pub fn add_outer(acc: &mut Mat<f64>, x: &[f64], scale: f64) {
    let n = x.len();
    for i in 0..n {
        let xi = scale * x[i];
        if xi == 0.0 {
            continue;
        }
        let row = &mut acc.data[i * n..(i + 1) * n];
        for (r, &xj) in row.iter_mut().zip(x.iter()) {
            *r += xi * xj;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_spd(rng: &mut Rng, n: usize) -> Mat<f64> {
        // A = B B^T + n*I is comfortably positive definite.
        let mut b = Mat::zeros(n, n);
        for v in b.data.iter_mut() {
            *v = rng.uniform_in(-1.0, 1.0);
        }
        let bt = b.transposed();
        let mut a = matmul(&b, &bt);
        for i in 0..n {
            let d = a.get(i, i);
            a.set(i, i, d + n as f64);
        }
        a
    }

    #[test]
    fn cholesky_reconstructs_the_matrix() {
        let mut rng = Rng::new(31);
        for &n in &[1usize, 2, 5, 12] {
            let a = random_spd(&mut rng, n);
            let l = cholesky(&a).unwrap();
            let lt = l.transposed();
            let back = matmul(&l, &lt);
            for (x, y) in a.data.iter().zip(back.data.iter()) {
                assert!((x - y).abs() < 1e-9, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = Mat::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]); // eigenvalues 3, -1
        assert!(matches!(
            cholesky(&a),
            Err(LinalgError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn chol_solve_inverts() {
        let mut rng = Rng::new(32);
        let a = random_spd(&mut rng, 8);
        let l = cholesky(&a).unwrap();
        let b: Vec<f64> = (0..8).map(|_| rng.uniform_in(-3.0, 3.0)).collect();
        let x = chol_solve(&l, &b);
        // A x should give back b.
        for i in 0..8 {
            let mut s = 0.0;
            for j in 0..8 {
                s += a.get(i, j) * x[j];
            }
            assert!((s - b[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn logdet_matches_two_by_two_formula() {
        let a = Mat::from_vec(2, 2, vec![4.0, 1.0, 1.0, 3.0]);
        let l = cholesky(&a).unwrap();
        let det: f64 = 4.0 * 3.0 - 1.0;
        assert!((chol_logdet(&l) - det.ln()).abs() < 1e-12);
    }

    #[test]
    fn quad_form_matches_direct_evaluation() {
        let mut rng = Rng::new(33);
        let a = random_spd(&mut rng, 6);
        let l = cholesky(&a).unwrap();
        let b: Vec<f64> = (0..6).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let x = chol_solve(&l, &b);
        let direct: f64 = b.iter().zip(x.iter()).map(|(bi, xi)| bi * xi).sum();
        assert!((chol_quad_form(&l, &b) - direct).abs() < 1e-10);
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // Diagonal matrix conjugated by a known rotation has the diagonal as
        // its spectrum.
        let d = Mat::from_vec(3, 3, vec![5.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, -1.0]);
        let angle: f64 = 0.7;
        let (c, s) = (angle.cos(), angle.sin());
        let q = Mat::from_vec(3, 3, vec![c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
        let a = matmul(&matmul(&q, &d), &q.transposed());
        let (mut vals, v) = jacobi_eigh(&a, 50).unwrap();
        vals.sort_by(|x, y| y.partial_cmp(x).unwrap());
        assert!((vals[0] - 5.0).abs() < 1e-10);
        assert!((vals[1] - 2.0).abs() < 1e-10);
        assert!((vals[2] + 1.0).abs() < 1e-10);
        // Eigenvector columns are orthonormal.
        let vtv = matmul(&v.transposed(), &v);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((vtv.get(i, j) - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn jacobi_reconstructs_random_symmetric() {
        let mut rng = Rng::new(34);
        let n = 10;
        let mut a = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = rng.uniform_in(-2.0, 2.0);
                a.set(i, j, v);
                a.set(j, i, v);
            }
        }
        let (vals, v) = jacobi_eigh(&a, 100).unwrap();
        // v diag(vals) v^T = a
        let mut lam = Mat::zeros(n, n);
        for i in 0..n {
            lam.set(i, i, vals[i]);
        }
        let back = matmul(&matmul(&v, &lam), &v.transposed());
        for (x, y) in a.data.iter().zip(back.data.iter()) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
