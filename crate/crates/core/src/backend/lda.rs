//! Linear discriminant analysis via the generalized symmetric eigenproblem.
//!
//! Within-class scatter S_w (ridge-stabilized) and between-class scatter S_b
//! are reduced with the Cholesky factor of S_w: the top-p eigenvectors of
//! `L^-1 S_b L^-T` map back as `w = L^-T u`, which leaves each projection
//! row with unit S_w-norm.

use std::collections::BTreeMap;

use super::linalg::{add_outer, cholesky, jacobi_eigh, solve_lower, solve_lower_transpose, symmetrize};
use super::BackendError;
use crate::nn::Mat;

/// Fitted LDA projection.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaTransform {
    /// p x D projection; rows ordered by descending discriminability.
    pub projection: Mat<f64>,
    /// Global mean subtracted before projection.
    pub mean: Vec<f64>,
    /// Number of training classes.
    pub classes: usize,
}

/// Per-class statistics shared by LDA and PLDA fitting.
pub(crate) struct ClassStats {
    pub counts: Vec<usize>,
    pub means: Vec<Vec<f64>>,
    pub global_mean: Vec<f64>,
    pub dim: usize,
    pub total: usize,
}

pub(crate) fn class_stats(vectors: &Mat<f64>, labels: &[usize]) -> ClassStats {
    assert_eq!(vectors.rows, labels.len());
    let dim = vectors.cols;
    let mut index: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        let next = index.len();
        index.entry(l).or_insert(next);
    }
    let c = index.len();
    let mut counts = vec![0usize; c];
    let mut means = vec![vec![0f64; dim]; c];
    let mut global_mean = vec![0f64; dim];
    for (r, &l) in labels.iter().enumerate() {
        let ci = index[&l];
        counts[ci] += 1;
        for (m, &v) in means[ci].iter_mut().zip(vectors.row(r).iter()) {
            *m += v;
        }
        for (g, &v) in global_mean.iter_mut().zip(vectors.row(r).iter()) {
            *g += v;
        }
    }
    for (m, &n) in means.iter_mut().zip(counts.iter()) {
        for v in m.iter_mut() {
            *v /= n as f64;
        }
    }
    for v in global_mean.iter_mut() {
        *v /= vectors.rows as f64;
    }
    ClassStats {
        counts,
        means,
        global_mean,
        dim,
        total: vectors.rows,
    }
}

/// Class index per row in first-appearance order (matches [`class_stats`]).
pub(crate) fn class_indices(labels: &[usize]) -> Vec<usize> {
    let mut index: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        let next = index.len();
        index.entry(l).or_insert(next);
    }
    labels.iter().map(|l| index[l]).collect()
}

/// Fit an LDA projection to `p` dimensions.
///
/// The within-class scatter receives a ridge of `1e-6 * trace(S_w) / D`
/// before factorization so small synthetic sets stay solvable.
pub fn fit_lda(vectors: &Mat<f64>, labels: &[usize], p: usize) -> Result<LdaTransform, BackendError> {
    let stats = class_stats(vectors, labels);
    let c = stats.counts.len();
    let d = stats.dim;
    if c < 2 {
        return Err(BackendError::Precondition(format!(
            "LDA needs at least 2 classes, got {c}"
        )));
    }
    if !stats.counts.iter().any(|&n| n >= 2) {
        return Err(BackendError::Precondition(
            "LDA needs at least one class with 2+ samples".into(),
        ));
    }
    if p == 0 || p > d.min(c - 1) {
        return Err(BackendError::Config(format!(
            "projection dim {p} outside [1, min(D={d}, classes-1={})]",
            c - 1
        )));
    }

    let idx = class_indices(labels);
    let mut sw = Mat::zeros(d, d);
    let mut centered = vec![0f64; d];
    for (r, &ci) in idx.iter().enumerate() {
        for ((cv, &x), &m) in centered
            .iter_mut()
            .zip(vectors.row(r).iter())
            .zip(stats.means[ci].iter())
        {
            *cv = x - m;
        }
        add_outer(&mut sw, &centered, 1.0);
    }
    let trace: f64 = (0..d).map(|i| sw.get(i, i)).sum();
    let ridge = 1e-6 * trace / d as f64;
    for i in 0..d {
        let v = sw.get(i, i);
        sw.set(i, i, v + ridge);
    }

    let mut sb = Mat::zeros(d, d);
    let mut diff = vec![0f64; d];
    for (ci, mean) in stats.means.iter().enumerate() {
        for ((dv, &m), &g) in diff.iter_mut().zip(mean.iter()).zip(stats.global_mean.iter()) {
            *dv = m - g;
        }
        add_outer(&mut sb, &diff, stats.counts[ci] as f64);
    }

    let l = cholesky(&sw).map_err(|e| BackendError::Numerical(format!("within-class scatter: {e}")))?;
    // M = L^-1 S_b L^-T, via two triangular solves.
    let y = chol_solve_mat_lower(&l, &sb); // L^-1 S_b
    let mut m = chol_solve_mat_lower(&l, &y.transposed()); // L^-1 (L^-1 S_b)^T = M^T
    symmetrize(&mut m);
    let (vals, vecs) = jacobi_eigh(&m, 200).map_err(|e| BackendError::Numerical(e.to_string()))?;

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap().then(a.cmp(&b)));

    let mut projection = Mat::zeros(p, d);
    for (row, &ei) in order.iter().take(p).enumerate() {
        let u: Vec<f64> = (0..d).map(|r| vecs.get(r, ei)).collect();
        let mut w = solve_lower_transpose(&l, &u);
        // Deterministic sign: largest-magnitude component positive.
        let lead = w
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        if w[lead] < 0.0 {
            for v in w.iter_mut() {
                *v = -*v;
            }
        }
        projection.row_mut(row).copy_from_slice(&w);
    }

    Ok(LdaTransform {
        projection,
        mean: stats.global_mean,
        classes: c,
    })
}

/// `L^-1 B` by forward substitution per column.
fn chol_solve_mat_lower(l: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    let n = l.rows;
    assert_eq!(b.rows, n);
    let mut out = Mat::zeros(n, b.cols);
    let mut col = vec![0.0; n];
    for c in 0..b.cols {
        for r in 0..n {
            col[r] = b.get(r, c);
        }
        let y = solve_lower(l, &col);
        for r in 0..n {
            out.set(r, c, y[r]);
        }
    }
    out
}

impl LdaTransform {
    pub fn output_dim(&self) -> usize {
        self.projection.rows
    }

    pub fn input_dim(&self) -> usize {
        self.projection.cols
    }

    /// `projection * (v - mean)`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>, BackendError> {
        if v.len() != self.input_dim() {
            return Err(BackendError::Config(format!(
                "vector dim {} does not match transform input {}",
                v.len(),
                self.input_dim()
            )));
        }
        let centered: Vec<f64> = v.iter().zip(self.mean.iter()).map(|(x, m)| x - m).collect();
        Ok((0..self.projection.rows)
            .map(|r| {
                self.projection
                    .row(r)
                    .iter()
                    .zip(centered.iter())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }
}
