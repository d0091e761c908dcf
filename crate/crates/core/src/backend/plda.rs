//! Two-covariance PLDA.
//!
//! Generative model: speaker mean `y ~ N(mu, B)`, observation `x ~ N(y, W)`
//! with full between-class covariance B and within-class covariance W.
//!
//! EM über per-class sufficient statistics. With n observations of a class
//! averaging to x_bar, the posterior of the class mean is Gaussian with
//!
//! ```text
//! K   = B (B + W/n)^-1
//! m   = mu + K (x_bar - mu)
//! C   = B - K B
//! ```
//!
//! which never inverts B itself, so a rank-deficient between-class
//! covariance (fewer classes than dimensions) stays workable.
//!
//! Scoring uses the block structure of the two hypotheses' joint Gaussians:
//! with T = B + W, the same-speaker covariance [[T, B], [B, T]] diagonalizes
//! to (T + B, T - B) under the sum/difference transform, so the
//! log-likelihood ratio needs only solves against T + B = W + 2B, T - B = W,
//! and T.

use super::lda::{class_indices, class_stats};
use super::linalg::{add_outer, cholesky, chol_logdet, chol_quad_form, chol_solve, matmul, symmetrize};
use super::BackendError;
use crate::nn::Mat;

/// Fitted two-covariance model.
#[derive(Debug, Clone, PartialEq)]
pub struct PldaModel {
    pub mean: Vec<f64>,
    /// Between-class covariance (symmetric PSD).
    pub between: Mat<f64>,
    /// Within-class covariance (symmetric PD).
    pub within: Mat<f64>,
}

/// Fit diagnostics: the data log-likelihood after each EM iteration
/// (index 0 is the initial model).
#[derive(Debug, Clone)]
pub struct PldaFitReport {
    pub loglik: Vec<f64>,
    pub iterations: usize,
}

pub struct PldaOptions {
    pub max_iterations: usize,
    pub rel_tolerance: f64,
}

impl Default for PldaOptions {
    fn default() -> Self {
        PldaOptions {
            max_iterations: 20,
            rel_tolerance: 1e-6,
        }
    }
}

/// Per-class sufficient statistics.
struct Suffstats {
    counts: Vec<usize>,
    /// Class sample means.
    xbar: Vec<Vec<f64>>,
    /// Within-class scatter around each class mean, summed over classes.
    scatter_within: Mat<f64>,
    dim: usize,
    total: usize,
}

fn suffstats(vectors: &Mat<f64>, labels: &[usize]) -> Suffstats {
    let stats = class_stats(vectors, labels);
    let idx = class_indices(labels);
    let mut scatter_within = Mat::zeros(stats.dim, stats.dim);
    let mut centered = vec![0f64; stats.dim];
    for (r, &ci) in idx.iter().enumerate() {
        for ((cv, &x), &m) in centered
            .iter_mut()
            .zip(vectors.row(r).iter())
            .zip(stats.means[ci].iter())
        {
            *cv = x - m;
        }
        add_outer(&mut scatter_within, &centered, 1.0);
    }
    Suffstats {
        counts: stats.counts,
        xbar: stats.means,
        scatter_within,
        dim: stats.dim,
        total: stats.total,
    }
}

/// Data log-likelihood under the current parameters, computed per class from
/// the marginal `x_bar ~ N(mu, B + W/n)` and the within-class residuals.
fn log_likelihood(model: &PldaModel, ss: &Suffstats) -> Result<f64, BackendError> {
    let d = ss.dim;
    let lw = cholesky(&model.within)
        .map_err(|e| BackendError::Numerical(format!("within covariance: {e}")))?;
    let logdet_w = chol_logdet(&lw);
    // tr(W^-1 S) = sum_col s_col^T W^-1 s_col over the scatter's columns...
    // cheaper: solve W X = S and take the trace of X.
    let mut trace_term = 0.0;
    let mut col = vec![0f64; d];
    for c in 0..d {
        for r in 0..d {
            col[r] = ss.scatter_within.get(r, c);
        }
        let x = chol_solve(&lw, &col);
        trace_term += x[c];
    }
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let mut ll = 0.0;
    for (ci, &n) in ss.counts.iter().enumerate() {
        let nf = n as f64;
        // Marginal of the class mean.
        let mut g = model.between.clone();
        for i in 0..d {
            for j in 0..d {
                let v = g.get(i, j) + model.within.get(i, j) / nf;
                g.set(i, j, v);
            }
        }
        let lg = cholesky(&g)
            .map_err(|e| BackendError::Numerical(format!("marginal covariance: {e}")))?;
        let diff: Vec<f64> = ss.xbar[ci]
            .iter()
            .zip(model.mean.iter())
            .map(|(x, m)| x - m)
            .collect();
        ll += -0.5 * (d as f64 * ln_2pi + chol_logdet(&lg) + chol_quad_form(&lg, &diff));
        // Residual factor of the n observations around their mean.
        ll += -0.5 * ((nf - 1.0) * (d as f64 * ln_2pi + logdet_w) + d as f64 * nf.ln());
    }
    ll += -0.5 * trace_term;
    Ok(ll)
}

/// Fit by expectation-maximization. Requires at least two classes, each with
/// at least two observations.
pub fn fit_plda(
    vectors: &Mat<f64>,
    labels: &[usize],
    options: &PldaOptions,
) -> Result<(PldaModel, PldaFitReport), BackendError> {
    let ss = suffstats(vectors, labels);
    let c = ss.counts.len();
    let d = ss.dim;
    if c < 2 {
        return Err(BackendError::Precondition(format!(
            "PLDA needs at least 2 classes, got {c}"
        )));
    }
    if let Some(bad) = ss.counts.iter().position(|&n| n < 2) {
        return Err(BackendError::Precondition(format!(
            "PLDA needs 2+ samples per class; class index {bad} has {}",
            ss.counts[bad]
        )));
    }

    // Moment-based initialization.
    let mut mean = vec![0f64; d];
    for (ci, m) in ss.xbar.iter().enumerate() {
        for (g, &v) in mean.iter_mut().zip(m.iter()) {
            *g += v * ss.counts[ci] as f64;
        }
    }
    for v in mean.iter_mut() {
        *v /= ss.total as f64;
    }
    let mut within = ss.scatter_within.clone();
    for v in within.data.iter_mut() {
        *v /= (ss.total - c).max(1) as f64;
    }
    let mut between = Mat::zeros(d, d);
    let mut diff = vec![0f64; d];
    for m in ss.xbar.iter() {
        for ((dv, &x), &g) in diff.iter_mut().zip(m.iter()).zip(mean.iter()) {
            *dv = x - g;
        }
        add_outer(&mut between, &diff, 1.0);
    }
    for v in between.data.iter_mut() {
        *v /= c as f64;
    }
    let mut model = PldaModel {
        mean,
        between,
        within,
    };

    let mut loglik = vec![log_likelihood(&model, &ss)?];
    let mut iterations = 0;
    for it in 0..options.max_iterations {
        iterations = it + 1;
        // E-step per class.
        let mut post_means: Vec<Vec<f64>> = Vec::with_capacity(c);
        let mut post_covs: Vec<Mat<f64>> = Vec::with_capacity(c);
        for (ci, &n) in ss.counts.iter().enumerate() {
            let nf = n as f64;
            let mut g = model.between.clone();
            for i in 0..d {
                for j in 0..d {
                    let v = g.get(i, j) + model.within.get(i, j) / nf;
                    g.set(i, j, v);
                }
            }
            let lg = cholesky(&g).map_err(|e| {
                BackendError::Numerical(format!("EM iteration {it}, class {ci}: {e}"))
            })?;
            // K = B G^-1 computed as (G^-1 B)^T; G, B symmetric.
            let ginv_b = {
                let mut out = Mat::zeros(d, d);
                let mut col = vec![0f64; d];
                for cc in 0..d {
                    for r in 0..d {
                        col[r] = model.between.get(r, cc);
                    }
                    let x = chol_solve(&lg, &col);
                    for r in 0..d {
                        out.set(r, cc, x[r]);
                    }
                }
                out
            };
            let k = ginv_b.transposed();
            let diff: Vec<f64> = ss.xbar[ci]
                .iter()
                .zip(model.mean.iter())
                .map(|(x, m)| x - m)
                .collect();
            let mut m_post = model.mean.clone();
            for i in 0..d {
                let mut s = 0.0;
                for j in 0..d {
                    s += k.get(i, j) * diff[j];
                }
                m_post[i] += s;
            }
            // C = B - K B
            let kb = matmul(&k, &model.between);
            let mut c_post = model.between.clone();
            for (cv, &kv) in c_post.data.iter_mut().zip(kb.data.iter()) {
                *cv -= kv;
            }
            symmetrize(&mut c_post);
            post_means.push(m_post);
            post_covs.push(c_post);
        }

        // M-step.
        let mut new_mean = vec![0f64; d];
        for m in &post_means {
            for (g, &v) in new_mean.iter_mut().zip(m.iter()) {
                *g += v;
            }
        }
        for v in new_mean.iter_mut() {
            *v /= c as f64;
        }
        let mut new_between = Mat::zeros(d, d);
        let mut dv = vec![0f64; d];
        for (ci, m) in post_means.iter().enumerate() {
            for ((x, &mi), &gi) in dv.iter_mut().zip(m.iter()).zip(new_mean.iter()) {
                *x = mi - gi;
            }
            add_outer(&mut new_between, &dv, 1.0);
            for (nb, &pc) in new_between.data.iter_mut().zip(post_covs[ci].data.iter()) {
                *nb += pc;
            }
        }
        for v in new_between.data.iter_mut() {
            *v /= c as f64;
        }
        symmetrize(&mut new_between);

        let mut new_within = ss.scatter_within.clone();
        for (ci, &n) in ss.counts.iter().enumerate() {
            let nf = n as f64;
            for ((x, &xb), &pm) in dv
                .iter_mut()
                .zip(ss.xbar[ci].iter())
                .zip(post_means[ci].iter())
            {
                *x = xb - pm;
            }
            add_outer(&mut new_within, &dv, nf);
            for (nw, &pc) in new_within.data.iter_mut().zip(post_covs[ci].data.iter()) {
                *nw += nf * pc;
            }
        }
        for v in new_within.data.iter_mut() {
            *v /= ss.total as f64;
        }
        symmetrize(&mut new_within);

        model = PldaModel {
            mean: new_mean,
            between: new_between,
            within: new_within,
        };
        let ll = log_likelihood(&model, &ss)?;
        let prev = *loglik.last().unwrap();
        loglik.push(ll);
        if (ll - prev).abs() / prev.abs().max(1.0) < options.rel_tolerance {
            break;
        }
    }
    Ok((
        model,
        PldaFitReport {
            loglik,
            iterations,
        },
    ))
}

/// Precomputed scorer for the same/different-speaker likelihood ratio.
pub struct PldaScorer {
    mean: Vec<f64>,
    /// Cholesky of W + 2B (sum channel of the same-speaker hypothesis).
    l_sum: Mat<f64>,
    /// Cholesky of W (difference channel).
    l_diff: Mat<f64>,
    /// Cholesky of T = B + W (per-observation marginal).
    l_t: Mat<f64>,
    logdet_same: f64,
    logdet_diff: f64,
}

impl PldaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn scorer(&self) -> Result<PldaScorer, BackendError> {
        let d = self.dim();
        let mut sum = self.within.clone();
        let mut t = self.within.clone();
        for i in 0..d * d {
            sum.data[i] += 2.0 * self.between.data[i];
            t.data[i] += self.between.data[i];
        }
        let l_sum = cholesky(&sum)
            .map_err(|e| BackendError::Numerical(format!("W + 2B not PD: {e}")))?;
        let l_diff = cholesky(&self.within)
            .map_err(|e| BackendError::Numerical(format!("W not PD: {e}")))?;
        let l_t =
            cholesky(&t).map_err(|e| BackendError::Numerical(format!("B + W not PD: {e}")))?;
        let logdet_same = chol_logdet(&l_sum) + chol_logdet(&l_diff);
        let logdet_diff = 2.0 * chol_logdet(&l_t);
        Ok(PldaScorer {
            mean: self.mean.clone(),
            l_sum,
            l_diff,
            l_t,
            logdet_same,
            logdet_diff,
        })
    }
}

impl PldaScorer {
    /// `log p(enroll, test | same speaker) - log p(enroll, test | different
    /// speakers)`. Symmetric in its arguments.
    pub fn score(&self, enroll: &[f64], test: &[f64]) -> Result<f64, BackendError> {
        let d = self.mean.len();
        if enroll.len() != d || test.len() != d {
            return Err(BackendError::Config(format!(
                "vector dims {}/{} do not match model dim {d}",
                enroll.len(),
                test.len()
            )));
        }
        let a: Vec<f64> = enroll.iter().zip(self.mean.iter()).map(|(x, m)| x - m).collect();
        let b: Vec<f64> = test.iter().zip(self.mean.iter()).map(|(x, m)| x - m).collect();
        let u: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x + y).collect();
        let v: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x - y).collect();
        let quad_same =
            0.5 * (chol_quad_form(&self.l_sum, &u) + chol_quad_form(&self.l_diff, &v));
        let quad_diff = chol_quad_form(&self.l_t, &a) + chol_quad_form(&self.l_t, &b);
        Ok(0.5 * (self.logdet_diff - self.logdet_same) + 0.5 * (quad_diff - quad_same))
    }
}
