//! Finite-difference gradient checking.
//!
//! The checker perturbs parameters one at a time, re-evaluates a scalar loss
//! through the untouched forward path, and compares the central difference
//! against the analytic gradient. It works on any (parameters, loss)
//! pairing, so the same machinery checks a single layer or a whole model.

/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Result of one gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// What was checked ("affine", "ctdnn", ...).
    pub target: String,
    pub max_rel_error: f64,
    /// Worst relative error per parameter block, in block order.
    pub blocks: Vec<BlockReport>,
}

#[derive(Debug, Clone)]
pub struct BlockReport {
    pub name: String,
    pub max_rel_error: f64,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

/// Central-difference check of one parameter block.
///
/// `params` is mutated in place during perturbation and restored afterwards.
/// `analytic` must be the gradient of `loss()` with respect to `params`.
/// At most `max_checks` entries are probed, strided evenly across the block
/// so both ends are exercised; `max_checks = 0` means every entry.
pub fn check_block<F>(
    name: &str,
    params: &mut [f64],
    analytic: &[f64],
    eps: f64,
    max_checks: usize,
    mut loss: F,
) -> BlockReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len());
    assert!(eps > 0.0);
    let n = params.len();
    let stride = if max_checks == 0 || n <= max_checks {
        1
    } else {
        n.div_ceil(max_checks)
    };
    let mut max_rel = 0.0f64;
    let mut checked = 0;
    let mut i = 0;
    while i < n {
        let orig = params[i];
        params[i] = orig + eps;
        let lp = loss(params);
        params[i] = orig - eps;
        let lm = loss(params);
        params[i] = orig;
        let numeric = (lp - lm) / (2.0 * eps);
        let rel = relative_error(analytic[i], numeric);
        if rel > max_rel {
            max_rel = rel;
        }
        checked += 1;
        i += stride;
    }
    BlockReport {
        name: name.to_string(),
        max_rel_error: max_rel,
        checked,
    }
}

/// Assemble a report from per-block results.
pub fn report_from_blocks(target: &str, blocks: Vec<BlockReport>) -> GradCheckReport {
    let max_rel_error = blocks
        .iter()
        .map(|b| b.max_rel_error)
        .fold(0.0f64, f64::max);
    GradCheckReport {
        target: target.to_string(),
        max_rel_error,
        blocks,
    }
}
