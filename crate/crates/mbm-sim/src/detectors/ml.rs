//! Exhaustive joint maximum-likelihood detection.

use nalgebra::DVector;
use num_complex::Complex64;

use super::{assemble_result, check_dimensions, DetectionResult, Diagnostics};
use crate::channel::ChannelMatrix;
use crate::linalg::CVec;
use crate::signalsets::SignalSet;
use crate::{Error, Result};

/// Largest joint candidate count `|set|^K` the exhaustive search will
/// enumerate.
pub const DEFAULT_ML_BUDGET: u64 = 1 << 24;

/// Per-user received-signal contributions `H_k s_i` for every signal-set
/// member of every user.
pub(crate) fn user_contributions(
    h: &ChannelMatrix,
    set: &SignalSet,
    user: usize,
) -> Vec<CVec> {
    let d = set.dim();
    let offset = user * d;
    (0..set.len())
        .map(|i| {
            let mut c = CVec::zeros(h.n_r());
            for &(coord, value) in set.nonzeros(i) {
                c.axpy(value, &h.matrix().column(offset + coord), Complex64::new(1.0, 0.0));
            }
            c
        })
        .collect()
}

/// Minimizes `||y - Hx||^2` over the full K-fold product of the signal
/// set. Ties break toward the lowest joint index, where user 0's index
/// is the most significant digit.
pub fn ml_detect(
    y: &DVector<Complex64>,
    h: &ChannelMatrix,
    set: &SignalSet,
    users: usize,
) -> Result<DetectionResult> {
    ml_detect_with_budget(y, h, set, users, DEFAULT_ML_BUDGET)
}

/// [`ml_detect`] with an explicit candidate budget.
pub fn ml_detect_with_budget(
    y: &DVector<Complex64>,
    h: &ChannelMatrix,
    set: &SignalSet,
    users: usize,
    budget: u64,
) -> Result<DetectionResult> {
    check_dimensions(y, h, set, users)?;
    let candidates = (set.len() as u64)
        .checked_pow(users as u32)
        .filter(|&c| c <= budget)
        .ok_or_else(|| {
            Error::Budget(format!(
                "ML enumeration of {}^{users} candidates exceeds the budget of {budget}; \
                 use sphere_detect instead",
                set.len()
            ))
        })?;
    debug_assert!(candidates >= 1);

    let contrib: Vec<Vec<CVec>> = (0..users).map(|k| user_contributions(h, set, k)).collect();
    let mut residuals: Vec<CVec> = (0..=users).map(|_| y.clone()).collect();
    let mut indices = vec![0usize; users];
    let mut best_metric = f64::INFINITY;
    let mut best_indices = vec![0usize; users];

    // Depth-first product enumeration with partial residuals; visiting
    // order is increasing joint index, so strict improvement keeps the
    // lowest-index minimizer.
    fn descend(
        level: usize,
        users: usize,
        contrib: &[Vec<CVec>],
        residuals: &mut [CVec],
        indices: &mut [usize],
        best_metric: &mut f64,
        best_indices: &mut [usize],
    ) {
        for i in 0..contrib[level].len() {
            indices[level] = i;
            {
                let (head, tail) = residuals.split_at_mut(level + 1);
                let child = &mut tail[0];
                child.copy_from(&head[level]);
                *child -= &contrib[level][i];
            }
            if level + 1 == users {
                let metric = residuals[level + 1].norm_squared();
                if metric < *best_metric {
                    *best_metric = metric;
                    best_indices.copy_from_slice(indices);
                }
            } else {
                descend(
                    level + 1,
                    users,
                    contrib,
                    residuals,
                    indices,
                    best_metric,
                    best_indices,
                );
            }
        }
    }
    descend(
        0,
        users,
        &contrib,
        &mut residuals,
        &mut indices,
        &mut best_metric,
        &mut best_indices,
    );

    let diagnostics = Diagnostics {
        residual_norm: best_metric.sqrt(),
        ..Diagnostics::default()
    };
    Ok(assemble_result(best_indices, set, diagnostics))
}
