//! Complex-valued greedy sparse recovery: OMP, CoSaMP, and subspace
//! pursuit.
//!
//! All three operate directly on complex data with Hermitian
//! correlations, preserving the one-nonzero-per-block structure that
//! user-activity-pattern extraction relies on. Least-squares refits go
//! through Householder QR with an SVD minimum-norm fallback on rank
//! deficiency (flagged in the result). CoSaMP and subspace pursuit
//! both re-solve the least-squares problem on the pruned support before
//! recomputing the residual; without that refit CoSaMP's exact-recovery
//! rate collapses in the regimes this crate operates in.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::linalg::{col_norms_sqr, correlations, ls_solve, submatrix, top_k_indices, CMat, CVec};
use crate::{Error, Result};

/// Iteration cap for the CoSaMP / subspace-pursuit refinement loop.
pub const DEFAULT_SR_MAX_ITERS: usize = 50;

/// Relative residual-improvement threshold below which the pursuit
/// loop stops.
const RELATIVE_IMPROVEMENT_STOP: f64 = 1e-8;

/// Residuals below this fraction of `||y||` count as an exact fit.
const ZERO_RESIDUAL_REL: f64 = 1e-12;

/// Output of a sparse-recovery run.
#[derive(Debug, Clone)]
pub struct Recovery {
    /// Full-length coefficient vector, zero off the support.
    pub coeffs: DVector<Complex64>,
    /// Recovered support, ascending.
    pub support: Vec<usize>,
    /// Final residual `y - Phi_S c_S`.
    pub residual: DVector<Complex64>,
    /// Greedy selections (OMP) or pursuit rounds (CoSaMP/SP) performed.
    pub iterations: usize,
    /// Whether any least-squares step was rank-deficient.
    pub rank_deficient: bool,
}

fn check_sparsity(s: usize, merge_factor: usize, cols: usize, name: &str) -> Result<()> {
    if s < 1 {
        return Err(Error::Config(format!("{name} requires sparsity >= 1")));
    }
    if merge_factor * s > cols {
        return Err(Error::Config(format!(
            "{name} requires {merge_factor} * sparsity <= {cols} columns, got sparsity {s}"
        )));
    }
    Ok(())
}

/// Incremental OMP state. Supports are nested in the target sparsity,
/// so escalating the sparsity estimate continues the same run instead
/// of recomputing from scratch.
pub(crate) struct OmpState {
    y: CVec,
    y_norm: f64,
    col_norms: Vec<f64>,
    selected: Vec<bool>,
    support: Vec<usize>,
    coeffs_on_support: CVec,
    residual: CVec,
    iterations: usize,
    rank_deficient: bool,
}

impl OmpState {
    pub(crate) fn new(y: &CVec, phi: &CMat) -> OmpState {
        OmpState {
            y: y.clone(),
            y_norm: y.norm(),
            col_norms: col_norms_sqr(phi),
            selected: vec![false; phi.ncols()],
            support: Vec::new(),
            coeffs_on_support: CVec::zeros(0),
            residual: y.clone(),
            iterations: 0,
            rank_deficient: false,
        }
    }

    /// One greedy selection plus least-squares refit. Returns `false`
    /// when the residual is already numerically zero or no column is
    /// left to select.
    pub(crate) fn extend(&mut self, phi: &CMat) -> bool {
        if self.support.len() == phi.ncols() {
            return false;
        }
        if self.residual.norm() <= ZERO_RESIDUAL_REL * self.y_norm {
            return false;
        }
        // j0 = argmax |phi_j^H r| / ||phi_j||^2 over unselected columns,
        // ties toward the lowest index.
        let corr = correlations(phi, &self.residual);
        let mut best = f64::NEG_INFINITY;
        let mut pick = usize::MAX;
        for (j, c) in corr.iter().enumerate() {
            if self.selected[j] || self.col_norms[j] == 0.0 {
                continue;
            }
            let score = c.norm() / self.col_norms[j];
            if score > best {
                best = score;
                pick = j;
            }
        }
        if pick == usize::MAX {
            return false;
        }
        self.selected[pick] = true;
        self.support.push(pick);
        self.iterations += 1;
        let sub = submatrix(phi, &self.support);
        let (c, deficient) = ls_solve(&sub, &self.y);
        self.rank_deficient |= deficient;
        self.residual = &self.y - sub * &c;
        self.coeffs_on_support = c;
        true
    }

    pub(crate) fn support(&self) -> &[usize] {
        &self.support
    }

    pub(crate) fn recovery(&self, cols: usize) -> Recovery {
        let mut coeffs = CVec::zeros(cols);
        for (i, &j) in self.support.iter().enumerate() {
            coeffs[j] = self.coeffs_on_support[i];
        }
        let mut support = self.support.clone();
        support.sort_unstable();
        Recovery {
            coeffs,
            support,
            residual: self.residual.clone(),
            iterations: self.iterations,
            rank_deficient: self.rank_deficient,
        }
    }
}

/// Orthogonal matching pursuit: `sparsity` greedy selections, each
/// followed by a least-squares refit on the support. Stops early on an
/// exact fit.
pub fn omp(y: &CVec, phi: &CMat, sparsity: usize) -> Result<Recovery> {
    check_sparsity(sparsity, 1, phi.ncols(), "omp")?;
    let mut state = OmpState::new(y, phi);
    while state.support.len() < sparsity && state.extend(phi) {}
    Ok(state.recovery(phi.ncols()))
}

/// CoSaMP: each round merges the current support with the `2s`
/// largest-magnitude Hermitian correlations of the residual,
/// least-squares on the merged set, prunes to the `s` largest
/// coefficients, refits, and recomputes the residual. Stops when the
/// residual norm stops decreasing by more than `1e-8` relatively, or
/// after `max_iters` rounds; the best iterate seen is returned.
pub fn cosamp(y: &CVec, phi: &CMat, sparsity: usize, max_iters: usize) -> Result<Recovery> {
    check_sparsity(sparsity, 3, phi.ncols(), "cosamp")?;
    Ok(pursuit(y, phi, sparsity, 2 * sparsity, max_iters))
}

/// Subspace pursuit: CoSaMP with `s` (not `2s`) merge candidates per
/// round, which lets it refine the support more conservatively.
pub fn subspace_pursuit(
    y: &CVec,
    phi: &CMat,
    sparsity: usize,
    max_iters: usize,
) -> Result<Recovery> {
    check_sparsity(sparsity, 2, phi.ncols(), "subspace_pursuit")?;
    Ok(pursuit(y, phi, sparsity, sparsity, max_iters))
}

struct Iterate {
    residual_norm: f64,
    support: Vec<usize>,
    coeffs_on_support: CVec,
    residual: CVec,
}

/// CoSaMP / subspace-pursuit engine. Candidate merges clamp to the
/// available columns, so callers (the UAP detection loop in
/// particular) may drive it at sparsity targets the public entry
/// points' preconditions would reject.
pub(crate) fn pursuit(
    y: &CVec,
    phi: &CMat,
    s: usize,
    merge_count: usize,
    max_iters: usize,
) -> Recovery {
    let n = phi.ncols();
    let y_norm = y.norm();
    let mut support: Vec<usize> = Vec::new();
    let mut residual = y.clone();
    let mut best = Iterate {
        residual_norm: residual.norm(),
        support: Vec::new(),
        coeffs_on_support: CVec::zeros(0),
        residual: residual.clone(),
    };
    let mut prev = f64::INFINITY;
    let mut iterations = 0;
    let mut rank_deficient = false;

    for _ in 0..max_iters {
        iterations += 1;
        // Candidate merge: largest-magnitude correlations, unnormalized.
        let scores: Vec<f64> = correlations(phi, &residual)
            .iter()
            .map(|c| c.norm())
            .collect();
        let mut merged = top_k_indices(&scores, merge_count.min(n));
        merged.extend_from_slice(&support);
        merged.sort_unstable();
        merged.dedup();

        let sub = submatrix(phi, &merged);
        let (c_merged, d1) = ls_solve(&sub, y);
        rank_deficient |= d1;

        // Prune to the s largest coefficients, then refit on the pruned
        // support.
        let mags: Vec<f64> = c_merged.iter().map(|c| c.norm()).collect();
        let keep = top_k_indices(&mags, s.min(merged.len()));
        support = keep.iter().map(|&i| merged[i]).collect();
        support.sort_unstable();
        let sub = submatrix(phi, &support);
        let (c_final, d2) = ls_solve(&sub, y);
        rank_deficient |= d2;
        residual = y - sub * &c_final;
        let rn = residual.norm();

        if rn < best.residual_norm {
            best = Iterate {
                residual_norm: rn,
                support: support.clone(),
                coeffs_on_support: c_final,
                residual: residual.clone(),
            };
        }
        if prev.is_finite() && prev - rn <= RELATIVE_IMPROVEMENT_STOP * prev {
            break;
        }
        if rn <= ZERO_RESIDUAL_REL * y_norm {
            break;
        }
        prev = rn;
    }

    let mut coeffs = CVec::zeros(n);
    for (i, &j) in best.support.iter().enumerate() {
        coeffs[j] = best.coeffs_on_support[i];
    }
    Recovery {
        coeffs,
        support: best.support,
        residual: best.residual,
        iterations,
        rank_deficient,
    }
}
