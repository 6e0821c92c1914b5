//! Linear MMSE estimation with per-user nearest-signal mapping.

use nalgebra::DVector;
use num_complex::Complex64;

use super::algorithm1::nearest_su_signal;
use super::{assemble_result, check_dimensions, DetectionResult, Diagnostics};
use crate::channel::ChannelMatrix;
use crate::linalg::{gram_cols, gram_rows, ls_solve, solve_hermitian, CVec};
use crate::signalsets::SignalSet;
use crate::Result;

/// MMSE filter followed by per-user nearest-signal mapping.
///
/// Computes `x~ = (H^H H + (sigma2 / v) I)^-1 H^H y` with per-entry
/// prior variance `v = E_s / D = 1/D` (index-modulated entries are
/// nonzero with probability `1/D` scaled to unit per-user energy), then
/// maps each user's D-length block to the Euclidean-nearest signal-set
/// member. For wide channels the algebraically identical dual form
/// `H^H (H H^H + (sigma2 / v) I)^-1 y` keeps the solve at `n_r x n_r`.
/// At `sigma2 = 0` the filter degenerates to the least-squares
/// (zero-forcing) solution.
pub fn mmse_detect(
    y: &DVector<Complex64>,
    h: &ChannelMatrix,
    set: &SignalSet,
    users: usize,
    sigma2: f64,
) -> Result<DetectionResult> {
    check_dimensions(y, h, set, users)?;
    let d = set.dim();
    let width = users * d;
    let m = h.matrix();
    let lambda = sigma2 * d as f64;

    let x_tilde: CVec = if lambda == 0.0 {
        ls_solve(m, y).0
    } else if width <= h.n_r() {
        let mut g = gram_cols(m);
        for i in 0..width {
            g[(i, i)] += lambda;
        }
        let rhs = m.ad_mul(y);
        solve_hermitian(g, &rhs).expect("regularized Gram is positive definite")
    } else {
        let mut g = gram_rows(m);
        for i in 0..h.n_r() {
            g[(i, i)] += lambda;
        }
        let z = solve_hermitian(g, y).expect("regularized Gram is positive definite");
        m.ad_mul(&z)
    };

    let indices: Vec<usize> = (0..users)
        .map(|k| nearest_su_signal(&x_tilde.rows(k * d, d).into_owned(), set))
        .collect();
    Ok(assemble_result(indices, set, Diagnostics::default()))
}
