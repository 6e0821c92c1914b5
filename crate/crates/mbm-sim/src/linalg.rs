//! Internal complex dense linear algebra shared by the detectors.
//!
//! Thin wrappers over nalgebra factorizations: least squares via
//! Householder QR with an SVD fallback on rank deficiency, Hermitian
//! solves via Cholesky, and a few column-oriented kernels (correlations,
//! Gram matrices) that the greedy recovery algorithms spend most of
//! their time in.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub(crate) type CMat = DMatrix<Complex64>;
pub(crate) type CVec = DVector<Complex64>;

/// Gathers `cols` of `phi` into a dense matrix.
pub(crate) fn submatrix(phi: &CMat, cols: &[usize]) -> CMat {
    let mut out = CMat::zeros(phi.nrows(), cols.len());
    for (i, &j) in cols.iter().enumerate() {
        out.set_column(i, &phi.column(j));
    }
    out
}

/// Least-squares solution of `min ||y - a c||`.
///
/// Tall/square systems go through Householder QR; a rank-deficient R
/// (or a wide system whose row Gram is singular) falls back to the SVD
/// pseudo-inverse, which yields the minimum-norm solution. The flag
/// reports whether a rank-deficient path was taken.
pub(crate) fn ls_solve(a: &CMat, y: &CVec) -> (CVec, bool) {
    let (m, n) = a.shape();
    if n == 0 {
        return (CVec::zeros(0), false);
    }
    if m >= n {
        let qr = a.clone().qr();
        let diag_ok = {
            let r = qr.r();
            let dmax = (0..n).map(|i| r[(i, i)].norm()).fold(0.0f64, f64::max);
            let tol = dmax * m.max(n) as f64 * f64::EPSILON;
            (0..n).all(|i| r[(i, i)].norm() > tol)
        };
        if diag_ok {
            let qtb = qr.q().ad_mul(y);
            if let Some(c) = qr.r().solve_upper_triangular(&qtb) {
                return (c, false);
            }
        }
        (svd_solve(a, y), true)
    } else {
        // Wide system: minimum-norm interpolator c = A^H (A A^H)^{-1} y
        // when A has full row rank, else SVD.
        let gram = gram_rows(a);
        match nalgebra::Cholesky::new(gram) {
            Some(chol) => {
                let z = chol.solve(y);
                (a.ad_mul(&z), true)
            }
            None => (svd_solve(a, y), true),
        }
    }
}

fn svd_solve(a: &CMat, y: &CVec) -> CVec {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * a.nrows().max(a.ncols()) as f64 * f64::EPSILON;
    svd.solve(y, eps)
        .unwrap_or_else(|_| CVec::zeros(a.ncols()))
}

/// Solves the Hermitian positive-definite system `a c = b` via Cholesky.
pub(crate) fn solve_hermitian(a: CMat, b: &CVec) -> Option<CVec> {
    nalgebra::Cholesky::new(a).map(|chol| chol.solve(b))
}

/// `h h^H` accumulated column-by-column (column-major friendly).
pub(crate) fn gram_rows(h: &CMat) -> CMat {
    let m = h.nrows();
    let mut g = CMat::zeros(m, m);
    for col in h.column_iter() {
        for j in 0..m {
            let cj = col[j].conj();
            for i in j..m {
                g[(i, j)] += col[i] * cj;
            }
        }
    }
    for j in 0..m {
        for i in 0..j {
            g[(i, j)] = g[(j, i)].conj();
        }
    }
    g
}

/// `h^H h` via pairwise column dot products.
pub(crate) fn gram_cols(h: &CMat) -> CMat {
    let n = h.ncols();
    let mut g = CMat::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let v = h.column(i).dotc(&h.column(j));
            g[(i, j)] = v;
            if i != j {
                g[(j, i)] = v.conj();
            }
        }
    }
    g
}

/// Hermitian correlations `phi_j^H r` for every column.
pub(crate) fn correlations(phi: &CMat, r: &CVec) -> Vec<Complex64> {
    phi.column_iter().map(|c| c.dotc(r)).collect()
}

/// Squared Euclidean norms of the columns of `phi`.
pub(crate) fn col_norms_sqr(phi: &CMat) -> Vec<f64> {
    phi.column_iter().map(|c| c.norm_squared()).collect()
}

/// Indices of the `k` largest values, ties broken toward the lowest index.
pub(crate) fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}

/// Orthonormal basis of the column span of `block`, rank-trimmed via
/// column-pivoted QR. Returns `None` for an (effectively) zero block.
pub(crate) fn orthonormal_basis(block: &CMat) -> Option<CMat> {
    let (m, n) = block.shape();
    if n == 0 {
        return None;
    }
    let qr = block.clone().col_piv_qr();
    let r = qr.r();
    let k = m.min(n);
    let dmax = (0..k).map(|i| r[(i, i)].norm()).fold(0.0f64, f64::max);
    if dmax == 0.0 {
        return None;
    }
    let tol = dmax * m.max(n) as f64 * f64::EPSILON;
    let rank = (0..k).take_while(|&i| r[(i, i)].norm() > tol).count();
    if rank == 0 {
        return None;
    }
    let q = qr.q();
    Some(q.columns(0, rank).into_owned())
}
