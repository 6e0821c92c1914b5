//! Receivers for the multiuser uplink: exhaustive joint ML, an
//! ML-equivalent sphere decoder, MMSE with per-user nearest mapping,
//! and the sparsity-exploiting detection loop that wraps complex-valued
//! OMP / CoSaMP / subspace pursuit in user-activity-pattern validation.
//!
//! Every detector is a pure function of its inputs; all argmin/argmax
//! ties break toward the lowest index so results are bit-reproducible.

mod algorithm1;
mod ml;
mod mmse;
mod sparse;
mod sphere;

pub use algorithm1::{
    algorithm1, decode_bits, extract_uap, nearest_su_signal, UserActivityPattern,
};
pub use ml::{ml_detect, ml_detect_with_budget, DEFAULT_ML_BUDGET};
pub use mmse::mmse_detect;
pub use sparse::{cosamp, omp, subspace_pursuit, Recovery, DEFAULT_SR_MAX_ITERS};
pub use sphere::{sphere_detect, InitialRadius};

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::ChannelMatrix;
use crate::signalsets::{stack_users, SchemeConfig, SignalSet};
use crate::{Error, Result};

/// Inner sparse-recovery algorithm used by [`algorithm1`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrKind {
    Omp,
    Cosamp,
    Sp,
}

/// Receiver selection, as exposed on the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    Ml,
    Sphere,
    Mmse,
    Alg1(SrKind),
}

impl DetectorKind {
    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Ml => "ml",
            DetectorKind::Sphere => "sphere",
            DetectorKind::Mmse => "mmse",
            DetectorKind::Alg1(SrKind::Omp) => "alg1-omp",
            DetectorKind::Alg1(SrKind::Cosamp) => "alg1-cosamp",
            DetectorKind::Alg1(SrKind::Sp) => "alg1-sp",
        }
    }

    pub fn parse(s: &str) -> Result<DetectorKind> {
        match s.to_ascii_lowercase().as_str() {
            "ml" => Ok(DetectorKind::Ml),
            "sphere" => Ok(DetectorKind::Sphere),
            "mmse" => Ok(DetectorKind::Mmse),
            "alg1-omp" => Ok(DetectorKind::Alg1(SrKind::Omp)),
            "alg1-cosamp" => Ok(DetectorKind::Alg1(SrKind::Cosamp)),
            "alg1-sp" => Ok(DetectorKind::Alg1(SrKind::Sp)),
            other => Err(Error::Config(format!(
                "unknown detector {other} (expected ml, sphere, mmse, alg1-omp, alg1-cosamp, alg1-sp)"
            ))),
        }
    }
}

/// Per-detection bookkeeping.
#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    /// Inner-solver iterations (greedy selections or pursuit rounds).
    pub sr_iterations: usize,
    /// Final sparsity target of the recovery loop (K + j).
    pub sparsity_estimate: usize,
    /// Euclidean norm of `y - H x_hat` (recovery residual for the sparse
    /// detectors).
    pub residual_norm: f64,
    /// Whether the UAP loop exhausted its budget and fell back.
    pub fallback: bool,
    /// Whether any least-squares step hit a rank-deficient support.
    pub rank_deficient: bool,
    /// Tree nodes visited by the sphere decoder.
    pub visited_nodes: u64,
}

/// Detector output: a valid multiuser signal vector, its bit decode,
/// and per-user signal-set indices.
#[derive(Debug, Clone)]
pub struct DetectionResult {
    pub x_hat: DVector<Complex64>,
    pub bits_hat: Vec<u8>,
    pub per_user_indices: Vec<usize>,
    pub diagnostics: Diagnostics,
}

/// Builds a [`DetectionResult`] from per-user signal-set indices.
pub(crate) fn assemble_result(
    per_user_indices: Vec<usize>,
    set: &SignalSet,
    diagnostics: Diagnostics,
) -> DetectionResult {
    let vectors: Vec<&DVector<Complex64>> =
        per_user_indices.iter().map(|&i| set.vector(i)).collect();
    let x_hat = stack_users(&vectors).expect("signal-set vectors share one dimension");
    let bits_hat = decode_bits(&per_user_indices, set);
    DetectionResult {
        x_hat,
        bits_hat,
        per_user_indices,
        diagnostics,
    }
}

pub(crate) fn check_dimensions(
    y: &DVector<Complex64>,
    h: &ChannelMatrix,
    set: &SignalSet,
    users: usize,
) -> Result<()> {
    if y.len() != h.n_r() {
        return Err(Error::Dimension(format!(
            "received vector has {} entries, channel has {} rows",
            y.len(),
            h.n_r()
        )));
    }
    if h.width() != users * set.dim() {
        return Err(Error::Dimension(format!(
            "channel has {} columns, expected {} users x dim {}",
            h.width(),
            users,
            set.dim()
        )));
    }
    Ok(())
}

/// Runs the selected detector. `sigma2` feeds the MMSE filter and the
/// sphere decoder's initial radius.
pub fn detect(
    kind: DetectorKind,
    y: &DVector<Complex64>,
    h: &ChannelMatrix,
    set: &SignalSet,
    config: &SchemeConfig,
    sigma2: f64,
) -> Result<DetectionResult> {
    match kind {
        DetectorKind::Ml => ml_detect(y, h, set, config.users),
        DetectorKind::Sphere => sphere_detect(
            y,
            h,
            set,
            config.users,
            InitialRadius::MmseSeeded { sigma2 },
        ),
        DetectorKind::Mmse => mmse_detect(y, h, set, config.users, sigma2),
        DetectorKind::Alg1(sr) => algorithm1(y, h, set, config, sr),
    }
}
