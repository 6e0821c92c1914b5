//! ML-equivalent sphere decoding over per-user candidate blocks.
//!
//! Depth-first search over users, each level choosing one signal-set
//! member. A partial assignment is bounded below by the residual energy
//! outside the span of the still-unassigned users' channel blocks; that
//! bound is exact at the leaves and zero whenever the remaining blocks
//! span the whole receive space (e.g. underdetermined MBM at small
//! n_r), where the search gracefully degrades to exhaustive
//! enumeration. The initial radius comes from the MMSE solution's
//! residual, and every leaf improvement shrinks it, so the output
//! always equals the exhaustive ML minimizer.

use nalgebra::DVector;
use num_complex::Complex64;

use super::ml::user_contributions;
use super::mmse::mmse_detect;
use super::{assemble_result, check_dimensions, DetectionResult, Diagnostics};
use crate::channel::ChannelMatrix;
use crate::linalg::{orthonormal_basis, CMat, CVec};
use crate::signalsets::SignalSet;
use crate::Result;

/// Initial search radius policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialRadius {
    /// Start from an unbounded radius.
    Infinite,
    /// Seed the radius (and the incumbent) with the MMSE-mapped
    /// solution's residual at the given noise variance.
    MmseSeeded { sigma2: f64 },
}

struct Search<'a> {
    users: usize,
    contrib: &'a [Vec<CVec>],
    bases: &'a [Option<CMat>],
    residuals: Vec<CVec>,
    indices: Vec<usize>,
    best_metric: f64,
    best_indices: Vec<usize>,
    visited: u64,
}

impl Search<'_> {
    fn descend(&mut self, level: usize) {
        for i in 0..self.contrib[level].len() {
            self.visited += 1;
            self.indices[level] = i;
            let (head, tail) = self.residuals.split_at_mut(level + 1);
            let child = &mut tail[0];
            child.copy_from(&head[level]);
            *child -= &self.contrib[level][i];
            let energy = child.norm_squared();
            if level + 1 == self.users {
                if energy < self.best_metric {
                    self.best_metric = energy;
                    self.best_indices.copy_from_slice(&self.indices);
                }
            } else {
                // Lower bound: residual energy orthogonal to the span of
                // the unassigned users' blocks.
                let bound = match &self.bases[level] {
                    Some(basis) => energy - basis.ad_mul(child).norm_squared(),
                    None => 0.0,
                };
                if bound > self.best_metric {
                    continue;
                }
                self.descend(level + 1);
            }
        }
    }
}

/// Sphere decoder. Output is identical to [`super::ml_detect`] whenever
/// both run; unlike ML it has no candidate budget.
pub fn sphere_detect(
    y: &DVector<Complex64>,
    h: &ChannelMatrix,
    set: &SignalSet,
    users: usize,
    initial_radius: InitialRadius,
) -> Result<DetectionResult> {
    check_dimensions(y, h, set, users)?;
    let d = set.dim();

    // Users sorted by decreasing channel-block norm: strong users first
    // shrink the radius faster. Ties keep the lower user index.
    let block_norms: Vec<f64> = (0..users)
        .map(|k| {
            (0..d)
                .map(|c| h.matrix().column(k * d + c).norm_squared())
                .sum()
        })
        .collect();
    let mut order: Vec<usize> = (0..users).collect();
    order.sort_by(|&a, &b| {
        block_norms[b]
            .partial_cmp(&block_norms[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let contrib: Vec<Vec<CVec>> = order
        .iter()
        .map(|&k| user_contributions(h, set, k))
        .collect();

    // Complement-span bases per level: after assigning search level t,
    // the unassigned users are order[t+1..]. A basis spanning the full
    // receive space has no pruning power and is dropped.
    let bases: Vec<Option<CMat>> = (0..users)
        .map(|t| {
            if t + 1 >= users {
                return None;
            }
            let remaining: Vec<usize> = order[t + 1..].to_vec();
            let mut block = CMat::zeros(h.n_r(), remaining.len() * d);
            for (i, &k) in remaining.iter().enumerate() {
                for c in 0..d {
                    block.set_column(i * d + c, &h.matrix().column(k * d + c));
                }
            }
            orthonormal_basis(&block).filter(|b| b.ncols() < h.n_r())
        })
        .collect();

    // Incumbent radius from the MMSE-mapped leaf (an achievable metric,
    // so the search can only improve on it).
    let (mut best_metric, mut best_indices) = (f64::INFINITY, vec![0usize; users]);
    if let InitialRadius::MmseSeeded { sigma2 } = initial_radius {
        let seed = mmse_detect(y, h, set, users, sigma2)?;
        let permuted: Vec<usize> = order.iter().map(|&k| seed.per_user_indices[k]).collect();
        let mut r = y.clone();
        for (t, &i) in permuted.iter().enumerate() {
            r -= &contrib[t][i];
        }
        best_metric = r.norm_squared();
        best_indices = permuted;
    }

    let mut search = Search {
        users,
        contrib: &contrib,
        bases: &bases,
        residuals: (0..=users).map(|_| y.clone()).collect(),
        indices: vec![0usize; users],
        best_metric,
        best_indices,
        visited: 0,
    };
    search.descend(0);

    // Undo the search-order permutation.
    let mut per_user = vec![0usize; users];
    for (t, &k) in order.iter().enumerate() {
        per_user[k] = search.best_indices[t];
    }
    let diagnostics = Diagnostics {
        residual_norm: search.best_metric.max(0.0).sqrt(),
        visited_nodes: search.visited,
        ..Diagnostics::default()
    };
    Ok(assemble_result(per_user, set, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channel, transmit, trial_rng, NoiseModel};
    use crate::detectors::ml_detect;
    use crate::modulation::{build_alphabet, AlphabetKind};
    use crate::signalsets::{build_signal_set, stack_users, SchemeConfig};
    use rand::Rng;

    #[test]
    fn noiseless_exact_recovery() {
        let cfg = SchemeConfig::mbm(2, build_alphabet(AlphabetKind::Bpsk, 2).unwrap(), 2, 8);
        let set = build_signal_set(&cfg).unwrap();
        let mut rng = trial_rng(61);
        for _ in 0..50 {
            let h = draw_channel(&cfg, &mut rng);
            let i0 = rng.random_range(0..set.len());
            let i1 = rng.random_range(0..set.len());
            let x = stack_users(&[set.vector(i0), set.vector(i1)]).unwrap();
            let y = transmit(&h, &x, &NoiseModel { sigma2: 0.0 }, &mut rng).unwrap();
            let r = sphere_detect(&y, &h, &set, 2, InitialRadius::Infinite).unwrap();
            assert_eq!(r.per_user_indices, vec![i0, i1]);
        }
    }

    #[test]
    fn matches_ml_on_noisy_instances() {
        // CM with 16-QAM at K = 2: moderate noise, both radius policies.
        let cfg = SchemeConfig::cm(build_alphabet(AlphabetKind::Qam, 16).unwrap(), 2, 8);
        let set = build_signal_set(&cfg).unwrap();
        let mut rng = trial_rng(62);
        for trial in 0..200 {
            let h = draw_channel(&cfg, &mut rng);
            let i0 = rng.random_range(0..set.len());
            let i1 = rng.random_range(0..set.len());
            let x = stack_users(&[set.vector(i0), set.vector(i1)]).unwrap();
            let sigma2 = 0.8;
            let y = transmit(&h, &x, &NoiseModel { sigma2 }, &mut rng).unwrap();
            let ml = ml_detect(&y, &h, &set, 2).unwrap();
            let policy = if trial % 2 == 0 {
                InitialRadius::MmseSeeded { sigma2 }
            } else {
                InitialRadius::Infinite
            };
            let sp = sphere_detect(&y, &h, &set, 2, policy).unwrap();
            assert_eq!(sp.per_user_indices, ml.per_user_indices);
            assert_eq!(sp.bits_hat, ml.bits_hat);
        }
    }

    #[test]
    fn prunes_in_tall_systems() {
        // K = 4 CM users on 16 antennas: the complement bounds must cut
        // the 16^4 = 65536 joint candidates well below exhaustive.
        let cfg = SchemeConfig::cm(build_alphabet(AlphabetKind::Qam, 16).unwrap(), 4, 16);
        let set = build_signal_set(&cfg).unwrap();
        let mut rng = trial_rng(63);
        let mut total_nodes = 0u64;
        let trials = 20;
        for _ in 0..trials {
            let h = draw_channel(&cfg, &mut rng);
            let picks: Vec<usize> = (0..4).map(|_| rng.random_range(0..set.len())).collect();
            let vs: Vec<_> = picks.iter().map(|&i| set.vector(i)).collect();
            let x = stack_users(&vs).unwrap();
            let sigma2 = 0.5;
            let y = transmit(&h, &x, &NoiseModel { sigma2 }, &mut rng).unwrap();
            let r = sphere_detect(&y, &h, &set, 4, InitialRadius::MmseSeeded { sigma2 }).unwrap();
            total_nodes += r.diagnostics.visited_nodes;
            let ml = ml_detect(&y, &h, &set, 4).unwrap();
            assert_eq!(r.per_user_indices, ml.per_user_indices);
        }
        let mean = total_nodes as f64 / trials as f64;
        // Exhaustive would visit 16 + 16^2 + 16^3 + 16^4 = 69904 nodes.
        assert!(mean < 20_000.0, "mean visited nodes {mean}");
    }
}
