//! Analytical error probabilities: the closed-form unconditional
//! pairwise error probability over the i.i.d. Rayleigh channel and the
//! union bound on BER.
//!
//! The PEP of mistaking `x1` for `x2` depends on the pair only through
//! `alpha = sum_l |x1_l - x2_l|^2 / (4 sigma^2)`:
//!
//! ```text
//! P(x1 -> x2) = f(alpha)^n_r * sum_{i=0}^{n_r-1} C(n_r-1+i, i) (1 - f(alpha))^i,
//! f(alpha) = (1 - sqrt(alpha / (1 + alpha))) / 2
//! ```
//!
//! evaluated in the log domain so receive-antenna counts in the
//! hundreds do not underflow. The union bound Hamming-weights the PEP
//! over every ordered pair of joint signal vectors; pairs are
//! enumerated once per unordered pair (the PEP and the Hamming distance
//! are symmetric) and PEP values are cached per distinct `alpha`.

use std::collections::HashMap;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::signalsets::{build_signal_set, spectral_efficiency, SchemeConfig};
use crate::{Error, Result};

/// Largest joint signal set `|set|^K` the union bound will enumerate.
pub const DEFAULT_BOUND_BUDGET: u64 = 1 << 16;

/// Squared-difference profile of a signal pair.
#[derive(Debug, Clone)]
pub struct PepTerms {
    /// `theta_l = |x1_l - x2_l|^2`, one entry per coordinate.
    pub theta: Vec<f64>,
    /// `alpha = sum(theta) / (4 sigma^2)`.
    pub alpha: f64,
    /// Hamming distance between the pair's bit labels.
    pub hamming: usize,
}

impl PepTerms {
    pub fn new(
        x1: &DVector<Complex64>,
        x2: &DVector<Complex64>,
        bits1: &[u8],
        bits2: &[u8],
        sigma2: f64,
    ) -> Result<PepTerms> {
        if x1.len() != x2.len() || bits1.len() != bits2.len() {
            return Err(Error::Dimension(
                "pair vectors and labels must have matching lengths".into(),
            ));
        }
        let theta: Vec<f64> = x1
            .iter()
            .zip(x2.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .collect();
        let alpha = theta.iter().sum::<f64>() / (4.0 * sigma2);
        let hamming = bits1
            .iter()
            .zip(bits2.iter())
            .filter(|(a, b)| a != b)
            .count();
        Ok(PepTerms { theta, alpha, hamming })
    }
}

/// `f(alpha) = (1 - sqrt(alpha / (1 + alpha))) / 2`, in `(0, 1/2]`.
fn f_of_alpha(alpha: f64) -> f64 {
    0.5 * (1.0 - (alpha / (1.0 + alpha)).sqrt())
}

/// Unconditional PEP for a difference profile summing to `theta_sum`.
///
/// Log-domain evaluation: binomial coefficients via the recurrence
/// `ln C(n-1+i, i) = ln C(n-2+i, i-1) + ln(n-1+i) - ln(i)` and a
/// log-sum-exp over the `n_r` terms.
pub(crate) fn pep_from_theta_sum(theta_sum: f64, sigma2: f64, n_r: usize) -> f64 {
    let alpha = theta_sum / (4.0 * sigma2);
    let f = f_of_alpha(alpha);
    if f == 0.0 {
        return 0.0;
    }
    let (ln_f, ln_1mf) = (f.ln(), (1.0 - f).ln());
    let n = n_r as f64;
    let mut ln_binom = 0.0;
    let mut terms = Vec::with_capacity(n_r);
    for i in 0..n_r {
        if i > 0 {
            ln_binom += (n - 1.0 + i as f64).ln() - (i as f64).ln();
        }
        terms.push(n * ln_f + ln_binom + i as f64 * ln_1mf);
    }
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    (max + sum.ln()).exp()
}

/// Unconditional pairwise error probability `P(x1 -> x2)` over the
/// Rayleigh channel with `n_r` receive antennas.
pub fn pep_unconditional(
    x1: &DVector<Complex64>,
    x2: &DVector<Complex64>,
    sigma2: f64,
    n_r: usize,
) -> Result<f64> {
    if sigma2 <= 0.0 {
        return Err(Error::Config("PEP requires sigma2 > 0".into()));
    }
    if n_r == 0 {
        return Err(Error::Config("PEP requires n_r >= 1".into()));
    }
    if x1.len() != x2.len() {
        return Err(Error::Dimension("pair vectors must match in length".into()));
    }
    let theta_sum: f64 = x1
        .iter()
        .zip(x2.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    if theta_sum == 0.0 {
        return Err(Error::Config("PEP is undefined for x1 = x2".into()));
    }
    Ok(pep_from_theta_sum(theta_sum, sigma2, n_r))
}

/// Union bound on the BER of joint ML detection at noise level `sigma2`.
pub fn union_bound_ber(config: &SchemeConfig, sigma2: f64) -> Result<f64> {
    union_bound_ber_with_budget(config, sigma2, DEFAULT_BOUND_BUDGET)
}

/// [`union_bound_ber`] with an explicit joint-enumeration budget.
pub fn union_bound_ber_with_budget(
    config: &SchemeConfig,
    sigma2: f64,
    budget: u64,
) -> Result<f64> {
    if sigma2 <= 0.0 {
        return Err(Error::Config("union bound requires sigma2 > 0".into()));
    }
    let set = build_signal_set(config)?;
    let users = config.users;
    let joint = (set.len() as u64)
        .checked_pow(users as u32)
        .filter(|&j| j <= budget)
        .ok_or_else(|| {
            Error::Budget(format!(
                "union bound enumeration of {}^{users} joint vectors exceeds the budget of {budget}",
                set.len()
            ))
        })?;
    let eta = users * spectral_efficiency(config)?;

    // Per-user pair profiles: squared distance and label Hamming distance.
    let l = set.len();
    let mut dist = vec![0.0f64; l * l];
    let mut ham = vec![0u32; l * l];
    for i in 0..l {
        for j in 0..l {
            dist[i * l + j] = (set.vector(i) - set.vector(j)).norm_squared();
            ham[i * l + j] = (i ^ j).count_ones();
        }
    }

    // Ordered pairs via unordered enumeration (PEP and Hamming are
    // symmetric), PEP cached per distinct theta sum.
    let mut cache: HashMap<u64, f64> = HashMap::new();
    let joint = joint as usize;
    let mut acc = 0.0f64;
    let mut idx1 = vec![0usize; users];
    for j1 in 0..joint {
        decompose(j1, l, &mut idx1);
        let mut idx2 = idx1.clone();
        for _ in (j1 + 1)..joint {
            increment(&mut idx2, l);
            let mut theta_sum = 0.0;
            let mut hamming = 0u32;
            for k in 0..users {
                let a = idx1[k];
                let b = idx2[k];
                theta_sum += dist[a * l + b];
                hamming += ham[a * l + b];
            }
            let pep = *cache
                .entry(theta_sum.to_bits())
                .or_insert_with(|| pep_from_theta_sum(theta_sum, sigma2, config.n_r));
            acc += 2.0 * pep * hamming as f64 / eta as f64;
        }
    }
    Ok(acc / 2f64.powi(eta as i32))
}

/// Joint index -> per-user digits (user 0 most significant).
fn decompose(mut joint: usize, base: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = joint % base;
        joint /= base;
    }
}

/// Odometer increment of per-user digits.
fn increment(digits: &mut [usize], base: usize) {
    for slot in digits.iter_mut().rev() {
        *slot += 1;
        if *slot < base {
            return;
        }
        *slot = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modulation::{build_alphabet, AlphabetKind};
    use crate::signalsets::build_signal_set;

    fn bpsk() -> crate::modulation::Alphabet {
        build_alphabet(AlphabetKind::Bpsk, 2).unwrap()
    }

    #[test]
    fn f_range_and_monotonicity() {
        let mut prev = 0.5;
        for e in -6..=6 {
            let alpha = 10f64.powi(e);
            let f = f_of_alpha(alpha);
            assert!(f > 0.0 && f < 0.5);
            assert!(f < prev, "f must strictly decrease in alpha");
            prev = f;
        }
    }

    #[test]
    fn pep_limits() {
        let cfg = SchemeConfig::mbm(2, bpsk(), 1, 8);
        let set = build_signal_set(&cfg).unwrap();
        let x1 = set.vector(0);
        let x2 = set.vector(2);
        // alpha -> infinity: PEP -> 0.
        let p = pep_unconditional(x1, x2, 1e-9, 8).unwrap();
        assert!(p < 1e-30);
        // alpha -> 0+: PEP -> 1/2 (random guessing).
        let p = pep_unconditional(x1, x2, 1e12, 8).unwrap();
        assert!((p - 0.5).abs() < 1e-4, "got {p}");
        // Identical pair is a domain error.
        assert!(pep_unconditional(x1, x1, 1.0, 8).is_err());
    }

    #[test]
    fn pep_is_symmetric() {
        let cfg = SchemeConfig::mbm(2, bpsk(), 1, 8);
        let set = build_signal_set(&cfg).unwrap();
        for i in 0..set.len() {
            for j in 0..set.len() {
                if i == j {
                    continue;
                }
                let a = pep_unconditional(set.vector(i), set.vector(j), 0.7, 16).unwrap();
                let b = pep_unconditional(set.vector(j), set.vector(i), 0.7, 16).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn pep_survives_large_antenna_counts() {
        let cfg = SchemeConfig::mbm(1, bpsk(), 1, 624);
        let set = build_signal_set(&cfg).unwrap();
        let p = pep_unconditional(set.vector(0), set.vector(1), 0.5, 624).unwrap();
        assert!(p > 0.0 && p < 1.0, "no underflow at n_r = 624: {p}");
        let p_big = pep_unconditional(set.vector(0), set.vector(1), 4.0, 624).unwrap();
        assert!(p_big > p, "larger noise must raise the PEP");
    }

    #[test]
    fn pep_terms_fields() {
        let cfg = SchemeConfig::mbm(2, bpsk(), 1, 8);
        let set = build_signal_set(&cfg).unwrap();
        // Vectors 0 (+1 at coord 0) and 1 (-1 at coord 0): theta = [4,0,0,0].
        let t = PepTerms::new(set.vector(0), set.vector(1), set.label(0), set.label(1), 1.0)
            .unwrap();
        assert_eq!(t.theta, vec![4.0, 0.0, 0.0, 0.0]);
        assert!((t.alpha - 1.0).abs() < 1e-12);
        assert_eq!(t.hamming, 1);
    }

    #[test]
    fn bound_decreases_with_snr() {
        let cfg = SchemeConfig::mbm(3, bpsk(), 2, 8);
        let mut prev = f64::INFINITY;
        for snr_db in [0.0, 2.0, 4.0, 6.0, 8.0, 10.0] {
            let sigma2 = 2.0 / 10f64.powf(snr_db / 10.0);
            let b = union_bound_ber(&cfg, sigma2).unwrap();
            assert!(b < prev, "bound must decrease with SNR");
            prev = b;
        }
    }

    #[test]
    fn degenerate_two_point_bound_collapses_to_pep() {
        // K = 1 CM/BPSK at n_r = 1: the bound is exactly the PEP of the
        // single antipodal pair.
        let cfg = SchemeConfig::cm(bpsk(), 1, 1);
        let set = build_signal_set(&cfg).unwrap();
        let sigma2 = 0.8;
        let bound = union_bound_ber(&cfg, sigma2).unwrap();
        let pep = pep_unconditional(set.vector(0), set.vector(1), sigma2, 1).unwrap();
        assert!((bound - pep).abs() < 1e-15);
    }

    #[test]
    fn matches_brute_force_ordered_enumeration() {
        // Independent oracle for the symmetry and caching shortcuts:
        // enumerate every ordered joint pair directly.
        let cfg = SchemeConfig::mbm(1, bpsk(), 2, 6);
        let set = build_signal_set(&cfg).unwrap();
        let sigma2 = 0.9;
        let eta = 2 * set.eta_user();
        let joint = set.len() * set.len();
        let mut acc = 0.0;
        for j1 in 0..joint {
            let a = [j1 / set.len(), j1 % set.len()];
            for j2 in 0..joint {
                if j1 == j2 {
                    continue;
                }
                let b = [j2 / set.len(), j2 % set.len()];
                let mut theta_sum = 0.0;
                let mut hamming = 0;
                for k in 0..2 {
                    theta_sum += (set.vector(a[k]) - set.vector(b[k])).norm_squared();
                    hamming += (a[k] ^ b[k]).count_ones();
                }
                acc += pep_from_theta_sum(theta_sum, sigma2, cfg.n_r) * hamming as f64
                    / eta as f64;
            }
        }
        let brute = acc / 2f64.powi(eta as i32);
        let fast = union_bound_ber(&cfg, sigma2).unwrap();
        assert!(
            (brute - fast).abs() <= 1e-12 * brute,
            "brute {brute} vs fast {fast}"
        );
    }

    #[test]
    fn pep_matches_monte_carlo_of_conditional_pep() {
        // Average Q(||H(x2 - x1)|| / sqrt(2 sigma^2)) over explicit
        // channel draws and compare with the closed form.
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        use statrs::function::erf::erfc;

        let cfg = SchemeConfig::mbm(2, bpsk(), 1, 2);
        let set = build_signal_set(&cfg).unwrap();
        let x1 = set.vector(0);
        let x2 = set.vector(3); // differs in two coordinates, theta sum 2
        let sigma2 = 1.0;
        let n_r = 2;
        let exact = pep_unconditional(x1, x2, sigma2, n_r).unwrap();

        let delta: Vec<Complex64> = (x2 - x1).iter().cloned().collect();
        let support: Vec<(usize, Complex64)> = delta
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm_sqr() > 0.0)
            .map(|(i, &c)| (i, c))
            .collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let draws = 100_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            // ||sum_l delta_l h_l||^2 over the support columns only.
            let mut norm_sqr = 0.0;
            for _ in 0..n_r {
                let mut row = Complex64::new(0.0, 0.0);
                for &(_, d) in &support {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    let h = Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
                    row += d * h;
                }
                norm_sqr += row.norm_sqr();
            }
            let q_arg = (norm_sqr / (2.0 * sigma2)).sqrt();
            acc += 0.5 * erfc(q_arg / std::f64::consts::SQRT_2);
        }
        let mc = acc / draws as f64;
        let rel = (mc - exact).abs() / exact;
        assert!(rel < 0.05, "MC {mc} vs exact {exact} (rel {rel})");
    }

    #[test]
    fn budget_refusal() {
        let cfg = SchemeConfig::mbm(3, bpsk(), 4, 8); // 16^4 = 65536 joint
        assert!(union_bound_ber_with_budget(&cfg, 1.0, 1 << 10).is_err());
    }
}
