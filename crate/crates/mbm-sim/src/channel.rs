//! i.i.d. Rayleigh channel generation, AWGN, and SNR bookkeeping.
//!
//! Channel entries are circularly-symmetric complex Gaussian with zero
//! mean and unit variance, redrawn independently every channel use
//! (fast fading). Trial seeds are derived deterministically from
//! `(master_seed, point, trial)` so that Monte Carlo results do not
//! depend on worker scheduling and so that different detectors can
//! replay the exact same payload/channel/noise realizations.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::signalsets::SchemeConfig;
use crate::{Error, Result};

/// Uplink channel gain matrix, `n_r x K*D`. Column block `k` (width D)
/// holds the per-coordinate gain vectors of user `k`.
#[derive(Debug, Clone)]
pub struct ChannelMatrix {
    entries: DMatrix<Complex64>,
}

impl ChannelMatrix {
    pub fn new(entries: DMatrix<Complex64>) -> ChannelMatrix {
        ChannelMatrix { entries }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    /// Receive antennas (rows).
    pub fn n_r(&self) -> usize {
        self.entries.nrows()
    }

    /// Total column count `K*D`.
    pub fn width(&self) -> usize {
        self.entries.ncols()
    }
}

/// Additive noise level: the noise vector is CN(0, sigma2 * I).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma2: f64,
}

/// How an SNR target in dB maps to the noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnrConvention {
    /// `sigma2 = K / 10^(snr/10)`: SNR counts the aggregate received
    /// power of all K unit-energy users per receive antenna.
    Aggregate,
    /// `sigma2 = 1 / 10^(snr/10)`: SNR counts one user's power.
    PerUser,
}

impl SnrConvention {
    pub fn name(self) -> &'static str {
        match self {
            SnrConvention::Aggregate => "aggregate",
            SnrConvention::PerUser => "per_user",
        }
    }

    pub fn parse(s: &str) -> Result<SnrConvention> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "aggregate" => Ok(SnrConvention::Aggregate),
            "per_user" => Ok(SnrConvention::PerUser),
            other => Err(Error::Config(format!(
                "unknown SNR convention {other} (expected aggregate or per_user)"
            ))),
        }
    }
}

/// One CN(0, 1) sample: independent N(0, 1/2) real and imaginary parts.
fn standard_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws a fresh i.i.d. CN(0,1) channel matrix for `config`.
///
/// Entries are drawn column-major; identical generator state gives a
/// bit-identical matrix.
pub fn draw_channel<R: Rng + ?Sized>(config: &SchemeConfig, rng: &mut R) -> ChannelMatrix {
    let rows = config.n_r;
    let cols = config.users * config.per_user_dim();
    let mut entries = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            entries[(i, j)] = standard_complex(rng);
        }
    }
    ChannelMatrix::new(entries)
}

/// Received vector `y = Hx + n` with `n ~ CN(0, sigma2 I)`.
pub fn transmit<R: Rng + ?Sized>(
    h: &ChannelMatrix,
    x: &DVector<Complex64>,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<DVector<Complex64>> {
    if x.len() != h.width() {
        return Err(Error::Dimension(format!(
            "transmit vector has {} entries, channel expects {}",
            x.len(),
            h.width()
        )));
    }
    let mut y = DVector::zeros(h.n_r());
    // Column accumulation; index-modulated vectors are mostly zeros.
    for (j, xj) in x.iter().enumerate() {
        if xj.norm_sqr() > 0.0 {
            y.axpy(*xj, &h.matrix().column(j), Complex64::new(1.0, 0.0));
        }
    }
    if noise.sigma2 > 0.0 {
        let scale = noise.sigma2.sqrt();
        for yi in y.iter_mut() {
            *yi += standard_complex(rng) * scale;
        }
    }
    Ok(y)
}

/// Converts an SNR target to the noise variance under `convention`,
/// assuming unit average transmit energy per user (E_s = 1).
pub fn sigma_from_snr(
    snr_db: f64,
    config: &SchemeConfig,
    convention: SnrConvention,
) -> NoiseModel {
    let snr = 10f64.powf(snr_db / 10.0);
    let sigma2 = match convention {
        SnrConvention::Aggregate => config.users as f64 / snr,
        SnrConvention::PerUser => 1.0 / snr,
    };
    NoiseModel { sigma2 }
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic per-trial seed: sequential splitmix64 absorption of
/// `(master_seed, point, trial)`. The point key identifies the grid
/// point but never the detector, so detectors can replay identical
/// trials.
pub fn trial_seed(master_seed: u64, point: u64, trial: u64) -> u64 {
    let a = mix(master_seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let b = mix(a.wrapping_add(point));
    mix(b.wrapping_add(trial))
}

/// Generator for one Monte Carlo trial.
pub fn trial_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modulation::{build_alphabet, AlphabetKind};
    use crate::signalsets::{build_signal_set, SchemeConfig};

    fn bpsk_cfg(users: usize, n_r: usize, m_rf: usize) -> SchemeConfig {
        SchemeConfig::mbm(m_rf, build_alphabet(AlphabetKind::Bpsk, 2).unwrap(), users, n_r)
    }

    #[test]
    fn channel_statistics_match_cn01() {
        // 128 x 1024 draw: mean |entry|^2 near 1, mean near 0.
        let cfg = bpsk_cfg(16, 128, 6); // K*D = 1024
        let mut rng = trial_rng(42);
        let h = draw_channel(&cfg, &mut rng);
        assert_eq!(h.n_r(), 128);
        assert_eq!(h.width(), 1024);
        let n = (h.n_r() * h.width()) as f64;
        let mean_power: f64 = h.matrix().iter().map(|c| c.norm_sqr()).sum::<f64>() / n;
        let mean_re: f64 = h.matrix().iter().map(|c| c.re).sum::<f64>() / n;
        let mean_im: f64 = h.matrix().iter().map(|c| c.im).sum::<f64>() / n;
        assert!((mean_power - 1.0).abs() < 0.01, "power {mean_power}");
        assert!(mean_re.abs() < 0.01 && mean_im.abs() < 0.01);
    }

    #[test]
    fn identical_seeds_give_identical_draws() {
        let cfg = bpsk_cfg(2, 8, 3);
        let h1 = draw_channel(&cfg, &mut trial_rng(7));
        let h2 = draw_channel(&cfg, &mut trial_rng(7));
        assert_eq!(h1.matrix(), h2.matrix());
    }

    #[test]
    fn noiseless_transmit_is_exact() {
        let cfg = bpsk_cfg(2, 8, 2);
        let set = build_signal_set(&cfg).unwrap();
        let mut rng = trial_rng(3);
        let h = draw_channel(&cfg, &mut rng);
        let x = crate::signalsets::stack_users(&[set.vector(1), set.vector(6)]).unwrap();
        let y = transmit(&h, &x, &NoiseModel { sigma2: 0.0 }, &mut rng).unwrap();
        let want = h.matrix() * &x;
        assert!((y - want).norm() < 1e-14);
    }

    #[test]
    fn zero_signal_yields_noise_with_right_variance() {
        let cfg = bpsk_cfg(1, 32, 1);
        let mut rng = trial_rng(11);
        let h = draw_channel(&cfg, &mut rng);
        let x = DVector::zeros(2);
        let sigma2 = 0.7;
        let mut acc = 0.0;
        let trials = 400;
        for _ in 0..trials {
            let y = transmit(&h, &x, &NoiseModel { sigma2 }, &mut rng).unwrap();
            acc += y.norm_squared() / 32.0;
        }
        let est = acc / trials as f64;
        assert!(
            (est - sigma2).abs() < 0.05 * sigma2,
            "estimated {est}, expected {sigma2}"
        );
    }

    #[test]
    fn single_user_received_signal_is_scaled_channel_column() {
        // y - n = s_q h^m for a single MBM user.
        let cfg = bpsk_cfg(1, 8, 2);
        let set = build_signal_set(&cfg).unwrap();
        let mut rng = trial_rng(5);
        let h = draw_channel(&cfg, &mut rng);
        let x = set.vector(3); // -1 at coordinate 1
        let y = transmit(&h, x, &NoiseModel { sigma2: 0.0 }, &mut rng).unwrap();
        let want = h.matrix().column(1) * Complex64::new(-1.0, 0.0);
        assert!((y - want).norm() < 1e-14);
    }

    #[test]
    fn transmit_rejects_bad_dimensions() {
        let cfg = bpsk_cfg(1, 4, 1);
        let mut rng = trial_rng(1);
        let h = draw_channel(&cfg, &mut rng);
        let x = DVector::zeros(5);
        assert!(matches!(
            transmit(&h, &x, &NoiseModel { sigma2: 0.0 }, &mut rng),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn snr_conversion_closed_forms() {
        let cfg = bpsk_cfg(16, 128, 3);
        let one = bpsk_cfg(1, 8, 3);
        let n = sigma_from_snr(0.0, &one, SnrConvention::Aggregate);
        assert!((n.sigma2 - 1.0).abs() < 1e-12);
        let n = sigma_from_snr(4.0, &cfg, SnrConvention::Aggregate);
        assert!((n.sigma2 - 16.0 / 10f64.powf(0.4)).abs() < 1e-9); // ~6.369
        let n = sigma_from_snr(4.0, &cfg, SnrConvention::PerUser);
        assert!((n.sigma2 - 10f64.powf(-0.4)).abs() < 1e-9); // ~0.3981
    }

    #[test]
    fn received_power_for_k_users_averages_k() {
        // Average per-antenna received signal power over channel and
        // payload realizations is K * E_s.
        let cfg = bpsk_cfg(4, 16, 2);
        let set = build_signal_set(&cfg).unwrap();
        let mut rng = trial_rng(9);
        let mut acc = 0.0;
        let trials = 600;
        for _ in 0..trials {
            let h = draw_channel(&cfg, &mut rng);
            let picks: Vec<usize> = (0..4).map(|_| rng.random_range(0..set.len())).collect();
            let vs: Vec<&DVector<Complex64>> = picks.iter().map(|&i| set.vector(i)).collect();
            let x = crate::signalsets::stack_users(&vs).unwrap();
            let y = transmit(&h, &x, &NoiseModel { sigma2: 0.0 }, &mut rng).unwrap();
            acc += y.norm_squared() / 16.0;
        }
        let est = acc / trials as f64;
        assert!((est - 4.0).abs() < 0.3, "estimated {est}, expected 4");
    }

    #[test]
    fn trial_seeds_are_distinct_and_stable() {
        let s = trial_seed(1, 2, 3);
        assert_eq!(s, trial_seed(1, 2, 3));
        assert_ne!(s, trial_seed(1, 2, 4));
        assert_ne!(s, trial_seed(1, 3, 3));
        assert_ne!(s, trial_seed(2, 2, 3));
        // Neighboring trials must decorrelate.
        let a = trial_seed(0, 0, 0);
        let b = trial_seed(0, 0, 1);
        assert_ne!(a & 0xffff_ffff, b & 0xffff_ffff);
    }
}
