//! Per-user signal sets and bit mappings for MBM, CM, SM, and GSM.
//!
//! A signal set enumerates every per-user transmit vector together with
//! its bit label. Labels are indexed by natural-binary value, with the
//! index bits (mirror activation pattern, antenna, or antenna pattern)
//! in the most significant positions and the constellation bits last.
//! GSM activates the lexicographically smallest `2^floor(log2 C(n_t,n_rf))`
//! antenna patterns and scales each active symbol by `1/sqrt(n_rf)` so
//! that every scheme transmits unit average energy per user per channel
//! use, which keeps the four schemes power-aligned in BER comparisons.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::modulation::{bits_to_index, index_to_bits, Alphabet};
use crate::{Error, Result};

/// Transmission scheme of a user.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Media-based modulation: one antenna, `m_rf` RF mirrors.
    Mbm,
    /// Conventional modulation: one antenna, plain constellation.
    Cm,
    /// Spatial modulation: one of `n_t` antennas active.
    Sm,
    /// Generalized spatial modulation: `n_rf` of `n_t` antennas active.
    Gsm,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Mbm => "mbm",
            Scheme::Cm => "cm",
            Scheme::Sm => "sm",
            Scheme::Gsm => "gsm",
        }
    }

    pub fn parse(s: &str) -> Result<Scheme> {
        match s.to_ascii_lowercase().as_str() {
            "mbm" => Ok(Scheme::Mbm),
            "cm" => Ok(Scheme::Cm),
            "sm" => Ok(Scheme::Sm),
            "gsm" => Ok(Scheme::Gsm),
            other => Err(Error::Config(format!(
                "unknown scheme {other} (expected mbm, cm, sm, or gsm)"
            ))),
        }
    }
}

/// Full system configuration: one scheme shared by all `users` uplink
/// users, received on `n_r` antennas.
#[derive(Debug, Clone)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    /// Transmit antennas per user.
    pub n_t: usize,
    /// Transmit RF chains per user.
    pub n_rf: usize,
    /// RF mirrors per user (MBM only).
    pub m_rf: usize,
    pub alphabet: Alphabet,
    /// Number of uplink users K.
    pub users: usize,
    /// Receive antennas at the base station.
    pub n_r: usize,
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.users == 0 {
            return Err(Error::Config("at least one user required".into()));
        }
        if self.n_r == 0 {
            return Err(Error::Config("at least one receive antenna required".into()));
        }
        match self.scheme {
            Scheme::Mbm => {
                if self.n_t != 1 || self.n_rf != 1 {
                    return Err(Error::Config("MBM requires n_t = n_rf = 1".into()));
                }
                if self.m_rf == 0 {
                    return Err(Error::Config("MBM requires m_rf >= 1".into()));
                }
            }
            Scheme::Cm => {
                if self.n_t != 1 || self.n_rf != 1 {
                    return Err(Error::Config("CM requires n_t = n_rf = 1".into()));
                }
            }
            Scheme::Sm => {
                if self.n_rf != 1 {
                    return Err(Error::Config("SM requires n_rf = 1".into()));
                }
                if self.n_t < 2 {
                    return Err(Error::Config("SM requires n_t >= 2".into()));
                }
                if !self.n_t.is_power_of_two() {
                    return Err(Error::Config(format!(
                        "SM requires a power-of-two antenna count, got n_t = {}",
                        self.n_t
                    )));
                }
            }
            Scheme::Gsm => {
                if self.n_rf < 1 || self.n_rf >= self.n_t {
                    return Err(Error::Config("GSM requires 1 <= n_rf < n_t".into()));
                }
            }
        }
        Ok(())
    }

    /// Per-user transmit vector dimension D.
    pub fn per_user_dim(&self) -> usize {
        match self.scheme {
            Scheme::Mbm => 1 << self.m_rf,
            Scheme::Cm => 1,
            Scheme::Sm | Scheme::Gsm => self.n_t,
        }
    }

    /// Nonzero entries per user vector (sparsity numerator).
    pub fn active_entries(&self) -> usize {
        match self.scheme {
            Scheme::Gsm => self.n_rf,
            _ => 1,
        }
    }

    /// Convenience constructor for MBM (`n_t = n_rf = 1`).
    pub fn mbm(m_rf: usize, alphabet: Alphabet, users: usize, n_r: usize) -> SchemeConfig {
        SchemeConfig { scheme: Scheme::Mbm, n_t: 1, n_rf: 1, m_rf, alphabet, users, n_r }
    }

    /// Convenience constructor for CM.
    pub fn cm(alphabet: Alphabet, users: usize, n_r: usize) -> SchemeConfig {
        SchemeConfig { scheme: Scheme::Cm, n_t: 1, n_rf: 1, m_rf: 0, alphabet, users, n_r }
    }

    /// Convenience constructor for SM.
    pub fn sm(n_t: usize, alphabet: Alphabet, users: usize, n_r: usize) -> SchemeConfig {
        SchemeConfig { scheme: Scheme::Sm, n_t, n_rf: 1, m_rf: 0, alphabet, users, n_r }
    }

    /// Convenience constructor for GSM.
    pub fn gsm(n_t: usize, n_rf: usize, alphabet: Alphabet, users: usize, n_r: usize) -> SchemeConfig {
        SchemeConfig { scheme: Scheme::Gsm, n_t, n_rf, m_rf: 0, alphabet, users, n_r }
    }
}

/// Bits per channel use per user.
pub fn spectral_efficiency(config: &SchemeConfig) -> Result<usize> {
    config.validate()?;
    let sym_bits = config.alphabet.bits_per_symbol();
    Ok(match config.scheme {
        Scheme::Mbm => config.m_rf + sym_bits,
        Scheme::Cm => sym_bits,
        Scheme::Sm => config.n_t.trailing_zeros() as usize + sym_bits,
        Scheme::Gsm => {
            let patterns = binomial(config.n_t, config.n_rf);
            floor_log2(patterns) + config.n_rf * sym_bits
        }
    })
}

fn binomial(n: usize, k: usize) -> usize {
    (1..=k).fold(1usize, |acc, i| acc * (n - k + i) / i)
}

fn floor_log2(n: usize) -> usize {
    (usize::BITS - 1 - n.leading_zeros()) as usize
}

/// Enumerated per-user candidate vectors with bit labels.
#[derive(Debug, Clone)]
pub struct SignalSet {
    dim: usize,
    eta_user: usize,
    vectors: Vec<DVector<Complex64>>,
    labels: Vec<Vec<u8>>,
    nonzeros: Vec<Vec<(usize, Complex64)>>,
}

/// Enumerates all `2^eta_user` per-user vectors of `config` in label order.
pub fn build_signal_set(config: &SchemeConfig) -> Result<SignalSet> {
    config.validate()?;
    let eta_user = spectral_efficiency(config)?;
    let dim = config.per_user_dim();
    let alphabet = &config.alphabet;
    let sym_bits = alphabet.bits_per_symbol();
    let mut vectors = Vec::with_capacity(1 << eta_user);

    match config.scheme {
        Scheme::Mbm | Scheme::Sm => {
            // Index bits (MAP or antenna) first, then symbol bits.
            for label in 0..1usize << eta_user {
                let position = label >> sym_bits;
                let symbol = alphabet.point(label & ((1 << sym_bits) - 1));
                let mut v = DVector::zeros(dim);
                v[position] = symbol;
                vectors.push(v);
            }
        }
        Scheme::Cm => {
            for label in 0..1usize << eta_user {
                vectors.push(DVector::from_element(1, alphabet.point(label)));
            }
        }
        Scheme::Gsm => {
            let patterns = gsm_patterns(config.n_t, config.n_rf);
            let scale = (config.n_rf as f64).sqrt().recip();
            let group = config.n_rf * sym_bits;
            for label in 0..1usize << eta_user {
                let pattern = &patterns[label >> group];
                let sym_field = label & ((1 << group) - 1);
                let mut v = DVector::zeros(dim);
                // Symbol bits assigned in ascending antenna order.
                for (i, &antenna) in pattern.iter().enumerate() {
                    let shift = (config.n_rf - 1 - i) * sym_bits;
                    let idx = (sym_field >> shift) & ((1 << sym_bits) - 1);
                    v[antenna] = alphabet.point(idx) * scale;
                }
                vectors.push(v);
            }
        }
    }

    let labels = (0..vectors.len())
        .map(|i| index_to_bits(i, eta_user))
        .collect();
    let nonzeros = vectors
        .iter()
        .map(|v| {
            v.iter()
                .enumerate()
                .filter(|(_, c)| c.norm_sqr() > 0.0)
                .map(|(i, &c)| (i, c))
                .collect()
        })
        .collect();
    Ok(SignalSet { dim, eta_user, vectors, labels, nonzeros })
}

/// Lexicographically smallest `2^floor(log2 C(n_t, n_rf))` activation
/// patterns, each a sorted antenna-index list.
fn gsm_patterns(n_t: usize, n_rf: usize) -> Vec<Vec<usize>> {
    let keep = 1 << floor_log2(binomial(n_t, n_rf));
    let mut patterns = Vec::with_capacity(keep);
    let mut current: Vec<usize> = (0..n_rf).collect();
    loop {
        patterns.push(current.clone());
        if patterns.len() == keep {
            return patterns;
        }
        // Next combination in lexicographic order.
        let mut i = n_rf;
        loop {
            i -= 1;
            if current[i] != i + n_t - n_rf {
                break;
            }
        }
        current[i] += 1;
        for j in i + 1..n_rf {
            current[j] = current[j - 1] + 1;
        }
    }
}

impl SignalSet {
    /// Per-user vector dimension D.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Bits per channel use per user.
    pub fn eta_user(&self) -> usize {
        self.eta_user
    }

    /// Number of candidate vectors, `2^eta_user`.
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, index: usize) -> &DVector<Complex64> {
        &self.vectors[index]
    }

    pub fn vectors(&self) -> &[DVector<Complex64>] {
        &self.vectors
    }

    pub fn label(&self, index: usize) -> &[u8] {
        &self.labels[index]
    }

    /// Nonzero (coordinate, value) entries of a candidate vector.
    pub fn nonzeros(&self, index: usize) -> &[(usize, Complex64)] {
        &self.nonzeros[index]
    }

    /// Maps an `eta_user`-bit payload to its transmit vector.
    pub fn encode_user(&self, bits: &[u8]) -> Result<&DVector<Complex64>> {
        Ok(self.vector(self.index_of_bits(bits)?))
    }

    /// Label index of an `eta_user`-bit payload.
    pub fn index_of_bits(&self, bits: &[u8]) -> Result<usize> {
        if bits.len() != self.eta_user {
            return Err(Error::Encoding(format!(
                "expected {} payload bits, got {}",
                self.eta_user,
                bits.len()
            )));
        }
        Ok(bits_to_index(bits))
    }
}

/// Concatenates K per-user vectors into the stacked multiuser vector.
pub fn stack_users(user_vectors: &[&DVector<Complex64>]) -> Result<DVector<Complex64>> {
    if user_vectors.is_empty() {
        return Err(Error::Dimension("no user vectors to stack".into()));
    }
    let dim = user_vectors[0].len();
    if user_vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::Dimension(
            "user vectors must share one dimension".into(),
        ));
    }
    let mut out = DVector::zeros(dim * user_vectors.len());
    for (k, v) in user_vectors.iter().enumerate() {
        out.rows_mut(k * dim, dim).copy_from(*v);
    }
    Ok(out)
}
