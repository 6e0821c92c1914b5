//! Conventional complex constellations (BPSK, M-QAM, M-PSK) with bit
//! labeling and unit-average-energy normalization.
//!
//! Labels are indexed by the natural-binary value of their bit string:
//! `points[b]` is the symbol whose label is the `bits_per_symbol`-wide
//! binary expansion of `b` (MSB first). QAM rails are Gray-coded
//! independently in I and Q, so nearest horizontal/vertical neighbors
//! differ in exactly one label bit. 32-QAM is the standard cross shape,
//! built by folding the outermost columns of a Gray-labeled 8x4
//! rectangle into the arms; the labeling is quasi-Gray at the fold seams.

use num_complex::Complex64;

use crate::{Error, Result};

/// Constellation family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphabetKind {
    Bpsk,
    Qam,
    Psk,
}

/// A normalized, bit-labeled modulation alphabet.
#[derive(Debug, Clone)]
pub struct Alphabet {
    kind: AlphabetKind,
    order: usize,
    points: Vec<Complex64>,
    labels: Vec<Vec<u8>>,
    bits_per_symbol: usize,
}

/// Position on a Gray-ordered rail for label value `v` (inverse Gray code).
fn gray_inverse(mut v: usize) -> usize {
    let mut k = v;
    loop {
        v >>= 1;
        if v == 0 {
            return k;
        }
        k ^= v;
    }
}

/// Amplitude levels -(m-1), ..., -1, +1, ..., m-1 for an m-level rail.
fn pam_levels(m: usize) -> Vec<f64> {
    (0..m).map(|i| (2 * i) as f64 - (m - 1) as f64).collect()
}

fn is_power_of_two(n: usize) -> bool {
    n >= 2 && n & (n - 1) == 0
}

/// Builds a unit-average-energy, Gray-labeled constellation.
///
/// Supported orders: BPSK requires order 2; QAM supports {2, 4, 8, 16,
/// 32, 64} (square where possible, 4x2 rectangle for 8, cross for 32);
/// PSK supports any power of two.
pub fn build_alphabet(kind: AlphabetKind, order: usize) -> Result<Alphabet> {
    if !is_power_of_two(order) {
        return Err(Error::Config(format!(
            "alphabet order {order} is not a power of two"
        )));
    }
    let points = match kind {
        AlphabetKind::Bpsk => {
            if order != 2 {
                return Err(Error::Config(format!("BPSK requires order 2, got {order}")));
            }
            vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]
        }
        AlphabetKind::Psk => (0..order)
            .map(|b| {
                let k = gray_inverse(b);
                let phase = 2.0 * std::f64::consts::PI * k as f64 / order as f64;
                Complex64::new(phase.cos(), phase.sin())
            })
            .collect(),
        AlphabetKind::Qam => match order {
            2 => qam_rect(2, 1),
            4 => qam_rect(2, 2),
            8 => qam_rect(4, 2),
            16 => qam_rect(4, 4),
            32 => qam32_cross(),
            64 => qam_rect(8, 8),
            _ => {
                return Err(Error::Config(format!(
                    "unsupported QAM order {order} (supported: 2, 4, 8, 16, 32, 64)"
                )))
            }
        },
    };
    let bits = order.trailing_zeros() as usize;
    let labels = (0..order)
        .map(|b| (0..bits).rev().map(|i| ((b >> i) & 1) as u8).collect())
        .collect();
    Ok(normalize(Alphabet {
        kind,
        order,
        points,
        labels,
        bits_per_symbol: bits,
    }))
}

/// Rectangular QAM with `ni` I-levels and `nq` Q-levels, Gray per rail.
/// Label layout: I bits first (MSB side), then Q bits.
fn qam_rect(ni: usize, nq: usize) -> Vec<Complex64> {
    let (li, lq) = (pam_levels(ni), pam_levels(nq));
    let bq = nq.trailing_zeros() as usize;
    (0..ni * nq)
        .map(|b| {
            let i = li[gray_inverse(b >> bq)];
            let q = if nq == 1 { 0.0 } else { lq[gray_inverse(b & (nq - 1))] };
            Complex64::new(i, q)
        })
        .collect()
}

/// Cross 32-QAM: Gray-labeled 8x4 rectangle with the |I|=7 columns folded
/// onto the arm positions (|Q|=5), covering I,Q in {+-1,+-3,+-5} minus the
/// four (+-5,+-5) corners.
fn qam32_cross() -> Vec<Complex64> {
    let (li, lq) = (pam_levels(8), pam_levels(4));
    (0..32)
        .map(|b| {
            let i = li[gray_inverse(b >> 2)];
            let q = lq[gray_inverse(b & 3)];
            if i.abs() > 5.0 {
                Complex64::new(i.signum() * (4.0 - q.abs()), q.signum() * 5.0)
            } else {
                Complex64::new(i, q)
            }
        })
        .collect()
}

fn normalize(mut a: Alphabet) -> Alphabet {
    let energy: f64 = a.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / a.order as f64;
    let scale = energy.sqrt().recip();
    for p in &mut a.points {
        *p *= scale;
    }
    a
}

impl Alphabet {
    pub fn kind(&self) -> AlphabetKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn labels(&self) -> &[Vec<u8>] {
        &self.labels
    }

    /// Symbol for the label whose natural-binary value is `index`.
    pub fn point(&self, index: usize) -> Complex64 {
        self.points[index]
    }

    /// Maps a bit string of length `bits_per_symbol` to its labeled point.
    pub fn bits_to_symbol(&self, bits: &[u8]) -> Result<Complex64> {
        if bits.len() != self.bits_per_symbol {
            return Err(Error::Encoding(format!(
                "expected {} bits, got {}",
                self.bits_per_symbol,
                bits.len()
            )));
        }
        Ok(self.points[bits_to_index(bits)])
    }

    /// Inverse of [`bits_to_symbol`](Self::bits_to_symbol) over alphabet
    /// members (exact match).
    pub fn symbol_to_bits(&self, symbol: Complex64) -> Result<&[u8]> {
        self.points
            .iter()
            .position(|&p| p == symbol)
            .map(|i| self.labels[i].as_slice())
            .ok_or_else(|| Error::Encoding(format!("{symbol} is not an alphabet point")))
    }

    /// Short name used in CSV output and CLI flags, e.g. `bpsk`, `qam16`.
    pub fn name(&self) -> String {
        match self.kind {
            AlphabetKind::Bpsk => "bpsk".to_string(),
            AlphabetKind::Qam => format!("qam{}", self.order),
            AlphabetKind::Psk => format!("psk{}", self.order),
        }
    }

    /// Parses an alphabet name: `bpsk`, `qamN`, or `pskN`.
    pub fn parse(name: &str) -> Result<Alphabet> {
        let name = name.to_ascii_lowercase();
        if name == "bpsk" {
            return build_alphabet(AlphabetKind::Bpsk, 2);
        }
        if let Some(order) = name.strip_prefix("qam") {
            let order: usize = order
                .parse()
                .map_err(|_| Error::Config(format!("bad alphabet name {name}")))?;
            return build_alphabet(AlphabetKind::Qam, order);
        }
        if let Some(order) = name.strip_prefix("psk") {
            let order: usize = order
                .parse()
                .map_err(|_| Error::Config(format!("bad alphabet name {name}")))?;
            return build_alphabet(AlphabetKind::Psk, order);
        }
        Err(Error::Config(format!(
            "unknown alphabet {name} (expected bpsk, qamN, or pskN)"
        )))
    }
}

/// Natural-binary value of a bit string, MSB first.
pub fn bits_to_index(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

/// Bit string (MSB first) of `index`, `width` bits wide.
pub fn index_to_bits(index: usize, width: usize) -> Vec<u8> {
    (0..width).rev().map(|i| ((index >> i) & 1) as u8).collect()
}
