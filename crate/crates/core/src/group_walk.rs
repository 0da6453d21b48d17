//! The group Z₂^ℓ, the bitwise-mutation distribution μ on it, the characters
//! ρ_v and the Fourier transform of μ.
//!
//! Standard bit mutation is a random walk on Z₂^ℓ: from `x` the walk moves to
//! `x + w` with probability `μ(w) = p^|w| (1-p)^(ℓ-|w|)`. Its expected hitting
//! times are sums over characters, which is what
//! [`hitting_time_from_zero`] evaluates by explicit enumeration.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{ln_one_minus_pow, CompensatedSum};

/// Largest ℓ for which sums over all 2^ℓ group elements are evaluated.
pub const ENUMERATION_CAP: usize = 24;

/// A fixed-length 0/1 vector, packed 64 bits per word, bit 0 first.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    pub fn zeros(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::domain("bit strings must have length at least 1"));
        }
        Ok(Self {
            words: vec![0; len.div_ceil(64)],
            len,
        })
    }

    pub fn ones(len: usize) -> Result<Self> {
        let mut s = Self::zeros(len)?;
        for w in &mut s.words {
            *w = u64::MAX;
        }
        s.mask_tail();
        Ok(s)
    }

    /// Builds the string whose bit `i` is bit `i` of `index`.
    pub fn from_index(len: usize, index: u64) -> Result<Self> {
        if len > 64 {
            return Err(Error::domain("from_index supports at most 64 bits"));
        }
        let mut s = Self::zeros(len)?;
        s.words[0] = index;
        s.mask_tail();
        Ok(s)
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let mut s = Self::zeros(bits.len())?;
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => s.set(i, true),
                other => return Err(Error::domain(format!("bit value {other} is not 0 or 1"))),
            }
        }
        Ok(s)
    }

    /// Uniformly random string of the given length.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Result<Self> {
        let mut s = Self::zeros(len)?;
        for w in &mut s.words {
            *w = rng.random();
        }
        s.mask_tail();
        Ok(s)
    }

    fn mask_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            let last = self.words.len() - 1;
            self.words[last] &= (1u64 << rem) - 1;
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The string as an integer; only meaningful for strings of at most 64 bits.
    pub fn to_index(&self) -> u64 {
        self.words[0]
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(
            i < self.len,
            "bit index {i} out of range for length {}",
            self.len
        );
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(
            i < self.len,
            "bit index {i} out of range for length {}",
            self.len
        );
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(
            i < self.len,
            "bit index {i} out of range for length {}",
            self.len
        );
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn hamming_weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of consecutive ones starting at bit 0.
    pub fn leading_ones(&self) -> usize {
        let mut count = 0;
        for w in &self.words {
            let t = w.trailing_ones() as usize;
            count += t;
            if t < 64 {
                break;
            }
        }
        count.min(self.len)
    }

    pub fn is_all_ones(&self) -> bool {
        self.leading_ones() == self.len
    }

    /// Group addition in Z₂^ℓ.
    pub fn xor(&self, other: &BitString) -> Result<BitString> {
        self.check_len(other)?;
        Ok(BitString {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a ^ b)
                .collect(),
            len: self.len,
        })
    }

    /// `⟨self, other⟩ mod 2`.
    pub fn inner_parity(&self, other: &BitString) -> Result<bool> {
        self.check_len(other)?;
        let ones: u32 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        Ok(ones % 2 == 1)
    }

    /// Applies a coordinate permutation: bit `i` of the result is bit `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<BitString> {
        if perm.len() != self.len {
            return Err(Error::LengthMismatch {
                left: self.len,
                right: perm.len(),
            });
        }
        let mut out = BitString::zeros(self.len)?;
        for (i, &src) in perm.iter().enumerate() {
            out.set(i, self.get(src));
        }
        Ok(out)
    }

    fn check_len(&self, other: &BitString) -> Result<()> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                left: self.len,
                right: other.len,
            });
        }
        Ok(())
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits: Vec<u8> = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::domain(format!(
                    "unexpected character {other:?} in bit string"
                ))),
            })
            .collect::<Result<_>>()?;
        BitString::from_bits(&bits)
    }
}

/// Per-bit flip probability, strictly inside (0, 1). Exactly 1/2 is allowed.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct MutationRate(f64);

impl MutationRate {
    pub fn new(p: f64) -> Result<Self> {
        if p > 0.0 && p < 1.0 {
            Ok(MutationRate(p))
        } else {
            Err(Error::InvalidRate(p))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for MutationRate {
    type Error = Error;

    fn try_from(p: f64) -> Result<Self> {
        MutationRate::new(p)
    }
}

impl From<MutationRate> for f64 {
    fn from(rate: MutationRate) -> f64 {
        rate.0
    }
}

/// The character ρ_v of Z₂^ℓ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Character {
    index: BitString,
}

impl Character {
    pub fn new(index: BitString) -> Self {
        Self { index }
    }

    pub fn trivial(len: usize) -> Result<Self> {
        Ok(Self::new(BitString::zeros(len)?))
    }

    pub fn index(&self) -> &BitString {
        &self.index
    }

    pub fn eval(&self, w: &BitString) -> Result<i8> {
        character_eval(&self.index, w)
    }
}

/// μ(w) = p^|w| (1-p)^(ℓ-|w|).
pub fn mu_mass(w: &BitString, p: MutationRate) -> f64 {
    let k = w.hamming_weight() as i32;
    let p = p.get();
    p.powi(k) * (1.0 - p).powi(w.len() as i32 - k)
}

/// ρ_v(w) = (-1)^⟨v,w⟩.
pub fn character_eval(v: &BitString, w: &BitString) -> Result<i8> {
    Ok(if v.inner_parity(w)? { -1 } else { 1 })
}

/// μ̂(ρ_v) = (1-2p)^|v|.
pub fn fourier_mu(v: &BitString, p: MutationRate) -> f64 {
    (1.0 - 2.0 * p.get()).powi(v.hamming_weight() as i32)
}

/// `1 / (1 - (1-2p)^j)` for j = 0..=ℓ; entry 0 is unused and set to infinity.
pub(crate) fn inverse_gaps(ell: usize, p: MutationRate) -> Vec<f64> {
    std::iter::once(f64::INFINITY)
        .chain((1..=ell as u64).map(|j| (-ln_one_minus_pow(p.get(), j)).exp()))
        .collect()
}

/// Expected number of steps for the walk started at 0 to first reach `g`,
/// computed as the character sum Σ_{v≠0} (1 - ρ_v(g)) / (1 - μ̂(ρ_v)).
///
/// Enumerates all 2^ℓ characters, so ℓ is capped at [`ENUMERATION_CAP`].
pub fn hitting_time_from_zero(g: &BitString, p: MutationRate) -> Result<f64> {
    let ell = g.len();
    if ell > ENUMERATION_CAP {
        return Err(Error::Capacity {
            what: "block length",
            value: ell,
            limit: ENUMERATION_CAP,
            hint: "use the weight-grouped formulas in runtime_formulas instead",
        });
    }
    let inv = inverse_gaps(ell, p);
    let target = g.to_index();
    let mut acc = CompensatedSum::new();
    for v in 1u64..(1u64 << ell) {
        // 1 - ρ_v(g) is 2 when v and g share an odd number of ones, else 0
        if (v & target).count_ones() % 2 == 1 {
            acc.add(2.0 * inv[v.count_ones() as usize]);
        }
    }
    Ok(acc.total())
}
