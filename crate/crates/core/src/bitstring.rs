//! Packed fixed-length bit strings, the genotype of every problem in this crate.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;

use crate::error::{check_len, Error, Result};

const WORD: usize = 64;

/// A fixed-length string over `{0, 1}` stored as packed 64-bit words.
///
/// Bits beyond `len` in the last word are always zero, so word-wise
/// comparisons and popcounts need no masking.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

fn words_for(len: usize) -> usize {
    len.div_ceil(WORD)
}

fn tail_mask(len: usize) -> u64 {
    match len % WORD {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString {
            words: vec![0; words_for(len)],
            len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut s = BitString {
            words: vec![u64::MAX; words_for(len)],
            len,
        };
        s.clear_tail();
        s
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                s.words[i / WORD] |= 1 << (i % WORD);
            }
        }
        s
    }

    /// Builds a string from 0/1 values given in index order.
    pub fn from_u8s(bits: &[u8]) -> Result<Self> {
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => s.words[i / WORD] |= 1 << (i % WORD),
                other => {
                    return Err(Error::contract(format!(
                        "bit {i} has value {other}, expected 0 or 1"
                    )))
                }
            }
        }
        Ok(s)
    }

    /// Uniformly random string: every bit is 1 with probability 1/2.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::contract("bit string length must be at least 1"));
        }
        let mut words: Vec<u64> = (0..words_for(len)).map(|_| rng.next_u64()).collect();
        if let Some(last) = words.last_mut() {
            *last &= tail_mask(len);
        }
        Ok(BitString { words, len })
    }

    /// A copy of `target` with exactly `distance` distinct positions flipped,
    /// the positions chosen uniformly without replacement.
    pub fn at_distance<R: Rng + ?Sized>(
        rng: &mut R,
        target: &BitString,
        distance: usize,
    ) -> Result<Self> {
        if distance > target.len {
            return Err(Error::contract(format!(
                "distance {distance} exceeds length {}",
                target.len
            )));
        }
        let mut out = target.clone();
        out.flip_random(rng, distance);
        Ok(out)
    }

    /// Flips `count` distinct uniformly chosen positions. `count <= len`.
    pub(crate) fn flip_random<R: Rng + ?Sized>(&mut self, rng: &mut R, count: usize) {
        debug_assert!(count <= self.len);
        if count == 0 {
            return;
        }
        if count == self.len {
            self.complement_in_place();
            return;
        }
        for i in index::sample(rng, self.len, count) {
            self.flip(i);
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        self.words[i / WORD] >> (i % WORD) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let m = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= m;
        } else {
            self.words[i / WORD] &= !m;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        self.words[i / WORD] ^= 1 << (i % WORD);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn complement(&self) -> Self {
        let mut out = self.clone();
        out.complement_in_place();
        out
    }

    fn complement_in_place(&mut self) {
        for w in &mut self.words {
            *w = !*w;
        }
        self.clear_tail();
    }

    /// Bitwise XOR of two equal-length strings.
    pub fn xor(&self, other: &BitString) -> Result<Self> {
        check_len(self.len, other.len)?;
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| a ^ b)
            .collect();
        Ok(BitString {
            words,
            len: self.len,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.words[i / WORD] >> (i % WORD) & 1 == 1)
    }

    /// Indices of the one-bits, ascending.
    pub fn ones_positions(&self) -> impl Iterator<Item = usize> + '_ {
        set_bits(&self.words)
    }

    /// The packed words, least significant index in bit 0 of word 0.
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub(crate) fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    pub(crate) fn clear_tail(&mut self) {
        let m = tail_mask(self.len);
        if let Some(last) = self.words.last_mut() {
            *last &= m;
        }
    }
}

/// Positions of the set bits across a word slice, ascending.
pub(crate) fn set_bits(words: &[u64]) -> impl Iterator<Item = usize> + '_ {
    words.iter().enumerate().flat_map(|(wi, &w)| {
        let mut rest = w;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let tz = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * WORD + tz)
            }
        })
    })
}

/// Number of positions where `a` and `b` differ.
pub fn hamming(a: &BitString, b: &BitString) -> Result<usize> {
    check_len(a.len, b.len)?;
    Ok(a.words
        .iter()
        .zip(&b.words)
        .map(|(x, y)| (x ^ y).count_ones() as usize)
        .sum())
}

/// Text form used in logs: one `0`/`1` character per bit, highest index
/// first, so the text of a string under the identity weighting reads as its
/// binary value.
impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = (0..self.len)
            .rev()
            .map(|i| if self.get(i) { '1' } else { '0' })
            .collect();
        f.write_str(&s)
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
        let bytes = s.as_bytes();
        let len = bytes.len();
        let mut out = BitString::zeros(len);
        for (k, &c) in bytes.iter().enumerate() {
            let i = len - 1 - k;
            match c {
                b'0' => {}
                b'1' => out.set(i, true),
                _ => {
                    return Err(Error::contract(format!(
                        "invalid bit character {:?} at offset {k}",
                        c as char
                    )))
                }
            }
        }
        Ok(out)
    }
}

impl serde::Serialize for BitString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for BitString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bs(bits: &[u8]) -> BitString {
        BitString::from_u8s(bits).unwrap()
    }

    #[test]
    fn hamming_hand_cases() {
        assert_eq!(hamming(&bs(&[0, 0, 0]), &bs(&[0, 0, 0])).unwrap(), 0);
        assert_eq!(hamming(&bs(&[1, 1, 1]), &bs(&[0, 0, 0])).unwrap(), 3);
        assert_eq!(hamming(&bs(&[1, 0, 1, 0]), &bs(&[0, 1, 1, 0])).unwrap(), 2);
    }

    #[test]
    fn hamming_length_mismatch() {
        let err = hamming(&BitString::zeros(3), &BitString::zeros(4)).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { expected: 3, found: 4 }));
    }

    /// Emits only zero bits.
    struct ZeroRng;

    impl rand::RngCore for ZeroRng {
        fn next_u32(&mut self) -> u32 {
            0
        }
        fn next_u64(&mut self) -> u64 {
            0
        }
        fn fill_bytes(&mut self, dst: &mut [u8]) {
            dst.fill(0);
        }
    }

    #[test]
    fn random_single_bit_minimum() {
        let s = BitString::random(&mut ZeroRng, 1).unwrap();
        assert_eq!(s, bs(&[0]));
    }

    #[test]
    fn random_rejects_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(BitString::random(&mut rng, 0), Err(Error::Contract(_))));
    }

    #[test]
    fn random_frequency_of_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = BitString::random(&mut rng, 10_000).unwrap();
        let freq = s.count_ones() as f64 / 10_000.0;
        assert!((0.48..=0.52).contains(&freq), "freq {freq}");
    }

    #[test]
    fn random_is_deterministic_per_seed() {
        let a = BitString::random(&mut ChaCha8Rng::seed_from_u64(99), 777).unwrap();
        let b = BitString::random(&mut ChaCha8Rng::seed_from_u64(99), 777).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn at_distance_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = BitString::random(&mut rng, 130).unwrap();
        assert_eq!(BitString::at_distance(&mut rng, &t, 0).unwrap(), t);
        assert_eq!(BitString::at_distance(&mut rng, &t, 130).unwrap(), t.complement());
        let mid = BitString::at_distance(&mut rng, &BitString::zeros(1000), 50).unwrap();
        assert_eq!(hamming(&mid, &BitString::zeros(1000)).unwrap(), 50);
        assert!(matches!(
            BitString::at_distance(&mut rng, &t, 131),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn text_form_is_highest_index_first() {
        let s = bs(&[1, 0, 0]);
        assert_eq!(s.to_string(), "001");
        assert_eq!("001".parse::<BitString>().unwrap(), s);
        assert!("01x".parse::<BitString>().is_err());
        assert_eq!(BitString::ones(70).to_string(), "1".repeat(70));
    }

    #[test]
    fn complement_keeps_tail_clear() {
        let z = BitString::zeros(65);
        let c = z.complement();
        assert_eq!(c.count_ones(), 65);
        assert_eq!(c, BitString::ones(65));
    }

    fn pair(len: usize) -> impl Strategy<Value = (Vec<bool>, Vec<bool>, Vec<bool>)> {
        (
            prop::collection::vec(any::<bool>(), len),
            prop::collection::vec(any::<bool>(), len),
            prop::collection::vec(any::<bool>(), len),
        )
    }

    proptest! {
        #[test]
        fn hamming_is_a_metric((a, b, c) in (1usize..200).prop_flat_map(pair)) {
            let (a, b, c) = (BitString::from_bits(&a), BitString::from_bits(&b), BitString::from_bits(&c));
            prop_assert_eq!(hamming(&a, &b).unwrap(), hamming(&b, &a).unwrap());
            prop_assert_eq!(hamming(&a, &a).unwrap(), 0);
            prop_assert!(hamming(&a, &c).unwrap() <= hamming(&a, &b).unwrap() + hamming(&b, &c).unwrap());
        }

        #[test]
        fn at_distance_is_exact(seed in any::<u64>(), len in 1usize..300, frac in 0.0f64..=1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let target = BitString::random(&mut rng, len).unwrap();
            let d = ((len as f64) * frac).floor() as usize;
            let out = BitString::at_distance(&mut rng, &target, d).unwrap();
            prop_assert_eq!(hamming(&out, &target).unwrap(), d);
        }

        #[test]
        fn text_round_trip(bits in prop::collection::vec(any::<bool>(), 1..150)) {
            let s = BitString::from_bits(&bits);
            prop_assert_eq!(s.to_string().parse::<BitString>().unwrap(), s);
        }
    }
}
