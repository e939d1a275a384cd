//! Bit-packed counter storage for the cube.
//!
//! Each vector's `g` counters are packed at `ceil(log2(2k + 1))` bits into
//! a private run of 64-bit words. Counter `i` occupies bits
//! `[i * width, (i + 1) * width)` of that run, little-endian within each
//! word and ascending by counter index; a counter may straddle two words.
//!
//! Stored values are biased by one: raw `0` encodes the inactive sentinel
//! `2k` and raw `v + 1` encodes a live stamp `v`. A fresh store is
//! therefore all-zero words, which lets construction use zeroed (lazily
//! committed) pages even for very large cubes.

use crate::at::AtValue;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct PackedStore {
    words: Vec<u64>,
    width: u32,
    g: usize,
    k: u32,
    words_per_vec: usize,
    n_vectors: usize,
}

/// Bits needed to hold the raw range `[0, 2k]`.
#[inline]
pub fn counter_width(k: u32) -> u32 {
    32 - (2 * k).leading_zeros()
}

impl PackedStore {
    pub fn new(n_vectors: usize, g: usize, k: u32) -> Self {
        let width = counter_width(k);
        let words_per_vec = (g * width as usize).div_ceil(64);
        let words = vec![0u64; n_vectors * words_per_vec];
        Self {
            words,
            width,
            g,
            k,
            words_per_vec,
            n_vectors,
        }
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn g(&self) -> usize {
        self.g
    }

    #[inline]
    pub fn n_vectors(&self) -> usize {
        self.n_vectors
    }

    #[inline]
    pub fn words_per_vec(&self) -> usize {
        self.words_per_vec
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub(crate) fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    pub fn from_words(words: Vec<u64>, n_vectors: usize, g: usize, k: u32) -> Result<Self> {
        let width = counter_width(k);
        let words_per_vec = (g * width as usize).div_ceil(64);
        if words.len() != n_vectors * words_per_vec {
            return Err(Error::Snapshot(format!(
                "expected {} packed words, found {}",
                n_vectors * words_per_vec,
                words.len()
            )));
        }
        Ok(Self {
            words,
            width,
            g,
            k,
            words_per_vec,
            n_vectors,
        })
    }

    #[inline]
    pub fn vec_words(&self, v: usize) -> &[u64] {
        &self.words[v * self.words_per_vec..(v + 1) * self.words_per_vec]
    }

    #[inline]
    pub fn vec_words_mut(&mut self, v: usize) -> &mut [u64] {
        &mut self.words[v * self.words_per_vec..(v + 1) * self.words_per_vec]
    }

    /// Decoded counter value for vector `v`, counter `i`.
    #[inline]
    pub fn get(&self, v: usize, i: usize) -> AtValue {
        decode(raw_get(self.vec_words(v), self.width, i), self.k)
    }

    #[inline]
    pub fn set(&mut self, v: usize, i: usize, value: AtValue) {
        let width = self.width;
        let k = self.k;
        raw_set(self.vec_words_mut(v), width, i, encode(value, k));
    }
}

/// Raw `0` is the sentinel `2k`; raw `v + 1` is the stamp `v`.
#[inline]
pub fn encode(value: AtValue, k: u32) -> u32 {
    if value == 2 * k {
        0
    } else {
        debug_assert!(value < 2 * k);
        value + 1
    }
}

#[inline]
pub fn decode(raw: u32, k: u32) -> AtValue {
    if raw == 0 {
        2 * k
    } else {
        debug_assert!(raw <= 2 * k);
        raw - 1
    }
}

/// Read counter `i` from a vector's word run.
#[inline]
pub fn raw_get(words: &[u64], width: u32, i: usize) -> u32 {
    let bit = i * width as usize;
    let w = bit / 64;
    let off = (bit % 64) as u32;
    let mask = (1u64 << width) - 1;
    let mut v = words[w] >> off;
    if off + width > 64 {
        v |= words[w + 1] << (64 - off);
    }
    (v & mask) as u32
}

/// Write counter `i` into a vector's word run.
#[inline]
pub fn raw_set(words: &mut [u64], width: u32, i: usize, raw: u32) {
    debug_assert!(width == 32 || raw < (1 << width));
    let bit = i * width as usize;
    let w = bit / 64;
    let off = (bit % 64) as u32;
    let mask = (1u64 << width) - 1;
    words[w] = (words[w] & !(mask << off)) | ((raw as u64) << off);
    if off + width > 64 {
        let spill = off + width - 64;
        let spill_mask = (1u64 << spill) - 1;
        words[w + 1] = (words[w + 1] & !spill_mask) | ((raw as u64) >> (64 - off));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::SplitMix64;
    use proptest::prelude::*;

    #[test]
    fn width_matches_value_range() {
        assert_eq!(counter_width(300), 10); // 601 values
        assert_eq!(counter_width(1), 2); // values {0,1,2}
        assert_eq!(counter_width(9), 5); // values 0..=18
    }

    #[test]
    fn fresh_store_is_all_inactive() {
        let s = PackedStore::new(4, 37, 9);
        for v in 0..4 {
            for i in 0..37 {
                assert_eq!(s.get(v, i), 18);
            }
        }
    }

    #[test]
    fn set_get_roundtrip_with_straddles() {
        // width 10 straddles a word boundary at counters 6, 12, 19, ...
        let mut s = PackedStore::new(2, 40, 300);
        let mut rng = SplitMix64::new(5);
        let mut shadow = vec![600u32; 80];
        for _ in 0..2000 {
            let v = rng.next_below(2) as usize;
            let i = rng.next_below(40) as usize;
            let value = rng.next_below(601) as u32;
            s.set(v, i, value);
            shadow[v * 40 + i] = value;
            for vv in 0..2 {
                for ii in 0..40 {
                    assert_eq!(s.get(vv, ii), shadow[vv * 40 + ii], "v={vv} i={ii}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn pack_roundtrip(k in 1u32..2000, writes in prop::collection::vec((0usize..64, 0u32..4001), 1..80)) {
            let g = 64;
            let mut s = PackedStore::new(1, g, k);
            let mut shadow = vec![2 * k; g];
            for (i, raw_value) in writes {
                let value = raw_value % (2 * k + 1);
                s.set(0, i, value);
                shadow[i] = value;
            }
            for (i, &expected) in shadow.iter().enumerate() {
                prop_assert_eq!(s.get(0, i), expected);
            }
        }
    }
}
