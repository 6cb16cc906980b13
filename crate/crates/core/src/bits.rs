//! Packed bit vectors for share vectors and triple pools.

use rand::{CryptoRng, RngCore};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct BitVec {
    words: Vec<u64>,
    len: usize,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        Self { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn ones(len: usize) -> Self {
        let mut v = Self { words: vec![!0; len.div_ceil(64)], len };
        v.clear_tail();
        v
    }

    pub fn random<R: RngCore + CryptoRng>(rng: &mut R, len: usize) -> Self {
        let mut v = Self { words: (0..len.div_ceil(64)).map(|_| rng.next_u64()).collect(), len };
        v.clear_tail();
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    pub fn from_words(words: Vec<u64>, len: usize) -> Self {
        assert!(words.len() == len.div_ceil(64));
        let mut v = Self { words, len };
        v.clear_tail();
        v
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, b: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % 64);
        if b {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn clear_tail(&mut self) {
        if self.len % 64 != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << (self.len % 64)) - 1;
            }
        }
    }

    fn check(&self, o: &BitVec) -> Result<()> {
        if self.len == o.len {
            Ok(())
        } else {
            Err(Error::DimensionMismatch)
        }
    }

    pub fn xor(&self, o: &BitVec) -> Result<BitVec> {
        self.check(o)?;
        Ok(Self { words: self.words.iter().zip(&o.words).map(|(a, b)| a ^ b).collect(), len: self.len })
    }

    pub fn and(&self, o: &BitVec) -> Result<BitVec> {
        self.check(o)?;
        Ok(Self { words: self.words.iter().zip(&o.words).map(|(a, b)| a & b).collect(), len: self.len })
    }

    pub fn not(&self) -> BitVec {
        let mut v = Self { words: self.words.iter().map(|w| !w).collect(), len: self.len };
        v.clear_tail();
        v
    }

    /// Bits `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> BitVec {
        assert!(start + len <= self.len);
        if start % 64 == 0 {
            let words = self.words[start / 64..(start + len).div_ceil(64)].to_vec();
            return Self::from_words(words, len);
        }
        let mut out = Self::zeros(len);
        for i in 0..len {
            out.set(i, self.get(start + i));
        }
        out
    }

    pub fn push(&mut self, b: bool) {
        if self.len % 64 == 0 {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, b);
    }

    pub fn extend_from(&mut self, o: &BitVec) {
        if self.len % 64 == 0 {
            self.words.extend_from_slice(&o.words);
            self.len += o.len;
        } else {
            for i in 0..o.len {
                self.push(o.get(i));
            }
        }
    }

    /// Little-endian byte packing, `⌈len/8⌉` bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        out.truncate(self.len.div_ceil(8));
        out
    }

    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<BitVec> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::malformed(format!("bit vector of {len} bits needs {} bytes, got {}", len.div_ceil(8), bytes.len())));
        }
        let mut words = vec![0u64; len.div_ceil(64)];
        for (i, &b) in bytes.iter().enumerate() {
            words[i / 8] |= (b as u64) << (8 * (i % 8));
        }
        let v = Self { words, len };
        if len % 8 != 0 && bytes.last().is_some_and(|&b| b >> (len % 8) != 0) {
            return Err(Error::malformed("nonzero padding bits"));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn bytes_round_trip(bits in proptest::collection::vec(any::<bool>(), 0..300)) {
            let v = BitVec::from_bools(&bits);
            prop_assert_eq!(BitVec::from_bytes(&v.to_bytes(), bits.len()).unwrap(), v.clone());
            prop_assert_eq!(v.to_bools(), bits);
        }

        #[test]
        fn slice_and_extend_agree_with_bools(bits in proptest::collection::vec(any::<bool>(), 1..300), cut in 0usize..300) {
            let cut = cut % bits.len();
            let v = BitVec::from_bools(&bits);
            let mut a = v.slice(0, cut);
            a.extend_from(&v.slice(cut, bits.len() - cut));
            prop_assert_eq!(a, v);
        }
    }

    #[test]
    fn not_keeps_tail_clear() {
        let v = BitVec::zeros(70).not();
        assert_eq!(v.count_ones(), 70);
        assert_eq!(v, BitVec::ones(70));
    }
}
