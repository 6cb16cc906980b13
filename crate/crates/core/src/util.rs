//! Hashing, pseudorandom expansion and byte-string helpers shared by every
//! protocol layer.

use rand::{CryptoRng, Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// 128-bit correlation seed produced by base OT, OT extension and the dealer.
pub type Block = u128;

/// Domain-separated SHA-256 over length-prefixed parts.
pub fn hash_parts(domain: &[u8], parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((domain.len() as u32).to_le_bytes());
    h.update(domain);
    for p in parts {
        h.update((p.len() as u32).to_le_bytes());
        h.update(p);
    }
    h.finalize().into()
}

/// Hash to an arbitrary number of bytes (counter mode over [`hash_parts`]).
pub fn hash_to_len(domain: &[u8], parts: &[&[u8]], len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len);
    let mut ctr = 0u32;
    while out.len() < len {
        let mut all: Vec<&[u8]> = Vec::with_capacity(parts.len() + 1);
        let c = ctr.to_le_bytes();
        all.push(&c);
        all.extend_from_slice(parts);
        let d = hash_parts(domain, &all);
        let take = (len - out.len()).min(32);
        out.extend_from_slice(&d[..take]);
        ctr += 1;
    }
    out
}

/// Correlation-robust hash of a block with an instance tweak.
pub fn hash_block(tweak: u64, b: Block) -> Block {
    let d = hash_parts(b"crh", &[&tweak.to_le_bytes(), &b.to_le_bytes()]);
    Block::from_le_bytes(d[..16].try_into().unwrap())
}

/// Deterministic stream cipher keyed by a 32-byte seed.
pub fn prg(seed: [u8; 32]) -> ChaCha12Rng {
    ChaCha12Rng::from_seed(seed)
}

/// Expands a block into `len` pseudorandom bytes.
pub fn expand_block(b: Block, len: usize) -> Vec<u8> {
    let mut seed = [0u8; 32];
    seed[..16].copy_from_slice(&b.to_le_bytes());
    let mut out = vec![0u8; len];
    prg(seed).fill_bytes(&mut out);
    out
}

/// Derives a child seed from a parent seed and a label.
pub fn derive_seed(parent: &[u8], label: &[u8]) -> [u8; 32] {
    hash_parts(b"derive-seed", &[parent, label])
}

pub fn random_block<R: RngCore + CryptoRng>(rng: &mut R) -> Block {
    rng.gen()
}

pub fn random_bytes<R: RngCore + CryptoRng>(rng: &mut R, len: usize) -> Vec<u8> {
    let mut v = vec![0u8; len];
    rng.fill_bytes(&mut v);
    v
}

pub fn xor_in_place(dst: &mut [u8], src: &[u8]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= *s;
    }
}

pub fn xor(a: &[u8], b: &[u8]) -> Vec<u8> {
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

/// `⌈log₂ x⌉` for `x ≥ 1`.
pub fn ceil_log2(x: u64) -> u32 {
    assert!(x >= 1);
    if x == 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

pub fn bytes_for_bits(bits: usize) -> usize {
    bits.div_ceil(8)
}

/// Little-endian encoding of the low `len` bytes of `x`.
pub fn u64_to_bytes(x: u64, len: usize) -> Vec<u8> {
    x.to_le_bytes()[..len].to_vec()
}

pub fn u64_from_bytes(b: &[u8]) -> u64 {
    let mut buf = [0u8; 8];
    buf[..b.len()].copy_from_slice(b);
    u64::from_le_bytes(buf)
}

/// Mask keeping the low `bits` bits.
pub fn low_mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// Flat vector of fixed-width byte strings.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ByteRows {
    width: usize,
    data: Vec<u8>,
}

impl ByteRows {
    pub fn zeros(count: usize, width: usize) -> Self {
        Self { width, data: vec![0u8; count * width] }
    }

    pub fn from_flat(width: usize, data: Vec<u8>) -> Self {
        assert!(width > 0 && data.len() % width == 0);
        Self { width, data }
    }

    pub fn random<R: RngCore + CryptoRng>(rng: &mut R, count: usize, width: usize) -> Self {
        Self { width, data: random_bytes(rng, count * width) }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.width).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [u8] {
        &mut self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.data.chunks_exact(self.width.max(1))
    }

    pub fn as_flat(&self) -> &[u8] {
        &self.data
    }

    pub fn as_flat_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_flat(self) -> Vec<u8> {
        self.data
    }

    pub fn xor_assign(&mut self, other: &ByteRows) {
        assert_eq!(self.width, other.width);
        assert_eq!(self.data.len(), other.data.len());
        xor_in_place(&mut self.data, &other.data);
    }

    /// `out[i] = self[perm[i]]`.
    pub fn permuted(&self, perm: &[usize]) -> ByteRows {
        assert_eq!(perm.len(), self.len());
        let mut out = Vec::with_capacity(self.data.len());
        for &src in perm {
            out.extend_from_slice(self.row(src));
        }
        ByteRows { width: self.width, data: out }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_log2_small_values() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(4), 2);
        assert_eq!(ceil_log2(5), 3);
        assert_eq!(ceil_log2(1301), 11);
        assert_eq!(ceil_log2(1 << 20), 20);
    }

    #[test]
    fn hash_to_len_prefix_stable() {
        let a = hash_to_len(b"d", &[b"x"], 40);
        let b = hash_to_len(b"d", &[b"x"], 70);
        assert_eq!(a[..], b[..40]);
        assert_ne!(hash_to_len(b"d", &[b"x"], 16), hash_to_len(b"e", &[b"x"], 16));
    }

    #[test]
    fn byte_rows_permute() {
        let r = ByteRows::from_flat(2, vec![0, 0, 1, 1, 2, 2]);
        let p = r.permuted(&[2, 0, 1]);
        assert_eq!(p.as_flat(), &[2, 2, 0, 0, 1, 1]);
    }
}
