//! Prime-order groups, hashing into them, and the multi-key rerandomizable
//! ElGamal scheme built on top.
//!
//! Protocol code is generic over [`PrimeGroup`]. Two instantiations ship:
//! [`ModpGroup`], the order-`q` subgroup of `Z_p^*` for a safe prime
//! `p = 2q + 1` (small enough for brute-force test oracles), and
//! [`Ristretto`], the ristretto255 group with 32-byte compressed points.

mod codec;
mod elgamal;
mod modp;
mod ristretto;

use std::fmt::Debug;

use rand::{CryptoRng, RngCore};

use crate::error::Result;

pub use codec::ElementCodec;
pub use elgamal::{aggregate_pk, Ciphertext, KeyPair, Plaintext};
pub use modp::ModpGroup;
pub use ristretto::Ristretto;

/// Prime-order cyclic group with a fixed-length element encoding.
pub trait PrimeGroup: Clone + Debug + Send + Sync + 'static {
    type Elem: Copy + Eq + Debug + Send + Sync;
    type Scalar: Copy + Eq + Debug + Send + Sync;

    fn name(&self) -> &'static str;
    /// Length in bytes of [`PrimeGroup::encode`] output.
    fn elem_len(&self) -> usize;

    fn identity(&self) -> Self::Elem;
    fn generator(&self) -> Self::Elem;
    fn op(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn invert(&self, a: &Self::Elem) -> Self::Elem;
    fn exp(&self, a: &Self::Elem, k: &Self::Scalar) -> Self::Elem;
    fn exp_gen(&self, k: &Self::Scalar) -> Self::Elem {
        self.exp(&self.generator(), k)
    }

    fn scalar_from_u64(&self, x: u64) -> Self::Scalar;
    fn random_scalar<R: RngCore + CryptoRng>(&self, rng: &mut R) -> Self::Scalar;
    fn scalar_add(&self, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_mul(&self, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn scalar_neg(&self, a: &Self::Scalar) -> Self::Scalar;
    /// Multiplicative inverse modulo the group order; `None` for zero.
    fn scalar_invert(&self, a: &Self::Scalar) -> Option<Self::Scalar>;
    fn scalar_is_zero(&self, a: &Self::Scalar) -> bool {
        *a == self.scalar_from_u64(0)
    }

    fn scalar_to_bytes(&self, k: &Self::Scalar) -> Vec<u8>;
    /// Rejects non-canonical scalar encodings.
    fn scalar_from_bytes(&self, bytes: &[u8]) -> Result<Self::Scalar>;

    fn encode(&self, e: &Self::Elem) -> Vec<u8>;
    /// Rejects byte strings that are not the encoding of a group element.
    fn decode(&self, bytes: &[u8]) -> Result<Self::Elem>;

    /// Deterministic map onto the group with unknown discrete logarithm.
    /// Never returns the identity.
    fn hash_to_group(&self, input: &[u8]) -> Self::Elem;

    fn is_identity(&self, e: &Self::Elem) -> bool {
        *e == self.identity()
    }

    /// Uniformly random non-zero exponent.
    fn random_nonzero_scalar<R: RngCore + CryptoRng>(&self, rng: &mut R) -> Self::Scalar {
        loop {
            let k = self.random_scalar(rng);
            if !self.scalar_is_zero(&k) {
                return k;
            }
        }
    }

    fn random_elem<R: RngCore + CryptoRng>(&self, rng: &mut R) -> Self::Elem {
        self.exp_gen(&self.random_scalar(rng))
    }

    /// First eight encoding bytes; a lookup hint, not collision resistant.
    fn fingerprint(&self, e: &Self::Elem) -> u64 {
        let b = self.encode(e);
        u64::from_le_bytes(b[..8].try_into().unwrap())
    }

    /// Fingerprints of `g^1, g^2, …, g^count`.
    fn generator_power_fingerprints(&self, count: usize) -> Vec<u64> {
        let g = self.generator();
        let mut cur = g;
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            out.push(self.fingerprint(&cur));
            cur = self.op(&cur, &g);
        }
        out
    }

    /// 64-bit fingerprint of an element, used as its binning key.
    fn token(&self, e: &Self::Elem) -> u64 {
        let d = crate::util::hash_parts(b"elem-token", &[&self.encode(e)]);
        u64::from_le_bytes(d[..8].try_into().unwrap())
    }
}

/// Selects one of the shipped group instantiations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    Test,
    Production,
}

impl std::str::FromStr for GroupKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "test" => Ok(GroupKind::Test),
            "production" | "prod" => Ok(GroupKind::Production),
            other => Err(format!("unknown group '{other}' (expected test|production)")),
        }
    }
}
