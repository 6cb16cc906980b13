use curve25519_dalek::constants::{RISTRETTO_BASEPOINT_POINT, RISTRETTO_BASEPOINT_TABLE};
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use curve25519_dalek::traits::Identity;
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha512};

use super::PrimeGroup;
use crate::error::{Error, Result};

/// ristretto255: prime-order group of ~2²⁵², 32-byte compressed encoding.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Ristretto;

impl PrimeGroup for Ristretto {
    type Elem = RistrettoPoint;
    type Scalar = Scalar;

    fn name(&self) -> &'static str {
        "ristretto255"
    }

    fn elem_len(&self) -> usize {
        32
    }

    fn identity(&self) -> RistrettoPoint {
        RistrettoPoint::identity()
    }

    fn generator(&self) -> RistrettoPoint {
        RISTRETTO_BASEPOINT_POINT
    }

    fn op(&self, a: &RistrettoPoint, b: &RistrettoPoint) -> RistrettoPoint {
        a + b
    }

    fn invert(&self, a: &RistrettoPoint) -> RistrettoPoint {
        -a
    }

    fn exp(&self, a: &RistrettoPoint, k: &Scalar) -> RistrettoPoint {
        a * k
    }

    fn exp_gen(&self, k: &Scalar) -> RistrettoPoint {
        RISTRETTO_BASEPOINT_TABLE * k
    }

    fn scalar_from_u64(&self, x: u64) -> Scalar {
        Scalar::from(x)
    }

    fn random_scalar<R: RngCore + CryptoRng>(&self, rng: &mut R) -> Scalar {
        let mut wide = [0u8; 64];
        rng.fill_bytes(&mut wide);
        Scalar::from_bytes_mod_order_wide(&wide)
    }

    fn scalar_to_bytes(&self, k: &Scalar) -> Vec<u8> {
        k.to_bytes().to_vec()
    }

    fn scalar_from_bytes(&self, bytes: &[u8]) -> Result<Scalar> {
        let b: [u8; 32] = bytes.try_into().map_err(|_| Error::MalformedElement)?;
        Option::from(Scalar::from_canonical_bytes(b)).ok_or(Error::MalformedElement)
    }

    fn scalar_add(&self, a: &Scalar, b: &Scalar) -> Scalar {
        a + b
    }

    fn scalar_mul(&self, a: &Scalar, b: &Scalar) -> Scalar {
        a * b
    }

    fn scalar_neg(&self, a: &Scalar) -> Scalar {
        -a
    }

    fn scalar_invert(&self, a: &Scalar) -> Option<Scalar> {
        if *a == Scalar::ZERO {
            None
        } else {
            Some(a.invert())
        }
    }

    fn encode(&self, e: &RistrettoPoint) -> Vec<u8> {
        e.compress().to_bytes().to_vec()
    }

    fn decode(&self, bytes: &[u8]) -> Result<RistrettoPoint> {
        let c = CompressedRistretto::from_slice(bytes).map_err(|_| Error::MalformedElement)?;
        c.decompress().ok_or(Error::MalformedElement)
    }

    fn generator_power_fingerprints(&self, count: usize) -> Vec<u64> {
        // Batched compression shares one field inversion per chunk but
        // compresses 2P; walk multiples of g/2 instead of g.
        let half = RISTRETTO_BASEPOINT_POINT * Scalar::from(2u64).invert();
        let mut out = Vec::with_capacity(count);
        let mut cur = half;
        let mut chunk = Vec::with_capacity(4096);
        while out.len() < count {
            chunk.clear();
            for _ in 0..(count - out.len()).min(4096) {
                chunk.push(cur);
                cur += half;
            }
            for c in RistrettoPoint::double_and_compress_batch(&chunk) {
                out.push(u64::from_le_bytes(c.as_bytes()[..8].try_into().unwrap()));
            }
        }
        out
    }

    fn hash_to_group(&self, input: &[u8]) -> RistrettoPoint {
        let mut ctr = 0u32;
        loop {
            let mut h = Sha512::new();
            h.update(b"ristretto-h2g");
            h.update(ctr.to_le_bytes());
            h.update(input);
            let wide: [u8; 64] = h.finalize().into();
            let p = RistrettoPoint::from_uniform_bytes(&wide);
            if p != RistrettoPoint::identity() {
                return p;
            }
            ctr += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn encode_decode_round_trip_and_rejection() {
        let g = Ristretto;
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for _ in 0..20 {
            let e = g.random_elem(&mut rng);
            let b = g.encode(&e);
            assert_eq!(b.len(), 32);
            assert_eq!(g.decode(&b).unwrap(), e);
        }
        assert!(g.decode(&[0xff; 32]).is_err());
        assert!(g.decode(&[0u8; 31]).is_err());
    }

    #[test]
    fn exponent_homomorphism() {
        let g = Ristretto;
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let a = g.random_scalar(&mut rng);
        let b = g.random_scalar(&mut rng);
        assert_eq!(g.op(&g.exp_gen(&a), &g.exp_gen(&b)), g.exp_gen(&g.scalar_add(&a, &b)));
        assert_eq!(g.exp(&g.generator(), &a), g.exp_gen(&a));
    }

    #[test]
    fn batched_power_fingerprints_match_plain_walk() {
        let g = Ristretto;
        let fast = g.generator_power_fingerprints(5000);
        let mut cur = g.generator();
        for f in fast {
            assert_eq!(f, g.fingerprint(&cur));
            cur = g.op(&cur, &g.generator());
        }
    }
}
