//! Multi-key rerandomizable ElGamal.
//!
//! Secret keys add and public keys multiply, so a ciphertext under
//! `pk₁·pk₂` becomes a ciphertext under `pk₂` after `partial_decrypt(sk₁, ·)`.
//! The group identity is the dummy plaintext ⊥.

use rand::{CryptoRng, RngCore};

use super::PrimeGroup;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeyPair<G: PrimeGroup> {
    pub sk: G::Scalar,
    pub pk: G::Elem,
}

impl<G: PrimeGroup> KeyPair<G> {
    /// Fresh key pair with a non-zero secret (a zero share would publish
    /// the identity as public key).
    pub fn generate<R: RngCore + CryptoRng>(group: &G, rng: &mut R) -> Self {
        let sk = group.random_nonzero_scalar(rng);
        Self::from_secret(group, sk)
    }

    pub fn from_secret(group: &G, sk: G::Scalar) -> Self {
        Self { sk, pk: group.exp_gen(&sk) }
    }
}

/// A group element interpreted as a message; the identity is ⊥.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Plaintext<G: PrimeGroup> {
    pub value: G::Elem,
}

impl<G: PrimeGroup> Plaintext<G> {
    pub fn bottom(group: &G) -> Self {
        Self { value: group.identity() }
    }

    pub fn new(value: G::Elem) -> Self {
        Self { value }
    }

    pub fn is_bottom(&self, group: &G) -> bool {
        group.is_identity(&self.value)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ciphertext<G: PrimeGroup> {
    pub c1: G::Elem,
    pub c2: G::Elem,
}

impl<G: PrimeGroup> Ciphertext<G> {
    pub fn encrypt<R: RngCore + CryptoRng>(group: &G, pk: &G::Elem, x: &G::Elem, rng: &mut R) -> Self {
        let r = group.random_scalar(rng);
        Self::encrypt_with(group, pk, x, &r)
    }

    /// Encryption with caller-supplied randomness `r`.
    pub fn encrypt_with(group: &G, pk: &G::Elem, x: &G::Elem, r: &G::Scalar) -> Self {
        Self { c1: group.exp_gen(r), c2: group.op(x, &group.exp(pk, r)) }
    }

    /// Strips the key share `sk` from the aggregate key: `(c1, c2·c1^{-sk})`.
    pub fn partial_decrypt(&self, group: &G, sk: &G::Scalar) -> Self {
        Self { c1: self.c1, c2: self.strip(group, sk) }
    }

    pub fn decrypt(&self, group: &G, sk: &G::Scalar) -> G::Elem {
        self.strip(group, sk)
    }

    fn strip(&self, group: &G, sk: &G::Scalar) -> G::Elem {
        group.op(&self.c2, &group.exp(&self.c1, &group.scalar_neg(sk)))
    }

    pub fn rerandomize<R: RngCore + CryptoRng>(&self, group: &G, pk: &G::Elem, rng: &mut R) -> Self {
        let r = group.random_scalar(rng);
        self.rerandomize_with(group, pk, &r)
    }

    pub fn rerandomize_with(&self, group: &G, pk: &G::Elem, r: &G::Scalar) -> Self {
        Self {
            c1: group.op(&self.c1, &group.exp_gen(r)),
            c2: group.op(&self.c2, &group.exp(pk, r)),
        }
    }

    /// Serialized length: two element encodings.
    pub fn byte_len(group: &G) -> usize {
        2 * group.elem_len()
    }

    pub fn to_bytes(&self, group: &G) -> Vec<u8> {
        let mut out = group.encode(&self.c1);
        out.extend(group.encode(&self.c2));
        out
    }

    pub fn from_bytes(group: &G, bytes: &[u8]) -> Result<Self> {
        let l = group.elem_len();
        if bytes.len() != 2 * l {
            return Err(Error::MalformedElement);
        }
        Ok(Self { c1: group.decode(&bytes[..l])?, c2: group.decode(&bytes[l..])? })
    }
}

/// Product of public keys.
pub fn aggregate_pk<'a, G: PrimeGroup>(group: &G, pks: impl IntoIterator<Item = &'a G::Elem>) -> G::Elem {
    pks.into_iter().fold(group.identity(), |acc, pk| group.op(&acc, pk))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{ModpGroup, Ristretto};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn zero_randomness_and_zero_share_edge_cases() {
        let g = ModpGroup::standard();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let kp = KeyPair::generate(&g, &mut rng);
        let x = g.exp_gen(&5);
        let ct = Ciphertext::encrypt_with(&g, &kp.pk, &x, &0);
        assert_eq!(ct, Ciphertext { c1: 1, c2: x });
        assert_eq!(ct.partial_decrypt(&g, &0), ct);
        assert_eq!(ct.rerandomize_with(&g, &kp.pk, &0), ct);
        let zero = KeyPair::from_secret(&g, 0);
        assert!(g.is_identity(&zero.pk));
    }

    #[test]
    fn bottom_round_trips() {
        let g = ModpGroup::standard();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let kp = KeyPair::generate(&g, &mut rng);
        let ct = Ciphertext::encrypt(&g, &kp.pk, &g.identity(), &mut rng);
        let pt = Plaintext::<ModpGroup>::new(ct.decrypt(&g, &kp.sk));
        assert!(pt.is_bottom(&g));
    }

    #[test]
    fn small_group_decrypt_via_dlog_table() {
        let g = ModpGroup::new(1019).unwrap();
        let dlog: std::collections::HashMap<u64, u64> = (0..1019).map(|e| (g.exp_gen(&e), e)).collect();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let pk = g.exp_gen(&3);
        let ct = Ciphertext::encrypt(&g, &pk, &g.exp_gen(&5), &mut rng);
        assert_eq!(dlog[&ct.decrypt(&g, &3)], 5);
    }

    #[test]
    fn chained_partial_decryption_production_group() {
        let g = Ristretto;
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let keys: Vec<_> = (0..4).map(|_| KeyPair::generate(&g, &mut rng)).collect();
        let pk = aggregate_pk(&g, keys.iter().map(|k| &k.pk));
        let x = g.random_elem(&mut rng);
        let mut ct = Ciphertext::encrypt(&g, &pk, &x, &mut rng);
        for k in &keys[1..] {
            ct = ct.partial_decrypt(&g, &k.sk);
        }
        assert_eq!(ct.decrypt(&g, &keys[0].sk), x);
        let bytes = ct.to_bytes(&g);
        assert_eq!(bytes.len(), Ciphertext::<Ristretto>::byte_len(&g));
        assert_eq!(Ciphertext::from_bytes(&g, &bytes).unwrap(), ct);
    }
}
