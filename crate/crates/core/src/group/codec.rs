use std::collections::HashMap;
use std::sync::OnceLock;

use super::PrimeGroup;
use crate::error::{Error, Result};

/// Default number of encodable values.
pub const DEFAULT_DICTIONARY_BOUND: u64 = 1 << 20;

/// Invertible map from small integers into the group: `x ↦ g^(x+1)`.
///
/// The offset keeps the identity (⊥) out of the image. Decoding uses a lazily
/// built baby-step table over the whole dictionary.
#[derive(Debug)]
pub struct ElementCodec<G: PrimeGroup> {
    group: G,
    bound: u64,
    table: OnceLock<HashMap<u64, u32>>,
}

impl<G: PrimeGroup> ElementCodec<G> {
    pub fn new(group: G, bound: u64) -> Self {
        assert!(bound >= 1 && bound <= u32::MAX as u64);
        Self { group, bound, table: OnceLock::new() }
    }

    pub fn with_default_bound(group: G) -> Self {
        Self::new(group, DEFAULT_DICTIONARY_BOUND)
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn encode(&self, x: u64) -> Result<G::Elem> {
        if x >= self.bound {
            return Err(Error::OutOfDictionary);
        }
        Ok(self.group.exp_gen(&self.group.scalar_from_u64(x + 1)))
    }

    pub fn decode(&self, e: &G::Elem) -> Result<u64> {
        let table = self.table.get_or_init(|| {
            let fps = self.group.generator_power_fingerprints(self.bound as usize);
            let mut t = HashMap::with_capacity(fps.len());
            for (i, fp) in fps.into_iter().enumerate() {
                // A fingerprint clash keeps the smaller exponent; the
                // verification below then rejects the other one, which is
                // astronomically unlikely at this table size.
                t.entry(fp).or_insert(i as u32);
            }
            t
        });
        let x = *table.get(&self.group.fingerprint(e)).ok_or(Error::OutOfDictionary)? as u64;
        if self.encode(x)? == *e {
            Ok(x)
        } else {
            Err(Error::OutOfDictionary)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{ModpGroup, Ristretto};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn zero_maps_to_generator() {
        let g = ModpGroup::standard();
        let c = ElementCodec::new(g.clone(), 1 << 10);
        assert_eq!(c.encode(0).unwrap(), g.generator());
        assert_eq!(c.decode(&g.generator()).unwrap(), 0);
    }

    #[test]
    fn exhaustive_round_trip_below_2_pow_10() {
        let g = ModpGroup::standard();
        let c = ElementCodec::with_default_bound(g);
        for x in 0..1024 {
            assert_eq!(c.decode(&c.encode(x).unwrap()).unwrap(), x);
        }
        assert!(matches!(c.encode(1 << 20), Err(Error::OutOfDictionary)));
    }

    #[test]
    fn random_elements_miss_the_dictionary() {
        let g = ModpGroup::standard();
        let c = ElementCodec::with_default_bound(g.clone());
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let misses = (0..100).filter(|_| c.decode(&g.random_elem(&mut rng)).is_err()).count();
        // Hit probability is 2^20 / q ≈ 2^-11 per sample.
        assert!(misses >= 98, "misses = {misses}");
        assert!(c.decode(&g.identity()).is_err());
    }

    #[test]
    fn production_group_round_trip() {
        let c = ElementCodec::new(Ristretto, 1 << 12);
        for x in [0u64, 1, 2, 100, 4095] {
            assert_eq!(c.decode(&c.encode(x).unwrap()).unwrap(), x);
        }
    }
}
