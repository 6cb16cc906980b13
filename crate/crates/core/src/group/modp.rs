use rand::{CryptoRng, Rng, RngCore};

use super::PrimeGroup;
use crate::error::{Error, Result};
use crate::util::hash_parts;

/// Order-`q` subgroup of quadratic residues modulo the safe prime `p = 2q + 1`.
///
/// Elements are residues in `[1, p)`, encoded as 8 little-endian bytes. The
/// standard instance uses `q = 2147483543`, so `p < 2³²` and products fit
/// in a `u64`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModpGroup {
    q: u64,
    p: u64,
    g: u64,
}

/// Largest `q < 2³¹` with both `q` and `2q + 1` prime.
pub const STANDARD_Q: u64 = 2_147_483_543;

impl ModpGroup {
    pub fn standard() -> Self {
        Self::new(STANDARD_Q).expect("standard parameters are valid")
    }

    /// Builds the group for a prime `q` whose `2q + 1` is also prime.
    pub fn new(q: u64) -> Result<Self> {
        if !(3..1 << 31).contains(&q) {
            return Err(Error::InvalidConfig(format!("subgroup order {q} out of range")));
        }
        let p = 2 * q + 1;
        if !is_prime(q) || !is_prime(p) {
            return Err(Error::InvalidConfig(format!("{q} is not a Sophie Germain prime")));
        }
        // 4 = 2² is a non-trivial quadratic residue, hence of order q.
        Ok(Self { q, p, g: 4 })
    }

    pub fn order(&self) -> u64 {
        self.q
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    fn mul(&self, a: u64, b: u64) -> u64 {
        a * b % self.p
    }

    fn pow(&self, mut base: u64, mut e: u64) -> u64 {
        let mut acc = 1u64;
        base %= self.p;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    pub fn contains(&self, v: u64) -> bool {
        v != 0 && v < self.p && self.pow(v, self.q) == 1
    }
}

impl PrimeGroup for ModpGroup {
    type Elem = u64;
    type Scalar = u64;

    fn name(&self) -> &'static str {
        "modp-test"
    }

    fn elem_len(&self) -> usize {
        8
    }

    fn identity(&self) -> u64 {
        1
    }

    fn generator(&self) -> u64 {
        self.g
    }

    fn op(&self, a: &u64, b: &u64) -> u64 {
        self.mul(*a, *b)
    }

    fn invert(&self, a: &u64) -> u64 {
        // a^q = 1, so a^(q-1) = a^-1.
        self.pow(*a, self.q - 1)
    }

    fn exp(&self, a: &u64, k: &u64) -> u64 {
        self.pow(*a, *k)
    }

    fn scalar_from_u64(&self, x: u64) -> u64 {
        x % self.q
    }

    fn random_scalar<R: RngCore + CryptoRng>(&self, rng: &mut R) -> u64 {
        rng.gen_range(0..self.q)
    }

    fn scalar_to_bytes(&self, k: &u64) -> Vec<u8> {
        k.to_le_bytes().to_vec()
    }

    fn scalar_from_bytes(&self, bytes: &[u8]) -> Result<u64> {
        let b: [u8; 8] = bytes.try_into().map_err(|_| Error::MalformedElement)?;
        let k = u64::from_le_bytes(b);
        if k >= self.q {
            return Err(Error::MalformedElement);
        }
        Ok(k)
    }

    fn scalar_add(&self, a: &u64, b: &u64) -> u64 {
        (a + b) % self.q
    }

    fn scalar_mul(&self, a: &u64, b: &u64) -> u64 {
        ((*a as u128 * *b as u128) % self.q as u128) as u64
    }

    fn scalar_neg(&self, a: &u64) -> u64 {
        (self.q - a % self.q) % self.q
    }

    fn scalar_invert(&self, a: &u64) -> Option<u64> {
        let a = a % self.q;
        if a == 0 {
            return None;
        }
        // Fermat: a^(q-2) mod q.
        let (mut base, mut e, mut acc) = (a as u128, (self.q - 2) as u128, 1u128);
        let q = self.q as u128;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base % q;
            }
            base = base * base % q;
            e >>= 1;
        }
        Some(acc as u64)
    }

    fn encode(&self, e: &u64) -> Vec<u8> {
        e.to_le_bytes().to_vec()
    }

    fn decode(&self, bytes: &[u8]) -> Result<u64> {
        let arr: [u8; 8] = bytes.try_into().map_err(|_| Error::MalformedElement)?;
        let v = u64::from_le_bytes(arr);
        if self.contains(v) {
            Ok(v)
        } else {
            Err(Error::MalformedElement)
        }
    }

    fn hash_to_group(&self, input: &[u8]) -> u64 {
        // Squaring maps Z_p^* onto the quadratic residues; retry on ±1 and 0.
        let mut ctr = 0u32;
        loop {
            let d = hash_parts(b"modp-h2g", &[&ctr.to_le_bytes(), input]);
            let h = u64::from_le_bytes(d[..8].try_into().unwrap()) % self.p;
            let e = self.mul(h, h);
            if e > 1 {
                return e;
            }
            ctr += 1;
        }
    }
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &b in &BASES {
        if n % b == 0 {
            return n == b;
        }
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        b %= n;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        acc
    };
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'outer: for &a in &BASES {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn naive_pow(g: &ModpGroup, base: u64, e: u64) -> u64 {
        (0..e).fold(1u64, |acc, _| acc * base % g.modulus())
    }

    #[test]
    fn small_group_exponentiation_matches_repeated_multiplication() {
        let g = ModpGroup::new(1019).unwrap();
        assert_eq!(g.modulus(), 2039);
        let pk = g.exp_gen(&7);
        assert_eq!(pk, naive_pow(&g, g.generator(), 7));
        for e in 0..1019 {
            assert_eq!(g.exp_gen(&e), naive_pow(&g, 4, e));
        }
    }

    #[test]
    fn generator_has_prime_order() {
        for g in [ModpGroup::new(1019).unwrap(), ModpGroup::standard()] {
            assert_ne!(g.generator(), 1);
            assert_eq!(g.exp_gen(&g.order()), 1);
        }
    }

    #[test]
    fn rejects_non_safe_primes() {
        assert!(ModpGroup::new(1021).is_err()); // 2043 = 3^2 * 227
        assert!(ModpGroup::new(1000).is_err());
    }

    #[test]
    fn decode_rejects_non_members() {
        let g = ModpGroup::standard();
        assert!(g.decode(&0u64.to_le_bytes()).is_err());
        assert!(g.decode(&g.modulus().to_le_bytes()).is_err());
        // p - 1 = -1 is a non-residue for p ≡ 3 mod 4.
        assert!(g.decode(&(g.modulus() - 1).to_le_bytes()).is_err());
        assert!(g.decode(&[1, 2, 3]).is_err());
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..100 {
            let e = g.random_elem(&mut rng);
            assert_eq!(g.decode(&g.encode(&e)).unwrap(), e);
        }
    }

    #[test]
    fn scalar_inverse() {
        let g = ModpGroup::standard();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for _ in 0..100 {
            let a = g.random_nonzero_scalar(&mut rng);
            let inv = g.scalar_invert(&a).unwrap();
            assert_eq!(g.scalar_mul(&a, &inv), 1);
        }
        assert!(g.scalar_invert(&0).is_none());
    }

    #[test]
    fn miller_rabin_agrees_with_trial_division() {
        let trial = |n: u64| n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0);
        for n in 0..5000 {
            assert_eq!(is_prime(n), trial(n), "n = {n}");
        }
        assert!(is_prime(STANDARD_Q) && is_prime(2 * STANDARD_Q + 1));
    }
}
