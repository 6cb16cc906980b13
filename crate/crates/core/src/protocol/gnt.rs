//! Collusion leakage of a cOPRF-based union protocol, as a runnable demo.
//!
//! Three parties: `P1` holds `{x1}`, `P2` holds `X2` and PRF key `k2`, `P3`
//! holds `{x3}` with `x1 = x3`. `P1` learns `F_{k2}(x1)` from a plain OPRF
//! with `P2`; `P3` learns `w` from a conditional OPRF, which is `F_{k2}(x3)`
//! when `x3 ∉ X2` and random otherwise. Comparing the two values tells the
//! coalition whether `x3 ∈ X2`.

use rand::{CryptoRng, Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::group::PrimeGroup;
use crate::opprf::{finalize, oprf_eval};
use crate::util::random_bytes;

/// PRF output width in bytes.
pub const GNT_OUTPUT_BYTES: usize = 8;

/// `P1`'s OPRF with `P2`, run through the blinding steps of both sides.
fn blinded_oprf<G: PrimeGroup, R: RngCore + CryptoRng>(group: &G, k2: &G::Scalar, x: u64, rng: &mut R) -> Vec<u8> {
    let input = x.to_le_bytes();
    let r = group.random_nonzero_scalar(rng);
    let query = group.exp(&group.hash_to_group(&input), &r);
    let answer = group.exp(&query, k2);
    let inv = group.scalar_invert(&r).expect("blind is nonzero");
    finalize(group, &input, &group.exp(&answer, &inv), GNT_OUTPUT_BYTES)
}

/// Ideal conditional OPRF as seen by `P3`.
fn conditional_oprf<G: PrimeGroup, R: RngCore + CryptoRng>(group: &G, k2: &G::Scalar, x2: &[u64], x3: u64, rng: &mut R) -> Vec<u8> {
    if x2.contains(&x3) {
        random_bytes(rng, GNT_OUTPUT_BYTES)
    } else {
        oprf_eval(group, k2, &x3.to_le_bytes(), GNT_OUTPUT_BYTES)
    }
}

/// The coalition's guess for `x3 ∈ X2`. Requires `x1 = x3`.
pub fn gnt_leakage_demo<G: PrimeGroup, R: RngCore + CryptoRng>(group: &G, x1: u64, x2: &[u64], x3: u64, rng: &mut R) -> bool {
    assert_eq!(x1, x3, "the attack needs x1 = x3");
    let k2 = group.random_nonzero_scalar(rng);
    let f = blinded_oprf(group, &k2, x1, rng);
    let w = conditional_oprf(group, &k2, x2, x3, rng);
    f != w
}

#[derive(Clone, Debug, Serialize)]
pub struct GntTrial {
    pub member: bool,
    pub inferred: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GntReport {
    pub trials: usize,
    pub correct: usize,
    pub members: usize,
    pub outcomes: Vec<GntTrial>,
}

/// Random scenarios: `X2` has 16 elements and `x3` is put into it with
/// probability 1/2.
pub fn run_demo<G: PrimeGroup>(group: &G, trials: usize, seed: u64) -> GntReport {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut outcomes = Vec::with_capacity(trials);
    for _ in 0..trials {
        let mut x2: Vec<u64> = (0..16).map(|_| rng.gen()).collect();
        let x3: u64 = rng.gen();
        let member = rng.gen_bool(0.5);
        x2.retain(|&x| x != x3);
        if member {
            x2[0] = x3;
        }
        let inferred = gnt_leakage_demo(group, x3, &x2, x3, &mut rng);
        outcomes.push(GntTrial { member, inferred });
    }
    GntReport {
        trials,
        correct: outcomes.iter().filter(|t| t.member == t.inferred).count(),
        members: outcomes.iter().filter(|t| t.member).count(),
        outcomes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::ModpGroup;

    #[test]
    fn member_and_non_member_cases() {
        let g = ModpGroup::standard();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert!(gnt_leakage_demo(&g, 7, &[1, 7, 9], 7, &mut rng));
        assert!(!gnt_leakage_demo(&g, 7, &[1, 9], 7, &mut rng));
    }

    #[test]
    fn blinded_path_agrees_with_direct_prf() {
        let g = ModpGroup::standard();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let k = g.random_nonzero_scalar(&mut rng);
        assert_eq!(blinded_oprf(&g, &k, 42, &mut rng), oprf_eval(&g, &k, &42u64.to_le_bytes(), GNT_OUTPUT_BYTES));
    }
}
