//! Hashing to bins: stash-less 3-way Cuckoo hashing for receivers and
//! simple hashing for senders, plus protocol parameter derivation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{bytes_for_bits, ceil_log2, derive_seed, hash_parts, prg};

pub const NUM_HASHES: u8 = 3;

/// Public hashing parameters shared by all parties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashParams {
    pub seed: [u8; 16],
    pub num_bins: usize,
    pub element_bits: u32,
}

impl HashParams {
    pub fn new(seed: [u8; 16], num_bins: usize, element_bits: u32) -> Self {
        assert!(num_bins > 0);
        Self { seed, num_bins, element_bits }
    }

    /// `h_index(x)` for `index ∈ {1, 2, 3}`.
    pub fn bin(&self, index: u8, x: u64) -> usize {
        debug_assert!((1..=NUM_HASHES).contains(&index));
        let d = hash_parts(b"bin-hash", &[&self.seed, &[index], &x.to_le_bytes()]);
        let v = u128::from_le_bytes(d[..16].try_into().unwrap());
        (v % self.num_bins as u128) as usize
    }

    pub fn bins(&self, x: u64) -> [usize; 3] {
        [self.bin(1, x), self.bin(2, x), self.bin(3, x)]
    }
}

/// Element placed in a bin together with the index of the hash function
/// that placed it there.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tagged {
    pub elem: u64,
    pub tag: u8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CuckooTable {
    pub bins: Vec<Option<Tagged>>,
}

impl CuckooTable {
    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn occupied(&self) -> usize {
        self.bins.iter().filter(|b| b.is_some()).count()
    }

    /// Checks `h_tag(x) = b` for every occupied bin.
    pub fn verify(&self, params: &HashParams) -> bool {
        self.bins.iter().enumerate().all(|(b, slot)| match slot {
            Some(t) => params.bin(t.tag, t.elem) == b,
            None => true,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimpleTable {
    pub bins: Vec<Vec<Tagged>>,
}

impl SimpleTable {
    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn total_entries(&self) -> usize {
        self.bins.iter().map(Vec::len).sum()
    }
}

/// Relocations one insertion may trigger before Cuckoo hashing gives up.
pub fn max_evictions(n: usize) -> usize {
    128 * ceil_log2(n as u64 + 2) as usize
}

/// Places every element in one of its three candidate bins.
///
/// Evicted elements move to one of their other two bins, chosen by a
/// stream derived from the public seed so the table is a function of
/// (seed, set) only.
pub fn cuckoo_insert(params: &HashParams, set: &[u64]) -> Result<CuckooTable> {
    let mut bins: Vec<Option<Tagged>> = vec![None; params.num_bins];
    let budget = max_evictions(set.len());
    let mut walk = prg(derive_seed(&params.seed, b"cuckoo-walk"));
    for &x in set {
        let mut evictions = 0usize;
        let candidates = params.bins(x);
        // Prefer a free candidate bin.
        if let Some(i) = (0..3).find(|&i| bins[candidates[i]].is_none()) {
            bins[candidates[i]] = Some(Tagged { elem: x, tag: i as u8 + 1 });
            continue;
        }
        let mut cur = Tagged { elem: x, tag: walk.gen_range(1..=NUM_HASHES) };
        loop {
            let b = params.bin(cur.tag, cur.elem);
            match bins[b].replace(cur) {
                None => break,
                Some(evicted) => {
                    evictions += 1;
                    if evictions > budget {
                        return Err(Error::CuckooFailure { evictions });
                    }
                    let cands = params.bins(evicted.elem);
                    if let Some(i) = (0..3).find(|&i| bins[cands[i]].is_none()) {
                        bins[cands[i]] = Some(Tagged { elem: evicted.elem, tag: i as u8 + 1 });
                        break;
                    }
                    let shift = walk.gen_range(1..NUM_HASHES);
                    let tag = (evicted.tag - 1 + shift) % NUM_HASHES + 1;
                    cur = Tagged { elem: evicted.elem, tag };
                }
            }
        }
    }
    Ok(CuckooTable { bins })
}

/// Places every element in all three candidate bins, tagged with the hash
/// index; coinciding hashes yield two distinct tagged entries.
pub fn simple_insert(params: &HashParams, set: &[u64]) -> SimpleTable {
    let mut bins: Vec<Vec<Tagged>> = vec![Vec::new(); params.num_bins];
    for &x in set {
        for tag in 1..=NUM_HASHES {
            bins[params.bin(tag, x)].push(Tagged { elem: x, tag });
        }
    }
    SimpleTable { bins }
}

/// Sizes shared by every party of one session.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub m: usize,
    pub n: usize,
    pub l: u32,
    pub sigma: u32,
    pub lambda: u32,
    /// OPPRF output bits, rounded up to whole bytes.
    pub gamma: u32,
    /// Payload check-hash bits, rounded up to whole bytes.
    pub kappa: u32,
    pub num_bins: usize,
}

impl ProtocolParams {
    pub fn gamma_bytes(&self) -> usize {
        bytes_for_bits(self.gamma as usize)
    }

    pub fn kappa_bytes(&self) -> usize {
        bytes_for_bits(self.kappa as usize)
    }

    pub fn elem_bytes(&self) -> usize {
        bytes_for_bits(self.l as usize)
    }

    /// Width of an `x ‖ Hash(x)` payload.
    pub fn payload_bytes(&self) -> usize {
        self.elem_bytes() + self.kappa_bytes()
    }
}

/// Bins for `n` elements: `max(⌈1.27n⌉, n + 3)`.
pub fn num_bins_for(n: usize) -> usize {
    (127 * n).div_ceil(100).max(n + 3)
}

fn round_up_to_byte(bits: u32) -> u32 {
    bits.div_ceil(8) * 8
}

pub fn derive_params(m: usize, n: usize, l: u32, sigma: u32, lambda: u32) -> Result<ProtocolParams> {
    if m < 3 {
        return Err(Error::InvalidConfig(format!("need at least 3 parties, got {m}")));
    }
    if n < 1 {
        return Err(Error::InvalidConfig("set size must be positive".into()));
    }
    if !(1..=64).contains(&l) {
        return Err(Error::InvalidConfig(format!("element bits {l} outside 1..=64")));
    }
    let num_bins = num_bins_for(n);
    let pairs = (m * m - m) as u64 / 2;
    let gamma = sigma + ceil_log2(pairs) + ceil_log2(num_bins as u64);
    let kappa = sigma + ceil_log2(m as u64 - 1) + ceil_log2(n as u64);
    Ok(ProtocolParams {
        m,
        n,
        l,
        sigma,
        lambda,
        gamma: round_up_to_byte(gamma),
        kappa: round_up_to_byte(kappa),
        num_bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{seq::SliceRandom, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use std::collections::HashSet;

    fn random_set(rng: &mut ChaCha20Rng, n: usize) -> Vec<u64> {
        let mut s = HashSet::new();
        while s.len() < n {
            s.insert(rng.gen::<u64>());
        }
        let mut v: Vec<_> = s.into_iter().collect();
        v.sort_unstable();
        v.shuffle(rng);
        v
    }

    #[test]
    fn params_examples() {
        let p = derive_params(3, 1 << 20, 64, 40, 128).unwrap();
        assert_eq!(p.num_bins, 1_331_692);
        // 40 + ⌈log₂ 3⌉ + ⌈log₂ B⌉ = 40 + 2 + 21 = 63 → 64.
        assert_eq!(p.gamma, 64);
        assert_eq!(num_bins_for(4), 7);
        let p = derive_params(9, 1 << 10, 64, 40, 128).unwrap();
        assert_eq!(p.num_bins, 1301);
        // 40 + ⌈log₂ 36⌉ + ⌈log₂ 1301⌉ = 40 + 6 + 11 = 57 → 64.
        assert_eq!(p.gamma, 64);
        // 40 + 3 + 10 = 53 → 56.
        assert_eq!(p.kappa, 56);
        assert!(matches!(derive_params(2, 8, 64, 40, 128), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn empty_set_gives_empty_tables() {
        let hp = HashParams::new([1; 16], 7, 64);
        let c = cuckoo_insert(&hp, &[]).unwrap();
        assert_eq!(c.occupied(), 0);
        assert_eq!(simple_insert(&hp, &[]).total_entries(), 0);
    }

    #[test]
    fn coinciding_hashes_produce_separate_tagged_entries() {
        // Find an element whose first two hashes collide in a 4-bin table.
        let hp = HashParams::new([3; 16], 4, 64);
        let x = (0u64..).find(|&x| hp.bin(1, x) == hp.bin(2, x)).unwrap();
        let t = simple_insert(&hp, &[x]);
        let b = hp.bin(1, x);
        assert!(t.bins[b].contains(&Tagged { elem: x, tag: 1 }));
        assert!(t.bins[b].contains(&Tagged { elem: x, tag: 2 }));
        assert_eq!(t.total_entries(), 3);
    }

    #[test]
    fn cuckoo_tables_verify_and_bridge_to_simple_tables() {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        for trial in 0..50 {
            let n = 1 + trial * 7;
            let hp = HashParams::new(rng.gen(), num_bins_for(n), 64);
            let set = random_set(&mut rng, n);
            let c = cuckoo_insert(&hp, &set).unwrap();
            assert!(c.verify(&hp));
            assert_eq!(c.occupied(), n);
            let mut superset = set.clone();
            superset.extend(random_set(&mut rng, 5));
            let s = simple_insert(&hp, &superset);
            assert_eq!(s.total_entries(), 3 * superset.len());
            for (b, slot) in c.bins.iter().enumerate() {
                if let Some(t) = slot {
                    assert!(s.bins[b].contains(t));
                }
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let mut rng = ChaCha20Rng::seed_from_u64(18);
        let set = random_set(&mut rng, 200);
        let hp = HashParams::new([9; 16], num_bins_for(200), 64);
        assert_eq!(cuckoo_insert(&hp, &set).unwrap(), cuckoo_insert(&hp, &set).unwrap());
        assert_eq!(simple_insert(&hp, &set), simple_insert(&hp, &set));
    }

    #[test]
    fn tiny_table_overflow_reports_failure() {
        // Four elements cannot fit in three bins.
        let hp = HashParams::new([0; 16], 3, 64);
        let r = cuckoo_insert(&hp, &[1, 2, 3, 4]);
        assert!(matches!(r, Err(Error::CuckooFailure { .. })));
    }
}
