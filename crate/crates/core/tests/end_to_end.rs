use std::collections::BTreeSet;

use mpsu_core::protocol::{run_session, ProtocolKind, SessionConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn sets(m: usize, n: usize, bits: u32, seed: u64) -> Vec<Vec<u64>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mask = if bits == 64 { u64::MAX } else { (1 << bits) - 1 };
    let pool: Vec<u64> = (0..n).map(|_| rng.gen::<u64>() & mask).collect();
    (0..m)
        .map(|_| {
            let mut s = BTreeSet::new();
            while s.len() < n {
                let x = if rng.gen_bool(0.5) { pool[rng.gen_range(0..n)] } else { rng.gen::<u64>() & mask };
                s.insert(x);
            }
            s.into_iter().collect()
        })
        .collect()
}

fn union(inputs: &[Vec<u64>]) -> Vec<u64> {
    inputs.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect()
}

#[test]
fn sk_small() {
    for m in 3..=4 {
        let cfg = SessionConfig::new(ProtocolKind::Sk, m, 16).with_seed(m as u64);
        let inputs = sets(m, 16, 64, 7);
        let r = run_session(&cfg, &inputs).unwrap();
        assert_eq!(r.union, union(&inputs));
    }
}

#[test]
fn pk_small() {
    for m in 3..=4 {
        let cfg = SessionConfig::new(ProtocolKind::Pk, m, 16).with_seed(m as u64);
        let inputs = sets(m, 16, 20, 8);
        let r = run_session(&cfg, &inputs).unwrap();
        assert_eq!(r.union, union(&inputs));
    }
}
