//! Rayon inner loops against the forced sequential path.
//!
//! Every benchmark runs twice, once per setting of `par::set_sequential`.
//! Build with `--no-default-features` to measure the rayon-free binary.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use mpsu_core::group::GroupKind;
use mpsu_core::okvs::okvs_encode;
use mpsu_core::par;
use mpsu_core::protocol::{run_session, ProtocolKind, SessionConfig};
use mpsu_core::setio::gen_sets;

const MODES: [(&str, bool); 2] = [("parallel", false), ("sequential", true)];

fn sessions(c: &mut Criterion) {
    let mut g = c.benchmark_group("session");
    g.sample_size(10);
    for (proto, n, group) in [
        (ProtocolKind::Sk, 256, GroupKind::Test),
        (ProtocolKind::Pk, 64, GroupKind::Production),
        (ProtocolKind::Pid, 64, GroupKind::Production),
    ] {
        let bits = if proto == ProtocolKind::Pk { 20 } else { 64 };
        let inputs = gen_sets(3, n, 0.5, bits, 1).unwrap();
        let mut cfg = SessionConfig::new(proto, 3, n).with_seed(7);
        cfg.group = group;
        for (mode, seq) in MODES {
            par::set_sequential(seq);
            g.bench_with_input(BenchmarkId::new(format!("{proto:?}-n{n}"), mode), &cfg, |b, cfg| {
                b.iter(|| run_session(cfg, &inputs).unwrap())
            });
        }
    }
    par::set_sequential(false);
    g.finish();
}

fn okvs(c: &mut Criterion) {
    let mut g = c.benchmark_group("okvs");
    g.sample_size(10);
    let n = 1 << 14;
    let pairs: Vec<(Vec<u8>, Vec<u8>)> =
        (0..n as u64).map(|i| (i.to_le_bytes().to_vec(), (i * 31).to_le_bytes().to_vec())).collect();
    let keys: Vec<Vec<u8>> = pairs.iter().map(|p| p.0.clone()).collect();
    let table = okvs_encode(&pairs, 8, &mut ChaCha12Rng::seed_from_u64(3)).unwrap();
    for (mode, seq) in MODES {
        par::set_sequential(seq);
        g.bench_function(BenchmarkId::new("decode-16k", mode), |b| b.iter(|| table.decode_many(&keys)));
    }
    par::set_sequential(false);
    g.finish();
}

criterion_group!(benches, sessions, okvs);
criterion_main!(benches);
