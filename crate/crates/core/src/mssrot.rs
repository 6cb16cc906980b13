//! Multi-party secret-shared random OT.
//!
//! One instance is defined by its party set, two choosers holding shares
//! `b₀`, `b₁` of a choice bit, and a set `J` of parties holding shares
//! `Δ_k` of the payload. The outputs of all parties in the set XOR to
//! `(b₀ ⊕ b₁)·⊕_k Δ_k`. Every (chooser, holder) pair runs one
//! derandomized ROT; parties outside the involved set only receive zero
//! sharings. All messages of a batch go out in a single flight: the
//! holder's correction `pad(r₀) ⊕ pad(r₁) ⊕ Δ` does not depend on the
//! chooser's derandomization bit.

use std::collections::BTreeMap;

use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::bits::BitVec;
use crate::error::{Error, Result};
use crate::net::{Channel, Network, Tag};
use crate::ot::{pad, CorrelationStore};
use crate::util::{Block, ByteRows};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MssRotConfig {
    pub parties: Vec<usize>,
    pub ch0: usize,
    pub ch1: usize,
    pub j: Vec<usize>,
}

impl MssRotConfig {
    pub fn validate(&self) -> Result<()> {
        let inside = |p: &usize| self.parties.contains(p);
        if self.ch0 == self.ch1 || !inside(&self.ch0) || !inside(&self.ch1) || !self.j.iter().all(inside) {
            return Err(Error::InvalidConfig(format!("inconsistent mss-ROT configuration {self:?}")));
        }
        Ok(())
    }

    /// Choosers and payload holders.
    pub fn involved(&self) -> Vec<usize> {
        let mut v = self.j.clone();
        v.push(self.ch0);
        v.push(self.ch1);
        v.sort_unstable();
        v.dedup();
        v
    }

    fn chooser(&self, which: u8) -> usize {
        if which == 0 {
            self.ch0
        } else {
            self.ch1
        }
    }
}

/// This party's inputs to one instance.
#[derive(Clone, Debug, Default)]
pub struct MssRotInput {
    pub b0: Option<BitVec>,
    pub b1: Option<BitVec>,
    pub delta: Option<ByteRows>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Sub {
    Rot { chooser: usize, holder: usize, which: u8 },
    Pad { from: usize, to: usize },
}

/// Every pairwise sub-session of a batch in canonical order.
fn sub_sessions(configs: &[MssRotConfig]) -> Vec<(usize, Sub)> {
    let mut out = Vec::new();
    for (i, c) in configs.iter().enumerate() {
        let mut j = c.j.clone();
        j.sort_unstable();
        for which in 0..2u8 {
            let chooser = c.chooser(which);
            for &holder in j.iter().filter(|&&k| k != chooser) {
                out.push((i, Sub::Rot { chooser, holder, which }));
            }
        }
        let involved = c.involved();
        let mut rest: Vec<usize> = c.parties.iter().copied().filter(|p| !involved.contains(p)).collect();
        rest.sort_unstable();
        for &from in &involved {
            for &to in &rest {
                out.push((i, Sub::Pad { from, to }));
            }
        }
    }
    out
}

/// ROTs a batch consumes, keyed by `(sender, receiver)`.
pub fn rot_counts(configs: &[MssRotConfig], batch: usize) -> BTreeMap<(usize, usize), usize> {
    let mut m = BTreeMap::new();
    for (_, s) in sub_sessions(configs) {
        if let Sub::Rot { chooser, holder, .. } = s {
            *m.entry((holder, chooser)).or_insert(0) += batch;
        }
    }
    m
}

enum Pending {
    Choose { inst: usize, bits: BitVec, keys: Vec<Block> },
    Hold { inst: usize, pairs: Vec<(Block, Block)> },
    PadOut { inst: usize, pad: ByteRows },
    PadIn { inst: usize },
}

struct Step {
    inst: usize,
    sub: Sub,
}

fn choice_bits(input: &MssRotInput, which: u8) -> Result<&BitVec> {
    let b = if which == 0 { &input.b0 } else { &input.b1 };
    b.as_ref().ok_or_else(|| Error::InvalidConfig("chooser without choice shares".into()))
}

fn run_peer(
    ch: &mut Channel,
    store: &mut CorrelationStore,
    steps: &[Step],
    inputs: &[MssRotInput],
    batch: usize,
    width: usize,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<(usize, ByteRows)>> {
    let me = ch.me();
    let mut pending = Vec::with_capacity(steps.len());
    for st in steps {
        let input = &inputs[st.inst];
        match st.sub {
            Sub::Rot { chooser, which, .. } if chooser == me => {
                let bits = choice_bits(input, which)?.clone();
                if bits.len() != batch {
                    return Err(Error::DimensionMismatch);
                }
                let rots = store.take_recv(batch)?;
                let mut d = BitVec::zeros(batch);
                let mut keys = Vec::with_capacity(batch);
                for (i, r) in rots.iter_mut().enumerate() {
                    let (bit, k) = r.derandomize(bits.get(i))?;
                    d.set(i, bit);
                    keys.push(k);
                }
                ch.send(Tag::OtDerand, d.to_bytes())?;
                pending.push(Pending::Choose { inst: st.inst, bits, keys });
            }
            Sub::Rot { .. } => {
                let delta = input.delta.as_ref().ok_or_else(|| Error::InvalidConfig("holder without payload share".into()))?;
                if delta.len() != batch || delta.width() != width {
                    return Err(Error::DimensionMismatch);
                }
                let rots = store.take_send(batch)?;
                let mut pairs = Vec::with_capacity(batch);
                for r in rots.iter_mut() {
                    r.consume()?;
                    pairs.push((r.r0(), r.r1()));
                }
                let mut corr = delta.clone();
                crate::par::chunks_mut(corr.as_flat_mut(), width, |i, row| {
                    crate::util::xor_in_place(row, &pad(pairs[i].0, width));
                    crate::util::xor_in_place(row, &pad(pairs[i].1, width));
                });
                ch.send(Tag::MssrotDelta, corr.into_flat())?;
                pending.push(Pending::Hold { inst: st.inst, pairs });
            }
            Sub::Pad { from, .. } if from == me => {
                let p = ByteRows::random(rng, batch, width);
                ch.send(Tag::MssrotPad, p.as_flat().to_vec())?;
                pending.push(Pending::PadOut { inst: st.inst, pad: p });
            }
            Sub::Pad { .. } => pending.push(Pending::PadIn { inst: st.inst }),
        }
    }
    let mut out = Vec::with_capacity(pending.len());
    for p in pending {
        match p {
            Pending::Choose { inst, bits, keys } => {
                let corr = ch.recv(Tag::MssrotDelta)?;
                if corr.len() != batch * width {
                    return Err(Error::malformed("mss-ROT correction size"));
                }
                let mut share = ByteRows::zeros(batch, width);
                crate::par::chunks_mut(share.as_flat_mut(), width, |i, row| {
                    row.copy_from_slice(&pad(keys[i], width));
                    if bits.get(i) {
                        crate::util::xor_in_place(row, &corr[i * width..(i + 1) * width]);
                    }
                });
                out.push((inst, share));
            }
            Pending::Hold { inst, pairs } => {
                let d = BitVec::from_bytes(&ch.recv(Tag::OtDerand)?, batch)?;
                let mut share = ByteRows::zeros(batch, width);
                crate::par::chunks_mut(share.as_flat_mut(), width, |i, row| {
                    let k = if d.get(i) { pairs[i].1 } else { pairs[i].0 };
                    row.copy_from_slice(&pad(k, width));
                });
                out.push((inst, share));
            }
            Pending::PadOut { inst, pad } => out.push((inst, pad)),
            Pending::PadIn { inst } => {
                let p = ch.recv(Tag::MssrotPad)?;
                if p.len() != batch * width {
                    return Err(Error::malformed("mss-ROT pad size"));
                }
                out.push((inst, ByteRows::from_flat(width, p)));
            }
        }
    }
    Ok(out)
}

/// Runs a batch of instances, each over `batch` parallel slots of `width`
/// bytes. `stores[peer]` holds the correlations with `peer`. Returns this
/// party's output share per instance (`None` outside the party set).
pub fn mss_rot<R: RngCore + CryptoRng>(
    net: &mut Network,
    stores: &mut [Option<CorrelationStore>],
    configs: &[MssRotConfig],
    inputs: &[MssRotInput],
    batch: usize,
    width: usize,
    rng: &mut R,
) -> Result<Vec<Option<ByteRows>>> {
    assert_eq!(configs.len(), inputs.len());
    let me = net.me();
    for c in configs {
        c.validate()?;
    }
    let mut outs: Vec<Option<ByteRows>> = configs
        .iter()
        .map(|c| c.parties.contains(&me).then(|| ByteRows::zeros(batch, width)))
        .collect();
    for (i, c) in configs.iter().enumerate() {
        let Some(out) = outs[i].as_mut() else { continue };
        if !c.j.contains(&me) {
            continue;
        }
        let delta = inputs[i].delta.as_ref().ok_or_else(|| Error::InvalidConfig("holder without payload share".into()))?;
        for which in 0..2u8 {
            if c.chooser(which) == me {
                let bits = choice_bits(&inputs[i], which)?;
                for b in 0..batch {
                    if bits.get(b) {
                        crate::util::xor_in_place(out.row_mut(b), delta.row(b));
                    }
                }
            }
        }
    }

    let mut per_peer: BTreeMap<usize, Vec<Step>> = BTreeMap::new();
    for (inst, sub) in sub_sessions(configs) {
        let (a, b) = match sub {
            Sub::Rot { chooser, holder, .. } => (chooser, holder),
            Sub::Pad { from, to } => (from, to),
        };
        if a == me || b == me {
            per_peer.entry(if a == me { b } else { a }).or_default().push(Step { inst, sub });
        }
    }
    let mut work = Vec::new();
    let mut store_refs: Vec<Option<&mut CorrelationStore>> = stores.iter_mut().map(Option::as_mut).collect();
    for (peer, steps) in per_peer {
        let store = store_refs
            .get_mut(peer)
            .and_then(Option::take)
            .ok_or_else(|| Error::InvalidConfig(format!("no correlations with party {peer}")))?;
        let seed: [u8; 32] = {
            let mut s = [0u8; 32];
            rng.fill_bytes(&mut s);
            s
        };
        work.push((peer, (store, steps, ChaCha12Rng::from_seed(seed))));
    }
    let results = net.fork(work, |ch, (store, steps, mut rng)| run_peer(ch, store, &steps, inputs, batch, width, &mut rng))?;
    for (inst, share) in results.into_iter().flatten() {
        outs[inst].as_mut().expect("sub-session implies membership").xor_assign(&share);
    }
    Ok(outs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::memory;
    use crate::ot::dealer_rots;
    use rand::{seq::SliceRandom, Rng};
    use std::time::Duration;

    fn stores_for(m: usize, counts: &BTreeMap<(usize, usize), usize>, me: usize) -> Vec<Option<CorrelationStore>> {
        (0..m)
            .map(|peer| {
                (peer != me).then(|| {
                    let ns = counts.get(&(me, peer)).copied().unwrap_or(0);
                    let nr = counts.get(&(peer, me)).copied().unwrap_or(0);
                    let send = dealer_rots(&[1; 32], me, peer, b"m", ns).0;
                    let recv = dealer_rots(&[1; 32], peer, me, b"m", nr).1;
                    CorrelationStore::new(send, recv, Default::default())
                })
            })
            .collect()
    }

    fn random_config(rng: &mut ChaCha12Rng, m: usize) -> MssRotConfig {
        let size = rng.gen_range(2..=m);
        let mut all: Vec<usize> = (0..m).collect();
        all.shuffle(rng);
        let mut parties: Vec<usize> = all[..size].to_vec();
        parties.sort_unstable();
        let mut pick = parties.clone();
        pick.shuffle(rng);
        let j: Vec<usize> = parties.iter().copied().filter(|_| rng.gen_bool(0.6)).collect();
        let j = if j.is_empty() { vec![pick[0]] } else { j };
        MssRotConfig { parties, ch0: pick[0], ch1: pick[1], j }
    }

    #[test]
    fn shares_reconstruct_selected_payload() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for trial in 0..12 {
            let m = rng.gen_range(3..=6);
            let configs: Vec<MssRotConfig> = (0..3).map(|_| random_config(&mut rng, m)).collect();
            let (batch, width) = (17, 5);
            // Per instance: b0, b1, per-holder deltas.
            let b0: Vec<BitVec> = configs.iter().map(|_| BitVec::random(&mut rng, batch)).collect();
            let b1: Vec<BitVec> = configs.iter().map(|_| BitVec::random(&mut rng, batch)).collect();
            let deltas: Vec<BTreeMap<usize, ByteRows>> = configs
                .iter()
                .map(|c| c.j.iter().map(|&k| (k, ByteRows::random(&mut rng, batch, width))).collect())
                .collect();
            let counts = rot_counts(&configs, batch);
            let nets: Vec<Network> = memory::mesh(m)
                .into_iter()
                .enumerate()
                .map(|(i, l)| Network::new(i, l, Duration::from_secs(10)))
                .collect();
            let outs: Vec<Vec<Option<ByteRows>>> = std::thread::scope(|s| {
                let hs: Vec<_> = nets
                    .into_iter()
                    .map(|mut net| {
                        let (configs, b0, b1, deltas, counts) = (&configs, &b0, &b1, &deltas, &counts);
                        s.spawn(move || {
                            let me = net.me();
                            let inputs: Vec<MssRotInput> = configs
                                .iter()
                                .enumerate()
                                .map(|(i, c)| MssRotInput {
                                    b0: (c.ch0 == me).then(|| b0[i].clone()),
                                    b1: (c.ch1 == me).then(|| b1[i].clone()),
                                    delta: deltas[i].get(&me).cloned(),
                                })
                                .collect();
                            let mut stores = stores_for(m, counts, me);
                            let mut r = ChaCha12Rng::seed_from_u64(me as u64);
                            let out = mss_rot(&mut net, &mut stores, configs, &inputs, batch, width, &mut r).unwrap();
                            for st in stores.iter().flatten() {
                                assert_eq!(st.remaining(), Default::default());
                            }
                            out
                        })
                    })
                    .collect();
                hs.into_iter().map(|h| h.join().unwrap()).collect()
            });
            for (i, c) in configs.iter().enumerate() {
                let mut acc = ByteRows::zeros(batch, width);
                for p in 0..m {
                    assert_eq!(outs[p][i].is_some(), c.parties.contains(&p));
                    if let Some(o) = &outs[p][i] {
                        acc.xor_assign(o);
                    }
                }
                let mut total = ByteRows::zeros(batch, width);
                for d in deltas[i].values() {
                    total.xor_assign(d);
                }
                for b in 0..batch {
                    let expect = if b0[i].get(b) ^ b1[i].get(b) { total.row(b).to_vec() } else { vec![0; width] };
                    assert_eq!(acc.row(b), &expect[..], "trial {trial} instance {i} slot {b}");
                }
            }
        }
    }

    #[test]
    fn single_flight() {
        let configs = vec![MssRotConfig { parties: vec![0, 1, 2, 3], ch0: 0, ch1: 2, j: vec![1, 2] }];
        let counts = rot_counts(&configs, 4);
        // Chooser 0 pairs with holders 1 and 2, chooser 2 with holder 1.
        assert_eq!(counts.get(&(1, 0)), Some(&4));
        assert_eq!(counts.get(&(2, 0)), Some(&4));
        assert_eq!(counts.get(&(1, 2)), Some(&4));
        assert_eq!(counts.len(), 3);
        let nets: Vec<Network> =
            memory::mesh(4).into_iter().enumerate().map(|(i, l)| Network::new(i, l, Duration::from_secs(10))).collect();
        let clocks: Vec<u32> = std::thread::scope(|s| {
            let hs: Vec<_> = nets
                .into_iter()
                .map(|mut net| {
                    let (configs, counts) = (&configs, &counts);
                    s.spawn(move || {
                        let me = net.me();
                        let input = MssRotInput {
                            b0: (me == 0).then(|| BitVec::ones(4)),
                            b1: (me == 2).then(|| BitVec::zeros(4)),
                            delta: [1, 2].contains(&me).then(|| ByteRows::zeros(4, 3)),
                        };
                        let mut stores = stores_for(4, counts, me);
                        let mut r = ChaCha12Rng::seed_from_u64(0);
                        mss_rot(&mut net, &mut stores, configs, &[input], 4, 3, &mut r).unwrap();
                        net.clock()
                    })
                })
                .collect();
            hs.into_iter().map(|h| h.join().unwrap()).collect()
        });
        assert!(clocks.iter().all(|&c| c <= 1), "{clocks:?}");
    }
}
