//! Symmetric-key MPSU.
//!
//! After the pairwise membership tests, instance `(i, j)` of mss-ROT turns
//! the shares `e_{i,j}, e_{j,i}` into additive shares of `b·Δ_{i,j}` where
//! `b` says whether `P_j`'s element in a bin is also in `X_i`. Summing over
//! `i < j` gives a sharing that vanishes exactly when the element is new to
//! every lower party; `P_j` adds its payload `x ‖ H(x)` on top. A shuffle
//! hides the positions and the leader keeps the payloads whose check hash
//! verifies.

use std::collections::BTreeSet;

use super::common::{bin, membership, offline, Ctx};
use super::PartyOutcome;
use crate::binning::ProtocolParams;
use crate::error::{Error, Result};
use crate::group::PrimeGroup;
use crate::mssrot::{mss_rot, rot_counts, MssRotConfig, MssRotInput};
use crate::net::{Network, Phase, Tag};
use crate::ot::CorrelationPlan;
use crate::shuffle::{ms_shuffle, osn_rot_count, ShuffleMode};
use crate::util::{hash_to_len, u64_from_bytes, u64_to_bytes, ByteRows};

/// One mss-ROT instance per pair `i < j`, in lexicographic order.
pub(crate) fn configs(m: usize) -> Vec<MssRotConfig> {
    let mut out = Vec::new();
    for j in 1..m {
        for i in 0..j {
            out.push(MssRotConfig { parties: (i.min(1)..=j).collect(), ch0: i, ch1: j, j: (1..=j).collect() });
        }
    }
    out
}

/// `x ‖ H_κ(x)` in `payload_bytes` bytes.
pub(crate) fn payload(params: &ProtocolParams, x: u64) -> Vec<u8> {
    let xb = u64_to_bytes(x, params.elem_bytes());
    let mut p = xb.clone();
    p.extend(hash_to_len(b"payload", &[&xb], params.kappa_bytes()));
    p
}

/// Inverse of [`payload`]; `None` for anything that fails the check.
pub(crate) fn parse_payload(params: &ProtocolParams, row: &[u8]) -> Option<u64> {
    let eb = params.elem_bytes();
    let x = u64_from_bytes(&row[..eb]);
    if x & !crate::util::low_mask(params.l) != 0 {
        return None;
    }
    (payload(params, x) == row).then_some(x)
}

fn plans(m: usize, me: usize, bins: usize, triples: usize, shuffle: ShuffleMode) -> Vec<CorrelationPlan> {
    let counts = rot_counts(&configs(m), bins);
    let osn = if shuffle == ShuffleMode::Distributed { osn_rot_count((m - 1) * bins) } else { 0 };
    (0..m)
        .map(|p| CorrelationPlan {
            rot_send: counts.get(&(me, p)).copied().unwrap_or(0) + osn,
            rot_recv: counts.get(&(p, me)).copied().unwrap_or(0) + osn,
            triples,
        })
        .collect()
}

pub(crate) fn run<G: PrimeGroup>(net: &mut Network, ctx: &mut Ctx<G>, set: &[u64]) -> Result<PartyOutcome> {
    let (me, m, bins) = (ctx.me, ctx.m, ctx.num_bins());
    let width = ctx.params.payload_bytes();
    let mut stores = offline(net, ctx, plans(m, me, bins, ctx.sspmt_triples(), ctx.cfg.shuffle_mode))?;
    let tables = bin(net, ctx, set)?;
    let e = membership(net, ctx, &tables, &mut stores)?;

    net.set_phase(Phase::MssRot)?;
    let cfgs = configs(m);
    let inputs: Vec<MssRotInput> = cfgs
        .iter()
        .map(|c| MssRotInput {
            b0: (me == c.ch0).then(|| e[c.ch1].clone().expect("share with ch1")),
            b1: (me == c.ch1).then(|| e[c.ch0].clone().expect("share with ch0")),
            delta: c.j.contains(&me).then(|| ByteRows::random(&mut ctx.rng, bins, width)),
        })
        .collect();
    let mut rng = ctx.fork_rng();
    let outs = mss_rot(net, &mut stores, &cfgs, &inputs, bins, width, &mut rng)?;

    let mut share = ByteRows::zeros((m - 1) * bins, width);
    for (c, out) in cfgs.iter().zip(outs) {
        if let Some(out) = out {
            let base = (c.ch1 - 1) * bins;
            for b in 0..bins {
                crate::util::xor_in_place(share.row_mut(base + b), out.row(b));
            }
        }
    }
    if let Some(cuckoo) = &tables.cuckoo {
        let base = (me - 1) * bins;
        for (b, slot) in cuckoo.bins.iter().enumerate() {
            let p = match slot {
                Some(t) => payload(&ctx.params, t.elem),
                None => crate::util::random_bytes(&mut ctx.rng, width),
            };
            crate::util::xor_in_place(share.row_mut(base + b), &p);
        }
    }
    if cfg!(feature = "insecure-test-hooks") {
        ctx.trace.pre_shuffle = Some(share.clone());
    }

    net.set_phase(Phase::Shuffle)?;
    let dealer_seed = ctx.cfg.dealer_seed();
    let mut rng = ctx.fork_rng();
    let shuffled = ms_shuffle(net, ctx.cfg.shuffle_mode, &mut stores, &dealer_seed, share, &mut rng)?;
    if cfg!(feature = "insecure-test-hooks") {
        ctx.trace.post_shuffle = Some(shuffled.share.clone());
        ctx.trace.permutation = Some(shuffled.perm.clone());
    }

    net.set_phase(Phase::Reconstruct)?;
    let mut share = shuffled.share;
    if me != 0 {
        net.send(0, Tag::ReconShares, share.into_flat())?;
        return Ok(PartyOutcome::default());
    }
    for p in 1..m {
        let theirs = net.recv(p, Tag::ReconShares)?;
        if theirs.len() != share.as_flat().len() {
            return Err(Error::malformed(format!("reconstruction share from {p} has {} bytes", theirs.len())));
        }
        crate::util::xor_in_place(share.as_flat_mut(), &theirs);
    }
    let mut union: BTreeSet<u64> = set.iter().copied().collect();
    union.extend(share.rows().filter_map(|r| parse_payload(&ctx.params, r)));
    Ok(PartyOutcome { union: Some(union.into_iter().collect()), ..Default::default() })
}
