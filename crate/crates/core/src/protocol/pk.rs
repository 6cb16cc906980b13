//! Public-key MPSU.
//!
//! Every party encrypts its Cuckoo bins under the aggregate key and walks
//! the ciphertexts through chosen OTs with each lower party; a lower party
//! that holds the element swaps in an encryption of ⊥. The leader collects
//! the survivors, and the parties mix them in turn, stripping their key
//! share and rerandomizing, until the leader decrypts.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{CryptoRng, RngCore};

use super::common::{bin, membership, offline, Ctx};
use super::PartyOutcome;
use crate::bits::BitVec;
use crate::error::{Error, Result};
use crate::group::{aggregate_pk, Ciphertext, ElementCodec, KeyPair, PrimeGroup};
use crate::net::{Network, Phase, Session, Tag};
use crate::ot::{chosen_ot_recv, chosen_ot_send, CorrelationPlan, CorrelationStore};

fn encode_all<G: PrimeGroup>(group: &G, cts: &[Ciphertext<G>]) -> Vec<u8> {
    cts.iter().flat_map(|c| c.to_bytes(group)).collect()
}

fn decode_all<G: PrimeGroup>(group: &G, bytes: &[u8], count: usize) -> Result<Vec<Ciphertext<G>>> {
    let len = Ciphertext::<G>::byte_len(group);
    if bytes.len() != count * len {
        return Err(Error::malformed(format!("expected {count} ciphertexts, got {} bytes", bytes.len())));
    }
    bytes.chunks_exact(len).map(|c| Ciphertext::from_bytes(group, c)).collect()
}

fn encrypt_all<G: PrimeGroup, R: RngCore + CryptoRng>(group: &G, pk: &G::Elem, msgs: &[G::Elem], rng: &mut R) -> Vec<Ciphertext<G>> {
    let rs: Vec<G::Scalar> = msgs.iter().map(|_| group.random_scalar(rng)).collect();
    crate::par::map_range(msgs.len(), |i| Ciphertext::encrypt_with(group, pk, &msgs[i], &rs[i]))
}

fn rerandomize_all<G: PrimeGroup, R: RngCore + CryptoRng>(group: &G, pk: &G::Elem, cts: &[Ciphertext<G>], rng: &mut R) -> Vec<Ciphertext<G>> {
    let rs: Vec<G::Scalar> = cts.iter().map(|_| group.random_scalar(rng)).collect();
    crate::par::map_range(cts.len(), |i| cts[i].rerandomize_with(group, pk, &rs[i]))
}

enum Job<'a, G: PrimeGroup> {
    /// Walk own ciphertexts through every lower party, leader last.
    Chain { stores: Vec<(usize, &'a mut CorrelationStore)>, cts: Vec<Ciphertext<G>> },
    /// Answer the chain of a higher party.
    Respond { peer: usize, store: &'a mut CorrelationStore },
}

enum JobOut<G: PrimeGroup> {
    Chain(Vec<(usize, Vec<Vec<u8>>)>),
    Respond(usize, Vec<Ciphertext<G>>),
}

/// Shared core of the public-key protocols over `(token, element)` items:
/// tokens drive the binning, elements are what gets encrypted. Returns the
/// leader's decrypted non-⊥ elements.
pub(crate) fn core<G: PrimeGroup>(net: &mut Network, ctx: &mut Ctx<G>, items: &[(u64, G::Elem)]) -> Result<Option<Vec<G::Elem>>> {
    let (me, m, bins) = (ctx.me, ctx.m, ctx.num_bins());
    let group = ctx.group.clone();

    net.set_phase(Phase::Setup)?;
    let keys = KeyPair::generate(&group, &mut ctx.rng);
    if cfg!(feature = "insecure-test-hooks") {
        ctx.trace.secret_key = Some(group.scalar_to_bytes(&keys.sk));
    }
    for p in net.peers() {
        net.send(p, Tag::PkPubkey, group.encode(&keys.pk))?;
    }
    let mut pks = vec![group.identity(); m];
    pks[me] = keys.pk;
    for p in net.peers() {
        let pk = group.decode(&net.recv(p, Tag::PkPubkey)?)?;
        if group.is_identity(&pk) {
            return Err(Error::malformed(format!("party {p} published the identity as public key")));
        }
        pks[p] = pk;
    }
    let pk = aggregate_pk(&group, &pks);

    let triples = ctx.sspmt_triples();
    let plans = (0..m)
        .map(|p| CorrelationPlan {
            rot_send: if p < me { bins } else { 0 },
            rot_recv: if p > me { bins } else { 0 },
            triples,
        })
        .collect();
    let mut stores = offline(net, ctx, plans)?;
    let tokens: Vec<u64> = items.iter().map(|i| i.0).collect();
    let by_token: HashMap<u64, G::Elem> = items.iter().copied().collect();
    let tables = bin(net, ctx, &tokens)?;
    let e = membership(net, ctx, &tables, &mut stores)?;

    net.set_phase(Phase::Ot)?;
    let ct_len = Ciphertext::<G>::byte_len(&group);
    let mut work: Vec<(Vec<usize>, (Job<'_, G>, _))> = Vec::new();
    let mut lower = Vec::new();
    for (p, s) in stores.iter_mut().enumerate() {
        let Some(store) = s.as_mut() else { continue };
        if p < me {
            lower.push((p, store));
        } else {
            work.push((vec![p], (Job::Respond { peer: p, store }, ctx.fork_rng())));
        }
    }
    if let Some(cuckoo) = &tables.cuckoo {
        // Leader last.
        lower.rotate_left(1);
        let msgs: Vec<G::Elem> = cuckoo.bins.iter().map(|s| s.map_or(group.identity(), |t| by_token[&t.elem])).collect();
        let cts = encrypt_all(&group, &pk, &msgs, &mut ctx.rng);
        let peers = lower.iter().map(|l| l.0).collect();
        work.push((peers, (Job::Chain { stores: lower, cts }, ctx.fork_rng())));
    }
    let (g, pk_ref) = (&group, &pk);
    let outs = net.fork_sets(work, |sess: &mut Session<'_>, (job, mut rng)| match job {
        Job::Chain { stores, mut cts } => {
            let mut trace = Vec::new();
            for (i, store) in stores {
                let rots = store.take_send(bins)?;
                let mine = e[i].as_ref().expect("share with lower party");
                let bottoms = encrypt_all(g, pk_ref, &vec![g.identity(); bins], &mut rng);
                let payloads: Vec<(Vec<u8>, Vec<u8>)> = (0..bins)
                    .map(|b| {
                        let (c, z) = (cts[b].to_bytes(g), bottoms[b].to_bytes(g));
                        if mine.get(b) { (z, c) } else { (c, z) }
                    })
                    .collect();
                sess.with(i, |ch| chosen_ot_send(ch, rots, &payloads, Tag::PkCiphertexts))?;
                if i != 0 {
                    let back = decode_all(g, &sess.recv(i, Tag::PkRerand)?, bins)?;
                    cts = rerandomize_all(g, pk_ref, &back, &mut rng);
                    if cfg!(feature = "insecure-test-hooks") {
                        trace.push((i, cts.iter().map(|c| c.to_bytes(g)).collect()));
                    }
                }
            }
            Ok(JobOut::Chain(trace))
        }
        Job::Respond { peer, store } => {
            let rots = store.take_recv(bins)?;
            let choices: BitVec = e[peer].clone().expect("share with higher party");
            let got = sess.with(peer, |ch| chosen_ot_recv(ch, rots, &choices, ct_len, Tag::PkCiphertexts))?;
            let got: Vec<Ciphertext<G>> = got.iter().map(|c| Ciphertext::from_bytes(g, c)).collect::<Result<_>>()?;
            let fresh = rerandomize_all(g, pk_ref, &got, &mut rng);
            if me != 0 {
                sess.send(peer, Tag::PkRerand, encode_all(g, &fresh))?;
            }
            Ok(JobOut::Respond(peer, fresh))
        }
    })?;

    let mut collected: Vec<(usize, Vec<Ciphertext<G>>)> = Vec::new();
    for o in outs {
        match o {
            JobOut::Chain(t) => ctx.trace.pk_chain.extend(t),
            JobOut::Respond(p, cts) if me == 0 => collected.push((p, cts)),
            JobOut::Respond(..) => {}
        }
    }

    net.set_phase(Phase::Mix)?;
    if me == 0 {
        collected.sort_by_key(|c| c.0);
        let mut cts: Vec<Ciphertext<G>> = collected.into_iter().flat_map(|c| c.1).collect();
        if cfg!(feature = "insecure-test-hooks") {
            ctx.trace.pk_collected = Some(cts.len());
        }
        cts.shuffle(&mut ctx.rng);
        let count = cts.len();
        net.send(1, Tag::PkMix, encode_all(&group, &cts))?;
        let mixed = decode_all(&group, &net.recv(m - 1, Tag::PkMix)?, count)?;
        let plain = crate::par::map(&mixed, |c| c.decrypt(&group, &keys.sk));
        return Ok(Some(plain.into_iter().filter(|p| !group.is_identity(p)).collect()));
    }
    let count = (m - 1) * bins;
    let cts = decode_all(&group, &net.recv(me - 1, Tag::PkMix)?, count)?;
    let stripped = crate::par::map(&cts, |c| c.partial_decrypt(&group, &keys.sk));
    let rest = aggregate_pk(&group, std::iter::once(&pks[0]).chain(&pks[me + 1..]));
    let mut cts = rerandomize_all(&group, &rest, &stripped, &mut ctx.rng);
    cts.shuffle(&mut ctx.rng);
    net.send((me + 1) % m, Tag::PkMix, encode_all(&group, &cts))?;
    Ok(None)
}

pub(crate) fn run<G: PrimeGroup>(net: &mut Network, ctx: &mut Ctx<G>, set: &[u64]) -> Result<PartyOutcome> {
    let codec = ElementCodec::new(ctx.group.clone(), 1u64 << ctx.cfg.element_bits);
    let items: Vec<(u64, G::Elem)> = set.iter().map(|&x| Ok((x, codec.encode(x)?))).collect::<Result<_>>()?;
    let Some(plain) = core(net, ctx, &items)? else {
        return Ok(PartyOutcome::default());
    };
    let mut union: BTreeSet<u64> = set.iter().copied().collect();
    for p in &plain {
        union.insert(codec.decode(p)?);
    }
    Ok(PartyOutcome { union: Some(union.into_iter().collect()), ..Default::default() })
}
