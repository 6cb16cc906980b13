//! Multi-party private-ID.
//!
//! The parties first compute `R(x) = H(x)^{k_0·…·k_{m-1}}` for their own
//! elements by passing blinded vectors around the ring; each party masks its
//! vector with a private exponent `a` that it strips at the end. The
//! identifiers then go through the public-key union and the leader
//! broadcasts the result.

use std::collections::BTreeSet;

use super::common::Ctx;
use super::{pk, PartyOutcome, PidOutput};
use crate::error::{Error, Result};
use crate::group::PrimeGroup;
use crate::net::{Network, Phase, Tag};

fn encode_vec<G: PrimeGroup>(group: &G, v: &[G::Elem]) -> Vec<u8> {
    v.iter().flat_map(|e| group.encode(e)).collect()
}

fn decode_vec<G: PrimeGroup>(group: &G, bytes: &[u8]) -> Result<Vec<G::Elem>> {
    let el = group.elem_len();
    if bytes.len() % el != 0 {
        return Err(Error::malformed("element vector length"));
    }
    bytes.chunks_exact(el).map(|c| group.decode(c)).collect()
}

/// Ring exponentiation: returns `H(x)^K` for every own element, in order.
fn identifiers<G: PrimeGroup>(net: &mut Network, ctx: &mut Ctx<G>, set: &[u64]) -> Result<Vec<G::Elem>> {
    net.set_phase(Phase::Dopprf)?;
    let g = ctx.group.clone();
    let (me, m, n) = (ctx.me, ctx.m, set.len());
    let (next, prev) = ((me + 1) % m, (me + m - 1) % m);
    let a = g.random_nonzero_scalar(&mut ctx.rng);
    let k = g.random_nonzero_scalar(&mut ctx.rng);
    if cfg!(feature = "insecure-test-hooks") {
        ctx.trace.pid_key = Some(g.scalar_to_bytes(&k));
    }
    let own = crate::par::map(set, |x| g.exp(&g.hash_to_group(&x.to_le_bytes()), &a));
    net.send(next, Tag::PidRing, encode_vec(&g, &own))?;
    for _ in 1..m {
        let v = decode_vec(&g, &net.recv(prev, Tag::PidRing)?)?;
        if v.len() != n {
            return Err(Error::malformed(format!("ring vector of {} elements", v.len())));
        }
        let raised = crate::par::map(&v, |e| g.exp(e, &k));
        net.send(next, Tag::PidRing, encode_vec(&g, &raised))?;
    }
    let back = decode_vec(&g, &net.recv(prev, Tag::PidRing)?)?;
    if back.len() != n {
        return Err(Error::malformed("own ring vector came back resized"));
    }
    let unmask = g.scalar_mul(&g.scalar_invert(&a).expect("a is nonzero"), &k);
    Ok(crate::par::map(&back, |e| g.exp(e, &unmask)))
}

pub(crate) fn run<G: PrimeGroup>(net: &mut Network, ctx: &mut Ctx<G>, set: &[u64]) -> Result<PartyOutcome> {
    let g = ctx.group.clone();
    let ids = identifiers(net, ctx, set)?;
    let items: Vec<(u64, G::Elem)> = ids.iter().map(|e| (g.token(e), *e)).collect();
    let leader = pk::core(net, ctx, &items)?;

    let union: Vec<String> = if let Some(found) = leader {
        let all: BTreeSet<String> = ids.iter().chain(&found).map(|e| hex::encode(g.encode(e))).collect();
        let all: Vec<String> = all.into_iter().collect();
        let flat: Vec<u8> = all.iter().flat_map(|h| hex::decode(h).expect("own encoding")).collect();
        for p in net.peers() {
            net.send(p, Tag::PidUnion, flat.clone())?;
        }
        all
    } else {
        let v = decode_vec(&g, &net.recv(0, Tag::PidUnion)?)?;
        v.iter().map(|e| hex::encode(g.encode(e))).collect()
    };
    let own_ids = set.iter().zip(&ids).map(|(&x, e)| (x, hex::encode(g.encode(e)))).collect();
    Ok(PartyOutcome { pid: Some(PidOutput { union_ids: union, own_ids }), ..Default::default() })
}
