//! Random OT, choice-bit derandomization and Beaver bit triples.
//!
//! Two backends produce the same correlations. `Dealer` expands a seed
//! shared by every party (a stand-in for trusted setup, insecure outside
//! tests and benchmarks). `Interactive` runs a two-message DH base OT over
//! the session group and, for batches of at least [`EXTENSION_THRESHOLD`],
//! extends 128 base OTs IKNP-style.

use rand::{CryptoRng, Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::bits::BitVec;
use crate::error::{Error, Result};
use crate::group::PrimeGroup;
use crate::net::{Channel, Reader, Tag};
use crate::util::{derive_seed, expand_block, hash_block, hash_parts, prg, Block};

pub const BASE_OTS: usize = 128;
pub const EXTENSION_THRESHOLD: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResourceMode {
    /// Correlations expanded from a seed every party knows. Insecure.
    Dealer,
    Interactive,
}

impl ResourceMode {
    fn byte(self) -> u8 {
        match self {
            ResourceMode::Dealer => 0,
            ResourceMode::Interactive => 1,
        }
    }
}

impl std::str::FromStr for ResourceMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dealer" => Ok(ResourceMode::Dealer),
            "interactive" => Ok(ResourceMode::Interactive),
            other => Err(format!("unknown resource mode '{other}' (expected dealer|interactive)")),
        }
    }
}

/// Sender half of one random OT.
#[derive(Clone, Copy, Debug)]
pub struct RotSenderOut {
    r0: Block,
    r1: Block,
    consumed: bool,
}

impl RotSenderOut {
    pub fn new(r0: Block, r1: Block) -> Self {
        Self { r0, r1, consumed: false }
    }

    pub fn r0(&self) -> Block {
        self.r0
    }

    pub fn r1(&self) -> Block {
        self.r1
    }

    /// Consumes the instance; `d = 1` swaps the pair.
    pub fn derandomize(&mut self, d: bool) -> Result<(Block, Block)> {
        self.consume()?;
        Ok(if d { (self.r1, self.r0) } else { (self.r0, self.r1) })
    }

    pub fn consume(&mut self) -> Result<()> {
        if self.consumed {
            return Err(Error::ReusedCorrelation);
        }
        self.consumed = true;
        Ok(())
    }
}

/// Receiver half: random choice `c` and `r_c`.
#[derive(Clone, Copy, Debug)]
pub struct RotReceiverOut {
    c: bool,
    rc: Block,
    consumed: bool,
}

impl RotReceiverOut {
    pub fn new(c: bool, rc: Block) -> Self {
        Self { c, rc, consumed: false }
    }

    pub fn choice(&self) -> bool {
        self.c
    }

    pub fn value(&self) -> Block {
        self.rc
    }

    /// Consumes the instance for choice `chosen`: returns the bit
    /// `d = chosen ⊕ c` to send and the block the receiver now holds, which
    /// equals the sender's `chosen`-th block after the sender applies `d`.
    pub fn derandomize(&mut self, chosen: bool) -> Result<(bool, Block)> {
        self.consume()?;
        Ok((chosen ^ self.c, self.rc))
    }

    pub fn consume(&mut self) -> Result<()> {
        if self.consumed {
            return Err(Error::ReusedCorrelation);
        }
        self.consumed = true;
        Ok(())
    }
}

/// Everything a party needs to produce correlations with a peer.
#[derive(Clone, Debug)]
pub struct OtContext<G: PrimeGroup> {
    pub group: G,
    pub mode: ResourceMode,
    pub dealer_seed: [u8; 32],
}

/// Pseudorandom pad of `len` bytes keyed by an OT block.
pub fn pad(b: Block, len: usize) -> Vec<u8> {
    if len <= 32 {
        hash_parts(b"ot-pad", &[&b.to_le_bytes()])[..len].to_vec()
    } else {
        expand_block(b, len)
    }
}

fn dealer_stream(seed: &[u8; 32], what: &[u8], a: usize, b: usize, label: &[u8]) -> rand_chacha::ChaCha12Rng {
    let id = [what, &(a as u32).to_le_bytes(), &(b as u32).to_le_bytes(), label].concat();
    prg(derive_seed(seed, &id))
}

/// Both halves of `count` dealer ROTs from `sender` to `receiver`.
pub fn dealer_rots(seed: &[u8; 32], sender: usize, receiver: usize, label: &[u8], count: usize) -> (Vec<RotSenderOut>, Vec<RotReceiverOut>) {
    let mut rng = dealer_stream(seed, b"rot", sender, receiver, label);
    let mut s = Vec::with_capacity(count);
    let mut r = Vec::with_capacity(count);
    for _ in 0..count {
        let r0: Block = rng.gen();
        let r1: Block = rng.gen();
        let c: bool = rng.gen();
        s.push(RotSenderOut::new(r0, r1));
        r.push(RotReceiverOut::new(c, if c { r1 } else { r0 }));
    }
    (s, r)
}

fn header(mode: ResourceMode, count: usize) -> Vec<u8> {
    let mut h = vec![mode.byte()];
    h.extend_from_slice(&(count as u32).to_le_bytes());
    h
}

fn check_header(r: &mut Reader<'_>, mode: ResourceMode, count: usize) -> Result<()> {
    let m = r.take(1)?[0];
    if m != mode.byte() {
        return Err(Error::ModeMismatch);
    }
    let c = r.u32()? as usize;
    if c != count {
        return Err(Error::malformed(format!("peer expects {c} OTs, this party {count}")));
    }
    Ok(())
}

/// Receives the peer's first OT message; a dealer header where an
/// interactive message was expected (or vice versa) is `ModeMismatch`.
fn recv_ot_message(ch: &mut Channel, expected: Tag, mode: ResourceMode) -> Result<Vec<u8>> {
    let (tag, payload) = ch.recv_any()?;
    if tag == expected {
        return Ok(payload);
    }
    if tag == Tag::OtBaseS1 && payload.first().is_some_and(|&b| b != mode.byte()) {
        return Err(Error::ModeMismatch);
    }
    Err(Error::malformed(format!("expected {expected:?}, got {tag:?}")))
}

fn dealer_exchange(ch: &mut Channel, mode: ResourceMode, count: usize) -> Result<()> {
    ch.send(Tag::OtBaseS1, header(mode, count))?;
    let p = recv_ot_message(ch, Tag::OtBaseS1, mode)?;
    let mut r = Reader::new(&p);
    check_header(&mut r, mode, count)?;
    r.finish()
}

/// `count` random OTs with this party as sender.
pub fn rot_send<G: PrimeGroup, R: RngCore + CryptoRng>(
    ch: &mut Channel,
    ctx: &OtContext<G>,
    count: usize,
    label: &[u8],
    rng: &mut R,
) -> Result<Vec<RotSenderOut>> {
    match ctx.mode {
        ResourceMode::Dealer => {
            dealer_exchange(ch, ctx.mode, count)?;
            Ok(dealer_rots(&ctx.dealer_seed, ch.me(), ch.peer(), label, count).0)
        }
        ResourceMode::Interactive if count < EXTENSION_THRESHOLD => {
            let pairs = base_ot_send(ch, &ctx.group, count, count, rng)?;
            Ok(pairs.into_iter().map(|(a, b)| RotSenderOut::new(a, b)).collect())
        }
        ResourceMode::Interactive => iknp_send(ch, &ctx.group, count, rng),
    }
}

/// `count` random OTs with this party as receiver.
pub fn rot_recv<G: PrimeGroup, R: RngCore + CryptoRng>(
    ch: &mut Channel,
    ctx: &OtContext<G>,
    count: usize,
    label: &[u8],
    rng: &mut R,
) -> Result<Vec<RotReceiverOut>> {
    match ctx.mode {
        ResourceMode::Dealer => {
            dealer_exchange(ch, ctx.mode, count)?;
            Ok(dealer_rots(&ctx.dealer_seed, ch.peer(), ch.me(), label, count).1)
        }
        ResourceMode::Interactive if count < EXTENSION_THRESHOLD => {
            let choices: Vec<bool> = (0..count).map(|_| rng.gen()).collect();
            let blocks = base_ot_recv(ch, &ctx.group, &choices, count, rng)?;
            Ok(choices.into_iter().zip(blocks).map(|(c, b)| RotReceiverOut::new(c, b)).collect())
        }
        ResourceMode::Interactive => iknp_recv(ch, &ctx.group, count, rng),
    }
}

fn base_key<G: PrimeGroup>(group: &G, i: usize, a: &[u8], b: &G::Elem, shared: &G::Elem) -> Block {
    let d = hash_parts(b"base-ot", &[&(i as u64).to_le_bytes(), a, &group.encode(b), &group.encode(shared)]);
    Block::from_le_bytes(d[..16].try_into().unwrap())
}

/// Base OT sender: `A = g^a`, then keys `H(B^a)` and `H((B/A)^a)`.
/// `announced` is the count placed in the header.
fn base_ot_send<G: PrimeGroup, R: RngCore + CryptoRng>(
    ch: &mut Channel,
    group: &G,
    count: usize,
    announced: usize,
    rng: &mut R,
) -> Result<Vec<(Block, Block)>> {
    let a = group.random_nonzero_scalar(rng);
    let big_a = group.exp_gen(&a);
    let a_bytes = group.encode(&big_a);
    let mut msg = header(ResourceMode::Interactive, announced);
    msg.extend_from_slice(&a_bytes);
    ch.send(Tag::OtBaseS1, msg)?;

    let p = recv_ot_message(ch, Tag::OtBaseS2, ResourceMode::Interactive)?;
    let mut r = Reader::new(&p);
    check_header(&mut r, ResourceMode::Interactive, announced)?;
    let len = group.elem_len();
    let bs: Vec<G::Elem> = (0..count)
        .map(|_| group.decode(r.take(len)?))
        .collect::<Result<_>>()?;
    r.finish()?;
    let a_inv_a = group.invert(&group.exp(&big_a, &a));
    Ok(crate::par::map_range(count, |i| {
        let ba = group.exp(&bs[i], &a);
        let k0 = base_key(group, i, &a_bytes, &bs[i], &ba);
        let k1 = base_key(group, i, &a_bytes, &bs[i], &group.op(&ba, &a_inv_a));
        (k0, k1)
    }))
}

/// Base OT receiver: `B = g^b` or `A·g^b`, key `H(A^b)`.
fn base_ot_recv<G: PrimeGroup, R: RngCore + CryptoRng>(
    ch: &mut Channel,
    group: &G,
    choices: &[bool],
    announced: usize,
    rng: &mut R,
) -> Result<Vec<Block>> {
    let p = recv_ot_message(ch, Tag::OtBaseS1, ResourceMode::Interactive)?;
    let mut r = Reader::new(&p);
    check_header(&mut r, ResourceMode::Interactive, announced)?;
    let a_bytes = r.take(group.elem_len())?.to_vec();
    r.finish()?;
    let big_a = group.decode(&a_bytes)?;
    let scalars: Vec<G::Scalar> = choices.iter().map(|_| group.random_nonzero_scalar(rng)).collect();
    let out: Vec<(G::Elem, Block)> = crate::par::map_range(choices.len(), |i| {
        let gb = group.exp_gen(&scalars[i]);
        let b = if choices[i] { group.op(&big_a, &gb) } else { gb };
        let k = base_key(group, i, &a_bytes, &b, &group.exp(&big_a, &scalars[i]));
        (b, k)
    });
    let mut msg = header(ResourceMode::Interactive, announced);
    for (b, _) in &out {
        msg.extend_from_slice(&group.encode(b));
    }
    ch.send(Tag::OtBaseS2, msg)?;
    Ok(out.into_iter().map(|(_, k)| k).collect())
}

fn column(seed: Block, words: usize) -> Vec<u64> {
    let mut s = [0u8; 32];
    s[..16].copy_from_slice(&seed.to_le_bytes());
    s[16..24].copy_from_slice(b"iknp-col");
    let mut rng = prg(s);
    (0..words).map(|_| rng.next_u64()).collect()
}

/// Row `i` of a 128-column bit matrix stored column-major.
fn row(cols: &[Vec<u64>], i: usize) -> Block {
    let (w, b) = (i / 64, i % 64);
    let mut out: Block = 0;
    for (j, c) in cols.iter().enumerate() {
        out |= ((c[w] >> b & 1) as Block) << j;
    }
    out
}

/// Extension sender: base-OT receiver with random `s`, output
/// `(H(i, Q_i), H(i, Q_i ⊕ s))`.
fn iknp_send<G: PrimeGroup, R: RngCore + CryptoRng>(
    ch: &mut Channel,
    group: &G,
    count: usize,
    rng: &mut R,
) -> Result<Vec<RotSenderOut>> {
    let s_bits: Vec<bool> = (0..BASE_OTS).map(|_| rng.gen()).collect();
    let keys = base_ot_recv(ch, group, &s_bits, count, rng)?;
    let words = count.div_ceil(64);
    let p = ch.recv(Tag::OtExtMatrix)?;
    if p.len() != BASE_OTS * words * 8 {
        return Err(Error::malformed("OT extension matrix has wrong size"));
    }
    let cols: Vec<Vec<u64>> = crate::par::map_range(BASE_OTS, |j| {
        let mut q = column(keys[j], words);
        if s_bits[j] {
            let u = &p[j * words * 8..(j + 1) * words * 8];
            for (w, chunk) in q.iter_mut().zip(u.chunks_exact(8)) {
                *w ^= u64::from_le_bytes(chunk.try_into().unwrap());
            }
        }
        q
    });
    let s: Block = s_bits.iter().enumerate().fold(0, |acc, (j, &b)| acc | ((b as Block) << j));
    Ok(crate::par::map_range(count, |i| {
        let q = row(&cols, i);
        RotSenderOut::new(hash_block(i as u64, q), hash_block(i as u64, q ^ s))
    }))
}

/// Extension receiver: base-OT sender, random choices `r`, output `H(i, T_i)`.
fn iknp_recv<G: PrimeGroup, R: RngCore + CryptoRng>(
    ch: &mut Channel,
    group: &G,
    count: usize,
    rng: &mut R,
) -> Result<Vec<RotReceiverOut>> {
    let keys = base_ot_send(ch, group, BASE_OTS, count, rng)?;
    let words = count.div_ceil(64);
    let choices = BitVec::random(rng, count);
    let cols: Vec<(Vec<u64>, Vec<u8>)> = crate::par::map_range(BASE_OTS, |j| {
        let t = column(keys[j].0, words);
        let t1 = column(keys[j].1, words);
        let u: Vec<u8> = t
            .iter()
            .zip(&t1)
            .zip(choices.words())
            .flat_map(|((a, b), r)| (a ^ b ^ r).to_le_bytes())
            .collect();
        (t, u)
    });
    let mut msg = Vec::with_capacity(BASE_OTS * words * 8);
    for (_, u) in &cols {
        msg.extend_from_slice(u);
    }
    ch.send(Tag::OtExtMatrix, msg)?;
    let ts: Vec<Vec<u64>> = cols.into_iter().map(|(t, _)| t).collect();
    Ok(crate::par::map_range(count, |i| RotReceiverOut::new(choices.get(i), hash_block(i as u64, row(&ts, i)))))
}

/// Per-party XOR shares of packed Beaver bit triples.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TripleShares {
    pub a: BitVec,
    pub b: BitVec,
    pub c: BitVec,
}

impl TripleShares {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn slice(&self, start: usize, len: usize) -> TripleShares {
        TripleShares { a: self.a.slice(start, len), b: self.b.slice(start, len), c: self.c.slice(start, len) }
    }
}

/// Dealer triples for the pair `(lo, hi)`; returns `(lo's shares, hi's shares)`.
pub fn dealer_triples(seed: &[u8; 32], lo: usize, hi: usize, label: &[u8], count: usize) -> (TripleShares, TripleShares) {
    let mut rng = dealer_stream(seed, b"triple", lo, hi, label);
    let mut draw = || {
        let words: Vec<u64> = (0..count.div_ceil(64)).map(|_| rng.next_u64()).collect();
        BitVec::from_words(words, count)
    };
    let (a1, b1, c1, a2, b2) = (draw(), draw(), draw(), draw(), draw());
    let prod = a1.xor(&a2).unwrap().and(&b1.xor(&b2).unwrap()).unwrap();
    let c2 = prod.xor(&c1).unwrap();
    (TripleShares { a: a1, b: b1, c: c1 }, TripleShares { a: a2, b: b2, c: c2 })
}

/// Local half of the two-ROT triple construction.
///
/// With `sent` (this party as sender) it sets `a = lsb(r0 ⊕ r1)` and
/// `u = lsb(r0)`; with `received` it sets `b = c` and `u' = lsb(r_c)`. The
/// peer's `u'` satisfies `u ⊕ u'_peer = a·b_peer`, so `c = a·b ⊕ u ⊕ u'`
/// on both sides shares `(a ⊕ a')·(b ⊕ b')`.
pub fn triples_from_rots(sent: &mut [RotSenderOut], received: &mut [RotReceiverOut]) -> Result<TripleShares> {
    assert_eq!(sent.len(), received.len());
    let n = sent.len();
    let mut t = TripleShares { a: BitVec::zeros(n), b: BitVec::zeros(n), c: BitVec::zeros(n) };
    for i in 0..n {
        sent[i].consume()?;
        received[i].consume()?;
        let a = (sent[i].r0 ^ sent[i].r1) & 1 == 1;
        let u = sent[i].r0 & 1 == 1;
        let b = received[i].c;
        let u2 = received[i].rc & 1 == 1;
        t.a.set(i, a);
        t.b.set(i, b);
        t.c.set(i, (a & b) ^ u ^ u2);
    }
    Ok(t)
}

/// Correlation counts one party needs with one peer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelationPlan {
    /// ROTs with this party as sender.
    pub rot_send: usize,
    /// ROTs with this party as receiver.
    pub rot_recv: usize,
    pub triples: usize,
}

/// Correlations with one peer, consumed strictly in order.
#[derive(Debug, Default)]
pub struct CorrelationStore {
    send: Vec<RotSenderOut>,
    send_next: usize,
    recv: Vec<RotReceiverOut>,
    recv_next: usize,
    triples: TripleShares,
    triple_next: usize,
}

impl CorrelationStore {
    pub fn new(send: Vec<RotSenderOut>, recv: Vec<RotReceiverOut>, triples: TripleShares) -> Self {
        Self { send, send_next: 0, recv, recv_next: 0, triples, triple_next: 0 }
    }

    pub fn take_send(&mut self, n: usize) -> Result<&mut [RotSenderOut]> {
        let available = self.send.len() - self.send_next;
        if n > available {
            return Err(Error::ResourceExhausted { needed: n, available });
        }
        let s = &mut self.send[self.send_next..self.send_next + n];
        self.send_next += n;
        Ok(s)
    }

    pub fn take_recv(&mut self, n: usize) -> Result<&mut [RotReceiverOut]> {
        let available = self.recv.len() - self.recv_next;
        if n > available {
            return Err(Error::ResourceExhausted { needed: n, available });
        }
        let s = &mut self.recv[self.recv_next..self.recv_next + n];
        self.recv_next += n;
        Ok(s)
    }

    pub fn take_triples(&mut self, n: usize) -> Result<TripleShares> {
        let available = self.triples.len() - self.triple_next;
        if n > available {
            return Err(Error::TriplesExhausted { needed: n, available });
        }
        let t = self.triples.slice(self.triple_next, n);
        self.triple_next += n;
        Ok(t)
    }

    pub fn remaining(&self) -> CorrelationPlan {
        CorrelationPlan {
            rot_send: self.send.len() - self.send_next,
            rot_recv: self.recv.len() - self.recv_next,
            triples: self.triples.len() - self.triple_next,
        }
    }
}

/// Fills a store with one peer according to `plan` (the peer's plan must
/// mirror it). Interactive mode runs the lower party's sender batch first.
pub fn provision<G: PrimeGroup, R: RngCore + CryptoRng>(
    ch: &mut Channel,
    ctx: &OtContext<G>,
    plan: CorrelationPlan,
    rng: &mut R,
) -> Result<CorrelationStore> {
    let (me, peer) = (ch.me(), ch.peer());
    let t = plan.triples;
    if ctx.mode == ResourceMode::Dealer {
        dealer_exchange(ch, ctx.mode, plan.rot_send + plan.rot_recv + 2 * t)?;
        let send = dealer_rots(&ctx.dealer_seed, me, peer, b"pool", plan.rot_send).0;
        let recv = dealer_rots(&ctx.dealer_seed, peer, me, b"pool", plan.rot_recv).1;
        let (lo, hi) = dealer_triples(&ctx.dealer_seed, me.min(peer), me.max(peer), b"pool", t);
        let triples = if me < peer { lo } else { hi };
        return Ok(CorrelationStore::new(send, recv, triples));
    }
    let (mut send, mut recv) = if me < peer {
        let s = rot_send(ch, ctx, plan.rot_send + t, b"pool", rng)?;
        let r = rot_recv(ch, ctx, plan.rot_recv + t, b"pool", rng)?;
        (s, r)
    } else {
        let r = rot_recv(ch, ctx, plan.rot_recv + t, b"pool", rng)?;
        let s = rot_send(ch, ctx, plan.rot_send + t, b"pool", rng)?;
        (s, r)
    };
    let send_rest = send.split_off(t);
    let recv_rest = recv.split_off(t);
    let triples = triples_from_rots(&mut send, &mut recv)?;
    Ok(CorrelationStore::new(send_rest, recv_rest, triples))
}

/// Chosen-payload OT, sender side: consumes `rots`, waits for the
/// receiver's derandomization bits and answers with masked payload pairs.
pub fn chosen_ot_send(ch: &mut Channel, rots: &mut [RotSenderOut], payloads: &[(Vec<u8>, Vec<u8>)], tag: Tag) -> Result<()> {
    let n = payloads.len();
    let d = BitVec::from_bytes(&ch.recv(Tag::OtDerand)?, n)?;
    let pairs: Vec<(Block, Block)> = rots.iter_mut().enumerate().map(|(i, r)| r.derandomize(d.get(i))).collect::<Result<_>>()?;
    let out: Vec<Vec<u8>> = crate::par::map_range(n, |i| {
        let (m0, m1) = &payloads[i];
        let mut e = crate::util::xor(m0, &pad(pairs[i].0, m0.len()));
        e.extend_from_slice(&crate::util::xor(m1, &pad(pairs[i].1, m1.len())));
        e
    });
    ch.send(tag, out.concat())
}

/// Chosen-payload OT, receiver side: sends `d = choice ⊕ c` for every
/// instance, then unmasks the chosen payload of each `len`-byte pair.
pub fn chosen_ot_recv(ch: &mut Channel, rots: &mut [RotReceiverOut], choices: &BitVec, len: usize, tag: Tag) -> Result<Vec<Vec<u8>>> {
    let n = choices.len();
    let mut d = BitVec::zeros(n);
    let mut keys = Vec::with_capacity(n);
    for (i, r) in rots.iter_mut().enumerate() {
        let (bit, k) = r.derandomize(choices.get(i))?;
        d.set(i, bit);
        keys.push(k);
    }
    ch.send(Tag::OtDerand, d.to_bytes())?;
    let p = ch.recv(tag)?;
    if p.len() != n * 2 * len {
        return Err(Error::malformed("chosen OT payload size"));
    }
    Ok(crate::par::map_range(n, |i| {
        let off = i * 2 * len + if choices.get(i) { len } else { 0 };
        crate::util::xor(&p[off..off + len], &pad(keys[i], len))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::ModpGroup;
    use crate::net::{memory, Network};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::time::Duration;

    fn pair() -> (Network, Network) {
        let mut links = memory::mesh(2);
        let l1 = links.pop().unwrap();
        let l0 = links.pop().unwrap();
        (Network::new(0, l0, Duration::from_secs(10)), Network::new(1, l1, Duration::from_secs(10)))
    }

    fn ctx(mode: ResourceMode) -> OtContext<ModpGroup> {
        OtContext { group: ModpGroup::standard(), mode, dealer_seed: [5; 32] }
    }

    fn run_rots(mode: ResourceMode, count: usize) -> (Vec<RotSenderOut>, Vec<RotReceiverOut>) {
        let (mut n0, mut n1) = pair();
        std::thread::scope(|s| {
            let h = s.spawn(move || {
                let c = ctx(mode);
                n1.fork(vec![(0, ())], |ch, ()| rot_recv(ch, &c, count, b"t", &mut ChaCha20Rng::seed_from_u64(2))).unwrap().pop().unwrap()
            });
            let c = ctx(mode);
            let snd = n0.fork(vec![(1, ())], |ch, ()| rot_send(ch, &c, count, b"t", &mut ChaCha20Rng::seed_from_u64(1))).unwrap().pop().unwrap();
            (snd, h.join().unwrap())
        })
    }

    #[test]
    fn rot_contract_all_backends() {
        for (mode, count) in [(ResourceMode::Dealer, 1000), (ResourceMode::Interactive, 100), (ResourceMode::Interactive, 1000)] {
            let (s, r) = run_rots(mode, count);
            assert_eq!(s.len(), count);
            let mut ones = 0;
            for (s, r) in s.iter().zip(&r) {
                let want = if r.choice() { s.r1() } else { s.r0() };
                let other = if r.choice() { s.r0() } else { s.r1() };
                assert_eq!(r.value(), want);
                assert_ne!(r.value(), other);
                ones += r.choice() as usize;
            }
            assert!(ones > count / 3 && ones < 2 * count / 3, "{mode:?}: {ones}");
        }
    }

    #[test]
    fn derandomization_table() {
        for c in [false, true] {
            for chosen in [false, true] {
                let mut s = RotSenderOut::new(10, 20);
                let mut r = RotReceiverOut::new(c, if c { 20 } else { 10 });
                let (d, v) = r.derandomize(chosen).unwrap();
                assert_eq!(d, c ^ chosen);
                let (m0, m1) = s.derandomize(d).unwrap();
                assert_eq!(v, if chosen { m1 } else { m0 });
                assert!(matches!(r.derandomize(chosen), Err(Error::ReusedCorrelation)));
                assert!(matches!(s.derandomize(d), Err(Error::ReusedCorrelation)));
            }
        }
    }

    #[test]
    fn dealer_triples_reconstruct() {
        let (t0, t1) = dealer_triples(&[9; 32], 0, 1, b"x", 10_000);
        let a = t0.a.xor(&t1.a).unwrap();
        let b = t0.b.xor(&t1.b).unwrap();
        assert_eq!(t0.c.xor(&t1.c).unwrap(), a.and(&b).unwrap());
        assert_eq!(dealer_triples(&[9; 32], 0, 1, b"x", 10_000).0, t0);
    }

    #[test]
    fn rot_triples_reconstruct() {
        let (mut s01, mut r01) = dealer_rots(&[1; 32], 0, 1, b"", 5000);
        let (mut s10, mut r10) = dealer_rots(&[1; 32], 1, 0, b"", 5000);
        let t0 = triples_from_rots(&mut s01, &mut r10).unwrap();
        let t1 = triples_from_rots(&mut s10, &mut r01).unwrap();
        let a = t0.a.xor(&t1.a).unwrap();
        let b = t0.b.xor(&t1.b).unwrap();
        assert_eq!(t0.c.xor(&t1.c).unwrap(), a.and(&b).unwrap());
        assert!(matches!(triples_from_rots(&mut s01, &mut r10), Err(Error::ReusedCorrelation)));
    }

    #[test]
    fn mode_mismatch_detected() {
        let (mut n0, mut n1) = pair();
        let r = std::thread::scope(|s| {
            let h = s.spawn(move || {
                let c = ctx(ResourceMode::Interactive);
                n1.fork(vec![(0, ())], |ch, ()| rot_recv(ch, &c, 10, b"t", &mut ChaCha20Rng::seed_from_u64(2)))
            });
            let c = ctx(ResourceMode::Dealer);
            let _ = n0.fork(vec![(1, ())], |ch, ()| rot_send(ch, &c, 10, b"t", &mut ChaCha20Rng::seed_from_u64(1)));
            h.join().unwrap()
        });
        assert!(matches!(r, Err(Error::ModeMismatch)));
    }

    #[test]
    fn store_exhaustion() {
        let (s, r) = dealer_rots(&[0; 32], 0, 1, b"", 3);
        let mut st = CorrelationStore::new(s, r, TripleShares::default());
        assert!(st.take_send(2).is_ok());
        assert!(matches!(st.take_send(2), Err(Error::ResourceExhausted { needed: 2, available: 1 })));
        assert!(matches!(st.take_triples(1), Err(Error::TriplesExhausted { .. })));
    }
}
