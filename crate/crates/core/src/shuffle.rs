//! Secret-shared shuffling.
//!
//! `permute_share` lets a permuter who knows `π` and a holder who knows `x`
//! obtain XOR shares of `π(x)`. The interactive backend is an oblivious
//! switching network: the holder masks every wire of a Waksman network and
//! the permuter picks each switch's correction pair by OT with its switch
//! setting as choice bit. The dealer backend is share translation, with the
//! masks drawn from the shared dealer seed (insecure, tests only).
//!
//! Permutations act as `out[i] = in[perm[i]]`.

use rand::seq::SliceRandom;
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitVec;
use crate::error::{Error, Result};
use crate::net::{Channel, Network, Tag};
use crate::ot::{chosen_ot_recv, chosen_ot_send, CorrelationStore};
use crate::util::{derive_seed, prg, xor, ByteRows};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShuffleMode {
    /// Share translation with dealer-provided masks.
    Dealer,
    /// Pairwise oblivious switching networks.
    Distributed,
}

impl std::str::FromStr for ShuffleMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dealer" => Ok(ShuffleMode::Dealer),
            "distributed" => Ok(ShuffleMode::Distributed),
            other => Err(format!("unknown shuffle mode '{other}' (expected dealer|distributed)")),
        }
    }
}

/// Waksman permutation network on a power-of-two number of wires. The
/// first output switch of every subnetwork is fixed straight.
#[derive(Clone, Debug)]
pub struct Waksman {
    size: usize,
    /// `[in0, in1, out0, out1]` wire ids in evaluation order.
    switches: Vec<[usize; 4]>,
    outputs: Vec<usize>,
    wires: usize,
}

impl Waksman {
    pub fn new(size: usize) -> Self {
        assert!(size.is_power_of_two(), "network size must be a power of two");
        let mut w = Self { size, switches: Vec::new(), outputs: Vec::new(), wires: size };
        w.outputs = w.build((0..size).collect());
        w
    }

    fn wire(&mut self) -> usize {
        self.wires += 1;
        self.wires - 1
    }

    fn switch(&mut self, a: usize, b: usize) -> (usize, usize) {
        let (o0, o1) = (self.wire(), self.wire());
        self.switches.push([a, b, o0, o1]);
        (o0, o1)
    }

    fn build(&mut self, inputs: Vec<usize>) -> Vec<usize> {
        let n = inputs.len();
        if n == 1 {
            return inputs;
        }
        if n == 2 {
            let (a, b) = self.switch(inputs[0], inputs[1]);
            return vec![a, b];
        }
        let half = n / 2;
        let (mut up, mut lo) = (Vec::with_capacity(half), Vec::with_capacity(half));
        for s in 0..half {
            let (a, b) = self.switch(inputs[2 * s], inputs[2 * s + 1]);
            up.push(a);
            lo.push(b);
        }
        let up = self.build(up);
        let lo = self.build(lo);
        let mut out = vec![up[0], lo[0]];
        for t in 1..half {
            let (a, b) = self.switch(up[t], lo[t]);
            out.push(a);
            out.push(b);
        }
        out
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn num_switches(&self) -> usize {
        self.switches.len()
    }

    pub fn num_wires(&self) -> usize {
        self.wires
    }

    /// Switch settings (`true` = crossed) realizing `perm`.
    pub fn route(&self, perm: &[usize]) -> BitVec {
        assert_eq!(perm.len(), self.size);
        let mut out = Vec::with_capacity(self.switches.len());
        route_into(perm, &mut out);
        debug_assert_eq!(out.len(), self.switches.len());
        BitVec::from_bools(&out)
    }

    /// Plaintext evaluation.
    pub fn evaluate<T: Clone>(&self, settings: &BitVec, inputs: &[T]) -> Vec<T> {
        assert_eq!(inputs.len(), self.size);
        let mut vals: Vec<Option<T>> = vec![None; self.wires];
        for (i, v) in inputs.iter().enumerate() {
            vals[i] = Some(v.clone());
        }
        for (k, &[a, b, o0, o1]) in self.switches.iter().enumerate() {
            let (x, y) = (vals[a].take().unwrap(), vals[b].take().unwrap());
            let (x, y) = if settings.get(k) { (y, x) } else { (x, y) };
            vals[o0] = Some(x);
            vals[o1] = Some(y);
        }
        self.outputs.iter().map(|&w| vals[w].take().unwrap()).collect()
    }
}

fn route_into(perm: &[usize], out: &mut Vec<bool>) {
    let n = perm.len();
    if n == 1 {
        return;
    }
    if n == 2 {
        out.push(perm[0] == 1);
        return;
    }
    let half = n / 2;
    let mut inv = vec![0usize; n];
    for (o, &i) in perm.iter().enumerate() {
        inv[i] = o;
    }
    // Side 0 is the upper subnetwork.
    let mut out_side: Vec<Option<u8>> = vec![None; n];
    let mut in_side: Vec<Option<u8>> = vec![None; n];
    for start in 0..half {
        if out_side[2 * start].is_some() {
            continue;
        }
        let mut o = 2 * start;
        loop {
            out_side[o] = Some(0);
            out_side[o ^ 1] = Some(1);
            let i = perm[o];
            in_side[i] = Some(0);
            in_side[i ^ 1] = Some(1);
            o = inv[i ^ 1] ^ 1;
            if out_side[o].is_some() {
                break;
            }
        }
    }
    let mut up = vec![0usize; half];
    let mut lo = vec![0usize; half];
    for o in 0..n {
        let s = perm[o] / 2;
        if out_side[o] == Some(0) {
            up[o / 2] = s;
        } else {
            lo[o / 2] = s;
        }
    }
    for s in 0..half {
        out.push(in_side[2 * s] == Some(1));
    }
    route_into(&up, out);
    route_into(&lo, out);
    for t in 1..half {
        out.push(out_side[2 * t] == Some(1));
    }
}

/// Network size used for `n` rows.
pub fn padded_size(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

/// ROTs one interactive `permute_share` on `n` rows consumes.
pub fn osn_rot_count(n: usize) -> usize {
    Waksman::new(padded_size(n)).num_switches()
}

fn extend_perm(perm: &[usize], size: usize) -> Vec<usize> {
    let mut p = perm.to_vec();
    p.extend(perm.len()..size);
    p
}

/// Dealer masks `(a, b)` for one permute_share invocation.
fn dealer_masks(seed: &[u8; 32], label: &[u8], n: usize, width: usize) -> (ByteRows, ByteRows) {
    let mut rng = prg(derive_seed(seed, &[b"shuffle-masks".as_slice(), label].concat()));
    let a = ByteRows::random(&mut rng, n, width);
    let b = ByteRows::random(&mut rng, n, width);
    (a, b)
}

/// Backend and resources for `permute_share`.
pub enum Backend<'a> {
    Dealer { seed: &'a [u8; 32], label: &'a [u8] },
    Osn { store: &'a mut CorrelationStore },
}

/// Permuter side: returns its share of `perm(x)`.
pub fn permute_share_permuter(ch: &mut Channel, backend: Backend<'_>, perm: &[usize], width: usize) -> Result<ByteRows> {
    let n = perm.len();
    match backend {
        Backend::Dealer { seed, label } => {
            let (a, b) = dealer_masks(seed, label, n, width);
            let mut delta = a.permuted(perm);
            delta.xor_assign(&b);
            let y = ByteRows::from_flat(width, recv_rows(ch, Tag::ShufInput, n, width)?);
            let mut out = y.permuted(perm);
            out.xor_assign(&delta);
            Ok(out)
        }
        Backend::Osn { store } => {
            let size = padded_size(n);
            let net = Waksman::new(size);
            let settings = net.route(&extend_perm(perm, size));
            let rots = store.take_recv(net.num_switches())?;
            let corr = chosen_ot_recv(ch, rots, &settings, 2 * width, Tag::ShufSwitchOt)?;
            let masked = recv_rows(ch, Tag::ShufInput, size, width)?;
            let mut vals: Vec<Vec<u8>> = vec![Vec::new(); net.num_wires()];
            for (i, r) in masked.chunks_exact(width).enumerate() {
                vals[i] = r.to_vec();
            }
            for (k, &[a, b, o0, o1]) in net.switches.iter().enumerate() {
                // Crossed: out0 takes in1 and out1 takes in0.
                let (src0, src1) = if settings.get(k) { (b, a) } else { (a, b) };
                vals[o0] = xor(&vals[src0], &corr[k][..width]);
                vals[o1] = xor(&vals[src1], &corr[k][width..]);
            }
            let mut out = ByteRows::zeros(n, width);
            for i in 0..n {
                out.row_mut(i).copy_from_slice(&vals[net.outputs[i]]);
            }
            Ok(out)
        }
    }
}

/// Holder side: returns its share of `perm(x)`.
pub fn permute_share_holder<R: RngCore + CryptoRng>(
    ch: &mut Channel,
    backend: Backend<'_>,
    x: &ByteRows,
    rng: &mut R,
) -> Result<ByteRows> {
    let (n, width) = (x.len(), x.width());
    match backend {
        Backend::Dealer { seed, label } => {
            let (a, b) = dealer_masks(seed, label, n, width);
            let mut y = x.clone();
            y.xor_assign(&a);
            ch.send(Tag::ShufInput, y.into_flat())?;
            Ok(b)
        }
        Backend::Osn { store } => {
            let size = padded_size(n);
            let net = Waksman::new(size);
            let masks = ByteRows::random(rng, net.num_wires(), width);
            let payloads: Vec<(Vec<u8>, Vec<u8>)> = crate::par::map(&net.switches, |&[a, b, o0, o1]| {
                let (wa, wb, m0, m1) = (masks.row(a), masks.row(b), masks.row(o0), masks.row(o1));
                let straight = [xor(wa, m0), xor(wb, m1)].concat();
                let crossed = [xor(wb, m0), xor(wa, m1)].concat();
                (straight, crossed)
            });
            let rots = store.take_send(net.num_switches())?;
            chosen_ot_send(ch, rots, &payloads, Tag::ShufSwitchOt)?;
            let mut masked = ByteRows::zeros(size, width);
            for i in 0..size {
                let row = masked.row_mut(i);
                if i < n {
                    row.copy_from_slice(x.row(i));
                }
                crate::util::xor_in_place(row, masks.row(i));
            }
            ch.send(Tag::ShufInput, masked.into_flat())?;
            let mut out = ByteRows::zeros(n, width);
            for i in 0..n {
                out.row_mut(i).copy_from_slice(masks.row(net.outputs[i]));
            }
            Ok(out)
        }
    }
}

fn recv_rows(ch: &mut Channel, tag: Tag, n: usize, width: usize) -> Result<Vec<u8>> {
    let p = ch.recv(tag)?;
    if p.len() != n * width {
        return Err(Error::malformed(format!("{tag:?}: expected {n} rows of {width} bytes")));
    }
    Ok(p)
}

/// Result of a multi-party shuffle at one party.
#[derive(Clone, Debug)]
pub struct ShuffleOutput {
    pub share: ByteRows,
    /// This party's own permutation.
    pub perm: Vec<usize>,
}

/// Every party permutes the shared vector in turn with a private uniform
/// permutation; the result is a fresh sharing of the composed permutation.
/// `stores[peer]` must hold `osn_rot_count(n)` ROTs in each direction for
/// the distributed mode.
pub fn ms_shuffle<R: RngCore + CryptoRng>(
    net: &mut Network,
    mode: ShuffleMode,
    stores: &mut [Option<CorrelationStore>],
    dealer_seed: &[u8; 32],
    share: ByteRows,
    rng: &mut R,
) -> Result<ShuffleOutput> {
    let (me, m) = (net.me(), net.m());
    let (n, width) = (share.len(), share.width());
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut cur = share;
    for k in 0..m {
        let label = |holder: usize| [(k as u32).to_le_bytes(), (holder as u32).to_le_bytes()].concat();
        if k == me {
            let mut work = Vec::new();
            let mut refs: Vec<Option<&mut CorrelationStore>> = stores.iter_mut().map(Option::as_mut).collect();
            for h in net.peers() {
                let store = match mode {
                    ShuffleMode::Dealer => None,
                    ShuffleMode::Distributed => Some(
                        refs[h].take().ok_or_else(|| Error::InvalidConfig(format!("no correlations with party {h}")))?,
                    ),
                };
                work.push((h, store));
            }
            let parts = net.fork(work, |ch, store| {
                let lbl = label(ch.peer());
                let backend = match store {
                    Some(store) => Backend::Osn { store },
                    None => Backend::Dealer { seed: dealer_seed, label: &lbl },
                };
                permute_share_permuter(ch, backend, &perm, width)
            })?;
            let mut next = cur.permuted(&perm);
            for p in &parts {
                next.xor_assign(p);
            }
            cur = next;
        } else {
            let lbl = label(me);
            let store = match mode {
                ShuffleMode::Dealer => None,
                ShuffleMode::Distributed => Some(
                    stores
                        .get_mut(k)
                        .and_then(Option::as_mut)
                        .ok_or_else(|| Error::InvalidConfig(format!("no correlations with party {k}")))?,
                ),
            };
            let mut seed = [0u8; 32];
            rng.fill_bytes(&mut seed);
            let input = std::mem::take(&mut cur);
            let out = net.fork(vec![(k, (store, input))], |ch, (store, input)| {
                let backend = match store {
                    Some(store) => Backend::Osn { store },
                    None => Backend::Dealer { seed: dealer_seed, label: &lbl },
                };
                permute_share_holder(ch, backend, &input, &mut ChaCha12Rng::from_seed(seed))
            })?;
            cur = out.into_iter().next().expect("one session");
        }
    }
    let cur = refresh(net, cur, rng)?;
    Ok(ShuffleOutput { share: cur, perm })
}

/// Adds a ring of zero-sum masks so no share equals a value some party
/// produced during the rounds.
fn refresh<R: RngCore + CryptoRng>(net: &mut Network, mut share: ByteRows, rng: &mut R) -> Result<ByteRows> {
    let (me, m) = (net.me(), net.m());
    let (next, prev) = ((me + 1) % m, (me + m - 1) % m);
    let z = ByteRows::random(rng, share.len(), share.width());
    share.xor_assign(&z);
    let (n, width) = (share.len(), share.width());
    let work: Vec<(usize, Option<Vec<u8>>)> = if next == prev {
        vec![(next, Some(z.into_flat()))]
    } else {
        vec![(next, Some(z.into_flat())), (prev, None)]
    };
    let got = net.fork(work, |ch, out| {
        let mut got = None;
        if let Some(z) = out {
            ch.send(Tag::ShufMask, z)?;
        }
        if ch.peer() == prev {
            got = Some(recv_rows(ch, Tag::ShufMask, n, width)?);
        }
        Ok(got)
    })?;
    for z in got.into_iter().flatten() {
        share.xor_assign(&ByteRows::from_flat(width, z));
    }
    Ok(share)
}

/// Uniformly random permutation from a seed, for tests and demos.
pub fn random_perm(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut ChaCha12Rng::seed_from_u64(seed));
    p
}
