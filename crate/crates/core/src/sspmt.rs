//! Secret-shared private equality tests and batched secret-shared private
//! membership tests.
//!
//! Equality of two `γ`-bit strings is the AND of their XNOR bits, evaluated
//! with Beaver triples in a balanced tree of `⌈log₂ γ⌉` layers. The batched
//! membership test runs an OPPRF per bin and compares its output with the
//! sender's per-bin secret.

use rand::{CryptoRng, RngCore};

use crate::binning::{CuckooTable, ProtocolParams, SimpleTable};
use crate::bits::BitVec;
use crate::error::{Error, Result};
use crate::group::PrimeGroup;
use crate::net::{Channel, Tag};
use crate::opprf::{opprf_key, opprf_recv, opprf_send, Programmed};
use crate::ot::{CorrelationStore, TripleShares};
use crate::util::{ceil_log2, ByteRows};

/// Triples consumed by one equality test on `bits`-bit strings.
pub fn triples_per_test(bits: usize) -> usize {
    bits.saturating_sub(1)
}

/// AND layers of the equality circuit.
pub fn layers(bits: usize) -> u32 {
    ceil_log2(bits.max(1) as u64)
}

fn bits_of(rows: &ByteRows, bits: usize) -> BitVec {
    let mut v = BitVec::zeros(rows.len() * bits);
    for (i, r) in rows.rows().enumerate() {
        for j in 0..bits {
            v.set(i * bits + j, r[j / 8] >> (j % 8) & 1 == 1);
        }
    }
    v
}

/// Beaver AND of shared vectors; `lead` adds the public `d·e` term.
fn and_layer(ch: &mut Channel, x: &BitVec, y: &BitVec, t: &TripleShares, lead: bool) -> Result<BitVec> {
    let n = x.len();
    let d = x.xor(&t.a)?;
    let e = y.xor(&t.b)?;
    let mut msg = d.to_bytes();
    msg.extend_from_slice(&e.to_bytes());
    ch.send(Tag::GmwAndLayer, msg)?;
    let theirs = ch.recv(Tag::GmwAndLayer)?;
    let half = n.div_ceil(8);
    if theirs.len() != 2 * half {
        return Err(Error::malformed("AND layer size"));
    }
    let d = d.xor(&BitVec::from_bytes(&theirs[..half], n)?)?;
    let e = e.xor(&BitVec::from_bytes(&theirs[half..], n)?)?;
    let mut z = t.c.xor(&d.and(&t.b)?)?.xor(&e.and(&t.a)?)?;
    if lead {
        z = z.xor(&d.and(&e)?)?;
    }
    Ok(z)
}

/// Batched ssPEQT on `rows.len()` strings of `bits` bits each. The two
/// parties' outputs XOR to 1 exactly where their strings are equal.
/// `lead` must be set on exactly one side.
pub fn peqt(ch: &mut Channel, store: &mut CorrelationStore, rows: &ByteRows, bits: usize, lead: bool) -> Result<BitVec> {
    let count = rows.len();
    let mut cur = bits_of(rows, bits);
    if lead {
        cur = cur.not();
    }
    let triples = store.take_triples(count * triples_per_test(bits))?;
    let mut used = 0;
    let mut width = bits;
    while width > 1 {
        let pairs = width / 2;
        let mut x = BitVec::zeros(count * pairs);
        let mut y = BitVec::zeros(count * pairs);
        for i in 0..count {
            for k in 0..pairs {
                x.set(i * pairs + k, cur.get(i * width + 2 * k));
                y.set(i * pairs + k, cur.get(i * width + 2 * k + 1));
            }
        }
        let t = triples.slice(used, count * pairs);
        used += count * pairs;
        let z = and_layer(ch, &x, &y, &t, lead)?;
        let next_width = pairs + width % 2;
        let mut next = BitVec::zeros(count * next_width);
        for i in 0..count {
            for k in 0..pairs {
                next.set(i * next_width + k, z.get(i * pairs + k));
            }
            if width % 2 == 1 {
                next.set(i * next_width + pairs, cur.get(i * width + width - 1));
            }
        }
        cur = next;
        width = next_width;
    }
    debug_assert_eq!(used, triples.len());
    Ok(cur)
}

/// Sender side of batched ssPMT: programs a fresh random secret for every
/// bin at all of its simple-table entries, then compares.
pub fn sspmt_send<G: PrimeGroup, R: RngCore + CryptoRng>(
    ch: &mut Channel,
    group: &G,
    params: &ProtocolParams,
    table: &SimpleTable,
    store: &mut CorrelationStore,
    rng: &mut R,
) -> Result<BitVec> {
    let gb = params.gamma_bytes();
    let secrets = ByteRows::random(rng, table.num_bins(), gb);
    let mut points: Vec<Programmed> = Vec::with_capacity(table.total_entries());
    for (b, bin) in table.bins.iter().enumerate() {
        for t in bin {
            points.push((b, opprf_key(b, t.elem, t.tag), secrets.row(b).to_vec()));
        }
    }
    opprf_send(ch, group, table.num_bins(), &points, gb, rng)?;
    peqt(ch, store, &secrets, params.gamma as usize, true)
}

/// Receiver side of batched ssPMT over its Cuckoo table.
pub fn sspmt_recv<G: PrimeGroup, R: RngCore + CryptoRng>(
    ch: &mut Channel,
    group: &G,
    params: &ProtocolParams,
    table: &CuckooTable,
    store: &mut CorrelationStore,
    rng: &mut R,
) -> Result<BitVec> {
    let queries: Vec<Vec<u8>> = table
        .bins
        .iter()
        .enumerate()
        .map(|(b, slot)| match slot {
            Some(t) => opprf_key(b, t.elem, t.tag),
            None => opprf_key(b, 0, 0),
        })
        .collect();
    let t = opprf_recv(ch, group, &queries, params.gamma_bytes(), rng)?;
    peqt(ch, store, &t, params.gamma as usize, false)
}
