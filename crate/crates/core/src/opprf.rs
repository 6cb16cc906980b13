//! Batched OPRF and OPPRF.
//!
//! The OPRF is the blinded Diffie-Hellman construction with one key per bin:
//! `F_k(q) = H(q ‖ H_G(q)^k)`. The OPPRF sender programs its points by
//! OKVS-encoding `value ⊕ F_k(key)` over all bins at once; the receiver
//! decodes at its query and strips its OPRF output.

use rand::{CryptoRng, RngCore};

use crate::error::{Error, Result};
use crate::group::PrimeGroup;
use crate::net::{Channel, Tag};
use crate::okvs::{okvs_encode, OkvsTable};
use crate::util::{hash_to_len, xor, ByteRows};

/// OKVS and OPRF key for element `x` placed in `bin` by hash `tag`.
/// Tag 0 marks a receiver's empty-bin placeholder, which no sender programs.
pub fn opprf_key(bin: usize, x: u64, tag: u8) -> Vec<u8> {
    let mut k = Vec::with_capacity(13);
    k.extend_from_slice(&(bin as u32).to_le_bytes());
    k.extend_from_slice(&x.to_le_bytes());
    k.push(tag);
    k
}

pub(crate) fn finalize<G: PrimeGroup>(group: &G, input: &[u8], y: &G::Elem, out_len: usize) -> Vec<u8> {
    hash_to_len(b"oprf-out", &[input, &group.encode(y)], out_len)
}

/// Evaluates the PRF directly with the key.
pub fn oprf_eval<G: PrimeGroup>(group: &G, key: &G::Scalar, input: &[u8], out_len: usize) -> Vec<u8> {
    let y = group.exp(&group.hash_to_group(input), key);
    finalize(group, input, &y, out_len)
}

/// Key holder side of a batch: one key per query, in order.
pub fn oprf_send<G: PrimeGroup>(ch: &mut Channel, group: &G, keys: &[G::Scalar]) -> Result<()> {
    let el = group.elem_len();
    let blinded = ch.recv(Tag::OprfBlinded)?;
    if blinded.len() != keys.len() * el {
        return Err(Error::malformed(format!(
            "expected {} blinded queries, got {} bytes",
            keys.len(),
            blinded.len()
        )));
    }
    let points: Vec<G::Elem> = blinded.chunks_exact(el).map(|c| group.decode(c)).collect::<Result<_>>()?;
    let idx: Vec<usize> = (0..points.len()).collect();
    let resp = crate::par::map(&idx, |&i| group.encode(&group.exp(&points[i], &keys[i])));
    ch.send(Tag::OprfResponse, resp.concat())
}

/// Querier side: returns `F_{k_i}(queries[i])`.
pub fn oprf_recv<G: PrimeGroup, R: RngCore + CryptoRng>(
    ch: &mut Channel,
    group: &G,
    queries: &[Vec<u8>],
    out_len: usize,
    rng: &mut R,
) -> Result<Vec<Vec<u8>>> {
    let el = group.elem_len();
    let blinds: Vec<G::Scalar> = queries.iter().map(|_| group.random_nonzero_scalar(rng)).collect();
    let blinded = crate::par::map_range(queries.len(), |i| {
        group.encode(&group.exp(&group.hash_to_group(&queries[i]), &blinds[i]))
    });
    ch.send(Tag::OprfBlinded, blinded.concat())?;
    let resp = ch.recv(Tag::OprfResponse)?;
    if resp.len() != queries.len() * el {
        return Err(Error::malformed("OPRF response length"));
    }
    let points: Vec<G::Elem> = resp.chunks_exact(el).map(|c| group.decode(c)).collect::<Result<_>>()?;
    Ok(crate::par::map_range(queries.len(), |i| {
        let inv = group.scalar_invert(&blinds[i]).expect("blinds are nonzero");
        finalize(group, &queries[i], &group.exp(&points[i], &inv), out_len)
    }))
}

/// A programmed point: `(bin, key, value)`.
pub type Programmed = (usize, Vec<u8>, Vec<u8>);

/// OPPRF sender over `num_bins` bins. Keys must be pairwise distinct and
/// every value `out_len` bytes long.
pub fn opprf_send<G: PrimeGroup, R: RngCore + CryptoRng>(
    ch: &mut Channel,
    group: &G,
    num_bins: usize,
    points: &[Programmed],
    out_len: usize,
    rng: &mut R,
) -> Result<()> {
    let keys: Vec<G::Scalar> = (0..num_bins).map(|_| group.random_nonzero_scalar(rng)).collect();
    let pairs: Vec<(Vec<u8>, Vec<u8>)> = crate::par::map(points, |(bin, key, value)| {
        assert_eq!(value.len(), out_len, "programmed value width");
        (key.clone(), xor(value, &oprf_eval(group, &keys[*bin], key, out_len)))
    });
    let table = okvs_encode(&pairs, out_len, rng)?;
    // The table does not depend on the receiver, so it shares a flight
    // with the blinded queries.
    ch.send(Tag::OkvsTable, table.to_bytes())?;
    oprf_send(ch, group, &keys)
}

/// OPPRF receiver: `queries[b]` is evaluated under bin `b`'s key.
pub fn opprf_recv<G: PrimeGroup, R: RngCore + CryptoRng>(
    ch: &mut Channel,
    group: &G,
    queries: &[Vec<u8>],
    out_len: usize,
    rng: &mut R,
) -> Result<ByteRows> {
    let table = OkvsTable::from_bytes(&ch.recv(Tag::OkvsTable)?)?;
    if table.value_bytes != out_len {
        return Err(Error::malformed("OKVS value width differs from OPPRF output"));
    }
    let f = oprf_recv(ch, group, queries, out_len, rng)?;
    let decoded = table.decode_many(queries);
    let mut out = ByteRows::zeros(queries.len(), out_len);
    for (i, (d, f)) in decoded.iter().zip(&f).enumerate() {
        out.row_mut(i).copy_from_slice(&xor(d, f));
    }
    Ok(out)
}
