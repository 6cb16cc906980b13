//! Random band-matrix OKVS over GF(2).
//!
//! Each key hashes to a start column and a 128-bit band; the table is the
//! solution of the band linear system `⟨band(k), T⟩ = v(k)`, found by
//! incremental band-limited elimination. Unconstrained columns are filled
//! with fresh randomness so the table is independent of the key set.

use rand::{CryptoRng, RngCore};

use crate::error::{Error, Result};
use crate::util::{hash_parts, random_bytes, ByteRows};

/// Table expansion factor (numerator over 100).
pub const EXPANSION_PERCENT: usize = 130;
pub const BAND_WIDTH: usize = 128;
/// Encoding attempts (each with a fresh seed) before giving up.
pub const MAX_ATTEMPTS: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OkvsTable {
    pub seed: [u8; 16],
    pub value_bytes: usize,
    pub rows: ByteRows,
}

/// Row count for `n` encoded pairs: `max(⌈1.30·n⌉, w)`.
pub fn table_rows(n: usize) -> usize {
    (EXPANSION_PERCENT * n).div_ceil(100).max(BAND_WIDTH)
}

fn band_for(seed: &[u8; 16], rows: usize, key: &[u8]) -> (usize, u128) {
    let d = hash_parts(b"okvs-band", &[seed, key]);
    let span = (rows - BAND_WIDTH + 1) as u64;
    let start = (u64::from_le_bytes(d[..8].try_into().unwrap()) % span) as usize;
    // Bit 0 forced so every band has a pivot at its start column.
    let band = u128::from_le_bytes(d[8..24].try_into().unwrap()) | 1;
    (start, band)
}

struct PivotRow {
    band: u128,
    value: Vec<u8>,
}

/// Encodes `(key, value)` pairs; keys must be pairwise distinct and all
/// values `value_bytes` long.
pub fn okvs_encode<R: RngCore + CryptoRng>(
    pairs: &[(Vec<u8>, Vec<u8>)],
    value_bytes: usize,
    rng: &mut R,
) -> Result<OkvsTable> {
    for attempt in 0..MAX_ATTEMPTS {
        let mut seed = [0u8; 16];
        rng.fill_bytes(&mut seed);
        if let Some(t) = try_encode(seed, pairs, value_bytes, rng) {
            if attempt > 0 {
                log::debug!("okvs: solved after {} reseeds", attempt);
            }
            return Ok(t);
        }
    }
    Err(Error::EncodeSingular { attempts: MAX_ATTEMPTS })
}

/// Single attempt with a fixed seed; `None` when the system is singular.
pub fn try_encode<R: RngCore + CryptoRng>(
    seed: [u8; 16],
    pairs: &[(Vec<u8>, Vec<u8>)],
    value_bytes: usize,
    rng: &mut R,
) -> Option<OkvsTable> {
    let rows = table_rows(pairs.len());
    let bands = crate::par::map(pairs, |(k, _)| band_for(&seed, rows, k));
    let mut pivots: Vec<Option<PivotRow>> = (0..rows).map(|_| None).collect();

    for ((start, band), (_, value)) in bands.into_iter().zip(pairs) {
        assert_eq!(value.len(), value_bytes, "OKVS value width mismatch");
        let mut col = start;
        let mut band = band;
        let mut value = value.clone();
        loop {
            if band == 0 {
                if value.iter().any(|&b| b != 0) {
                    return None;
                }
                break;
            }
            let shift = band.trailing_zeros() as usize;
            col += shift;
            band >>= shift;
            match &pivots[col] {
                None => {
                    pivots[col] = Some(PivotRow { band, value });
                    break;
                }
                Some(p) => {
                    band ^= p.band;
                    crate::util::xor_in_place(&mut value, &p.value);
                }
            }
        }
    }

    // Back substitution from the right; free columns are random.
    let mut table = ByteRows::zeros(rows, value_bytes);
    for col in (0..rows).rev() {
        match &pivots[col] {
            None => table.row_mut(col).copy_from_slice(&random_bytes(rng, value_bytes)),
            Some(p) => {
                let mut v = p.value.clone();
                let mut rest = p.band >> 1;
                let mut k = 1usize;
                while rest != 0 {
                    let tz = rest.trailing_zeros() as usize;
                    k += tz;
                    crate::util::xor_in_place(&mut v, table.row(col + k));
                    rest >>= tz + 1;
                    k += 1;
                }
                table.row_mut(col).copy_from_slice(&v);
            }
        }
    }
    Some(OkvsTable { seed, value_bytes, rows: table })
}

impl OkvsTable {
    pub fn decode(&self, key: &[u8]) -> Vec<u8> {
        let (start, band) = band_for(&self.seed, self.rows.len(), key);
        let mut out = vec![0u8; self.value_bytes];
        let mut rest = band;
        let mut k = 0usize;
        while rest != 0 {
            let tz = rest.trailing_zeros() as usize;
            k += tz;
            crate::util::xor_in_place(&mut out, self.rows.row(start + k));
            rest >>= tz;
            rest >>= 1;
            k += 1;
        }
        out
    }

    pub fn decode_many(&self, keys: &[Vec<u8>]) -> Vec<Vec<u8>> {
        crate::par::map(keys, |k| self.decode(k))
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// `seed ‖ u32 rows ‖ u16 value bits ‖ u16 band width ‖ packed rows`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + self.rows.as_flat().len());
        out.extend_from_slice(&self.seed);
        out.extend_from_slice(&(self.rows.len() as u32).to_le_bytes());
        out.extend_from_slice(&((self.value_bytes * 8) as u16).to_le_bytes());
        out.extend_from_slice(&(BAND_WIDTH as u16).to_le_bytes());
        out.extend_from_slice(self.rows.as_flat());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 24 {
            return Err(Error::malformed("OKVS header truncated"));
        }
        let seed: [u8; 16] = bytes[..16].try_into().unwrap();
        let rows = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
        let bits = u16::from_le_bytes(bytes[20..22].try_into().unwrap()) as usize;
        let w = u16::from_le_bytes(bytes[22..24].try_into().unwrap()) as usize;
        if w != BAND_WIDTH || bits == 0 || bits % 8 != 0 || rows < BAND_WIDTH {
            return Err(Error::malformed("OKVS header fields invalid"));
        }
        let value_bytes = bits / 8;
        let body = &bytes[24..];
        if body.len() != rows * value_bytes {
            return Err(Error::malformed("OKVS body length mismatch"));
        }
        Ok(Self { seed, value_bytes, rows: ByteRows::from_flat(value_bytes, body.to_vec()) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn pairs(rng: &mut ChaCha20Rng, n: usize, vb: usize) -> Vec<(Vec<u8>, Vec<u8>)> {
        (0..n as u64).map(|i| (i.to_le_bytes().to_vec(), random_bytes(rng, vb))).collect()
    }

    #[test]
    fn empty_table_is_minimal_and_decodes() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let t = okvs_encode(&[], 8, &mut rng).unwrap();
        assert_eq!(t.num_rows(), BAND_WIDTH);
        assert_eq!(t.decode(b"anything"), t.decode(b"anything"));
    }

    #[test]
    fn programmed_keys_decode_exactly() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for n in [1, 10, 127, 128, 500, 3000] {
            let ps = pairs(&mut rng, n, 9);
            let t = okvs_encode(&ps, 9, &mut rng).unwrap();
            assert!(t.num_rows() <= (1.30 * n as f64) as usize + BAND_WIDTH);
            for (k, v) in &ps {
                assert_eq!(&t.decode(k), v);
            }
        }
    }

    #[test]
    fn unprogrammed_decode_depends_on_values() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let ps = pairs(&mut rng, 300, 8);
        let seed = [7u8; 16];
        let t1 = try_encode(seed, &ps, 8, &mut ChaCha20Rng::seed_from_u64(10)).unwrap();
        let mut ps2 = ps.clone();
        for (_, v) in ps2.iter_mut() {
            *v = random_bytes(&mut rng, 8);
        }
        let t2 = try_encode(seed, &ps2, 8, &mut ChaCha20Rng::seed_from_u64(10)).unwrap();
        assert_ne!(t1.decode(b"not-a-key"), t2.decode(b"not-a-key"));
    }

    #[test]
    fn duplicate_key_with_different_values_is_singular() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let ps = vec![(b"k".to_vec(), vec![1u8]), (b"k".to_vec(), vec![2u8])];
        assert!(matches!(okvs_encode(&ps, 1, &mut rng), Err(Error::EncodeSingular { .. })));
    }

    #[test]
    fn serialization_round_trip_and_rejects_garbage() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let ps = pairs(&mut rng, 50, 8);
        let t = okvs_encode(&ps, 8, &mut rng).unwrap();
        let b = t.to_bytes();
        assert_eq!(b.len(), 24 + t.num_rows() * 8);
        assert_eq!(OkvsTable::from_bytes(&b).unwrap(), t);
        assert!(OkvsTable::from_bytes(&b[..b.len() - 1]).is_err());
        assert!(OkvsTable::from_bytes(&b[..10]).is_err());
    }
}
