//! Input set files and synthetic set generation.
//!
//! A set file holds one element per line as big-endian hex of exactly
//! `⌈l/8⌉` bytes. Blank lines are skipped.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::util::{bytes_for_bits, low_mask};

pub fn parse_set(text: &str, element_bits: u32) -> Result<Vec<u64>> {
    let width = 2 * bytes_for_bits(element_bits as usize);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |why: &str| Error::InvalidInput(format!("line {}: {why}: '{line}'", no + 1));
        if line.len() != width {
            return Err(bad(&format!("expected {width} hex digits")));
        }
        let x = u64::from_str_radix(line, 16).map_err(|_| bad("not hex"))?;
        if x & !low_mask(element_bits) != 0 {
            return Err(bad(&format!("exceeds {element_bits} bits")));
        }
        if !seen.insert(x) {
            return Err(bad("duplicate element"));
        }
        out.push(x);
    }
    Ok(out)
}

pub fn format_set(set: &[u64], element_bits: u32) -> String {
    let width = 2 * bytes_for_bits(element_bits as usize);
    set.iter().map(|x| format!("{x:0width$x}\n")).collect()
}

pub fn read_set(path: &Path, element_bits: u32) -> Result<Vec<u64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    parse_set(&text, element_bits)
}

pub fn write_set(path: &Path, set: &[u64], element_bits: u32) -> Result<()> {
    std::fs::write(path, format_set(set, element_bits)).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

/// `m` sets of `n` distinct `l`-bit elements. Each party takes
/// `round(overlap·n)` elements from a common pool of `n` and fills up with
/// elements no other party holds.
pub fn gen_sets(m: usize, n: usize, overlap: f64, element_bits: u32, seed: u64) -> Result<Vec<Vec<u64>>> {
    if !(0.0..=1.0).contains(&overlap) {
        return Err(Error::InvalidInput(format!("overlap {overlap} outside [0, 1]")));
    }
    let space = if element_bits >= 64 { u128::MAX } else { 1u128 << element_bits };
    let needed = (n as u128) * (m as u128 + 1);
    if needed * 2 > space {
        return Err(Error::InvalidInput(format!("{element_bits}-bit domain too small for {m} sets of {n}")));
    }
    let mask = low_mask(element_bits);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut used = HashSet::new();
    let mut fresh = |rng: &mut ChaCha20Rng| loop {
        let x = rng.gen::<u64>() & mask;
        if used.insert(x) {
            return x;
        }
    };
    let pool: Vec<u64> = (0..n).map(|_| fresh(&mut rng)).collect();
    let shared = (overlap * n as f64).round() as usize;
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let mut s: Vec<u64> = pool.choose_multiple(&mut rng, shared).copied().collect();
        while s.len() < n {
            s.push(fresh(&mut rng));
        }
        s.shuffle(&mut rng);
        out.push(s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_width() {
        let set = vec![0x1, 0xabcde, 0xfffff];
        let text = format_set(&set, 20);
        assert_eq!(text, "000001\n0abcde\n0fffff\n");
        assert_eq!(parse_set(&text, 20).unwrap(), set);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(parse_set("01\n", 20).is_err());
        assert!(parse_set("zzzzzz\n", 20).is_err());
        assert!(parse_set("100000\n", 20).is_err());
        assert!(parse_set("000001\n000001\n", 20).is_err());
        assert_eq!(parse_set("\n000002\n\n", 20).unwrap(), vec![2]);
    }

    #[test]
    fn generated_overlap() {
        let sets = gen_sets(4, 100, 0.5, 32, 9).unwrap();
        for s in &sets {
            assert_eq!(s.len(), 100);
            assert_eq!(s.iter().collect::<HashSet<_>>().len(), 100);
        }
        let all: HashSet<u64> = sets.iter().flatten().copied().collect();
        // 50 pooled per party, at most 100 distinct pooled, 50 private each.
        assert!(all.len() <= 100 + 4 * 50 && all.len() >= 50 + 4 * 50);
        assert!(gen_sets(3, 100, 0.5, 8, 1).is_err());
    }
}
