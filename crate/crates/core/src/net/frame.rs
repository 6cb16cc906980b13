use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frame header: tag byte plus little-endian u32 payload length.
pub const HEADER_LEN: usize = 5;
/// Upper bound on a single payload; larger length fields are rejected.
pub const MAX_PAYLOAD: usize = 1 << 30;

macro_rules! tags {
    ($( $(#[$doc:meta])* $name:ident = $val:expr ),* $(,)?) => {
        /// Message type carried in the first frame byte.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[repr(u8)]
        pub enum Tag {
            $( $(#[$doc])* $name = $val, )*
        }

        impl Tag {
            pub const ALL: &'static [Tag] = &[$(Tag::$name),*];
        }

        impl TryFrom<u8> for Tag {
            type Error = Error;
            fn try_from(b: u8) -> Result<Tag> {
                match b {
                    $( $val => Ok(Tag::$name), )*
                    other => Err(Error::malformed(format!("unknown tag 0x{other:02x}"))),
                }
            }
        }
    };
}

tags! {
    /// Session hello: magic, version, party id, config hash.
    Hello = 0x01,
    OtBaseS1 = 0x10,
    OtBaseS2 = 0x11,
    /// Derandomization bits turning random-choice ROTs into chosen-choice ones.
    OtDerand = 0x12,
    OtExtMatrix = 0x13,
    TripleExtMatrix = 0x14,
    OprfBlinded = 0x20,
    OprfResponse = 0x21,
    OkvsTable = 0x22,
    GmwAndLayer = 0x30,
    MssrotDelta = 0x40,
    MssrotPad = 0x41,
    ShufInput = 0x50,
    ShufSwitchOt = 0x51,
    ShufMask = 0x52,
    PkPubkey = 0x60,
    PkCiphertexts = 0x61,
    PkRerand = 0x62,
    PkMix = 0x63,
    ReconShares = 0x70,
    PidRing = 0x80,
    PidUnion = 0x81,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub tag: Tag,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(tag: Tag, payload: Vec<u8>) -> Self {
        Self { tag, payload }
    }

    pub fn wire_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        out.push(self.tag as u8);
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Parses one complete frame; trailing or missing bytes are errors.
    pub fn decode(bytes: &[u8]) -> Result<Frame> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::malformed("frame shorter than header"));
        }
        let tag = Tag::try_from(bytes[0])?;
        let len = parse_len(&bytes[1..HEADER_LEN])?;
        if bytes.len() - HEADER_LEN != len {
            return Err(Error::malformed(format!(
                "frame length field {len} but {} payload bytes",
                bytes.len() - HEADER_LEN
            )));
        }
        Ok(Frame { tag, payload: bytes[HEADER_LEN..].to_vec() })
    }
}

pub(crate) fn parse_len(b: &[u8]) -> Result<usize> {
    let len = u32::from_le_bytes(b.try_into().map_err(|_| Error::malformed("bad length"))?) as usize;
    if len > MAX_PAYLOAD {
        return Err(Error::malformed(format!("payload length {len} exceeds limit")));
    }
    Ok(len)
}

/// Cursor over a payload with length checks on every read.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::malformed(format!(
                "payload truncated: wanted {n} bytes at offset {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn rest(&mut self) -> &'a [u8] {
        let s = &self.buf[self.pos..];
        self.pos = self.buf.len();
        s
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(Error::malformed(format!("{} trailing payload bytes", self.buf.len() - self.pos)))
        }
    }
}

/// Packs bits little-endian within each byte.
pub fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

pub fn unpack_bits(bytes: &[u8], count: usize) -> Result<Vec<bool>> {
    if bytes.len() != count.div_ceil(8) {
        return Err(Error::malformed(format!("expected {} bit bytes, got {}", count.div_ceil(8), bytes.len())));
    }
    Ok((0..count).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect())
}
