//! Multi-party private set union.
//!
//! Two end-to-end protocols share one building-block stack: a symmetric-key
//! protocol built from batch secret-shared membership tests, multi-party
//! secret-shared random OT and a secret-shared shuffle, and a public-key
//! protocol that replaces the last two with rerandomizable ElGamal mixing.
//! A multi-party private-ID protocol runs on top of the public-key one.

pub mod binning;
pub mod bits;
pub mod mssrot;
pub mod error;
pub mod group;
pub mod net;
pub mod okvs;
pub mod opprf;
pub mod ot;
pub mod par;
pub mod protocol;
pub mod setio;
pub mod shuffle;
pub mod sspmt;
pub mod util;

pub use error::{Error, Result};
