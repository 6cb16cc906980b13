use thiserror::Error;

use crate::net::Phase;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input set: {0}")]
    InvalidInput(String),

    #[error("cuckoo hashing failed after {evictions} evictions")]
    CuckooFailure { evictions: usize },

    #[error("OKVS system is singular after {attempts} attempts")]
    EncodeSingular { attempts: usize },

    #[error("group element is outside the decoding dictionary")]
    OutOfDictionary,

    #[error("malformed group element encoding")]
    MalformedElement,

    #[error("channel to party {peer} is closed")]
    ChannelClosed { peer: usize },

    #[error("party {peer} crashed or disconnected")]
    PeerCrash { peer: usize },

    #[error("timed out waiting for party {peer}")]
    Timeout { peer: usize },

    #[error("malformed message: {0}")]
    MalformedMessage(String),

    #[error("session configuration mismatch with party {peer}")]
    ConfigMismatch { peer: usize },

    #[error("peers disagree on the correlation mode")]
    ModeMismatch,

    #[error("correlation consumed twice")]
    ReusedCorrelation,

    #[error("not enough Beaver triples: need {needed}, have {available}")]
    TriplesExhausted { needed: usize, available: usize },

    #[error("correlation pool exhausted: need {needed}, have {available}")]
    ResourceExhausted { needed: usize, available: usize },

    #[error("share vector dimensions differ")]
    DimensionMismatch,

    #[error("fault injected at party {party} in phase {phase:?}")]
    InjectedFault { party: usize, phase: Phase },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn malformed(msg: impl Into<String>) -> Self {
        Error::MalformedMessage(msg.into())
    }

    /// True for the errors a party reports when some other party went away.
    pub fn is_peer_failure(&self) -> bool {
        matches!(
            self,
            Error::PeerCrash { .. } | Error::ChannelClosed { .. } | Error::Timeout { .. }
        )
    }
}
