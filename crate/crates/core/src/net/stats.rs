use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Phase, Tag};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub sent_bytes: u64,
    pub recv_bytes: u64,
    pub frames_sent: u64,
    pub frames_recv: u64,
    /// Distinct message depths this party sent at: its speaking rounds.
    pub rounds: u64,
    #[serde(skip)]
    pub depths: BTreeSet<u32>,
}

impl PhaseStats {
    fn merge(&mut self, o: &PhaseStats) {
        self.sent_bytes += o.sent_bytes;
        self.recv_bytes += o.recv_bytes;
        self.frames_sent += o.frames_sent;
        self.frames_recv += o.frames_recv;
        self.depths.extend(o.depths.iter().copied());
        self.rounds = self.depths.len() as u64;
    }
}

/// Counters for one channel.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeerStats {
    pub peer: usize,
    pub sent_bytes: u64,
    pub recv_bytes: u64,
    pub phases: BTreeMap<Phase, PhaseStats>,
    pub sent_by_tag: BTreeMap<Tag, u64>,
}

impl PeerStats {
    pub fn new(peer: usize) -> Self {
        Self { peer, sent_bytes: 0, recv_bytes: 0, phases: BTreeMap::new(), sent_by_tag: BTreeMap::new() }
    }

    pub(crate) fn record_send(&mut self, phase: Phase, tag: Tag, bytes: u64, depth: u32) {
        self.sent_bytes += bytes;
        let p = self.phases.entry(phase).or_default();
        p.sent_bytes += bytes;
        p.frames_sent += 1;
        p.depths.insert(depth);
        p.rounds = p.depths.len() as u64;
        *self.sent_by_tag.entry(tag).or_default() += 1;
    }

    pub(crate) fn record_recv(&mut self, phase: Phase, bytes: u64) {
        self.recv_bytes += bytes;
        let p = self.phases.entry(phase).or_default();
        p.recv_bytes += bytes;
        p.frames_recv += 1;
    }

    pub fn frames_with_tag(&self, tag: Tag) -> u64 {
        self.sent_by_tag.get(&tag).copied().unwrap_or(0)
    }
}

/// Per-party totals; phase figures sum over peers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyStats {
    pub party: usize,
    pub sent_bytes: u64,
    pub recv_bytes: u64,
    /// Final message depth: longest causal chain ending at this party.
    pub rounds: u32,
    pub phase_breakdown: BTreeMap<Phase, PhaseStats>,
    pub per_peer: Vec<PeerStats>,
    /// Digest over every frame sent and received, per channel in peer order.
    pub transcript: String,
}

impl PartyStats {
    pub fn from_peers(party: usize, rounds: u32, per_peer: Vec<PeerStats>, transcript: String) -> Self {
        let mut phase_breakdown: BTreeMap<Phase, PhaseStats> = BTreeMap::new();
        for p in &per_peer {
            for (ph, s) in &p.phases {
                phase_breakdown.entry(*ph).or_default().merge(s);
            }
        }
        Self {
            party,
            sent_bytes: per_peer.iter().map(|p| p.sent_bytes).sum(),
            recv_bytes: per_peer.iter().map(|p| p.recv_bytes).sum(),
            rounds,
            phase_breakdown,
            per_peer,
            transcript,
        }
    }

    pub fn total_bytes(&self) -> u64 {
        self.sent_bytes + self.recv_bytes
    }

    pub fn peer(&self, peer: usize) -> Option<&PeerStats> {
        self.per_peer.iter().find(|p| p.peer == peer)
    }
}

/// Session-wide message depths in `phase`, across all parties.
pub fn phase_depths(parties: &[PartyStats], phase: Phase) -> BTreeSet<u32> {
    parties
        .iter()
        .filter_map(|p| p.phase_breakdown.get(&phase))
        .flat_map(|s| s.depths.iter().copied())
        .collect()
}
