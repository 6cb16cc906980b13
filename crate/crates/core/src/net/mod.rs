//! Party-to-party messaging: framing, transports, metering.
//!
//! Every party owns a [`Network`] holding one [`Channel`] per peer. Channels
//! are FIFO per ordered pair. Each frame carries a Lamport depth: a send
//! stamps `clock + 1` without advancing the clock, a receive advances the
//! clock to the frame's depth. Frames sent in one flight therefore share a
//! depth and the largest depth seen is the length of the longest causal
//! message chain, which is what the round meter reports.

mod frame;
pub mod memory;
pub mod stats;
pub mod tcp;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use frame::{pack_bits, unpack_bits, Frame, Reader, Tag, HEADER_LEN, MAX_PAYLOAD};
pub use stats::{PartyStats, PeerStats, PhaseStats};

pub const HELLO_MAGIC: &[u8; 4] = b"MPSU";
pub const PROTOCOL_VERSION: u16 = 1;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

/// Protocol phase used to bucket metering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Setup,
    Offline,
    Binning,
    Sspmt,
    MssRot,
    Ot,
    Shuffle,
    Mix,
    Reconstruct,
    /// Ring exponentiation pass of private-ID.
    Dopprf,
    Output,
}

/// Failure modes of a raw link, mapped to [`Error`] by the owning channel.
#[derive(Debug)]
pub enum LinkError {
    Closed,
    Timeout,
    Malformed(String),
}

/// One direction-pair of a transport between two parties.
pub trait Link: Send {
    fn send(&mut self, depth: u32, frame: Vec<u8>) -> std::result::Result<(), LinkError>;
    fn recv(&mut self, timeout: Duration) -> std::result::Result<(u32, Vec<u8>), LinkError>;
    /// Releases the sending side so the peer observes a disconnect.
    fn close(&mut self);
}

pub struct Channel {
    me: usize,
    peer: usize,
    link: Box<dyn Link>,
    closed: bool,
    timeout: Duration,
    clock: u32,
    phase: Phase,
    stats: PeerStats,
    transcript: Sha256,
}

impl Channel {
    fn new(me: usize, peer: usize, link: Box<dyn Link>, timeout: Duration) -> Self {
        Self {
            me,
            peer,
            link,
            closed: false,
            timeout,
            clock: 0,
            phase: Phase::Setup,
            stats: PeerStats::new(peer),
            transcript: Sha256::new(),
        }
    }

    pub fn me(&self) -> usize {
        self.me
    }

    pub fn peer(&self) -> usize {
        self.peer
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn clock(&self) -> u32 {
        self.clock
    }

    pub fn stats(&self) -> &PeerStats {
        &self.stats
    }

    pub fn send(&mut self, tag: Tag, payload: Vec<u8>) -> Result<()> {
        if self.closed {
            return Err(Error::ChannelClosed { peer: self.peer });
        }
        let frame = Frame::new(tag, payload);
        let bytes = frame.encode();
        let depth = self.clock + 1;
        self.transcript.update([0u8]);
        self.transcript.update(&bytes);
        self.stats.record_send(self.phase, tag, bytes.len() as u64, depth);
        self.link.send(depth, bytes).map_err(|e| self.map_err(e))
    }

    /// Receives the next frame and checks that it carries `expected`.
    pub fn recv(&mut self, expected: Tag) -> Result<Vec<u8>> {
        let (tag, payload) = self.recv_any()?;
        if tag != expected {
            return Err(Error::malformed(format!(
                "party {} expected {:?} from {}, got {:?}",
                self.me, expected, self.peer, tag
            )));
        }
        Ok(payload)
    }

    pub fn recv_any(&mut self) -> Result<(Tag, Vec<u8>)> {
        let (depth, bytes) = self.link.recv(self.timeout).map_err(|e| self.map_err(e))?;
        let frame = Frame::decode(&bytes)?;
        self.transcript.update([1u8]);
        self.transcript.update(&bytes);
        self.stats.record_recv(self.phase, bytes.len() as u64);
        self.clock = self.clock.max(depth);
        Ok((frame.tag, frame.payload))
    }

    /// Closes the sending side; later sends fail with `ChannelClosed`.
    pub fn shutdown(&mut self) {
        if !self.closed {
            self.closed = true;
            self.link.close();
        }
    }

    fn map_err(&self, e: LinkError) -> Error {
        match e {
            LinkError::Closed => Error::PeerCrash { peer: self.peer },
            LinkError::Timeout => Error::Timeout { peer: self.peer },
            LinkError::Malformed(msg) => Error::MalformedMessage(msg),
        }
    }

    fn digest(&self) -> [u8; 32] {
        self.transcript.clone().finalize().into()
    }
}

/// A party's view of the mesh.
pub struct Network {
    me: usize,
    m: usize,
    channels: Vec<Option<Channel>>,
    clock: u32,
    phase: Phase,
    #[cfg(feature = "insecure-test-hooks")]
    fault: Option<Phase>,
}

impl Network {
    /// `links[peer]` must be `Some` for every peer and `None` at `me`.
    pub fn new(me: usize, links: Vec<Option<Box<dyn Link>>>, timeout: Duration) -> Self {
        let m = links.len();
        let channels = links
            .into_iter()
            .enumerate()
            .map(|(peer, l)| {
                assert_eq!(l.is_none(), peer == me, "link layout for party {me}");
                l.map(|l| Channel::new(me, peer, l, timeout))
            })
            .collect();
        Self {
            me,
            m,
            channels,
            clock: 0,
            phase: Phase::Setup,
            #[cfg(feature = "insecure-test-hooks")]
            fault: None,
        }
    }

    pub fn me(&self) -> usize {
        self.me
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn clock(&self) -> u32 {
        self.clock
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Makes this party fail on entering `phase` (test hook).
    #[cfg(feature = "insecure-test-hooks")]
    pub fn inject_fault(&mut self, phase: Phase) {
        self.fault = Some(phase);
    }

    pub fn set_phase(&mut self, phase: Phase) -> Result<()> {
        #[cfg(feature = "insecure-test-hooks")]
        if self.fault == Some(phase) {
            self.shutdown();
            return Err(Error::InjectedFault { party: self.me, phase });
        }
        log::debug!("party {} enters {:?} at depth {}", self.me, phase, self.clock);
        self.phase = phase;
        for ch in self.channels.iter_mut().flatten() {
            ch.phase = phase;
        }
        Ok(())
    }

    fn channel_mut(&mut self, peer: usize) -> Result<&mut Channel> {
        match self.channels.get_mut(peer) {
            Some(Some(ch)) => Ok(ch),
            _ => Err(Error::InvalidConfig(format!("party {} has no channel to {peer}", self.me))),
        }
    }

    pub fn send(&mut self, peer: usize, tag: Tag, payload: Vec<u8>) -> Result<()> {
        let clock = self.clock;
        let ch = self.channel_mut(peer)?;
        ch.clock = clock;
        ch.send(tag, payload)
    }

    pub fn recv(&mut self, peer: usize, tag: Tag) -> Result<Vec<u8>> {
        let clock = self.clock;
        let ch = self.channel_mut(peer)?;
        ch.clock = clock;
        let p = ch.recv(tag)?;
        let c = ch.clock;
        self.clock = self.clock.max(c);
        Ok(p)
    }

    /// Runs one session per `(peer, state)` item, each owning its channel.
    pub fn fork<S, T, F>(&mut self, work: Vec<(usize, S)>, f: F) -> Result<Vec<T>>
    where
        S: Send,
        T: Send,
        F: Fn(&mut Channel, S) -> Result<T> + Sync,
    {
        let work = work.into_iter().map(|(p, s)| (vec![p], s)).collect();
        self.fork_sets(work, |sess, s| {
            let peer = sess.peers()[0];
            sess.with(peer, |ch| f(ch, s))
        })
    }

    /// Runs one session per item over a disjoint set of channels.
    ///
    /// Sessions start at the current clock and the clock afterwards is the
    /// maximum any session reached. A single item runs inline; more run on
    /// scoped threads. A failing session closes its channels at once so
    /// peers do not wait for the full timeout.
    pub fn fork_sets<S, T, F>(&mut self, work: Vec<(Vec<usize>, S)>, f: F) -> Result<Vec<T>>
    where
        S: Send,
        T: Send,
        F: Fn(&mut Session<'_>, S) -> Result<T> + Sync,
    {
        let clock = self.clock;
        let me = self.me;
        let mut slots: Vec<Option<&mut Channel>> = self.channels.iter_mut().map(Option::as_mut).collect();
        let mut jobs = Vec::with_capacity(work.len());
        for (peers, s) in work {
            let mut chans = Vec::with_capacity(peers.len());
            for peer in peers {
                let ch = slots
                    .get_mut(peer)
                    .and_then(Option::take)
                    .ok_or_else(|| Error::InvalidConfig(format!("party {me}: bad or repeated session peer {peer}")))?;
                ch.clock = clock;
                chans.push(ch);
            }
            jobs.push((Session { chans, clock }, s));
        }
        let run = |mut sess: Session<'_>, s: S| {
            let r = f(&mut sess, s);
            if r.is_err() {
                for ch in sess.chans.iter_mut() {
                    ch.shutdown();
                }
            }
            (r, sess.final_clock())
        };
        let results: Vec<(Result<T>, u32)> = if jobs.len() <= 1 {
            jobs.into_iter().map(|(sess, s)| run(sess, s)).collect()
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = jobs
                    .into_iter()
                    .map(|(sess, s)| {
                        let run = &run;
                        scope.spawn(move || run(sess, s))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("session thread panicked")).collect()
            })
        };
        let mut out = Vec::with_capacity(results.len());
        let mut first_err: Option<Error> = None;
        for (r, c) in results {
            self.clock = self.clock.max(c);
            match r {
                Ok(t) => out.push(t),
                Err(e) => {
                    // Prefer a root cause over the cascade it triggered.
                    let replace = match &first_err {
                        None => true,
                        Some(prev) => prev.is_peer_failure() && !e.is_peer_failure(),
                    };
                    if replace {
                        first_err = Some(e);
                    }
                }
            }
        }
        match first_err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    /// All peers of this party in ascending order.
    pub fn peers(&self) -> Vec<usize> {
        (0..self.m).filter(|&p| p != self.me).collect()
    }

    /// Exchanges session hellos with every peer; a differing configuration
    /// hash yields `ConfigMismatch`.
    pub fn handshake(&mut self, config_hash: &[u8; 32]) -> Result<()> {
        self.set_phase(Phase::Setup)?;
        let mut hello = Vec::with_capacity(40);
        hello.extend_from_slice(HELLO_MAGIC);
        hello.extend_from_slice(&PROTOCOL_VERSION.to_le_bytes());
        hello.extend_from_slice(&(self.me as u16).to_le_bytes());
        hello.extend_from_slice(config_hash);
        let peers: Vec<usize> = (0..self.m).filter(|&p| p != self.me).collect();
        for &p in &peers {
            self.send(p, Tag::Hello, hello.clone())?;
        }
        for &p in &peers {
            let payload = self.recv(p, Tag::Hello)?;
            let mut r = Reader::new(&payload);
            if r.take(4)? != HELLO_MAGIC {
                return Err(Error::malformed("bad hello magic"));
            }
            let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
            if version != PROTOCOL_VERSION {
                return Err(Error::malformed(format!("protocol version {version} unsupported")));
            }
            let id = u16::from_le_bytes(r.take(2)?.try_into().unwrap()) as usize;
            if id != p {
                return Err(Error::malformed(format!("hello from {p} claims id {id}")));
            }
            let theirs = r.take(32)?;
            r.finish()?;
            if theirs != config_hash {
                return Err(Error::ConfigMismatch { peer: p });
            }
        }
        Ok(())
    }

    /// Closes every channel so peers observe a disconnect.
    pub fn shutdown(&mut self) {
        for ch in self.channels.iter_mut().flatten() {
            ch.shutdown();
        }
    }

    pub fn stats(&self) -> PartyStats {
        let mut h = Sha256::new();
        let mut peers = Vec::new();
        for ch in self.channels.iter().flatten() {
            h.update(ch.digest());
            peers.push(ch.stats.clone());
        }
        PartyStats::from_peers(self.me, self.clock, peers, hex::encode(h.finalize()))
    }
}

/// A set of channels used by one thread with a shared causal clock.
pub struct Session<'a> {
    chans: Vec<&'a mut Channel>,
    clock: u32,
}

impl Session<'_> {
    pub fn peers(&self) -> Vec<usize> {
        self.chans.iter().map(|c| c.peer).collect()
    }

    /// Runs `f` on the channel to `peer` with clocks kept in step.
    pub fn with<T>(&mut self, peer: usize, f: impl FnOnce(&mut Channel) -> Result<T>) -> Result<T> {
        let clock = self.clock;
        let ch = self
            .chans
            .iter_mut()
            .find(|c| c.peer == peer)
            .ok_or_else(|| Error::InvalidConfig(format!("session has no channel to {peer}")))?;
        ch.clock = ch.clock.max(clock);
        let r = f(ch);
        self.clock = self.clock.max(ch.clock);
        r
    }

    pub fn send(&mut self, peer: usize, tag: Tag, payload: Vec<u8>) -> Result<()> {
        self.with(peer, |ch| ch.send(tag, payload))
    }

    pub fn recv(&mut self, peer: usize, tag: Tag) -> Result<Vec<u8>> {
        self.with(peer, |ch| ch.recv(tag))
    }

    fn final_clock(&self) -> u32 {
        self.chans.iter().map(|c| c.clock).fold(self.clock, u32::max)
    }
}

impl Drop for Network {
    fn drop(&mut self) {
        self.shutdown();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh(m: usize) -> Vec<Network> {
        memory::mesh(m).into_iter().enumerate().map(|(i, l)| Network::new(i, l, Duration::from_secs(5))).collect()
    }

    #[test]
    fn depth_tracks_longest_chain() {
        let mut nets = mesh(3);
        let mut n2 = nets.pop().unwrap();
        let mut n1 = nets.pop().unwrap();
        let mut n0 = nets.pop().unwrap();
        // 0 → 1 → 2 → 0 is a chain of three flights.
        n0.send(1, Tag::PidRing, vec![1]).unwrap();
        n0.send(2, Tag::PidRing, vec![1]).unwrap();
        n1.recv(0, Tag::PidRing).unwrap();
        n1.send(2, Tag::PidRing, vec![2]).unwrap();
        n2.recv(0, Tag::PidRing).unwrap();
        n2.recv(1, Tag::PidRing).unwrap();
        n2.send(0, Tag::PidRing, vec![3]).unwrap();
        n0.recv(2, Tag::PidRing).unwrap();
        assert_eq!(n0.clock(), 3);
        assert_eq!(n1.clock(), 1);
        assert_eq!(n2.clock(), 2);
    }

    #[test]
    fn byte_counters_equal_frame_lengths() {
        let mut nets = mesh(3);
        let mut n1 = nets.remove(1);
        let mut n0 = nets.remove(0);
        n0.set_phase(Phase::Binning).unwrap();
        n1.set_phase(Phase::Binning).unwrap();
        let sizes = [0usize, 1, 77, 4096];
        for &s in &sizes {
            n0.send(1, Tag::OkvsTable, vec![0xab; s]).unwrap();
        }
        for &s in &sizes {
            assert_eq!(n1.recv(0, Tag::OkvsTable).unwrap().len(), s);
        }
        let expect: u64 = sizes.iter().map(|s| (s + HEADER_LEN) as u64).sum();
        assert_eq!(n0.stats().sent_bytes, expect);
        assert_eq!(n1.stats().recv_bytes, expect);
        assert_eq!(n0.stats().phase_breakdown[&Phase::Binning].sent_bytes, expect);
    }

    #[test]
    fn wrong_tag_is_malformed() {
        let mut nets = mesh(3);
        let mut n1 = nets.remove(1);
        let mut n0 = nets.remove(0);
        n0.send(1, Tag::ShufMask, vec![]).unwrap();
        assert!(matches!(n1.recv(0, Tag::ReconShares), Err(Error::MalformedMessage(_))));
    }

    #[test]
    fn dropped_peer_is_reported_as_crash() {
        let mut nets = mesh(3);
        let n2 = nets.pop().unwrap();
        drop(n2);
        let mut n0 = nets.remove(0);
        assert!(matches!(n0.recv(2, Tag::Hello), Err(Error::PeerCrash { peer: 2 })));
        assert!(matches!(n0.send(2, Tag::Hello, vec![]), Err(Error::PeerCrash { peer: 2 })));
    }

    #[test]
    fn handshake_detects_mismatch() {
        let nets = mesh(3);
        let results: Vec<_> = std::thread::scope(|s| {
            let hs: Vec<_> = nets
                .into_iter()
                .map(|mut n| {
                    s.spawn(move || {
                        let mut h = [0u8; 32];
                        if n.me() == 2 {
                            h[0] = 1;
                        }
                        n.handshake(&h)
                    })
                })
                .collect();
            hs.into_iter().map(|h| h.join().unwrap()).collect()
        });
        assert!(matches!(results[0], Err(Error::ConfigMismatch { peer: 2 })));
        assert!(matches!(results[2], Err(Error::ConfigMismatch { peer: 0 })));
    }

    #[test]
    fn fork_joins_clocks() {
        let nets = mesh(3);
        let out: Vec<u32> = std::thread::scope(|s| {
            let hs: Vec<_> = nets
                .into_iter()
                .map(|mut n| {
                    s.spawn(move || {
                        let me = n.me();
                        let peers: Vec<(usize, ())> = (0..3).filter(|&p| p != me).map(|p| (p, ())).collect();
                        n.fork(peers, |ch, ()| {
                            // Two round trips in each session.
                            for _ in 0..2 {
                                if me < ch.peer() {
                                    ch.send(Tag::GmwAndLayer, vec![me as u8])?;
                                    ch.recv(Tag::GmwAndLayer)?;
                                } else {
                                    ch.recv(Tag::GmwAndLayer)?;
                                    ch.send(Tag::GmwAndLayer, vec![me as u8])?;
                                }
                            }
                            Ok(())
                        })
                        .unwrap();
                        n.clock()
                    })
                })
                .collect();
            hs.into_iter().map(|h| h.join().unwrap()).collect()
        });
        // Party 2 speaks last in both sessions: its final frames carry depth
        // 4 but its own clock stops at the last depth it received.
        assert_eq!(out, vec![4, 4, 3]);
    }
}
