//! End-to-end protocols and the in-process session runner.
//!
//! [`run_session`] spawns one thread per party, wires them over the chosen
//! transport and returns the leader's output plus every party's metering.
//! Party 0 is the leader.

mod common;
pub mod gnt;
mod pid;
mod pk;
mod sk;

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::binning::{derive_params, HashParams, ProtocolParams};
use crate::bits::BitVec;
use crate::error::{Error, Result};
use crate::group::{GroupKind, ModpGroup, PrimeGroup, Ristretto};
use crate::net::{memory, tcp, Link, Network, PartyStats, Phase};
use crate::ot::ResourceMode;
use crate::shuffle::ShuffleMode;
use crate::util::{derive_seed, hash_parts, ByteRows};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Sk,
    Pk,
    /// Multi-party private-ID.
    Pid,
}

impl std::str::FromStr for ProtocolKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sk" => Ok(ProtocolKind::Sk),
            "pk" => Ok(ProtocolKind::Pk),
            "pid" | "private-id" => Ok(ProtocolKind::Pid),
            other => Err(format!("unknown protocol '{other}' (expected sk|pk|pid)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportKind {
    Memory,
    Tcp,
}

impl std::str::FromStr for TransportKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "memory" | "mem" => Ok(TransportKind::Memory),
            "tcp" => Ok(TransportKind::Tcp),
            other => Err(format!("unknown transport '{other}' (expected memory|tcp)")),
        }
    }
}

/// Session parameters; identical at every party. Per-party randomness and
/// the public hash seed are derived from `seed`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub protocol: ProtocolKind,
    pub m: usize,
    pub n: usize,
    pub element_bits: u32,
    pub sigma: u32,
    pub lambda: u32,
    pub group: GroupKind,
    pub resource_mode: ResourceMode,
    pub shuffle_mode: ShuffleMode,
    pub transport: TransportKind,
    pub seed: u64,
    pub timeout_ms: u64,
    /// Hash-seed generation; bumped when a Cuckoo insertion fails.
    #[serde(default)]
    pub rehash: u32,
}

/// Fresh hash seeds [`run_session`] tries after a Cuckoo failure.
pub const MAX_REHASH: u32 = 4;

/// Largest element width the public-key protocol can decode.
pub const PK_MAX_ELEMENT_BITS: u32 = 20;

impl SessionConfig {
    pub fn new(protocol: ProtocolKind, m: usize, n: usize) -> Self {
        Self {
            protocol,
            m,
            n,
            element_bits: if protocol == ProtocolKind::Pk { PK_MAX_ELEMENT_BITS } else { 64 },
            sigma: 40,
            lambda: 128,
            group: GroupKind::Test,
            resource_mode: ResourceMode::Dealer,
            shuffle_mode: ShuffleMode::Dealer,
            transport: TransportKind::Memory,
            seed: 0,
            timeout_ms: crate::net::DEFAULT_TIMEOUT.as_millis() as u64,
            rehash: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        if self.protocol == ProtocolKind::Pk && self.element_bits > PK_MAX_ELEMENT_BITS {
            return Err(Error::InvalidConfig(format!(
                "pk elements must fit the {PK_MAX_ELEMENT_BITS}-bit decoding dictionary, got {} bits",
                self.element_bits
            )));
        }
        if self.m > u16::MAX as usize {
            return Err(Error::InvalidConfig("too many parties".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<ProtocolParams> {
        derive_params(self.m, self.n, self.element_bits, self.sigma, self.lambda)
    }

    pub fn hash_params(&self) -> Result<HashParams> {
        let mut label = b"hash-seed".to_vec();
        if self.rehash > 0 {
            label.extend(self.rehash.to_le_bytes());
        }
        let seed: [u8; 16] = derive_seed(&self.seed.to_le_bytes(), &label)[..16].try_into().unwrap();
        Ok(HashParams::new(seed, self.params()?.num_bins, self.element_bits))
    }

    /// Digest exchanged in the session hello.
    pub fn config_hash(&self) -> [u8; 32] {
        let json = serde_json::to_vec(self).expect("config serializes");
        hash_parts(b"session-config", &[&json])
    }

    pub fn party_seed(&self, party: usize) -> [u8; 32] {
        derive_seed(&self.seed.to_le_bytes(), &[b"party".as_slice(), &(party as u32).to_le_bytes()].concat())
    }

    pub fn dealer_seed(&self) -> [u8; 32] {
        derive_seed(&self.seed.to_le_bytes(), b"dealer")
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }
}

/// Internals recorded at one party; populated only with the
/// `insecure-test-hooks` feature.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    /// ssPMT output shares per peer with the peer's role: this party was the
    /// sender when `peer > party`.
    pub membership: Vec<(usize, BitVec)>,
    /// Cuckoo table contents per bin (`None` for empty bins).
    pub cuckoo: Option<Vec<Option<u64>>>,
    pub pre_shuffle: Option<ByteRows>,
    pub post_shuffle: Option<ByteRows>,
    pub permutation: Option<Vec<usize>>,
    pub secret_key: Option<Vec<u8>>,
    /// Encoded ciphertexts `c_j` after the pass with each party `i`.
    pub pk_chain: Vec<(usize, Vec<Vec<u8>>)>,
    /// Ciphertexts the leader collected for the mixing phase.
    pub pk_collected: Option<usize>,
    /// Private-ID exponent `k_i`.
    pub pid_key: Option<Vec<u8>>,
}

/// Private-ID output at one party.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PidOutput {
    /// Hex identifiers of the union, sorted.
    pub union_ids: Vec<String>,
    /// `(element, identifier)` for this party's own set, in input order.
    pub own_ids: Vec<(u64, String)>,
}

#[derive(Clone, Debug, Default)]
pub struct PartyOutcome {
    pub union: Option<Vec<u64>>,
    pub pid: Option<PidOutput>,
    pub trace: Trace,
}

#[derive(Clone, Debug)]
pub struct PartyReport {
    pub outcome: PartyOutcome,
    pub stats: PartyStats,
}

#[derive(Clone, Debug)]
pub struct SessionResult {
    pub config: SessionConfig,
    /// Leader output for SK and PK, sorted.
    pub union: Vec<u64>,
    pub parties: Vec<PartyReport>,
    pub wall_ms: u128,
}

impl SessionResult {
    pub fn leader_bytes_total(&self) -> u64 {
        self.parties[0].stats.total_bytes()
    }

    /// Stats document: protocol, sizes, per-party metering and timings.
    pub fn stats_json(&self) -> serde_json::Value {
        serde_json::json!({
            "protocol": self.config.protocol,
            "m": self.config.m,
            "n": self.config.n,
            "group": self.config.group,
            "resource_mode": self.config.resource_mode,
            "transport": self.config.transport,
            "seed": self.config.seed,
            "rehash": self.config.rehash,
            "union_size": self.union_size(),
            "per_party": self.parties.iter().map(|p| &p.stats).collect::<Vec<_>>(),
            "wall_ms": self.wall_ms as u64,
            "leader_bytes_total": self.leader_bytes_total(),
        })
    }

    pub fn union_size(&self) -> usize {
        match self.config.protocol {
            ProtocolKind::Pid => self.parties[0].outcome.pid.as_ref().map_or(0, |p| p.union_ids.len()),
            _ => self.union.len(),
        }
    }
}

fn check_inputs(cfg: &SessionConfig, inputs: &[Vec<u64>]) -> Result<()> {
    if inputs.len() != cfg.m {
        return Err(Error::InvalidInput(format!("{} input sets for {} parties", inputs.len(), cfg.m)));
    }
    for (i, set) in inputs.iter().enumerate() {
        check_set(cfg, i, set)?;
    }
    Ok(())
}

fn check_set(cfg: &SessionConfig, party: usize, set: &[u64]) -> Result<()> {
    if set.len() != cfg.n {
        return Err(Error::InvalidInput(format!("party {party} has {} elements, expected {}", set.len(), cfg.n)));
    }
    let mask = crate::util::low_mask(cfg.element_bits);
    let mut seen = std::collections::HashSet::with_capacity(set.len());
    for &x in set {
        if x & !mask != 0 {
            return Err(Error::InvalidInput(format!("party {party}: {x:#x} exceeds {} bits", cfg.element_bits)));
        }
        if !seen.insert(x) {
            return Err(Error::InvalidInput(format!("party {party}: duplicate element {x:#x}")));
        }
    }
    Ok(())
}

/// Runs one party to completion over an already connected network and
/// returns its outcome together with its final metering.
pub fn run_party(cfg: &SessionConfig, me: usize, set: &[u64], net: Network) -> (Result<PartyOutcome>, PartyStats) {
    match cfg.group {
        GroupKind::Test => run_party_with(ModpGroup::standard(), cfg, me, set, net),
        GroupKind::Production => run_party_with(Ristretto, cfg, me, set, net),
    }
}

fn run_party_with<G: PrimeGroup>(group: G, cfg: &SessionConfig, me: usize, set: &[u64], mut net: Network) -> (Result<PartyOutcome>, PartyStats) {
    let r = (|| {
        cfg.validate()?;
        check_set(cfg, me, set)?;
        let mut ctx = common::Ctx::new(group, cfg, me)?;
        net.handshake(&cfg.config_hash())?;
        let mut out = match cfg.protocol {
            ProtocolKind::Sk => sk::run(&mut net, &mut ctx, set),
            ProtocolKind::Pk => pk::run(&mut net, &mut ctx, set),
            ProtocolKind::Pid => pid::run(&mut net, &mut ctx, set),
        }?;
        net.set_phase(Phase::Output)?;
        out.trace = std::mem::take(&mut ctx.trace);
        Ok(out)
    })();
    if r.is_err() {
        net.shutdown();
    }
    (r, net.stats())
}

/// Runs every party of a session in this process. A Cuckoo failure at any
/// party restarts the session under the next hash seed, up to
/// [`MAX_REHASH`] times; `SessionResult::config.rehash` tells how many.
pub fn run_session(cfg: &SessionConfig, inputs: &[Vec<u64>]) -> Result<SessionResult> {
    let mut cfg = cfg.clone();
    loop {
        match run_session_inner(&cfg, inputs, None) {
            Err(Error::CuckooFailure { evictions }) if cfg.rehash < MAX_REHASH => {
                log::info!("cuckoo failure after {evictions} evictions, rehashing");
                cfg.rehash += 1;
            }
            r => return r,
        }
    }
}

/// Like [`run_session`] but `party` fails on entering `phase`.
#[cfg(feature = "insecure-test-hooks")]
pub fn run_session_with_fault(cfg: &SessionConfig, inputs: &[Vec<u64>], party: usize, phase: Phase) -> Result<SessionResult> {
    run_session_inner(cfg, inputs, Some((party, phase)))
}

/// Per-party results when `party` fails on entering `phase`.
#[cfg(feature = "insecure-test-hooks")]
#[allow(clippy::type_complexity)]
pub fn run_session_parties_with_fault(
    cfg: &SessionConfig,
    inputs: &[Vec<u64>],
    party: usize,
    phase: Phase,
) -> Result<Vec<Result<(PartyOutcome, PartyStats)>>> {
    run_parties(cfg, inputs, Some((party, phase)))
}

/// Per-party results of a session run, for inspecting failures.
pub fn run_session_parties(cfg: &SessionConfig, inputs: &[Vec<u64>]) -> Result<Vec<Result<(PartyOutcome, PartyStats)>>> {
    run_parties(cfg, inputs, None)
}

fn connect(cfg: &SessionConfig) -> Result<Vec<Vec<Option<Box<dyn Link>>>>> {
    match cfg.transport {
        TransportKind::Memory => Ok(memory::mesh(cfg.m)),
        TransportKind::Tcp => {
            let (listeners, addrs) = tcp::bind_local(cfg.m)?;
            let timeout = cfg.timeout();
            std::thread::scope(|s| {
                let hs: Vec<_> = listeners
                    .into_iter()
                    .enumerate()
                    .map(|(i, l)| {
                        let addrs = &addrs;
                        s.spawn(move || tcp::mesh(i, l, addrs, timeout))
                    })
                    .collect();
                hs.into_iter().map(|h| h.join().expect("connect thread panicked")).collect()
            })
        }
    }
}

#[allow(clippy::type_complexity)]
fn run_parties(
    cfg: &SessionConfig,
    inputs: &[Vec<u64>],
    fault: Option<(usize, Phase)>,
) -> Result<Vec<Result<(PartyOutcome, PartyStats)>>> {
    cfg.validate()?;
    check_inputs(cfg, inputs)?;
    let links = connect(cfg)?;
    let timeout = cfg.timeout();
    Ok(std::thread::scope(|s| {
        let hs: Vec<_> = links
            .into_iter()
            .enumerate()
            .map(|(me, l)| {
                let set = &inputs[me];
                std::thread::Builder::new()
                    .name(format!("party-{me}"))
                    .spawn_scoped(s, move || {
                        #[allow(unused_mut)]
                        let mut net = Network::new(me, l, timeout);
                        #[cfg(feature = "insecure-test-hooks")]
                        if let Some((p, phase)) = fault {
                            if p == me {
                                net.inject_fault(phase);
                            }
                        }
                        #[cfg(not(feature = "insecure-test-hooks"))]
                        let _ = fault;
                        let (r, stats) = run_party(cfg, me, set, net);
                        r.map(|o| (o, stats))
                    })
                    .expect("spawn party thread")
            })
            .collect();
        hs.into_iter().map(|h| h.join().expect("party thread panicked")).collect()
    }))
}

fn run_session_inner(cfg: &SessionConfig, inputs: &[Vec<u64>], fault: Option<(usize, Phase)>) -> Result<SessionResult> {
    let start = Instant::now();
    let results = run_parties(cfg, inputs, fault)?;
    let wall_ms = start.elapsed().as_millis();
    let mut parties = Vec::with_capacity(results.len());
    let mut first_err: Option<Error> = None;
    for r in results {
        match r {
            Ok((outcome, stats)) => parties.push(PartyReport { outcome, stats }),
            Err(e) => {
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
    if let Some(e) = first_err {
        return Err(e);
    }
    let union = parties[0].outcome.union.clone().unwrap_or_default();
    Ok(SessionResult { config: cfg.clone(), union, parties, wall_ms })
}

/// Deterministic party rng for a derived label.
pub(crate) fn child_rng(parent: &[u8; 32], label: &[u8]) -> ChaCha12Rng {
    ChaCha12Rng::from_seed(derive_seed(parent, label))
}
