//! Phases shared by the protocols: correlation setup, binning and the
//! pairwise membership tests.

use rand::RngCore;
use rand_chacha::ChaCha12Rng;

use super::{child_rng, SessionConfig, Trace};
use crate::binning::{cuckoo_insert, simple_insert, CuckooTable, HashParams, ProtocolParams, SimpleTable};
use crate::bits::BitVec;
use crate::error::Result;
use crate::group::PrimeGroup;
use crate::net::{Network, Phase};
use crate::ot::{provision, CorrelationPlan, CorrelationStore, OtContext};
use crate::sspmt::{sspmt_recv, sspmt_send, triples_per_test};

pub(crate) struct Ctx<G: PrimeGroup> {
    pub group: G,
    pub cfg: SessionConfig,
    pub params: ProtocolParams,
    pub hp: HashParams,
    pub me: usize,
    pub m: usize,
    pub seed: [u8; 32],
    pub rng: ChaCha12Rng,
    pub trace: Trace,
}

impl<G: PrimeGroup> Ctx<G> {
    pub fn new(group: G, cfg: &SessionConfig, me: usize) -> Result<Self> {
        let seed = cfg.party_seed(me);
        Ok(Self {
            group,
            cfg: cfg.clone(),
            params: cfg.params()?,
            hp: cfg.hash_params()?,
            me,
            m: cfg.m,
            seed,
            rng: child_rng(&seed, b"main"),
            trace: Trace::default(),
        })
    }

    pub fn num_bins(&self) -> usize {
        self.params.num_bins
    }

    /// Fresh independent stream, e.g. for one concurrent session.
    pub fn fork_rng(&mut self) -> ChaCha12Rng {
        let mut label = [0u8; 8];
        self.rng.fill_bytes(&mut label);
        child_rng(&self.seed, &label)
    }

    pub fn peers(&self) -> Vec<usize> {
        (0..self.m).filter(|&p| p != self.me).collect()
    }

    /// Triples every pair needs for its batched membership test.
    pub fn sspmt_triples(&self) -> usize {
        self.num_bins() * triples_per_test(self.params.gamma as usize)
    }
}

/// Provisions correlations with every peer; `plans[peer]` must mirror the
/// peer's plan for this party.
pub(crate) fn offline<G: PrimeGroup>(
    net: &mut Network,
    ctx: &mut Ctx<G>,
    plans: Vec<CorrelationPlan>,
) -> Result<Vec<Option<CorrelationStore>>> {
    net.set_phase(Phase::Offline)?;
    let ot = OtContext { group: ctx.group.clone(), mode: ctx.cfg.resource_mode, dealer_seed: ctx.cfg.dealer_seed() };
    let work: Vec<_> = ctx.peers().into_iter().map(|p| (p, (plans[p], ctx.fork_rng()))).collect();
    let peers: Vec<usize> = work.iter().map(|w| w.0).collect();
    let stores = net.fork(work, |ch, (plan, mut rng)| provision(ch, &ot, plan, &mut rng))?;
    let mut out: Vec<Option<CorrelationStore>> = (0..ctx.m).map(|_| None).collect();
    for (p, s) in peers.into_iter().zip(stores) {
        out[p] = Some(s);
    }
    Ok(out)
}

pub(crate) struct Tables {
    /// Receiver table, for parties with a lower-indexed peer.
    pub cuckoo: Option<CuckooTable>,
    /// Sender table, for parties with a higher-indexed peer.
    pub simple: Option<SimpleTable>,
}

pub(crate) fn bin<G: PrimeGroup>(net: &mut Network, ctx: &mut Ctx<G>, items: &[u64]) -> Result<Tables> {
    net.set_phase(Phase::Binning)?;
    let cuckoo = if ctx.me > 0 { Some(cuckoo_insert(&ctx.hp, items)?) } else { None };
    let simple = (ctx.me + 1 < ctx.m).then(|| simple_insert(&ctx.hp, items));
    if cfg!(feature = "insecure-test-hooks") {
        ctx.trace.cuckoo = cuckoo.as_ref().map(|c| c.bins.iter().map(|s| s.map(|t| t.elem)).collect());
    }
    Ok(Tables { cuckoo, simple })
}

/// Batched ssPMT with every peer; the lower index of each pair is the
/// sender. Returns this party's share `e[peer]` per bin.
pub(crate) fn membership<G: PrimeGroup>(
    net: &mut Network,
    ctx: &mut Ctx<G>,
    tables: &Tables,
    stores: &mut [Option<CorrelationStore>],
) -> Result<Vec<Option<BitVec>>> {
    net.set_phase(Phase::Sspmt)?;
    let me = ctx.me;
    let mut work = Vec::new();
    for (p, store) in stores.iter_mut().enumerate() {
        if let Some(store) = store.as_mut() {
            work.push((p, (store, ctx.fork_rng())));
        }
    }
    let peers: Vec<usize> = work.iter().map(|w| w.0).collect();
    let (group, params) = (&ctx.group, &ctx.params);
    let shares = net.fork(work, |ch, (store, mut rng)| {
        if me < ch.peer() {
            let t = tables.simple.as_ref().expect("sender table");
            sspmt_send(ch, group, params, t, store, &mut rng)
        } else {
            let t = tables.cuckoo.as_ref().expect("receiver table");
            sspmt_recv(ch, group, params, t, store, &mut rng)
        }
    })?;
    let mut out: Vec<Option<BitVec>> = (0..ctx.m).map(|_| None).collect();
    for (p, e) in peers.into_iter().zip(shares) {
        if cfg!(feature = "insecure-test-hooks") {
            ctx.trace.membership.push((p, e.clone()));
        }
        out[p] = Some(e);
    }
    Ok(out)
}
