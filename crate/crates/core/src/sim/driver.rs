//! The per-round loop: submit scripted orders, clear each use case, settle,
//! run a consensus round, record metrics.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::metrics::{ChainMetricsBuilder, MetricsSummary, NetworkMetrics};
use super::scenario::{Action, ScenarioConfig};
use crate::consensus::{ConsensusError, Network};
use crate::grid::{EdgeSpec, FeederGraph, FlowSchedule};
use crate::ledger::{Address, Chain, DataRecord, Payload, Transaction};
use crate::market::{
    clear_ancillary, clear_ancillary_constrained, clear_double_auction, clear_inter_microgrid,
    clear_with_feeder, match_ev_sessions, settle, AncillaryOffer, AncillaryRequirement, Bid,
    ClearingResult, EvBid, EvseOffer, MarketError, Nonces, Offer, RoundWindow, UseCase,
};
use crate::token::TokenState;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
}

#[derive(Debug, Clone)]
pub struct SimulationRun {
    /// The reference honest replica.
    pub chain: Chain,
    pub summary: MetricsSummary,
    /// Token state of the reference replica at the end of the run.
    pub token: TokenState,
    pub network: Network,
}

/// Orders accepted into the mempool this round, by kind.
#[derive(Debug, Default)]
struct Book {
    offers: Vec<Offer>,
    bids: Vec<Bid>,
    ancillary_offers: Vec<AncillaryOffer>,
    requirements: Vec<AncillaryRequirement>,
    evse_offers: Vec<EvseOffer>,
    ev_bids: Vec<EvBid>,
}

impl Book {
    fn record(&mut self, record: &DataRecord) {
        match record {
            DataRecord::Offer(o) => self.offers.push(o.clone()),
            DataRecord::Bid(b) => self.bids.push(b.clone()),
            DataRecord::AncillaryOffer(o) => self.ancillary_offers.push(o.clone()),
            DataRecord::AncillaryRequirement(r) => self.requirements.push(r.clone()),
            DataRecord::EvseOffer(o) => self.evse_offers.push(o.clone()),
            DataRecord::EvBid(b) => self.ev_bids.push(b.clone()),
            _ => {}
        }
    }
}

struct Driver<'a> {
    config: &'a ScenarioConfig,
    network: Network,
    nonces: Nonces,
    rng: ChaCha8Rng,
    rejected: BTreeMap<String, u64>,
    locations: BTreeMap<Address, Option<String>>,
}

pub fn run_simulation(config: &ScenarioConfig) -> Result<SimulationRun, SimError> {
    let genesis = config.genesis();
    let network = Network::new(&genesis, &config.honesty(), config.adversary.clone())?;
    let locations = config
        .participants
        .iter()
        .map(|p| (Address::from_name(&p.name), p.location.clone()))
        .collect();
    let mut driver = Driver {
        config,
        network,
        nonces: Nonces::new(),
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        rejected: BTreeMap::new(),
        locations,
    };

    let mut chain_metrics = ChainMetricsBuilder::default();
    let mut net = NetworkMetrics::default();
    for round in 1..=config.rounds {
        let book = driver.submit_actions(round);
        let results = driver.clear(&book);
        let reward = driver.network.reference().state.params().reward_per_trade;
        for result in &results {
            for tx in settle(result, round, &mut driver.nonces, reward) {
                driver.submit(tx);
            }
        }
        let outcome = driver.network.run_round(round);
        for (_, err) in &outcome.rejected {
            *driver.rejected.entry(err.code().to_string()).or_default() += 1;
        }
        match &outcome.report {
            Some(report) => chain_metrics.add(report),
            None => net.unfinalized_rounds.push(round),
        }
        net.rounds_run += 1;
        net.resyncs += outcome.resynced.len() as u64;
    }

    let Driver { network, rejected, .. } = driver;
    net.fork_events = network.fork_events();
    net.rejected = rejected;
    let reference = network.reference();
    Ok(SimulationRun {
        chain: reference.replica.clone(),
        token: reference.state.token().clone(),
        summary: MetricsSummary { chain: chain_metrics.finish(), network: Some(net) },
        network,
    })
}

impl Driver<'_> {
    fn submit(&mut self, tx: Transaction) -> bool {
        match self.network.submit_transaction(tx) {
            Ok(()) => true,
            Err(e) => {
                *self.rejected.entry(e.code().to_string()).or_default() += 1;
                false
            }
        }
    }

    fn jitter(&mut self, quantity: u64) -> u64 {
        let Some(j) = self.config.jitter else { return quantity };
        let pct = j.quantity_pct.min(100) as i64;
        let shift: i64 = self.rng.random_range(-pct..=pct);
        let scaled = quantity as i128 * (100 + shift) as i128 / 100;
        u64::try_from(scaled).unwrap_or(0).max(1)
    }

    fn seq_for(&mut self, who: &Address, explicit: Option<u64>) -> u64 {
        match explicit {
            Some(seq) => {
                self.nonces.observe(who, seq);
                seq
            }
            None => self.nonces.next(who),
        }
    }

    fn submit_actions(&mut self, round: u64) -> Book {
        let mut book = Book::default();
        let config = self.config;
        for action in config.actions_for(round) {
            let who = Address::from_name(action.party());
            let seq = self.seq_for(&who, action.seq());
            let tx = self.build(action, who, seq, round);
            let record = match &tx.payload {
                Payload::DataPost { record } => Some(record.clone()),
                _ => None,
            };
            if self.submit(tx) {
                if let Some(record) = record {
                    book.record(&record);
                }
            }
        }
        book
    }

    fn build(&mut self, action: &Action, who: Address, seq: u64, round: u64) -> Transaction {
        let location = self.locations.get(&who).cloned().flatten();
        let addr = |name: &String| Address::from_name(name);
        let window = |w: &[u64; 2]| RoundWindow { start: round + w[0], end: round + w[1] };
        let post = |record| Payload::DataPost { record };
        let payload = match action {
            Action::Offer { use_case, quantity_wh, unit_price, .. } => post(DataRecord::Offer(Offer {
                seller: who,
                use_case: *use_case,
                quantity_wh: self.jitter(*quantity_wh),
                unit_price: *unit_price,
                location,
                seq,
            })),
            Action::Bid { use_case, quantity_wh, budget, .. } => post(DataRecord::Bid(Bid {
                buyer: who,
                use_case: *use_case,
                quantity_wh: self.jitter(*quantity_wh),
                budget: *budget,
                location,
                seq,
            })),
            Action::AncillaryOffer { service, capacity_w, unit_price, .. } => {
                post(DataRecord::AncillaryOffer(AncillaryOffer {
                    provider: who,
                    service: *service,
                    capacity_w: *capacity_w,
                    unit_price: *unit_price,
                    seq,
                }))
            }
            Action::AncillaryRequirement { service, capacity_w, budget, .. } => {
                post(DataRecord::AncillaryRequirement(AncillaryRequirement {
                    dso: who,
                    service: *service,
                    capacity_w: *capacity_w,
                    budget: *budget,
                    seq,
                }))
            }
            Action::EvseOffer { max_power_w, window: w, unit_price, .. } => {
                post(DataRecord::EvseOffer(EvseOffer {
                    station: who,
                    max_power_w: *max_power_w,
                    window: window(w),
                    unit_price: *unit_price,
                    location,
                    seq,
                }))
            }
            Action::EvBid { demand_wh, budget, window: w, .. } => post(DataRecord::EvBid(EvBid {
                vehicle: who,
                demand_wh: self.jitter(*demand_wh),
                budget: *budget,
                window: window(w),
                seq,
            })),
            Action::Constraint { a, b, capacity_w, .. } => post(DataRecord::NetworkConstraint(EdgeSpec {
                a: a.clone(),
                b: b.clone(),
                capacity_w: *capacity_w,
            })),
            Action::Stake { amount, .. } => Payload::Stake { amount: *amount },
            Action::Unstake { amount, .. } => Payload::Unstake { amount: *amount },
            Action::Transfer { to, amount, .. } => {
                Payload::TokenTransfer { from: who, to: addr(to), amount: *amount }
            }
            Action::Approve { spender, amount, .. } => {
                Payload::TokenApprove { spender: addr(spender), amount: *amount }
            }
            Action::TransferFrom { from, to, amount, .. } => {
                Payload::TokenTransfer { from: addr(from), to: addr(to), amount: *amount }
            }
        };
        Transaction::new(who, seq, payload)
    }

    /// The feeder as it will stand once pending constraints are applied.
    fn grid_view(&self) -> Option<FeederGraph> {
        let reference = self.network.reference();
        let mut grid = reference.state.grid()?.clone();
        for tx in &reference.mempool {
            if let Payload::DataPost { record: DataRecord::NetworkConstraint(e) } = &tx.payload {
                let _ = grid.set_capacity(&e.a, &e.b, e.capacity_w);
            }
        }
        Some(grid)
    }

    fn clear(&mut self, book: &Book) -> Vec<ClearingResult> {
        let grid = self.grid_view();
        let state = &self.network.reference().state;
        let access = state.token().clone();
        let params = state.params().clone();
        let minutes = params.round_minutes;
        let mut schedule = grid.as_ref().map(FlowSchedule::new);
        let mut results = Vec::new();
        let mut failures = Vec::new();
        let mut keep = |r: Result<ClearingResult, MarketError>| match r {
            Ok(r) if !r.fills.is_empty() => results.push(r),
            Ok(_) => {}
            Err(_) => failures.push(()),
        };

        let split = |uc: UseCase| {
            let offers: Vec<Offer> = book.offers.iter().filter(|o| o.use_case == uc).cloned().collect();
            let bids: Vec<Bid> = book.bids.iter().filter(|b| b.use_case == uc).cloned().collect();
            (offers, bids)
        };

        let (offers, bids) = split(UseCase::PeerToPeer);
        if !offers.is_empty() && !bids.is_empty() {
            match (params.p2p_grid_check, grid.as_ref(), schedule.as_mut()) {
                (true, Some(g), Some(s)) => keep(clear_with_feeder(
                    UseCase::PeerToPeer,
                    &offers,
                    &bids,
                    Some(g),
                    s,
                    minutes,
                    &access,
                )),
                _ => keep(clear_double_auction(&offers, &bids, &access)),
            }
        }

        let (offers, bids) = split(UseCase::InterMicrogrid);
        if !offers.is_empty() && !bids.is_empty() {
            if let (Some(g), Some(s)) = (grid.as_ref(), schedule.as_mut()) {
                keep(clear_inter_microgrid(&offers, &bids, Some(g), s, minutes, &access));
            }
        }

        if let Some(dso) = self.config.dso() {
            let mut available = book.ancillary_offers.clone();
            for req in &book.requirements {
                let r = match (grid.as_ref(), schedule.as_mut()) {
                    (Some(g), Some(s)) => clear_ancillary_constrained(req, &available, &dso, &access, g, s),
                    _ => clear_ancillary(req, &available, &dso, &access),
                };
                if let Ok(r) = &r {
                    available = remaining_capacity(&available, req, r);
                }
                keep(r);
            }
        }

        if !book.evse_offers.is_empty() && !book.ev_bids.is_empty() {
            keep(Ok(match_ev_sessions(&book.evse_offers, &book.ev_bids, minutes, &access)));
        }

        let failed = failures.len() as u64;
        if failed > 0 {
            *self.rejected.entry("clearing_failed".into()).or_default() += failed;
        }
        results
    }
}

/// Ancillary offers still available after a procurement: offers for the
/// procured service shrink to their unmatched residual.
fn remaining_capacity(
    offers: &[AncillaryOffer],
    req: &AncillaryRequirement,
    result: &ClearingResult,
) -> Vec<AncillaryOffer> {
    let taken: BTreeMap<Address, u64> = result.fills.iter().fold(BTreeMap::new(), |mut m, f| {
        *m.entry(f.seller).or_default() += f.quantity;
        m
    });
    let residual: BTreeMap<(Address, u64), u64> =
        result.unmatched_offers.iter().map(|r| ((r.party, r.seq), r.quantity)).collect();
    offers
        .iter()
        .filter_map(|o| {
            if o.service != req.service || !taken.contains_key(&o.provider) {
                return Some(o.clone());
            }
            let left = residual.get(&(o.provider, o.seq)).copied().unwrap_or(0);
            (left > 0).then(|| AncillaryOffer { capacity_w: left, ..o.clone() })
        })
        .collect()
}
