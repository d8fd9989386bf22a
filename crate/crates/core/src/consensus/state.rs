//! Replicated state machine: what a finalized chain means, and the checks a
//! validator runs before voting for a block.

use std::collections::{BTreeMap, BTreeSet};

use super::{Action, BlockError, PartyRole, PermissionTable, TxError};
use crate::grid::{energy_to_power, FeederGraph, FlowSchedule};
use crate::ledger::{
    Address, Block, Chain, ChainParams, DataRecord, Hash, Payload, Registration, Settlement,
    Transaction,
};
use crate::market::UseCase;
use crate::token::TokenState;

/// What one applied block did, for metrics.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BlockReport {
    pub height: u64,
    pub timestamp: u64,
    pub settlements: Vec<Settlement>,
    /// Token units moved by transfers.
    pub transferred: u64,
    pub rewards: u64,
}

/// Cross-transaction bookkeeping within one block.
#[derive(Debug, Default)]
struct BlockContext {
    transfers: BTreeMap<(Address, u64), (Address, Address, u64)>,
    settled: BTreeSet<(u64, UseCase, Address)>,
    rewarded: BTreeSet<(u64, UseCase, Address)>,
    flows: BTreeMap<u64, FlowSchedule>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayError {
    pub height: u64,
    pub error: BlockError,
}

impl std::fmt::Display for ReplayError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "block {}: {}", self.height, self.error)
    }
}

impl std::error::Error for ReplayError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainState {
    params: ChainParams,
    registry: BTreeMap<Address, Registration>,
    permissions: PermissionTable,
    token: TokenState,
    grid: Option<FeederGraph>,
    used: BTreeSet<(Address, u64)>,
    height: u64,
    tip: Hash,
    last_timestamp: u64,
}

impl ChainState {
    /// Interpret the genesis block: parameters, registrations, allocations
    /// and the feeder model.
    pub fn from_genesis(block: &Block) -> Result<Self, BlockError> {
        let bad = |msg: &str| BlockError::Genesis(msg.to_string());
        if block.height != 0 || block.prev_hash != Hash::ZERO || !block.is_sealed() {
            return Err(bad("malformed genesis block"));
        }
        let authority = Address::genesis_authority();
        if block.proposer != authority {
            return Err(bad("genesis not issued by the genesis authority"));
        }
        let mut records = block.transactions.iter().map(|tx| match &tx.payload {
            Payload::DataPost { record } if tx.sender == authority => Ok((tx, record)),
            _ => Err(bad("genesis may only hold authority data records")),
        });
        let params = match records.next().transpose()? {
            Some((_, DataRecord::Parameters(p))) => p.clone(),
            _ => return Err(bad("genesis must open with chain parameters")),
        };
        let mut state = ChainState {
            token: TokenState::new(params.min_stake),
            params,
            registry: BTreeMap::new(),
            permissions: PermissionTable::default(),
            grid: None,
            used: BTreeSet::new(),
            height: 0,
            tip: block.hash,
            last_timestamp: block.timestamp,
        };
        for tx in &block.transactions {
            if !state.used.insert(tx.id()) {
                return Err(bad("duplicate genesis sequence number"));
            }
        }
        for item in records {
            let (_, record) = item?;
            match record {
                DataRecord::Register(r) => {
                    if state.registry.insert(r.address(), r.clone()).is_some() {
                        return Err(bad(&format!("{} registered twice", r.name)));
                    }
                }
                DataRecord::Allocate { to, balance, stake } => {
                    if !state.registry.contains_key(to) {
                        return Err(bad(&format!("allocation to unregistered {to}")));
                    }
                    let total = balance.checked_add(*stake).ok_or_else(|| bad("allocation overflow"))?;
                    state.token.mint_reward(to, total).map_err(|e| bad(&e.to_string()))?;
                    state.token.stake(to, *stake).map_err(|e| bad(&e.to_string()))?;
                }
                DataRecord::Feeder(spec) => {
                    if state.grid.is_some() {
                        return Err(bad("more than one feeder"));
                    }
                    state.grid = Some(FeederGraph::build(spec).map_err(|e| bad(&e.to_string()))?);
                }
                _ => return Err(bad("unexpected record in genesis")),
            }
        }
        if let Some(grid) = state.grid.as_mut() {
            for (who, r) in &state.registry {
                if let Some(node) = &r.location {
                    grid.set_location(*who, node).map_err(|e| bad(&e.to_string()))?;
                }
            }
        }
        if let Some(pool) = &state.params.reward_pool {
            if !state.registry.contains_key(pool) {
                return Err(bad("reward pool is not registered"));
            }
        }
        state.permissions =
            PermissionTable::from_roles(state.registry.iter().map(|(a, r)| (a, r.role)));
        if state.permissions.holders(Action::ProposeBlock).next().is_none() {
            return Err(bad("no controller may propose blocks"));
        }
        Ok(state)
    }

    /// Rebuild state from genesis, applying every block with full checks.
    pub fn replay(chain: &Chain) -> Result<(Self, Vec<BlockReport>), ReplayError> {
        let genesis = chain.genesis().ok_or(ReplayError {
            height: 0,
            error: BlockError::Genesis("empty chain".into()),
        })?;
        let mut state =
            Self::from_genesis(genesis).map_err(|error| ReplayError { height: 0, error })?;
        let mut reports = Vec::with_capacity(chain.len());
        for block in &chain.blocks()[1..] {
            let report = state
                .apply_block(block)
                .map_err(|error| ReplayError { height: block.height, error })?;
            reports.push(report);
        }
        Ok((state, reports))
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    pub fn token(&self) -> &TokenState {
        &self.token
    }

    pub fn grid(&self) -> Option<&FeederGraph> {
        self.grid.as_ref()
    }

    pub fn registry(&self) -> &BTreeMap<Address, Registration> {
        &self.registry
    }

    pub fn permissions(&self) -> &PermissionTable {
        &self.permissions
    }

    pub fn height(&self) -> u64 {
        self.height
    }

    pub fn tip(&self) -> Hash {
        self.tip
    }

    pub fn is_used(&self, id: &(Address, u64)) -> bool {
        self.used.contains(id)
    }

    pub fn role_of(&self, who: &Address) -> Option<PartyRole> {
        self.registry.get(who).map(|r| r.role)
    }

    /// Validators in lexicographic address order.
    pub fn validators(&self) -> Vec<Address> {
        self.permissions.holders(Action::Vote).copied().collect()
    }

    /// Round-robin over the addresses allowed to propose.
    pub fn proposer_for(&self, round: u64) -> Address {
        let proposers: Vec<&Address> = self.permissions.holders(Action::ProposeBlock).collect();
        *proposers[(round % proposers.len() as u64) as usize]
    }

    /// Admission checks that need no block context: sequence uniqueness,
    /// permissions, market access and order well-formedness.
    pub fn admit(&self, tx: &Transaction) -> Result<(), TxError> {
        if self.used.contains(&tx.id()) {
            return Err(TxError::DuplicateSeq);
        }
        let engine = Address::settlement_engine();
        match &tx.payload {
            Payload::DataPost { record } => self.admit_record(tx, record),
            Payload::TradeSettlement(_) | Payload::Reward { .. } => {
                if tx.sender == engine {
                    Ok(())
                } else {
                    Err(TxError::PermissionDenied)
                }
            }
            Payload::TokenTransfer { .. }
            | Payload::TokenApprove { .. }
            | Payload::Stake { .. }
            | Payload::Unstake { .. } => {
                if self.registry.contains_key(&tx.sender) {
                    Ok(())
                } else {
                    Err(TxError::PermissionDenied)
                }
            }
        }
    }

    fn admit_record(&self, tx: &Transaction, record: &DataRecord) -> Result<(), TxError> {
        let action = Action::for_record(record).ok_or(TxError::PermissionDenied)?;
        if !self.permissions.allows(action, &tx.sender) {
            return Err(TxError::PermissionDenied);
        }
        let (party, seq, location, defect) = match record {
            DataRecord::Offer(o) => (o.seller, o.seq, o.location.as_ref(), o.check().err()),
            DataRecord::Bid(b) => (b.buyer, b.seq, b.location.as_ref(), b.check().err()),
            DataRecord::AncillaryOffer(o) => (o.provider, o.seq, None, o.check().err()),
            DataRecord::AncillaryRequirement(r) => (r.dso, r.seq, None, r.check().err()),
            DataRecord::EvseOffer(o) => (o.station, o.seq, o.location.as_ref(), o.check().err()),
            DataRecord::EvBid(b) => (b.vehicle, b.seq, None, b.check().err()),
            DataRecord::NetworkConstraint(e) => {
                if e.capacity_w == 0 {
                    return Err(TxError::Malformed("zero capacity constraint".into()));
                }
                return match &self.grid {
                    Some(g) if g.contains(&e.a) && g.contains(&e.b) => Ok(()),
                    Some(_) => Err(TxError::Malformed("constraint names unknown nodes".into())),
                    None => Err(TxError::Malformed("no feeder to constrain".into())),
                };
            }
            _ => return Err(TxError::PermissionDenied),
        };
        if party != tx.sender || seq != tx.seq {
            return Err(TxError::Malformed("order party or seq differs from envelope".into()));
        }
        if let Some(defect) = defect {
            return Err(TxError::Malformed(defect.to_string()));
        }
        if let Some(loc) = location {
            let registered = self.registry.get(&party).and_then(|r| r.location.as_ref());
            if registered != Some(loc) {
                return Err(TxError::Malformed(format!("location {loc:?} is not the registered one")));
            }
        }
        if !self.token.has_market_access(&party) {
            return Err(TxError::NotStaked);
        }
        Ok(())
    }

    fn apply_tx(
        &mut self,
        tx: &Transaction,
        round: u64,
        ctx: &mut BlockContext,
        report: &mut BlockReport,
    ) -> Result<(), TxError> {
        self.admit(tx)?;
        match &tx.payload {
            Payload::DataPost { record } => {
                if let DataRecord::NetworkConstraint(e) = record {
                    let grid = self.grid.as_mut().expect("admitted constraint has a feeder");
                    grid.set_capacity(&e.a, &e.b, e.capacity_w)?;
                }
            }
            Payload::TokenTransfer { from, to, amount } => {
                if tx.sender == *from {
                    self.token.transfer(from, to, *amount)?;
                } else {
                    self.token.transfer_from(&tx.sender, from, to, *amount)?;
                }
                ctx.transfers.insert(tx.id(), (*from, *to, *amount));
                report.transferred += amount;
            }
            Payload::TokenApprove { spender, amount } => {
                self.token.approve(&tx.sender, spender, *amount);
            }
            Payload::Stake { amount } => self.token.stake(&tx.sender, *amount)?,
            Payload::Unstake { amount } => self.token.unstake(&tx.sender, *amount)?,
            Payload::TradeSettlement(s) => {
                self.check_settlement(s, round, ctx)?;
                ctx.settled.insert((s.round, s.use_case, s.seller));
                ctx.settled.insert((s.round, s.use_case, s.buyer));
                report.settlements.push(s.clone());
            }
            Payload::Reward { to, amount, round: r, use_case } => {
                if *amount != self.params.reward_per_trade {
                    return Err(TxError::Malformed("reward amount differs from the chain rate".into()));
                }
                let key = (*r, *use_case, *to);
                if !ctx.settled.contains(&key) || ctx.rewarded.contains(&key) {
                    return Err(TxError::UnbackedReward);
                }
                match self.params.reward_pool {
                    Some(pool) => self.token.transfer(&pool, to, *amount)?,
                    None => self.token.mint_reward(to, *amount)?,
                }
                ctx.rewarded.insert(key);
                report.rewards += amount;
            }
        }
        self.used.insert(tx.id());
        Ok(())
    }

    fn check_settlement(
        &self,
        s: &Settlement,
        round: u64,
        ctx: &mut BlockContext,
    ) -> Result<(), TxError> {
        if s.round > round || s.quantity == 0 {
            return Err(TxError::Malformed("settlement round or quantity out of range".into()));
        }
        if ctx.transfers.get(&(s.buyer, s.transfer_seq)) != Some(&(s.buyer, s.seller, s.payment)) {
            return Err(TxError::UnpairedSettlement);
        }
        if !self.token.has_market_access(&s.seller) || !self.token.has_market_access(&s.buyer) {
            return Err(TxError::NotStaked);
        }
        let checked = match s.use_case {
            UseCase::InterMicrogrid => true,
            UseCase::AncillaryDso => self.grid.is_some(),
            UseCase::PeerToPeer => self.params.p2p_grid_check && self.grid.is_some(),
            UseCase::EvCharging => false,
        };
        if !checked {
            return Ok(());
        }
        let grid = self.grid.as_ref().ok_or(TxError::Infeasible)?;
        let node = |who: &Address| grid.location_of(who).ok_or(TxError::Infeasible);
        let (from, to) = (node(&s.seller)?, node(&s.buyer)?);
        let power = match s.use_case {
            UseCase::AncillaryDso => s.quantity,
            _ => energy_to_power(s.quantity, self.params.round_minutes),
        };
        let schedule = ctx.flows.entry(s.round).or_insert_with(|| FlowSchedule::new(grid));
        let path = grid.path_between(from, to)?;
        if grid.residual(schedule, &path).is_some_and(|r| r < power) {
            return Err(TxError::Infeasible);
        }
        grid.check_feasibility(schedule, from, to, power)?;
        Ok(())
    }

    fn check_header(&self, block: &Block) -> Result<(), BlockError> {
        if block.height != self.height + 1 || block.prev_hash != self.tip {
            return Err(BlockError::DoesNotExtend);
        }
        if !block.is_sealed() {
            return Err(BlockError::BadSeal);
        }
        if block.timestamp <= self.last_timestamp {
            return Err(BlockError::StaleTimestamp);
        }
        let expected = self.proposer_for(block.timestamp);
        if block.proposer != expected {
            return Err(BlockError::WrongProposer { expected, found: block.proposer });
        }
        Ok(())
    }

    /// Full validation and application; on error the state is unchanged.
    pub fn apply_block(&mut self, block: &Block) -> Result<BlockReport, BlockError> {
        self.check_header(block)?;
        let mut next = self.clone();
        let mut ctx = BlockContext::default();
        let mut report = BlockReport { height: block.height, timestamp: block.timestamp, ..Default::default() };
        for (index, tx) in block.transactions.iter().enumerate() {
            next.apply_tx(tx, block.timestamp, &mut ctx, &mut report)
                .map_err(|error| BlockError::Transaction { index, error })?;
        }
        next.height = block.height;
        next.tip = block.hash;
        next.last_timestamp = block.timestamp;
        *self = next;
        Ok(report)
    }

    /// Apply whatever succeeds and skip the rest, with no header checks.
    /// Byzantine replicas track their own, possibly corrupt, chains this way.
    pub fn apply_block_lenient(&mut self, block: &Block) -> BlockReport {
        let mut ctx = BlockContext::default();
        let mut report = BlockReport { height: block.height, timestamp: block.timestamp, ..Default::default() };
        for tx in &block.transactions {
            let _ = self.apply_tx(tx, block.timestamp, &mut ctx, &mut report);
        }
        self.height = block.height;
        self.tip = block.hash;
        self.last_timestamp = block.timestamp;
        report
    }

    /// Pick, in order, the candidates that apply cleanly on top of this
    /// state in `round`; return them and the rejected ones with reasons.
    pub fn select_transactions(
        &self,
        round: u64,
        candidates: &[Transaction],
    ) -> (Vec<Transaction>, Vec<(Transaction, TxError)>) {
        let mut scratch = self.clone();
        let mut ctx = BlockContext::default();
        let mut report = BlockReport::default();
        let mut kept = Vec::new();
        let mut rejected = Vec::new();
        for tx in candidates {
            match scratch.apply_tx(tx, round, &mut ctx, &mut report) {
                Ok(()) => kept.push(tx.clone()),
                Err(e) => rejected.push((tx.clone(), e)),
            }
        }
        (kept, rejected)
    }
}
