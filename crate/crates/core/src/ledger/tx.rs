use serde::{Deserialize, Serialize};

use super::{Address, Canonical, Encoder};
use crate::consensus::PartyRole;
use crate::grid::{EdgeSpec, FeederSpec};
use crate::market::{
    AncillaryOffer, AncillaryRequirement, Bid, EvBid, EvseOffer, Offer, UseCase,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxKind {
    DataPost,
    TradeSettlement,
    TokenTransfer,
    TokenApprove,
    Stake,
    Unstake,
    Reward,
}

impl TxKind {
    pub fn tag(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub sender: Address,
    /// Per-sender counter; `(sender, seq)` is unique on a finalized chain.
    pub seq: u64,
    pub payload: Payload,
}

impl Transaction {
    pub fn new(sender: Address, seq: u64, payload: Payload) -> Self {
        Self { sender, seq, payload }
    }

    pub fn kind(&self) -> TxKind {
        self.payload.kind()
    }

    pub fn id(&self) -> (Address, u64) {
        (self.sender, self.seq)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    DataPost {
        record: DataRecord,
    },
    TradeSettlement(Settlement),
    /// A plain transfer when `sender == from`, otherwise an allowance spend
    /// by `sender` on behalf of `from`.
    TokenTransfer {
        from: Address,
        to: Address,
        amount: u64,
    },
    TokenApprove {
        spender: Address,
        amount: u64,
    },
    Stake {
        amount: u64,
    },
    Unstake {
        amount: u64,
    },
    Reward {
        to: Address,
        amount: u64,
        round: u64,
        use_case: UseCase,
    },
}

impl Payload {
    pub fn kind(&self) -> TxKind {
        match self {
            Payload::DataPost { .. } => TxKind::DataPost,
            Payload::TradeSettlement(_) => TxKind::TradeSettlement,
            Payload::TokenTransfer { .. } => TxKind::TokenTransfer,
            Payload::TokenApprove { .. } => TxKind::TokenApprove,
            Payload::Stake { .. } => TxKind::Stake,
            Payload::Unstake { .. } => TxKind::Unstake,
            Payload::Reward { .. } => TxKind::Reward,
        }
    }
}

/// Chain-wide constants fixed at genesis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainParams {
    pub min_stake: u64,
    pub reward_per_trade: u64,
    pub round_minutes: u64,
    /// Run peer-to-peer fills through the feeder check as well.
    pub p2p_grid_check: bool,
    /// Pay rewards out of this account instead of minting them.
    pub reward_pool: Option<Address>,
}

impl Canonical for ChainParams {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.u64(self.min_stake)
            .u64(self.reward_per_trade)
            .u64(self.round_minutes)
            .bool(self.p2p_grid_check)
            .opt(&self.reward_pool);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registration {
    pub name: String,
    pub role: PartyRole,
    pub location: Option<String>,
}

impl Registration {
    pub fn address(&self) -> Address {
        Address::from_name(&self.name)
    }
}

impl Canonical for Registration {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.str(&self.name).u8(self.role.tag()).opt(&self.location);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DataRecord {
    Parameters(ChainParams),
    Register(Registration),
    Allocate { to: Address, balance: u64, stake: u64 },
    Feeder(FeederSpec),
    NetworkConstraint(EdgeSpec),
    Offer(Offer),
    Bid(Bid),
    AncillaryOffer(AncillaryOffer),
    AncillaryRequirement(AncillaryRequirement),
    EvseOffer(EvseOffer),
    EvBid(EvBid),
}

impl DataRecord {
    pub fn tag(&self) -> u8 {
        match self {
            DataRecord::Parameters(_) => 0,
            DataRecord::Register(_) => 1,
            DataRecord::Allocate { .. } => 2,
            DataRecord::Feeder(_) => 3,
            DataRecord::NetworkConstraint(_) => 4,
            DataRecord::Offer(_) => 5,
            DataRecord::Bid(_) => 6,
            DataRecord::AncillaryOffer(_) => 7,
            DataRecord::AncillaryRequirement(_) => 8,
            DataRecord::EvseOffer(_) => 9,
            DataRecord::EvBid(_) => 10,
        }
    }

    /// Records that only the genesis block may carry.
    pub fn is_genesis_only(&self) -> bool {
        matches!(
            self,
            DataRecord::Parameters(_)
                | DataRecord::Register(_)
                | DataRecord::Allocate { .. }
                | DataRecord::Feeder(_)
        )
    }
}

impl Canonical for DataRecord {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.u8(self.tag());
        match self {
            DataRecord::Parameters(p) => enc.put(p),
            DataRecord::Register(r) => enc.put(r),
            DataRecord::Allocate { to, balance, stake } => enc.put(to).u64(*balance).u64(*stake),
            DataRecord::Feeder(f) => enc.put(f),
            DataRecord::NetworkConstraint(e) => enc.put(e),
            DataRecord::Offer(o) => enc.put(o),
            DataRecord::Bid(b) => enc.put(b),
            DataRecord::AncillaryOffer(o) => enc.put(o),
            DataRecord::AncillaryRequirement(r) => enc.put(r),
            DataRecord::EvseOffer(o) => enc.put(o),
            DataRecord::EvBid(b) => enc.put(b),
        };
    }
}

/// One matched trade as recorded on chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Settlement {
    pub round: u64,
    pub use_case: UseCase,
    pub seller: Address,
    pub buyer: Address,
    /// Wh for energy use cases, W for ancillary capacity.
    pub quantity: u64,
    pub unit_price: u64,
    pub payment: u64,
    /// Sequence number of the buyer's paired token transfer.
    pub transfer_seq: u64,
}

impl Canonical for Settlement {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.u64(self.round)
            .put(&self.use_case)
            .put(&self.seller)
            .put(&self.buyer)
            .u64(self.quantity)
            .u64(self.unit_price)
            .u64(self.payment)
            .u64(self.transfer_seq);
    }
}

impl Canonical for Transaction {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.u8(self.kind().tag()).put(&self.sender).u64(self.seq);
        match &self.payload {
            Payload::DataPost { record } => enc.put(record),
            Payload::TradeSettlement(s) => enc.put(s),
            Payload::TokenTransfer { from, to, amount } => enc.put(from).put(to).u64(*amount),
            Payload::TokenApprove { spender, amount } => enc.put(spender).u64(*amount),
            Payload::Stake { amount } | Payload::Unstake { amount } => enc.u64(*amount),
            Payload::Reward { to, amount, round, use_case } => {
                enc.put(to).u64(*amount).u64(*round).put(use_case)
            }
        };
    }
}
