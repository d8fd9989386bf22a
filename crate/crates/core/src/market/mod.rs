//! Order intake and clearing for the four marketplace use cases, and
//! settlement into ledger transactions.

mod ancillary;
mod auction;
mod ev;
mod order;
mod settle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::GridError;
use crate::ledger::Address;
use crate::token::TokenState;

pub use ancillary::{clear_ancillary, clear_ancillary_constrained};
pub use auction::{clear_double_auction, clear_inter_microgrid, clear_with_feeder};
pub use ev::match_ev_sessions;
pub use order::{
    AncillaryOffer, AncillaryRequirement, AncillaryService, Bid, EvBid, EvseOffer, ImpliedPrice,
    Offer, OrderDefect, RoundWindow, UseCase, WH_PER_KWH,
};
pub use settle::{settle, Nonces};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarketError {
    #[error("no feeder graph loaded")]
    GridUnavailable,
    #[error("{0} is not the DSO")]
    PermissionDenied(Address),
    #[error("orders for {found} mixed into a {expected} clearing")]
    MixedUseCase { expected: UseCase, found: UseCase },
    #[error("no feeder location for {0}")]
    UnknownLocation(Address),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Marketplace admission predicate.
pub trait MarketAccess {
    fn has_market_access(&self, who: &Address) -> bool;
}

impl MarketAccess for TokenState {
    fn has_market_access(&self, who: &Address) -> bool {
        TokenState::has_market_access(self, who)
    }
}

/// Admits everyone; for clearing orders already screened upstream.
#[derive(Debug, Clone, Copy, Default)]
pub struct OpenAccess;

impl MarketAccess for OpenAccess {
    fn has_market_access(&self, _who: &Address) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fill {
    pub seller: Address,
    pub buyer: Address,
    /// Wh for energy, W for ancillary capacity.
    pub quantity: u64,
    pub unit_price: u64,
    pub payment: u64,
}

/// Unfilled part of an order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Residual {
    pub party: Address,
    pub seq: u64,
    pub quantity: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClearingResult {
    pub use_case: UseCase,
    pub fills: Vec<Fill>,
    /// Uniform price, for the double-auction use cases only.
    pub clearing_price: Option<u64>,
    pub unmatched_offers: Vec<Residual>,
    pub unmatched_bids: Vec<Residual>,
    /// Ancillary capacity still needed after procurement.
    pub shortfall: Option<u64>,
    /// Orders dropped because their poster lacks market access.
    pub excluded: Vec<(Address, u64)>,
}

impl ClearingResult {
    pub fn empty(use_case: UseCase) -> Self {
        Self {
            use_case,
            fills: Vec::new(),
            clearing_price: None,
            unmatched_offers: Vec::new(),
            unmatched_bids: Vec::new(),
            shortfall: None,
            excluded: Vec::new(),
        }
    }

    pub fn cleared_quantity(&self) -> u64 {
        self.fills.iter().map(|f| f.quantity).sum()
    }

    pub fn total_payment(&self) -> u64 {
        self.fills.iter().map(|f| f.payment).sum()
    }
}

/// Token units owed for `quantity` (Wh or W) at `unit_price` per kWh (or kW),
/// rounded down.
pub fn payment_for(quantity: u64, unit_price: u64) -> u64 {
    let p = quantity as u128 * unit_price as u128 / WH_PER_KWH as u128;
    u64::try_from(p).unwrap_or(u64::MAX)
}

/// Largest quantity (Wh or W) whose payment at `unit_price` fits in `budget`.
pub fn affordable(budget: u64, unit_price: u64) -> u64 {
    if unit_price == 0 {
        return u64::MAX;
    }
    let q = budget as u128 * WH_PER_KWH as u128 / unit_price as u128;
    u64::try_from(q).unwrap_or(u64::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payment_rounding() {
        assert_eq!(payment_for(6_000, 4_500_000), 27_000_000);
        assert_eq!(payment_for(1, 999), 0);
        assert_eq!(affordable(100, 5), 20_000);
        assert_eq!(affordable(50, 10), 5_000);
        assert!(payment_for(affordable(77, 13), 13) <= 77);
        assert_eq!(affordable(5, 0), u64::MAX);
    }
}
