use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ledger::{Address, Canonical, Encoder};

/// Watt-hours per kilowatt-hour; prices are quoted per kWh (or per kW).
pub const WH_PER_KWH: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UseCase {
    PeerToPeer,
    InterMicrogrid,
    AncillaryDso,
    EvCharging,
}

impl UseCase {
    pub const ALL: [UseCase; 4] = [
        UseCase::PeerToPeer,
        UseCase::InterMicrogrid,
        UseCase::AncillaryDso,
        UseCase::EvCharging,
    ];

    pub fn tag(self) -> u8 {
        match self {
            UseCase::PeerToPeer => 0,
            UseCase::InterMicrogrid => 1,
            UseCase::AncillaryDso => 2,
            UseCase::EvCharging => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            UseCase::PeerToPeer => "peer_to_peer",
            UseCase::InterMicrogrid => "inter_microgrid",
            UseCase::AncillaryDso => "ancillary_dso",
            UseCase::EvCharging => "ev_charging",
        }
    }

    /// Energy use cases cleared by the uniform-price double auction.
    pub fn is_energy_auction(self) -> bool {
        matches!(self, UseCase::PeerToPeer | UseCase::InterMicrogrid)
    }
}

impl fmt::Display for UseCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Canonical for UseCase {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.u8(self.tag());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AncillaryService {
    SpinningReserve,
    FrequencyRegulation,
    VoltageControl,
    DemandResponse,
}

impl Canonical for AncillaryService {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.u8(match self {
            AncillaryService::SpinningReserve => 0,
            AncillaryService::FrequencyRegulation => 1,
            AncillaryService::VoltageControl => 2,
            AncillaryService::DemandResponse => 3,
        });
    }
}

/// Highest per-kWh price a bid will pay: `budget / quantity`, kept as an exact
/// rational and compared by cross-multiplication.
#[derive(Debug, Clone, Copy)]
pub struct ImpliedPrice {
    budget: u64,
    quantity_wh: u64,
}

impl ImpliedPrice {
    pub fn new(budget: u64, quantity_wh: u64) -> Self {
        assert!(quantity_wh > 0, "implied price of an empty bid");
        Self { budget, quantity_wh }
    }

    /// Numerator and denominator of the price in units per kWh.
    pub fn ratio(&self) -> (u128, u128) {
        (
            self.budget as u128 * WH_PER_KWH as u128,
            self.quantity_wh as u128,
        )
    }

    /// `ask <= self`, exactly.
    pub fn admits(&self, ask_per_kwh: u64) -> bool {
        let (num, den) = self.ratio();
        ask_per_kwh as u128 * den <= num
    }

    /// Largest integer price not above this one.
    pub fn floor(&self) -> u64 {
        let (num, den) = self.ratio();
        u64::try_from(num / den).unwrap_or(u64::MAX)
    }
}

impl PartialEq for ImpliedPrice {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ImpliedPrice {}

impl PartialOrd for ImpliedPrice {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ImpliedPrice {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = self.ratio();
        let (c, d) = other.ratio();
        (a * d).cmp(&(c * b))
    }
}

/// Supply side of an energy auction: excess energy and its asking price.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Offer {
    pub seller: Address,
    pub use_case: UseCase,
    pub quantity_wh: u64,
    /// Smallest token units per kWh.
    pub unit_price: u64,
    pub location: Option<String>,
    pub seq: u64,
}

/// Demand side of an energy auction: power demand and total budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bid {
    pub buyer: Address,
    pub use_case: UseCase,
    pub quantity_wh: u64,
    pub budget: u64,
    pub location: Option<String>,
    pub seq: u64,
}

impl Bid {
    pub fn max_price(&self) -> ImpliedPrice {
        ImpliedPrice::new(self.budget, self.quantity_wh)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AncillaryOffer {
    pub provider: Address,
    pub service: AncillaryService,
    pub capacity_w: u64,
    /// Smallest token units per kW.
    pub unit_price: u64,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AncillaryRequirement {
    pub dso: Address,
    pub service: AncillaryService,
    pub capacity_w: u64,
    pub budget: u64,
    pub seq: u64,
}

/// Half-open interval of simulation rounds `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundWindow {
    pub start: u64,
    pub end: u64,
}

impl RoundWindow {
    pub fn len(&self) -> u64 {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn overlap(&self, other: &RoundWindow) -> u64 {
        let start = self.start.max(other.start);
        let end = self.end.min(other.end);
        end.saturating_sub(start)
    }
}

impl Canonical for RoundWindow {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.u64(self.start).u64(self.end);
    }
}

/// Charging station availability and posted price.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvseOffer {
    pub station: Address,
    pub max_power_w: u64,
    pub window: RoundWindow,
    /// Smallest token units per kWh.
    pub unit_price: u64,
    pub location: Option<String>,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvBid {
    pub vehicle: Address,
    pub demand_wh: u64,
    pub budget: u64,
    pub window: RoundWindow,
    pub seq: u64,
}

impl EvBid {
    pub fn max_price(&self) -> ImpliedPrice {
        ImpliedPrice::new(self.budget, self.demand_wh)
    }
}

/// Reason an order is structurally unusable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrderDefect {
    ZeroQuantity,
    WrongUseCase(UseCase),
    EmptyWindow,
}

impl fmt::Display for OrderDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrderDefect::ZeroQuantity => f.write_str("quantity must be positive"),
            OrderDefect::WrongUseCase(uc) => write!(f, "use case {uc} is not an energy auction"),
            OrderDefect::EmptyWindow => f.write_str("availability window is empty"),
        }
    }
}

impl Offer {
    pub fn check(&self) -> Result<(), OrderDefect> {
        if self.quantity_wh == 0 {
            return Err(OrderDefect::ZeroQuantity);
        }
        if !self.use_case.is_energy_auction() {
            return Err(OrderDefect::WrongUseCase(self.use_case));
        }
        Ok(())
    }
}

impl Bid {
    pub fn check(&self) -> Result<(), OrderDefect> {
        if self.quantity_wh == 0 {
            return Err(OrderDefect::ZeroQuantity);
        }
        if !self.use_case.is_energy_auction() {
            return Err(OrderDefect::WrongUseCase(self.use_case));
        }
        Ok(())
    }
}

impl AncillaryOffer {
    pub fn check(&self) -> Result<(), OrderDefect> {
        if self.capacity_w == 0 {
            return Err(OrderDefect::ZeroQuantity);
        }
        Ok(())
    }
}

impl AncillaryRequirement {
    pub fn check(&self) -> Result<(), OrderDefect> {
        if self.capacity_w == 0 {
            return Err(OrderDefect::ZeroQuantity);
        }
        Ok(())
    }
}

impl EvseOffer {
    pub fn check(&self) -> Result<(), OrderDefect> {
        if self.max_power_w == 0 {
            return Err(OrderDefect::ZeroQuantity);
        }
        if self.window.is_empty() {
            return Err(OrderDefect::EmptyWindow);
        }
        Ok(())
    }
}

impl EvBid {
    pub fn check(&self) -> Result<(), OrderDefect> {
        if self.demand_wh == 0 {
            return Err(OrderDefect::ZeroQuantity);
        }
        if self.window.is_empty() {
            return Err(OrderDefect::EmptyWindow);
        }
        Ok(())
    }
}

impl Canonical for Offer {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.put(&self.seller)
            .put(&self.use_case)
            .u64(self.quantity_wh)
            .u64(self.unit_price)
            .opt(&self.location)
            .u64(self.seq);
    }
}

impl Canonical for Bid {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.put(&self.buyer)
            .put(&self.use_case)
            .u64(self.quantity_wh)
            .u64(self.budget)
            .opt(&self.location)
            .u64(self.seq);
    }
}

impl Canonical for AncillaryOffer {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.put(&self.provider)
            .put(&self.service)
            .u64(self.capacity_w)
            .u64(self.unit_price)
            .u64(self.seq);
    }
}

impl Canonical for AncillaryRequirement {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.put(&self.dso)
            .put(&self.service)
            .u64(self.capacity_w)
            .u64(self.budget)
            .u64(self.seq);
    }
}

impl Canonical for EvseOffer {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.put(&self.station)
            .u64(self.max_power_w)
            .put(&self.window)
            .u64(self.unit_price)
            .opt(&self.location)
            .u64(self.seq);
    }
}

impl Canonical for EvBid {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.put(&self.vehicle)
            .u64(self.demand_wh)
            .u64(self.budget)
            .put(&self.window)
            .u64(self.seq);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn implied_price_exact_comparison() {
        // 30 / 6 kWh = 5 per kWh
        let p = ImpliedPrice::new(30, 6000);
        assert!(p.admits(5));
        assert!(!p.admits(6));
        assert_eq!(p.floor(), 5);
        // 10 / 3 kWh is 3.33.. per kWh
        let q = ImpliedPrice::new(10, 3000);
        assert!(q.admits(3));
        assert!(!q.admits(4));
        assert!(q < p);
        assert_eq!(ImpliedPrice::new(20, 4000), ImpliedPrice::new(10, 2000));
    }

    #[test]
    fn window_overlap() {
        let a = RoundWindow { start: 2, end: 5 };
        assert_eq!(a.overlap(&RoundWindow { start: 4, end: 9 }), 1);
        assert_eq!(a.overlap(&RoundWindow { start: 5, end: 9 }), 0);
        assert_eq!(a.overlap(&RoundWindow { start: 0, end: 10 }), 3);
    }
}
