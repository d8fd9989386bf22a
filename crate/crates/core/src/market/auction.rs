//! Uniform-price double auction for peer-to-peer and inter-microgrid energy.

use std::cmp::Reverse;

use super::{
    payment_for, Bid, ClearingResult, Fill, MarketAccess, MarketError, Offer, Residual, UseCase,
};
use crate::grid::{energy_to_power, power_to_energy, FeederGraph, FlowSchedule};
use crate::ledger::Address;

/// One greedy pairing, by index into the caller's offer and bid slices.
#[derive(Debug, Clone, Copy)]
struct Match {
    offer: usize,
    bid: usize,
    quantity: u64,
}

struct Book {
    use_case: UseCase,
    matches: Vec<Match>,
    price: Option<u64>,
    offer_left: Vec<u64>,
    bid_left: Vec<u64>,
    excluded: Vec<(Address, u64)>,
    live_offers: Vec<usize>,
    live_bids: Vec<usize>,
}

fn infer_use_case(offers: &[Offer], bids: &[Bid]) -> UseCase {
    offers
        .first()
        .map(|o| o.use_case)
        .or_else(|| bids.first().map(|b| b.use_case))
        .unwrap_or(UseCase::PeerToPeer)
}

fn match_orders(
    use_case: UseCase,
    offers: &[Offer],
    bids: &[Bid],
    access: &impl MarketAccess,
) -> Result<Book, MarketError> {
    for found in offers.iter().map(|o| o.use_case).chain(bids.iter().map(|b| b.use_case)) {
        if found != use_case {
            return Err(MarketError::MixedUseCase { expected: use_case, found });
        }
    }
    let mut excluded = Vec::new();
    let mut asks: Vec<usize> = Vec::new();
    for (i, o) in offers.iter().enumerate() {
        if o.check().is_ok() && access.has_market_access(&o.seller) {
            asks.push(i);
        } else {
            excluded.push((o.seller, o.seq));
        }
    }
    let mut wants: Vec<usize> = Vec::new();
    for (i, b) in bids.iter().enumerate() {
        if b.check().is_ok() && access.has_market_access(&b.buyer) {
            wants.push(i);
        } else {
            excluded.push((b.buyer, b.seq));
        }
    }
    asks.sort_by_key(|&i| (offers[i].unit_price, offers[i].seq, offers[i].seller));
    wants.sort_by_key(|&i| (Reverse(bids[i].max_price()), bids[i].seq, bids[i].buyer));

    let mut offer_left: Vec<u64> = offers.iter().map(|o| o.quantity_wh).collect();
    let mut bid_left: Vec<u64> = bids.iter().map(|b| b.quantity_wh).collect();
    let mut matches = Vec::new();
    let (mut a, mut w) = (0, 0);
    while a < asks.len() && w < wants.len() {
        let (oi, bi) = (asks[a], wants[w]);
        if !bids[bi].max_price().admits(offers[oi].unit_price) {
            break;
        }
        let q = offer_left[oi].min(bid_left[bi]);
        matches.push(Match { offer: oi, bid: bi, quantity: q });
        offer_left[oi] -= q;
        bid_left[bi] -= q;
        if offer_left[oi] == 0 {
            a += 1;
        }
        if bid_left[bi] == 0 {
            w += 1;
        }
    }

    // midpoint of the marginal ask and the marginal bid's implied price
    let price = matches.last().map(|m| {
        let (num, den) = bids[m.bid].max_price().ratio();
        let ask = offers[m.offer].unit_price as u128;
        u64::try_from((ask * den + num) / (2 * den)).unwrap_or(u64::MAX)
    });

    Ok(Book {
        use_case,
        matches,
        price,
        offer_left,
        bid_left,
        excluded,
        live_offers: asks,
        live_bids: wants,
    })
}

fn finish(
    book: Book,
    offers: &[Offer],
    bids: &[Bid],
    granted: impl Fn(usize, &Match) -> u64,
) -> ClearingResult {
    let Book { use_case, matches, price, mut offer_left, mut bid_left, excluded, live_offers, live_bids } =
        book;
    let mut fills = Vec::new();
    for (k, m) in matches.iter().enumerate() {
        let q = granted(k, m).min(m.quantity);
        offer_left[m.offer] += m.quantity - q;
        bid_left[m.bid] += m.quantity - q;
        if q == 0 {
            continue;
        }
        let p = price.expect("matches imply a price");
        fills.push(Fill {
            seller: offers[m.offer].seller,
            buyer: bids[m.bid].buyer,
            quantity: q,
            unit_price: p,
            payment: payment_for(q, p),
        });
    }
    let unmatched_offers = live_offers
        .iter()
        .filter(|&&i| offer_left[i] > 0)
        .map(|&i| Residual { party: offers[i].seller, seq: offers[i].seq, quantity: offer_left[i] })
        .collect();
    let unmatched_bids = live_bids
        .iter()
        .filter(|&&i| bid_left[i] > 0)
        .map(|&i| Residual { party: bids[i].buyer, seq: bids[i].seq, quantity: bid_left[i] })
        .collect();
    ClearingResult {
        use_case,
        fills,
        clearing_price: price,
        unmatched_offers,
        unmatched_bids,
        shortfall: None,
        excluded,
    }
}

/// Clear one energy use case with a uniform price.
///
/// Asks ascend by price, bids descend by implied maximum price (budget over
/// quantity); ties go to the lower `seq`, then the lower address. Quantities
/// are paired greedily while the marginal ask does not exceed the marginal
/// bid, and every fill settles at the floor of the midpoint between the last
/// matched ask and the last matched bid's implied price. Orders whose poster
/// lacks market access are listed in `excluded` and otherwise ignored.
pub fn clear_double_auction(
    offers: &[Offer],
    bids: &[Bid],
    access: &impl MarketAccess,
) -> Result<ClearingResult, MarketError> {
    let use_case = infer_use_case(offers, bids);
    let book = match_orders(use_case, offers, bids, access)?;
    Ok(finish(book, offers, bids, |_, m| m.quantity))
}

/// Double auction followed by the feeder check, applied fill by fill in
/// matching order. Clipped energy returns to the unmatched residuals.
pub fn clear_with_feeder(
    use_case: UseCase,
    offers: &[Offer],
    bids: &[Bid],
    grid: Option<&FeederGraph>,
    schedule: &mut FlowSchedule,
    round_minutes: u64,
    access: &impl MarketAccess,
) -> Result<ClearingResult, MarketError> {
    let grid = grid.ok_or(MarketError::GridUnavailable)?;
    let book = match_orders(use_case, offers, bids, access)?;

    let locate = |who: &Address, declared: &Option<String>| -> Result<String, MarketError> {
        declared
            .clone()
            .or_else(|| grid.location_of(who).map(str::to_string))
            .ok_or(MarketError::UnknownLocation(*who))
    };
    let mut granted = Vec::with_capacity(book.matches.len());
    for m in &book.matches {
        let (o, b) = (&offers[m.offer], &bids[m.bid]);
        let from = locate(&o.seller, &o.location)?;
        let to = locate(&b.buyer, &b.location)?;
        let want_w = energy_to_power(m.quantity, round_minutes);
        let grant = grid.check_feasibility(schedule, &from, &to, want_w)?;
        granted.push(if grant.is_clipped() {
            power_to_energy(grant.granted_w(), round_minutes).min(m.quantity)
        } else {
            m.quantity
        });
    }
    Ok(finish(book, offers, bids, |k, _| granted[k]))
}

/// Microgrid-to-microgrid trading: the auction constrained by the DSO's
/// feeder model.
pub fn clear_inter_microgrid(
    offers: &[Offer],
    bids: &[Bid],
    grid: Option<&FeederGraph>,
    schedule: &mut FlowSchedule,
    round_minutes: u64,
    access: &impl MarketAccess,
) -> Result<ClearingResult, MarketError> {
    clear_with_feeder(UseCase::InterMicrogrid, offers, bids, grid, schedule, round_minutes, access)
}
