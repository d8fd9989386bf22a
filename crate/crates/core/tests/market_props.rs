mod common;

use std::collections::BTreeMap;

use num_rational::Ratio;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::AuctionInstance;
use exergy_core::ledger::Address;
use exergy_core::market::{
    clear_ancillary, clear_double_auction, match_ev_sessions, AncillaryOffer, AncillaryRequirement,
    AncillaryService, EvBid, EvseOffer, OpenAccess, RoundWindow,
};

fn instance(seed: u64) -> (AuctionInstance, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (AuctionInstance::random(&mut rng, 8), rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fills_are_individually_rational(seed in any::<u64>()) {
        let (inst, mut rng) = instance(seed);
        let (offers, bids) = inst.orders(&mut rng);
        let result = clear_double_auction(&offers, &bids, &OpenAccess).unwrap();
        let mut paid: BTreeMap<Address, u64> = BTreeMap::new();
        for f in &result.fills {
            let offer = offers.iter().find(|o| o.seller == f.seller).unwrap();
            let bid = bids.iter().find(|b| b.buyer == f.buyer).unwrap();
            prop_assert!(f.unit_price >= offer.unit_price);
            // unit price never exceeds budget / kWh
            prop_assert!(f.unit_price as u128 * bid.quantity_wh as u128 <= bid.budget as u128 * 1000);
            prop_assert_eq!(f.payment as u128, f.quantity as u128 * f.unit_price as u128 / 1000);
            *paid.entry(f.buyer).or_default() += f.payment;
        }
        for b in &bids {
            prop_assert!(paid.get(&b.buyer).copied().unwrap_or(0) <= b.budget);
        }
    }

    #[test]
    fn matching_follows_merit_order(seed in any::<u64>()) {
        let (inst, mut rng) = instance(seed);
        let (offers, bids) = inst.orders(&mut rng);
        let result = clear_double_auction(&offers, &bids, &OpenAccess).unwrap();
        let matched_asks: Vec<u64> = result.fills.iter()
            .map(|f| offers.iter().find(|o| o.seller == f.seller).unwrap().unit_price)
            .collect();
        for r in &result.unmatched_offers {
            let ask = offers.iter().find(|o| o.seller == r.party).unwrap().unit_price;
            prop_assert!(matched_asks.iter().all(|&m| m <= ask));
        }
        let value = |who: &Address| {
            let b = bids.iter().find(|b| b.buyer == *who).unwrap();
            Ratio::new(b.budget as u128, b.quantity_wh as u128)
        };
        for r in &result.unmatched_bids {
            prop_assert!(result.fills.iter().all(|f| value(&f.buyer) >= value(&r.party)));
        }
    }

    #[test]
    fn arrival_order_does_not_matter(seed in any::<u64>()) {
        let (inst, mut rng) = instance(seed);
        let (o1, b1) = inst.orders(&mut rng);
        let (o2, b2) = inst.orders(&mut rng);
        prop_assert_eq!(
            clear_double_auction(&o1, &b1, &OpenAccess).unwrap(),
            clear_double_auction(&o2, &b2, &OpenAccess).unwrap()
        );
    }

    #[test]
    fn ancillary_is_pay_as_bid_within_budget(
        offers in prop::collection::vec((1u64..5_000, 0u64..50_000), 0..8),
        capacity_w in 1u64..20_000,
        budget in 0u64..200_000,
    ) {
        let dso = Address::from_name("dso");
        let service = AncillaryService::FrequencyRegulation;
        let offers: Vec<AncillaryOffer> = offers.iter().enumerate()
            .map(|(i, &(capacity_w, unit_price))| AncillaryOffer {
                provider: Address::from_name(&format!("provider-{i}")),
                service, capacity_w, unit_price, seq: i as u64,
            })
            .collect();
        let req = AncillaryRequirement { dso, service, capacity_w, budget, seq: 0 };
        let result = clear_ancillary(&req, &offers, &dso, &OpenAccess).unwrap();
        let price_of: BTreeMap<_, _> = offers.iter().map(|o| (o.provider, o)).collect();
        for f in &result.fills {
            let o = price_of[&f.seller];
            prop_assert_eq!(f.unit_price, o.unit_price);
            prop_assert!(f.quantity <= o.capacity_w);
            prop_assert_eq!(f.buyer, dso);
        }
        prop_assert!(result.cleared_quantity() <= capacity_w);
        prop_assert!(result.total_payment() <= budget);
        prop_assert_eq!(result.shortfall.unwrap_or(0), capacity_w - result.cleared_quantity());
        // every offer cheaper than the dearest accepted one is used
        let max_accepted = result.fills.iter().map(|f| f.unit_price).max();
        if let Some(max) = max_accepted {
            for o in &offers {
                if o.unit_price < max {
                    prop_assert!(result.fills.iter().any(|f| f.seller == o.provider));
                }
            }
        }
    }

    #[test]
    fn ev_energy_is_least_of_demand_delivery_and_budget(
        stations in prop::collection::vec((1_000u64..20_000, 0u64..6, 1u64..4, 1u64..500_000), 0..4),
        vehicles in prop::collection::vec((1u64..80_000, 0u64..50_000, 0u64..6, 1u64..4), 0..5),
    ) {
        let stations: Vec<EvseOffer> = stations.iter().enumerate()
            .map(|(i, &(max_power_w, start, len, unit_price))| EvseOffer {
                station: Address::from_name(&format!("evse-{i}")),
                max_power_w,
                window: RoundWindow { start, end: start + len },
                unit_price,
                location: None,
                seq: i as u64,
            })
            .collect();
        let vehicles: Vec<EvBid> = vehicles.iter().enumerate()
            .map(|(i, &(demand_wh, budget, start, len))| EvBid {
                vehicle: Address::from_name(&format!("ev-{i}")),
                demand_wh, budget,
                window: RoundWindow { start, end: start + len },
                seq: i as u64,
            })
            .collect();
        let result = match_ev_sessions(&stations, &vehicles, 60, &OpenAccess);
        let mut seen = Vec::new();
        for f in &result.fills {
            prop_assert!(!seen.contains(&f.seller), "station used twice");
            seen.push(f.seller);
            let s = stations.iter().find(|s| s.station == f.seller).unwrap();
            let v = vehicles.iter().find(|v| v.vehicle == f.buyer).unwrap();
            let overlap = s.window.start.max(v.window.start)..s.window.end.min(v.window.end);
            let deliverable = s.max_power_w * overlap.count() as u64;
            let affordable = v.budget as u128 * 1000 / s.unit_price as u128;
            let want = (v.demand_wh as u128).min(deliverable as u128).min(affordable);
            prop_assert!(want > 0);
            prop_assert_eq!(f.quantity as u128, want);
            prop_assert_eq!(f.unit_price, s.unit_price);
            prop_assert!(f.payment <= v.budget);
        }
    }
}
