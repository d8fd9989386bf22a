//! Matching of electric-vehicle charging demand to charging stations.

use std::cmp::Reverse;

use super::{affordable, payment_for, ClearingResult, EvBid, EvseOffer, Fill, MarketAccess, Residual, UseCase};
use crate::grid::power_to_energy;

/// Vehicles are served in descending order of implied price (ties: `seq`,
/// then address). Each takes the cheapest unused station whose window
/// overlaps its own and can deliver a positive amount of energy. The energy
/// delivered is the least of the demand, the station's deliverable energy
/// over the overlap, and what the budget buys at the station's price.
pub fn match_ev_sessions(
    evse_offers: &[EvseOffer],
    ev_bids: &[EvBid],
    round_minutes: u64,
    access: &impl MarketAccess,
) -> ClearingResult {
    let mut result = ClearingResult::empty(UseCase::EvCharging);

    let mut stations: Vec<&EvseOffer> = Vec::new();
    for s in evse_offers {
        if s.check().is_ok() && access.has_market_access(&s.station) {
            stations.push(s);
        } else {
            result.excluded.push((s.station, s.seq));
        }
    }
    stations.sort_by_key(|s| (s.unit_price, s.seq, s.station));

    let mut vehicles: Vec<&EvBid> = Vec::new();
    for v in ev_bids {
        if v.check().is_ok() && access.has_market_access(&v.vehicle) {
            vehicles.push(v);
        } else {
            result.excluded.push((v.vehicle, v.seq));
        }
    }
    vehicles.sort_by_key(|v| (Reverse(v.max_price()), v.seq, v.vehicle));

    let mut used = vec![false; stations.len()];
    for v in vehicles {
        let deliverable = |s: &EvseOffer| {
            let overlap = s.window.overlap(&v.window);
            power_to_energy(s.max_power_w, round_minutes).saturating_mul(overlap)
        };
        // stations are already in price order, so the first fit is the cheapest
        let pick = stations
            .iter()
            .enumerate()
            .find(|(i, s)| !used[*i] && deliverable(s) > 0);
        let energy = pick.map_or(0, |(_, s)| {
            v.demand_wh.min(deliverable(s)).min(affordable(v.budget, s.unit_price))
        });
        match pick {
            Some((i, s)) if energy > 0 => {
                used[i] = true;
                result.fills.push(Fill {
                    seller: s.station,
                    buyer: v.vehicle,
                    quantity: energy,
                    unit_price: s.unit_price,
                    payment: payment_for(energy, s.unit_price),
                });
                if energy < v.demand_wh {
                    result.unmatched_bids.push(Residual {
                        party: v.vehicle,
                        seq: v.seq,
                        quantity: v.demand_wh - energy,
                    });
                }
            }
            _ => result.unmatched_bids.push(Residual {
                party: v.vehicle,
                seq: v.seq,
                quantity: v.demand_wh,
            }),
        }
    }
    for (i, s) in stations.iter().enumerate() {
        if !used[i] {
            result.unmatched_offers.push(Residual {
                party: s.station,
                seq: s.seq,
                quantity: s.max_power_w,
            });
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::Address;
    use crate::market::{OpenAccess, RoundWindow};

    fn a(s: &str) -> Address {
        Address::from_name(s)
    }

    fn station(who: &str, kw: u64, window: (u64, u64), price: u64, seq: u64) -> EvseOffer {
        EvseOffer {
            station: a(who),
            max_power_w: kw * 1000,
            window: RoundWindow { start: window.0, end: window.1 },
            unit_price: price,
            location: None,
            seq,
        }
    }

    fn ev(who: &str, kwh: u64, budget: u64, seq: u64) -> EvBid {
        EvBid {
            vehicle: a(who),
            demand_wh: kwh * 1000,
            budget,
            window: RoundWindow { start: 1, end: 3 },
            seq,
        }
    }

    #[test]
    fn min_of_demand_power_budget() {
        let r = match_ev_sessions(&[station("S", 7, (1, 3), 10, 1)], &[ev("E", 12, 200, 1)], 60, &OpenAccess);
        assert_eq!(r.fills.len(), 1);
        assert_eq!(r.fills[0].quantity, 12_000);
        assert_eq!(r.fills[0].payment, 120);
    }

    #[test]
    fn budget_caps_energy() {
        let r = match_ev_sessions(&[station("S", 7, (1, 3), 10, 1)], &[ev("E", 12, 50, 1)], 60, &OpenAccess);
        assert_eq!(r.fills[0].quantity, 5_000);
        assert_eq!(r.fills[0].payment, 50);
    }

    #[test]
    fn power_caps_energy() {
        let r = match_ev_sessions(&[station("S", 7, (2, 3), 10, 1)], &[ev("E", 12, 500, 1)], 60, &OpenAccess);
        assert_eq!(r.fills[0].quantity, 7_000);
        assert_eq!(r.unmatched_bids[0].quantity, 5_000);
    }

    #[test]
    fn priority_by_implied_price_then_seq() {
        let s = [station("S", 7, (1, 3), 10, 1)];
        let r = match_ev_sessions(&s, &[ev("low", 10, 100, 1), ev("high", 10, 150, 2)], 60, &OpenAccess);
        assert_eq!(r.fills.len(), 1);
        assert_eq!(r.fills[0].buyer, a("high"));
        let r = match_ev_sessions(&s, &[ev("late", 10, 100, 2), ev("early", 10, 100, 1)], 60, &OpenAccess);
        assert_eq!(r.fills[0].buyer, a("early"));
        assert_eq!(r.unmatched_bids[0].party, a("late"));
    }

    #[test]
    fn cheapest_compatible_station() {
        let stations = [
            station("cheap-far", 7, (5, 6), 1, 1),
            station("mid", 7, (1, 2), 5, 1),
            station("dear", 7, (1, 2), 9, 1),
        ];
        let r = match_ev_sessions(&stations, &[ev("E", 5, 1000, 1)], 60, &OpenAccess);
        assert_eq!(r.fills[0].seller, a("mid"));
        assert_eq!(r.unmatched_offers.len(), 2);
    }

    #[test]
    fn station_serves_one_vehicle() {
        let r = match_ev_sessions(&[station("S", 50, (1, 3), 10, 1)], &[ev("A", 1, 100, 1), ev("B", 1, 100, 2)], 60, &OpenAccess);
        assert_eq!(r.fills.len(), 1);
    }
}
