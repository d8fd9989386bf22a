//! Pay-as-bid merit-order procurement of ancillary services by the DSO.

use super::{
    affordable, payment_for, AncillaryOffer, AncillaryRequirement, ClearingResult, Fill,
    MarketAccess, MarketError, Residual, UseCase,
};
use crate::grid::{FeederGraph, FlowSchedule};
use crate::ledger::Address;

/// Accept offers for the required service cheapest first (ties by `seq`,
/// then provider address) until the capacity is covered or the budget runs
/// out. Each provider is paid its own price; the marginal offer may be
/// partially accepted.
pub fn clear_ancillary(
    requirement: &AncillaryRequirement,
    offers: &[AncillaryOffer],
    dso: &Address,
    access: &impl MarketAccess,
) -> Result<ClearingResult, MarketError> {
    procure(requirement, offers, dso, access, |_, want| Ok(want))
}

/// As [`clear_ancillary`], with each accepted capacity also limited by the
/// feeder path from the provider's node to the DSO's node.
pub fn clear_ancillary_constrained(
    requirement: &AncillaryRequirement,
    offers: &[AncillaryOffer],
    dso: &Address,
    access: &impl MarketAccess,
    grid: &FeederGraph,
    schedule: &mut FlowSchedule,
) -> Result<ClearingResult, MarketError> {
    let dso_node = grid
        .location_of(dso)
        .ok_or(MarketError::UnknownLocation(*dso))?
        .to_string();
    procure(requirement, offers, dso, access, |provider, want| {
        let from = grid.location_of(provider).ok_or(MarketError::UnknownLocation(*provider))?;
        Ok(grid.check_feasibility(schedule, from, &dso_node, want)?.granted_w())
    })
}

fn procure(
    requirement: &AncillaryRequirement,
    offers: &[AncillaryOffer],
    dso: &Address,
    access: &impl MarketAccess,
    mut deliverable: impl FnMut(&Address, u64) -> Result<u64, MarketError>,
) -> Result<ClearingResult, MarketError> {
    if requirement.dso != *dso {
        return Err(MarketError::PermissionDenied(requirement.dso));
    }
    let mut result = ClearingResult::empty(UseCase::AncillaryDso);
    if requirement.check().is_err() || !access.has_market_access(dso) {
        result.excluded.push((requirement.dso, requirement.seq));
        result.shortfall = Some(requirement.capacity_w);
        return Ok(result);
    }

    let mut merit: Vec<&AncillaryOffer> = Vec::new();
    for o in offers.iter().filter(|o| o.service == requirement.service) {
        if o.check().is_ok() && access.has_market_access(&o.provider) {
            merit.push(o);
        } else {
            result.excluded.push((o.provider, o.seq));
        }
    }
    merit.sort_by_key(|o| (o.unit_price, o.seq, o.provider));

    let mut need = requirement.capacity_w;
    let mut budget = requirement.budget;
    for o in merit {
        let want = o.capacity_w.min(need).min(affordable(budget, o.unit_price));
        let take = if want > 0 { deliverable(&o.provider, want)?.min(want) } else { 0 };
        if take > 0 {
            let payment = payment_for(take, o.unit_price);
            need -= take;
            budget -= payment;
            result.fills.push(Fill {
                seller: o.provider,
                buyer: *dso,
                quantity: take,
                unit_price: o.unit_price,
                payment,
            });
        }
        if take < o.capacity_w {
            result.unmatched_offers.push(Residual {
                party: o.provider,
                seq: o.seq,
                quantity: o.capacity_w - take,
            });
        }
    }
    if need > 0 {
        result.shortfall = Some(need);
        result.unmatched_bids.push(Residual { party: *dso, seq: requirement.seq, quantity: need });
    }
    Ok(result)
}
