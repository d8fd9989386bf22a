use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ledger::{Address, DataRecord};

/// Validator node role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    /// Proposes blocks and manages power-flow assets; also votes.
    Controller,
    /// Validates and votes only.
    Verifier,
}

/// Role a name is registered under at genesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartyRole {
    Controller,
    Verifier,
    Prosumer,
    Consumer,
    Microgrid,
    Dso,
    Evse,
    Ev,
}

impl PartyRole {
    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn node_role(self) -> Option<NodeRole> {
        match self {
            PartyRole::Controller => Some(NodeRole::Controller),
            PartyRole::Verifier => Some(NodeRole::Verifier),
            _ => None,
        }
    }

    pub fn is_validator(self) -> bool {
        self.node_role().is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    ProposeBlock,
    Vote,
    PostOffer,
    PostBid,
    PostConstraint,
}

impl Action {
    /// Roles granted an action by default.
    pub fn default_roles(self) -> &'static [PartyRole] {
        use PartyRole::*;
        match self {
            Action::ProposeBlock => &[Controller],
            Action::Vote => &[Controller, Verifier],
            Action::PostOffer => &[Prosumer, Microgrid, Evse],
            Action::PostBid => &[Consumer, Prosumer, Microgrid, Ev],
            Action::PostConstraint => &[Dso],
        }
    }

    /// Action a data record requires; `None` for genesis-only records.
    pub fn for_record(record: &DataRecord) -> Option<Action> {
        match record {
            DataRecord::Offer(_) | DataRecord::AncillaryOffer(_) | DataRecord::EvseOffer(_) => {
                Some(Action::PostOffer)
            }
            DataRecord::Bid(_) | DataRecord::EvBid(_) => Some(Action::PostBid),
            DataRecord::NetworkConstraint(_) | DataRecord::AncillaryRequirement(_) => {
                Some(Action::PostConstraint)
            }
            DataRecord::Parameters(_)
            | DataRecord::Register(_)
            | DataRecord::Allocate { .. }
            | DataRecord::Feeder(_) => None,
        }
    }
}

/// Which addresses may perform which actions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PermissionTable {
    grants: BTreeMap<Action, BTreeSet<Address>>,
}

impl PermissionTable {
    pub fn from_roles<'a>(parties: impl IntoIterator<Item = (&'a Address, PartyRole)>) -> Self {
        let mut table = Self::default();
        for (who, role) in parties {
            for action in [
                Action::ProposeBlock,
                Action::Vote,
                Action::PostOffer,
                Action::PostBid,
                Action::PostConstraint,
            ] {
                if action.default_roles().contains(&role) {
                    table.grant(action, *who);
                }
            }
        }
        table
    }

    pub fn grant(&mut self, action: Action, who: Address) {
        self.grants.entry(action).or_default().insert(who);
    }

    pub fn allows(&self, action: Action, who: &Address) -> bool {
        self.grants.get(&action).is_some_and(|s| s.contains(who))
    }

    pub fn holders(&self, action: Action) -> impl Iterator<Item = &Address> {
        self.grants.get(&action).into_iter().flatten()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn only_dso_posts_constraints() {
        let dso = Address::from_name("dso");
        let consumer = Address::from_name("c");
        let ctrl = Address::from_name("v");
        let t = PermissionTable::from_roles([
            (&dso, PartyRole::Dso),
            (&consumer, PartyRole::Consumer),
            (&ctrl, PartyRole::Controller),
        ]);
        assert!(t.allows(Action::PostConstraint, &dso));
        assert!(!t.allows(Action::PostConstraint, &consumer));
        assert!(t.allows(Action::PostBid, &consumer));
        assert!(!t.allows(Action::PostOffer, &consumer));
        assert!(t.allows(Action::ProposeBlock, &ctrl));
        assert!(t.allows(Action::Vote, &ctrl));
        assert!(!t.allows(Action::Vote, &dso));
        assert_eq!(t.holders(Action::PostConstraint).count(), 1);
    }

    #[test]
    fn verifiers_vote_but_do_not_propose() {
        let v = Address::from_name("verifier");
        let t = PermissionTable::from_roles([(&v, PartyRole::Verifier)]);
        assert!(t.allows(Action::Vote, &v));
        assert!(!t.allows(Action::ProposeBlock, &v));
    }
}
