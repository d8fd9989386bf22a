//! Scenario files: JSON documents describing validators, participants, the
//! feeder, chain constants and a per-round order script.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::{Adversary, PartyRole};
use crate::grid::{FeederGraph, FeederSpec};
use crate::ledger::{Address, Chain, ChainParams, DataRecord, Payload, Registration, Transaction};
use crate::market::{AncillaryService, UseCase};
use crate::token::{DEFAULT_MIN_STAKE, DEFAULT_REWARD_PER_TRADE};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation { field: field.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub rounds: u64,
    #[serde(default)]
    pub constants: Constants,
    pub validators: Vec<ValidatorSpec>,
    #[serde(default)]
    pub adversary: Option<Adversary>,
    #[serde(default)]
    pub participants: Vec<ParticipantSpec>,
    #[serde(default)]
    pub feeder: Option<FeederSpec>,
    #[serde(default)]
    pub jitter: Option<Jitter>,
    /// Actions submitted at the start of every round, before the script.
    #[serde(default)]
    pub every_round: Vec<Action>,
    #[serde(default)]
    pub script: Vec<ScriptEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Constants {
    pub min_stake: u64,
    pub reward_per_trade: u64,
    pub round_minutes: u64,
    pub p2p_grid_check: bool,
    /// Participant whose balance funds rewards; minted when absent.
    pub reward_pool: Option<String>,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            min_stake: DEFAULT_MIN_STAKE,
            reward_per_trade: DEFAULT_REWARD_PER_TRADE,
            round_minutes: 60,
            p2p_grid_check: false,
            reward_pool: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidatorRole {
    Controller,
    Verifier,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidatorSpec {
    pub name: String,
    pub role: ValidatorRole,
    #[serde(default = "yes")]
    pub honest: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParticipantRole {
    Prosumer,
    Consumer,
    Microgrid,
    Dso,
    Evse,
    Ev,
}

impl ParticipantRole {
    pub fn party_role(self) -> PartyRole {
        match self {
            ParticipantRole::Prosumer => PartyRole::Prosumer,
            ParticipantRole::Consumer => PartyRole::Consumer,
            ParticipantRole::Microgrid => PartyRole::Microgrid,
            ParticipantRole::Dso => PartyRole::Dso,
            ParticipantRole::Evse => PartyRole::Evse,
            ParticipantRole::Ev => PartyRole::Ev,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticipantSpec {
    pub name: String,
    pub role: ParticipantRole,
    /// Genesis spendable balance, smallest units.
    #[serde(default)]
    pub balance: u64,
    /// Genesis stake, smallest units.
    #[serde(default)]
    pub stake: u64,
    #[serde(default)]
    pub location: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Jitter {
    /// Order quantities are scaled by a uniform integer percentage in
    /// `[-quantity_pct, +quantity_pct]`.
    pub quantity_pct: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub round: u64,
    pub actions: Vec<Action>,
}

/// One scripted submission. `seq` overrides the automatic sequence number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    Offer {
        party: String,
        use_case: UseCase,
        quantity_wh: u64,
        unit_price: u64,
        seq: Option<u64>,
    },
    Bid {
        party: String,
        use_case: UseCase,
        quantity_wh: u64,
        budget: u64,
        seq: Option<u64>,
    },
    AncillaryOffer {
        party: String,
        service: AncillaryService,
        capacity_w: u64,
        unit_price: u64,
        seq: Option<u64>,
    },
    AncillaryRequirement {
        party: String,
        service: AncillaryService,
        capacity_w: u64,
        budget: u64,
        seq: Option<u64>,
    },
    /// `window` is `[start, end)` in rounds relative to the current one.
    EvseOffer {
        party: String,
        max_power_w: u64,
        window: [u64; 2],
        unit_price: u64,
        seq: Option<u64>,
    },
    EvBid {
        party: String,
        demand_wh: u64,
        budget: u64,
        window: [u64; 2],
        seq: Option<u64>,
    },
    Constraint {
        party: String,
        a: String,
        b: String,
        capacity_w: u64,
        seq: Option<u64>,
    },
    Stake {
        party: String,
        amount: u64,
        seq: Option<u64>,
    },
    Unstake {
        party: String,
        amount: u64,
        seq: Option<u64>,
    },
    Transfer {
        party: String,
        to: String,
        amount: u64,
        seq: Option<u64>,
    },
    Approve {
        party: String,
        spender: String,
        amount: u64,
        seq: Option<u64>,
    },
    TransferFrom {
        party: String,
        from: String,
        to: String,
        amount: u64,
        seq: Option<u64>,
    },
}

impl Action {
    pub fn party(&self) -> &str {
        match self {
            Action::Offer { party, .. }
            | Action::Bid { party, .. }
            | Action::AncillaryOffer { party, .. }
            | Action::AncillaryRequirement { party, .. }
            | Action::EvseOffer { party, .. }
            | Action::EvBid { party, .. }
            | Action::Constraint { party, .. }
            | Action::Stake { party, .. }
            | Action::Unstake { party, .. }
            | Action::Transfer { party, .. }
            | Action::Approve { party, .. }
            | Action::TransferFrom { party, .. } => party,
        }
    }

    pub fn seq(&self) -> Option<u64> {
        match self {
            Action::Offer { seq, .. }
            | Action::Bid { seq, .. }
            | Action::AncillaryOffer { seq, .. }
            | Action::AncillaryRequirement { seq, .. }
            | Action::EvseOffer { seq, .. }
            | Action::EvBid { seq, .. }
            | Action::Constraint { seq, .. }
            | Action::Stake { seq, .. }
            | Action::Unstake { seq, .. }
            | Action::Transfer { seq, .. }
            | Action::Approve { seq, .. }
            | Action::TransferFrom { seq, .. } => *seq,
        }
    }

    /// Every participant name the action mentions.
    fn names(&self) -> Vec<&str> {
        let mut out = vec![self.party()];
        match self {
            Action::Transfer { to, .. } => out.push(to),
            Action::Approve { spender, .. } => out.push(spender),
            Action::TransferFrom { from, to, .. } => out.extend([from.as_str(), to.as_str()]),
            _ => {}
        }
        out
    }

    fn use_case(&self) -> Option<UseCase> {
        match self {
            Action::Offer { use_case, .. } | Action::Bid { use_case, .. } => Some(*use_case),
            Action::AncillaryOffer { .. } | Action::AncillaryRequirement { .. } => {
                Some(UseCase::AncillaryDso)
            }
            Action::EvseOffer { .. } | Action::EvBid { .. } => Some(UseCase::EvCharging),
            _ => None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let config: ScenarioConfig = serde_json::from_str(text)
            .map_err(|e| ScenarioError::Parse { line: e.line(), message: e.to_string() })?;
        config.validate()?;
        Ok(config)
    }

    /// All actions for `round`: the every-round block, then the script.
    pub fn actions_for(&self, round: u64) -> impl Iterator<Item = &Action> {
        self.every_round.iter().chain(
            self.script.iter().filter(move |s| s.round == round).flat_map(|s| &s.actions),
        )
    }

    fn all_actions(&self) -> impl Iterator<Item = (String, &Action)> {
        let every = self.every_round.iter().enumerate().map(|(i, a)| (format!("every_round[{i}]"), a));
        let scripted = self.script.iter().enumerate().flat_map(|(i, s)| {
            s.actions.iter().enumerate().map(move |(j, a)| (format!("script[{i}].actions[{j}]"), a))
        });
        every.chain(scripted)
    }

    pub fn use_cases(&self) -> BTreeSet<UseCase> {
        self.all_actions().filter_map(|(_, a)| a.use_case()).collect()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.rounds == 0 {
            return Err(invalid("rounds", "must be at least 1"));
        }
        if self.constants.round_minutes == 0 {
            return Err(invalid("constants.round_minutes", "must be positive"));
        }

        let mut names = BTreeSet::new();
        let mut addresses = BTreeSet::new();
        let reserved = [Address::genesis_authority(), Address::settlement_engine()];
        let declared = self
            .validators
            .iter()
            .enumerate()
            .map(|(i, v)| (format!("validators[{i}].name"), &v.name))
            .chain(
                self.participants
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (format!("participants[{i}].name"), &p.name)),
            );
        for (field, name) in declared {
            if name.is_empty() || !names.insert(name.as_str()) {
                return Err(invalid(field, format!("duplicate or empty name {name:?}")));
            }
            let addr = Address::from_name(name);
            if reserved.contains(&addr) || !addresses.insert(addr) {
                return Err(invalid(field, format!("name {name:?} maps to a reserved address")));
            }
        }

        if !self.validators.iter().any(|v| v.role == ValidatorRole::Controller) {
            return Err(invalid("validators", "at least one controller is required"));
        }
        if !self.validators.iter().any(|v| v.honest) {
            return Err(invalid("validators", "at least one honest validator is required"));
        }

        let dsos: Vec<_> = self.participants.iter().filter(|p| p.role == ParticipantRole::Dso).collect();
        if dsos.len() > 1 {
            return Err(invalid("participants", "more than one DSO declared"));
        }
        let uses = self.use_cases();
        let needs_dso = uses.contains(&UseCase::InterMicrogrid) || uses.contains(&UseCase::AncillaryDso);
        if needs_dso && dsos.len() != 1 {
            return Err(invalid("participants", "inter_microgrid and ancillary_dso need exactly one DSO"));
        }

        let graph = match &self.feeder {
            Some(spec) => Some(FeederGraph::build(spec).map_err(|e| invalid("feeder", e.to_string()))?),
            None => None,
        };
        let has_constraints = self.all_actions().any(|(_, a)| matches!(a, Action::Constraint { .. }));
        if graph.is_none() && (uses.contains(&UseCase::InterMicrogrid) || has_constraints) {
            return Err(invalid("feeder", "inter-microgrid trading and constraints need a feeder"));
        }
        for (i, p) in self.participants.iter().enumerate() {
            if let Some(loc) = &p.location {
                match &graph {
                    Some(g) if g.contains(loc) => {}
                    _ => {
                        return Err(invalid(
                            format!("participants[{i}].location"),
                            format!("unknown feeder node {loc:?}"),
                        ))
                    }
                }
            }
            p.balance
                .checked_add(p.stake)
                .ok_or_else(|| invalid(format!("participants[{i}].balance"), "overflows u64"))?;
        }
        if needs_dso && graph.is_some() && dsos[0].location.is_none() {
            return Err(invalid("participants", "the DSO needs a feeder location"));
        }

        let participant_names: BTreeSet<&str> = self.participants.iter().map(|p| p.name.as_str()).collect();
        if let Some(pool) = &self.constants.reward_pool {
            if !participant_names.contains(pool.as_str()) {
                return Err(invalid("constants.reward_pool", format!("undeclared participant {pool:?}")));
            }
        }
        for (i, s) in self.script.iter().enumerate() {
            if s.round == 0 || s.round > self.rounds {
                return Err(invalid(format!("script[{i}].round"), "outside 1..=rounds"));
            }
        }
        for (field, action) in self.all_actions() {
            for name in action.names() {
                if !participant_names.contains(name) {
                    return Err(invalid(field, format!("undeclared participant {name:?}")));
                }
            }
            match action {
                Action::Offer { use_case, .. } | Action::Bid { use_case, .. }
                    if !use_case.is_energy_auction() =>
                {
                    return Err(invalid(field, "offers and bids are for peer_to_peer or inter_microgrid"));
                }
                Action::Constraint { a, b, .. } => {
                    let g = graph.as_ref().expect("checked above");
                    if !g.contains(a) || !g.contains(b) {
                        return Err(invalid(field, "constraint names an unknown feeder node"));
                    }
                }
                Action::EvseOffer { window, .. } | Action::EvBid { window, .. } if window[0] >= window[1] => {
                    return Err(invalid(field, "window must be [start, end) with start < end"));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn params(&self) -> ChainParams {
        ChainParams {
            min_stake: self.constants.min_stake,
            reward_per_trade: self.constants.reward_per_trade,
            round_minutes: self.constants.round_minutes,
            p2p_grid_check: self.constants.p2p_grid_check,
            reward_pool: self.constants.reward_pool.as_deref().map(Address::from_name),
        }
    }

    pub fn dso(&self) -> Option<Address> {
        self.participants
            .iter()
            .find(|p| p.role == ParticipantRole::Dso)
            .map(|p| Address::from_name(&p.name))
    }

    /// Honesty flag per validator address.
    pub fn honesty(&self) -> BTreeMap<Address, bool> {
        self.validators.iter().map(|v| (Address::from_name(&v.name), v.honest)).collect()
    }

    /// The genesis chain: parameters, registrations, allocations and the
    /// feeder, all posted by the genesis authority.
    pub fn genesis(&self) -> Chain {
        let mut records = vec![DataRecord::Parameters(self.params())];
        for v in &self.validators {
            let role = match v.role {
                ValidatorRole::Controller => PartyRole::Controller,
                ValidatorRole::Verifier => PartyRole::Verifier,
            };
            records.push(DataRecord::Register(Registration { name: v.name.clone(), role, location: None }));
        }
        for p in &self.participants {
            records.push(DataRecord::Register(Registration {
                name: p.name.clone(),
                role: p.role.party_role(),
                location: p.location.clone(),
            }));
        }
        for p in &self.participants {
            if p.balance > 0 || p.stake > 0 {
                records.push(DataRecord::Allocate {
                    to: Address::from_name(&p.name),
                    balance: p.balance,
                    stake: p.stake,
                });
            }
        }
        if let Some(spec) = &self.feeder {
            records.push(DataRecord::Feeder(spec.clone()));
        }
        let authority = Address::genesis_authority();
        let txs = records
            .into_iter()
            .enumerate()
            .map(|(i, record)| Transaction::new(authority, i as u64, Payload::DataPost { record }))
            .collect();
        Chain::from_genesis(txs)
    }
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
    ScenarioConfig::from_json(&text)
}
