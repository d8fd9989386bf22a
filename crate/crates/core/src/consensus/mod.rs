//! Permissioned validator network: roles and permissions, the replicated
//! state machine, round-based proposal and voting, and fork choice.

mod fork;
mod network;
mod permission;
mod state;

use thiserror::Error;

use crate::grid::GridError;
use crate::ledger::Address;
use crate::token::TokenError;

pub use fork::resolve_fork;
pub use network::{Adversary, Attack, Message, Network, Node, ProposalOutcome, Vote};
pub use permission::{Action, NodeRole, PartyRole, PermissionTable};
pub use state::{BlockReport, ChainState, ReplayError};

/// Why a single transaction was refused.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TxError {
    #[error("sender is not permitted to perform this action")]
    PermissionDenied,
    #[error("sender has not staked enough for marketplace access")]
    NotStaked,
    #[error("sequence number already used by this sender")]
    DuplicateSeq,
    #[error("malformed transaction: {0}")]
    Malformed(String),
    #[error(transparent)]
    Token(#[from] TokenError),
    #[error("settlement has no matching payment in the block")]
    UnpairedSettlement,
    #[error("reward does not correspond to a settled trade")]
    UnbackedReward,
    #[error("settlement exceeds feeder capacity")]
    Infeasible,
    #[error(transparent)]
    Grid(#[from] GridError),
}

impl TxError {
    /// Stable short name used in metrics.
    pub fn code(&self) -> &'static str {
        match self {
            TxError::PermissionDenied => "permission_denied",
            TxError::NotStaked => "not_staked",
            TxError::DuplicateSeq => "duplicate_seq",
            TxError::Malformed(_) => "malformed",
            TxError::Token(TokenError::InsufficientBalance { .. }) => "insufficient_balance",
            TxError::Token(TokenError::InsufficientAllowance { .. }) => "insufficient_allowance",
            TxError::Token(TokenError::InsufficientStake { .. }) => "insufficient_stake",
            TxError::Token(TokenError::Overflow) => "overflow",
            TxError::UnpairedSettlement => "unpaired_settlement",
            TxError::UnbackedReward => "unbacked_reward",
            TxError::Infeasible => "infeasible",
            TxError::Grid(_) => "grid",
        }
    }
}

/// Why a block was refused by a replica.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BlockError {
    #[error("block does not extend the replica tip")]
    DoesNotExtend,
    #[error("stored hash does not match block contents")]
    BadSeal,
    #[error("timestamp does not advance")]
    StaleTimestamp,
    #[error("proposer {found} is not scheduled; expected {expected}")]
    WrongProposer { expected: Address, found: Address },
    #[error("transaction {index}: {error}")]
    Transaction { index: usize, error: TxError },
    #[error("bad genesis: {0}")]
    Genesis(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConsensusError {
    #[error("no candidate chain is valid")]
    NoValidCandidate,
    #[error("network has no validators")]
    NoValidators,
    #[error("no honest validator to act as reference replica")]
    NoHonestNode,
    #[error(transparent)]
    Block(#[from] BlockError),
}
