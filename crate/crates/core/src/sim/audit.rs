use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::metrics::{ChainMetricsBuilder, MetricsSummary};
use crate::consensus::{ChainState, ReplayError};
use crate::ledger::{import_chain, Chain, LedgerError, Verdict};
use crate::token::TokenState;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuditError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("replay failed at {0}")]
    Replay(#[from] ReplayError),
}

/// Token state after one finalized block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSnapshot {
    pub height: u64,
    pub timestamp: u64,
    pub token: TokenState,
}

/// What a chain says on its own.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub summary: MetricsSummary,
    pub token: TokenState,
    #[serde(skip)]
    pub snapshots: Vec<TokenSnapshot>,
}

/// Recompute token state and chain metrics from genesis. The network part
/// of the summary is left empty: votes and rejections are not on chain.
pub fn replay_audit(chain: &Chain) -> Result<AuditReport, AuditError> {
    if let Verdict::Invalid { first_bad_height } = chain.validate() {
        return Err(LedgerError::InvalidChain { first_bad_height }.into());
    }
    let blocks = chain.blocks();
    let mut state = ChainState::from_genesis(&blocks[0])
        .map_err(|error| ReplayError { height: 0, error })?;
    let mut metrics = ChainMetricsBuilder::default();
    let mut snapshots = Vec::with_capacity(blocks.len());
    for block in &blocks[1..] {
        let report = state
            .apply_block(block)
            .map_err(|error| ReplayError { height: block.height, error })?;
        metrics.add(&report);
        snapshots.push(TokenSnapshot {
            height: block.height,
            timestamp: block.timestamp,
            token: state.token().clone(),
        });
    }
    Ok(AuditReport {
        summary: MetricsSummary { chain: metrics.finish(), network: None },
        token: state.token().clone(),
        snapshots,
    })
}

pub fn replay_audit_file(path: &Path) -> Result<AuditReport, AuditError> {
    replay_audit(&import_chain(path)?)
}
