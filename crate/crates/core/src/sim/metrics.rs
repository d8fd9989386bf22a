//! Run metrics. The chain part is derived from finalized blocks only, so a
//! replay of the exported chain reproduces it exactly; the network part
//! describes the live run (votes, forks, rejections) and has no on-chain
//! trace.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::consensus::BlockReport;
use crate::market::UseCase;

/// One row per round per use case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: u64,
    pub use_case: UseCase,
    pub cleared_volume: u64,
    /// Highest settled unit price; the uniform price for the auctions.
    pub clearing_price: Option<u64>,
    pub fills: u64,
    pub payments: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ChainMetrics {
    pub rows: Vec<RoundMetrics>,
    /// Token units moved by transfers.
    pub token_velocity: u64,
    pub rewards_minted: u64,
    pub blocks_finalized: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NetworkMetrics {
    pub rounds_run: u64,
    pub unfinalized_rounds: Vec<u64>,
    pub fork_events: u64,
    pub resyncs: u64,
    /// Rejected transactions by reason code.
    pub rejected: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub chain: ChainMetrics,
    /// Present for live runs only.
    pub network: Option<NetworkMetrics>,
}

/// Folds block reports into chain metrics.
#[derive(Debug, Clone, Default)]
pub struct ChainMetricsBuilder {
    cells: BTreeMap<(u64, UseCase), RoundMetrics>,
    velocity: u64,
    rewards: u64,
    blocks: u64,
    last_timestamp: u64,
}

impl ChainMetricsBuilder {
    pub fn add(&mut self, report: &BlockReport) {
        self.blocks += 1;
        self.velocity += report.transferred;
        self.rewards += report.rewards;
        self.last_timestamp = self.last_timestamp.max(report.timestamp);
        for s in &report.settlements {
            let cell = self.cells.entry((s.round, s.use_case)).or_insert_with(|| RoundMetrics {
                round: s.round,
                use_case: s.use_case,
                cleared_volume: 0,
                clearing_price: None,
                fills: 0,
                payments: 0,
            });
            cell.cleared_volume += s.quantity;
            cell.fills += 1;
            cell.payments += s.payment;
            cell.clearing_price = cell.clearing_price.max(Some(s.unit_price));
        }
    }

    /// Rows for every round up to the last block's timestamp, all four use
    /// cases each, zero-filled.
    pub fn finish(mut self) -> ChainMetrics {
        let mut rows = Vec::new();
        for round in 1..=self.last_timestamp {
            for use_case in UseCase::ALL {
                rows.push(self.cells.remove(&(round, use_case)).unwrap_or(RoundMetrics {
                    round,
                    use_case,
                    cleared_volume: 0,
                    clearing_price: None,
                    fills: 0,
                    payments: 0,
                }));
            }
        }
        ChainMetrics {
            rows,
            token_velocity: self.velocity,
            rewards_minted: self.rewards,
            blocks_finalized: self.blocks,
        }
    }
}

pub const CSV_HEADER: [&str; 6] =
    ["round", "use_case", "cleared_volume_wh", "clearing_price", "fills", "payments"];

/// `metrics.csv`: the header above, then one row per round per use case.
/// Ancillary volume is in W despite the column name.
pub fn write_csv(metrics: &ChainMetrics, out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &metrics.rows {
        w.write_record([
            r.round.to_string(),
            r.use_case.as_str().to_string(),
            r.cleared_volume.to_string(),
            r.clearing_price.map(|p| p.to_string()).unwrap_or_default(),
            r.fills.to_string(),
            r.payments.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
