use std::collections::{BTreeMap, BTreeSet};

use super::ClearingResult;
use crate::ledger::{Address, Payload, Settlement, Transaction};

/// Next unused sequence number per sender.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Nonces {
    next: BTreeMap<Address, u64>,
}

impl Nonces {
    pub fn new() -> Self {
        Self::default()
    }

    /// Hand out the next sequence number for `who`, starting at 1.
    pub fn next(&mut self, who: &Address) -> u64 {
        let slot = self.next.entry(*who).or_insert(1);
        let seq = *slot;
        *slot += 1;
        seq
    }

    /// Make sure later calls never return `seq` or anything below it.
    pub fn observe(&mut self, who: &Address, seq: u64) {
        let slot = self.next.entry(*who).or_insert(1);
        *slot = (*slot).max(seq.saturating_add(1));
    }
}

/// Turn a clearing into ledger transactions for the given round.
///
/// Per fill: the buyer's token transfer to the seller, then the engine's
/// trade settlement that references it. After all fills, one reward per
/// distinct matched participant (in order of first appearance), unless the
/// reward is zero.
pub fn settle(
    result: &ClearingResult,
    round: u64,
    nonces: &mut Nonces,
    reward_per_trade: u64,
) -> Vec<Transaction> {
    let engine = Address::settlement_engine();
    let mut txs = Vec::with_capacity(result.fills.len() * 4);
    let mut rewarded = BTreeSet::new();
    let mut participants = Vec::new();
    for fill in &result.fills {
        let transfer_seq = nonces.next(&fill.buyer);
        txs.push(Transaction::new(
            fill.buyer,
            transfer_seq,
            Payload::TokenTransfer { from: fill.buyer, to: fill.seller, amount: fill.payment },
        ));
        txs.push(Transaction::new(
            engine,
            nonces.next(&engine),
            Payload::TradeSettlement(Settlement {
                round,
                use_case: result.use_case,
                seller: fill.seller,
                buyer: fill.buyer,
                quantity: fill.quantity,
                unit_price: fill.unit_price,
                payment: fill.payment,
                transfer_seq,
            }),
        ));
        for who in [fill.seller, fill.buyer] {
            if rewarded.insert(who) {
                participants.push(who);
            }
        }
    }
    if reward_per_trade > 0 {
        for to in participants {
            txs.push(Transaction::new(
                engine,
                nonces.next(&engine),
                Payload::Reward { to, amount: reward_per_trade, round, use_case: result.use_case },
            ));
        }
    }
    txs
}
