//! Synchronous, lossless round-based simulation of the validator network.
//!
//! Each round the scheduled proposer drains its mempool into a block, the
//! block is gossiped to every validator, and each validator votes. Honest
//! validators vote for a block only if it applies cleanly on their replica.
//! A block finalizes when strictly more than half of all validators vote
//! for it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{resolve_fork, BlockReport, ChainState, ConsensusError, NodeRole, TxError};
use crate::ledger::{Address, Block, Chain, Hash, Payload, Transaction};
use crate::market::UseCase;
use crate::token::UNITS_PER_XRG;

/// What a byzantine proposer does in an attack round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attack {
    /// Propose a block whose stored hash does not match its contents.
    ForgeHash,
    /// Propose a correctly sealed block carrying an unbacked reward to itself.
    InvalidTx,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adversary {
    pub strategy: Attack,
    /// Rounds in which byzantine proposers attack; empty means every round.
    #[serde(default)]
    pub rounds: BTreeSet<u64>,
}

impl Adversary {
    pub fn attacks_in(&self, round: u64) -> bool {
        self.rounds.is_empty() || self.rounds.contains(&round)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: Address,
    pub role: NodeRole,
    pub honest: bool,
    pub replica: Chain,
    pub state: ChainState,
    pub mempool: Vec<Transaction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub round: u64,
    pub voter: Address,
    pub block_hash: Hash,
    pub accept: bool,
}

/// Messages exchanged within a round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Proposal { round: u64, block: Block },
    Vote(Vote),
    ChainSync { round: u64, node: Address, height: u64, tip: Hash },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProposalOutcome {
    pub round: u64,
    pub proposer: Address,
    pub block: Block,
    pub votes_for: usize,
    pub votes_against: usize,
    pub finalized: bool,
    /// Mempool transactions the proposer left out, with reasons. Empty
    /// unless the block finalized.
    pub rejected: Vec<(Transaction, TxError)>,
    /// Effects on the reference replica, if it appended the block.
    pub report: Option<BlockReport>,
    pub votes: Vec<Vote>,
    /// Honest nodes that switched chains during sync.
    pub resynced: Vec<Address>,
}

impl ProposalOutcome {
    /// The round's traffic in delivery order.
    pub fn messages(&self) -> Vec<Message> {
        let mut out = vec![Message::Proposal { round: self.round, block: self.block.clone() }];
        out.extend(self.votes.iter().copied().map(Message::Vote));
        out
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    nodes: Vec<Node>,
    adversary: Option<Adversary>,
    fork_events: u64,
    distinct_tips: usize,
    sync_log: Vec<Message>,
}

impl Network {
    /// Start every validator registered in `genesis` from that block.
    /// Validators absent from `honesty` are honest.
    pub fn new(
        genesis: &Chain,
        honesty: &BTreeMap<Address, bool>,
        adversary: Option<Adversary>,
    ) -> Result<Self, ConsensusError> {
        let block = genesis.genesis().ok_or(ConsensusError::NoValidCandidate)?;
        let state = ChainState::from_genesis(block)?;
        let mut nodes = Vec::new();
        for id in state.validators() {
            let role = state.role_of(&id).and_then(|r| r.node_role()).ok_or(ConsensusError::NoValidators)?;
            nodes.push(Node {
                id,
                role,
                honest: honesty.get(&id).copied().unwrap_or(true),
                replica: Chain::from_blocks(vec![block.clone()]),
                state: state.clone(),
                mempool: Vec::new(),
            });
        }
        if nodes.is_empty() {
            return Err(ConsensusError::NoValidators);
        }
        if !nodes.iter().any(|n| n.honest) {
            return Err(ConsensusError::NoHonestNode);
        }
        Ok(Self { nodes, adversary, fork_events: 0, distinct_tips: 1, sync_log: Vec::new() })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: &Address) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == *id)
    }

    /// Lowest-id honest node; its replica is the run's chain of record.
    pub fn reference(&self) -> &Node {
        self.nodes.iter().find(|n| n.honest).expect("checked at construction")
    }

    pub fn fork_events(&self) -> u64 {
        self.fork_events
    }

    pub fn sync_log(&self) -> &[Message] {
        &self.sync_log
    }

    /// Number of distinct replica tips across all nodes.
    pub fn distinct_tips(&self) -> usize {
        self.nodes.iter().map(|n| n.replica.tip_hash()).collect::<BTreeSet<_>>().len()
    }

    /// True when every honest replica is identical.
    pub fn honest_agree(&self) -> bool {
        let mut honest = self.nodes.iter().filter(|n| n.honest);
        let first = honest.next().expect("checked at construction");
        honest.all(|n| n.replica == first.replica && n.state == first.state)
    }

    /// Gate a transaction against the reference replica's tip state and the
    /// pending mempool, then gossip it to every node.
    pub fn submit_transaction(&mut self, tx: Transaction) -> Result<(), TxError> {
        let reference = self.reference();
        reference.state.admit(&tx)?;
        if reference.mempool.iter().any(|p| p.id() == tx.id()) {
            return Err(TxError::DuplicateSeq);
        }
        for node in &mut self.nodes {
            node.mempool.push(tx.clone());
        }
        Ok(())
    }

    pub fn run_round(&mut self, round: u64) -> ProposalOutcome {
        let proposer_id = self.reference().state.proposer_for(round);
        let proposer = self.node(&proposer_id).expect("proposers are validators");
        let attacking = !proposer.honest
            && self.adversary.as_ref().is_some_and(|a| a.attacks_in(round));
        let (included, rejected) = proposer.state.select_transactions(round, &proposer.mempool);
        let tip = proposer.replica.tip().expect("replica has genesis");
        let mut block = Block::seal(tip.height + 1, tip.hash, round, proposer_id, included);
        if attacking {
            match self.adversary.as_ref().map(|a| a.strategy) {
                Some(Attack::ForgeHash) => block.hash.0[0] ^= 0xff,
                Some(Attack::InvalidTx) => {
                    block.transactions.push(forged_reward(proposer_id, round));
                    block.rehash();
                }
                None => {}
            }
        }

        let votes: Vec<Vote> = self
            .nodes
            .iter()
            .map(|n| Vote {
                round,
                voter: n.id,
                block_hash: block.hash,
                accept: !n.honest || n.state.clone().apply_block(&block).is_ok(),
            })
            .collect();
        let votes_for = votes.iter().filter(|v| v.accept).count();
        let votes_against = votes.len() - votes_for;
        let finalized = 2 * votes_for > votes.len();

        let mut report = None;
        if finalized {
            let reference_id = self.reference().id;
            let settled: BTreeSet<(Address, u64)> = block
                .transactions
                .iter()
                .chain(rejected.iter().map(|(tx, _)| tx))
                .map(Transaction::id)
                .collect();
            for (node, vote) in self.nodes.iter_mut().zip(&votes) {
                let appended = if node.honest {
                    match vote.accept.then(|| node.state.apply_block(&block)) {
                        Some(Ok(r)) => {
                            if node.id == reference_id {
                                report = Some(r);
                            }
                            true
                        }
                        _ => false,
                    }
                } else if block.prev_hash == node.replica.tip_hash()
                    && block.height == node.replica.len() as u64
                {
                    node.state.apply_block_lenient(&block);
                    true
                } else {
                    false
                };
                if appended {
                    node.replica.push_unchecked(block.clone());
                    node.mempool.retain(|tx| !settled.contains(&tx.id()));
                }
            }
        }

        let tips = self.distinct_tips();
        if tips > self.distinct_tips {
            self.fork_events += 1;
        }
        let resynced = self.sync_honest(round);
        self.distinct_tips = self.distinct_tips();

        ProposalOutcome {
            round,
            proposer: proposer_id,
            block,
            votes_for,
            votes_against,
            finalized,
            rejected: if finalized { rejected } else { Vec::new() },
            report,
            votes,
            resynced,
        }
    }

    /// Let honest nodes adopt the fork-choice winner among the replicas
    /// that also replay cleanly. Runs only when tips differ.
    fn sync_honest(&mut self, round: u64) -> Vec<Address> {
        if self.distinct_tips() <= 1 {
            return Vec::new();
        }
        let genesis = self.reference().replica.genesis().map(|b| b.hash);
        let mut candidates: Vec<(Chain, ChainState)> = Vec::new();
        let mut seen = BTreeSet::new();
        for node in &self.nodes {
            let chain = &node.replica;
            if !seen.insert(chain.tip_hash()) || chain.genesis().map(|b| b.hash) != genesis {
                continue;
            }
            if let Ok((state, _)) = ChainState::replay(chain) {
                candidates.push((chain.clone(), state));
            }
        }
        let Ok(best) = resolve_fork(candidates.iter().map(|(c, _)| c)) else {
            return Vec::new();
        };
        let best_tip = best.tip_hash();
        let (chain, state) = candidates
            .iter()
            .find(|(c, _)| c.tip_hash() == best_tip)
            .expect("winner is a candidate");
        let mut switched = Vec::new();
        for node in self.nodes.iter_mut().filter(|n| n.honest) {
            if node.replica.tip_hash() != best_tip {
                node.replica = chain.clone();
                node.state = state.clone();
                let included: BTreeSet<_> =
                    chain.blocks().iter().flat_map(|b| &b.transactions).map(Transaction::id).collect();
                node.mempool.retain(|tx| !included.contains(&tx.id()));
                switched.push(node.id);
                self.sync_log.push(Message::ChainSync {
                    round,
                    node: node.id,
                    height: chain.len() as u64 - 1,
                    tip: best_tip,
                });
            }
        }
        switched
    }
}

/// A reward minted out of thin air: no trade backs it.
fn forged_reward(to: Address, round: u64) -> Transaction {
    Transaction::new(
        Address::settlement_engine(),
        (1 << 62) + round,
        Payload::Reward {
            to,
            amount: 1_000_000 * UNITS_PER_XRG,
            round,
            use_case: UseCase::PeerToPeer,
        },
    )
}
