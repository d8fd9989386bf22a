use serde::{Deserialize, Serialize};

use super::{compute_hash, Address, Canonical, Encoder, Hash, LedgerError, Transaction};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    pub prev_hash: Hash,
    /// Simulation round in which the block was produced.
    pub timestamp: u64,
    pub proposer: Address,
    pub transactions: Vec<Transaction>,
    pub hash: Hash,
}

/// Canonical bytes of a block's hashed fields (everything except `hash`).
pub fn canonical_encode(
    height: u64,
    prev_hash: &Hash,
    timestamp: u64,
    proposer: &Address,
    transactions: &[Transaction],
) -> Vec<u8> {
    let mut enc = Encoder::new();
    enc.u64(height)
        .put(prev_hash)
        .u64(timestamp)
        .put(proposer)
        .list(transactions);
    enc.finish()
}

impl Block {
    pub fn seal(
        height: u64,
        prev_hash: Hash,
        timestamp: u64,
        proposer: Address,
        transactions: Vec<Transaction>,
    ) -> Self {
        let mut block = Block {
            height,
            prev_hash,
            timestamp,
            proposer,
            transactions,
            hash: Hash::ZERO,
        };
        block.rehash();
        block
    }

    pub fn canonical_encode(&self) -> Vec<u8> {
        canonical_encode(
            self.height,
            &self.prev_hash,
            self.timestamp,
            &self.proposer,
            &self.transactions,
        )
    }

    pub fn compute_hash(&self) -> Hash {
        compute_hash(&self.canonical_encode())
    }

    pub fn rehash(&mut self) {
        self.hash = self.compute_hash();
    }

    /// Stored hash matches the contents.
    pub fn is_sealed(&self) -> bool {
        self.hash == self.compute_hash()
    }
}

impl Canonical for Block {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.raw(&self.canonical_encode());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Invalid { first_bad_height: u64 },
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }
}

/// Hash-linked sequence of blocks starting at genesis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    blocks: Vec<Block>,
}

impl Chain {
    /// Start a chain from genesis records issued by the genesis authority.
    pub fn from_genesis(transactions: Vec<Transaction>) -> Self {
        let genesis = Block::seal(0, Hash::ZERO, 0, Address::genesis_authority(), transactions);
        Self { blocks: vec![genesis] }
    }

    /// Wrap blocks as-is; use [`Chain::validate`] before trusting them.
    pub fn from_blocks(blocks: Vec<Block>) -> Self {
        Self { blocks }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<Block> {
        self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn genesis(&self) -> Option<&Block> {
        self.blocks.first()
    }

    pub fn tip(&self) -> Option<&Block> {
        self.blocks.last()
    }

    pub fn tip_hash(&self) -> Hash {
        self.tip().map(|b| b.hash).unwrap_or(Hash::ZERO)
    }

    pub fn block_mut(&mut self, height: u64) -> Option<&mut Block> {
        self.blocks.get_mut(height as usize)
    }

    /// Seal a new block on top of the tip. The existing chain is validated
    /// first; a broken chain cannot be extended.
    pub fn append_block(
        &mut self,
        transactions: Vec<Transaction>,
        proposer: Address,
        round: u64,
    ) -> Result<&Block, LedgerError> {
        if let Verdict::Invalid { first_bad_height } = self.validate() {
            return Err(LedgerError::InvalidChain { first_bad_height });
        }
        let tip = self.tip().expect("valid chain has genesis");
        let block = Block::seal(tip.height + 1, tip.hash, round, proposer, transactions);
        self.blocks.push(block);
        Ok(self.blocks.last().unwrap())
    }

    /// Check that `block` is a correctly sealed direct successor of the tip.
    pub fn check_extends(&self, block: &Block) -> Result<(), LedgerError> {
        let (height, prev) = match self.tip() {
            Some(tip) => (tip.height + 1, tip.hash),
            None => (0, Hash::ZERO),
        };
        if block.height != height || block.prev_hash != prev {
            return Err(LedgerError::DoesNotExtend { height: block.height });
        }
        if !block.is_sealed() {
            return Err(LedgerError::BadSeal { height: block.height });
        }
        Ok(())
    }

    /// Append a received block after checking linkage and seal.
    pub fn push(&mut self, block: Block) -> Result<(), LedgerError> {
        self.check_extends(&block)?;
        self.blocks.push(block);
        Ok(())
    }

    /// Append without any checks. Only byzantine replicas do this.
    pub fn push_unchecked(&mut self, block: Block) {
        self.blocks.push(block);
    }

    pub fn validate(&self) -> Verdict {
        validate_chain(&self.blocks)
    }
}

/// Lowest height whose stored hash, link to its predecessor, or height
/// number is wrong.
pub fn validate_chain(blocks: &[Block]) -> Verdict {
    if blocks.is_empty() {
        return Verdict::Invalid { first_bad_height: 0 };
    }
    for (i, block) in blocks.iter().enumerate() {
        let expected_prev = if i == 0 { Hash::ZERO } else { blocks[i - 1].hash };
        if block.height != i as u64 || block.prev_hash != expected_prev || !block.is_sealed() {
            return Verdict::Invalid { first_bad_height: i as u64 };
        }
    }
    Verdict::Valid
}

/// Field-level edit applied to one block when probing tamper evidence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockField {
    Timestamp(u64),
    Proposer(Address),
    PrevHash(Hash),
    ReplaceTransaction(usize, Transaction),
    RemoveTransaction(usize),
    AppendTransaction(Transaction),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mutation {
    pub height: u64,
    pub field: BlockField,
    /// Re-seal the mutated block and re-link and re-seal every later block.
    pub forge_downstream: bool,
}

impl Mutation {
    pub fn new(height: u64, field: BlockField) -> Self {
        Self { height, field, forge_downstream: false }
    }

    pub fn forged(mut self) -> Self {
        self.forge_downstream = true;
        self
    }

    pub fn apply(&self, chain: &mut Chain) -> Result<(), LedgerError> {
        let tip = chain.len() as u64;
        let block = chain
            .block_mut(self.height)
            .ok_or(LedgerError::OutOfRange { height: self.height, len: tip })?;
        match &self.field {
            BlockField::Timestamp(t) => block.timestamp = *t,
            BlockField::Proposer(p) => block.proposer = *p,
            BlockField::PrevHash(h) => block.prev_hash = *h,
            BlockField::ReplaceTransaction(i, tx) => {
                let slot = block
                    .transactions
                    .get_mut(*i)
                    .ok_or(LedgerError::OutOfRange { height: *i as u64, len: 0 })?;
                *slot = tx.clone();
            }
            BlockField::RemoveTransaction(i) => {
                if *i >= block.transactions.len() {
                    return Err(LedgerError::OutOfRange {
                        height: *i as u64,
                        len: block.transactions.len() as u64,
                    });
                }
                block.transactions.remove(*i);
            }
            BlockField::AppendTransaction(tx) => block.transactions.push(tx.clone()),
        }
        if self.forge_downstream {
            let start = self.height as usize;
            for i in start..chain.blocks.len() {
                if i > start {
                    chain.blocks[i].prev_hash = chain.blocks[i - 1].hash;
                }
                chain.blocks[i].rehash();
            }
        }
        Ok(())
    }
}

/// Heights invalidated by applying `mutation` to a copy of `chain`: every
/// block from the first failure through the tip.
pub fn tamper_scan(chain: &Chain, mutation: &Mutation) -> Result<Vec<u64>, LedgerError> {
    let mut probe = chain.clone();
    mutation.apply(&mut probe)?;
    Ok(match probe.validate() {
        Verdict::Valid => Vec::new(),
        Verdict::Invalid { first_bad_height } => (first_bad_height..probe.len() as u64).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::Payload;

    fn transfer(amount: u64, seq: u64) -> Transaction {
        let a = Address::from_name("alice");
        Transaction::new(
            a,
            seq,
            Payload::TokenTransfer { from: a, to: Address::from_name("bob"), amount },
        )
    }

    fn chain_of(n: u64) -> Chain {
        let mut chain = Chain::from_genesis(vec![]);
        let proposer = Address::from_name("v1");
        for h in 1..n {
            chain.append_block(vec![transfer(h * 10, h)], proposer, h).unwrap();
        }
        chain
    }

    #[test]
    fn genesis_shape() {
        let chain = Chain::from_genesis(vec![]);
        let g = chain.genesis().unwrap();
        assert_eq!(g.height, 0);
        assert_eq!(g.prev_hash, Hash::ZERO);
        assert!(chain.validate().is_valid());
    }

    #[test]
    fn encoding_is_deterministic() {
        let chain = chain_of(3);
        let b = &chain.blocks()[1];
        assert_eq!(b.canonical_encode(), b.canonical_encode());
        assert_eq!(b.compute_hash(), b.hash);
    }

    #[test]
    fn encoding_changes_with_amount() {
        let chain = chain_of(2);
        let mut b = chain.blocks()[1].clone();
        let before = b.canonical_encode();
        b.transactions[0] = transfer(11, 1);
        assert_ne!(before, b.canonical_encode());
    }

    #[test]
    fn encoding_list_prefix() {
        let b = Block::seal(1, Hash::ZERO, 1, Address::from_name("v"), vec![transfer(1, 1), transfer(2, 2)]);
        let bytes = b.canonical_encode();
        // height(8) + prev_hash(32) + timestamp(8) + proposer(4 + 32)
        let off = 8 + 32 + 8 + 4 + 32;
        assert_eq!(u32::from_be_bytes(bytes[off..off + 4].try_into().unwrap()), 2);
    }

    #[test]
    fn append_links_blocks() {
        let chain = chain_of(2);
        assert_eq!(chain.len(), 2);
        assert_eq!(chain.blocks()[1].prev_hash, chain.blocks()[0].hash);
    }

    #[test]
    fn append_five_heights() {
        let chain = chain_of(6);
        let heights: Vec<u64> = chain.blocks().iter().map(|b| b.height).collect();
        assert_eq!(heights, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn append_empty_block() {
        let mut chain = chain_of(1);
        chain.append_block(vec![], Address::from_name("v"), 1).unwrap();
        assert!(chain.validate().is_valid());
        assert!(chain.tip().unwrap().transactions.is_empty());
    }

    #[test]
    fn append_refuses_broken_chain() {
        let mut chain = chain_of(4);
        chain.block_mut(2).unwrap().timestamp = 99;
        assert_eq!(
            chain.append_block(vec![], Address::from_name("v"), 9).unwrap_err(),
            LedgerError::InvalidChain { first_bad_height: 2 }
        );
    }

    #[test]
    fn validate_detects_mutation_and_rehash() {
        let chain = chain_of(10);
        assert_eq!(chain.validate(), Verdict::Valid);

        let mut m = chain.clone();
        m.block_mut(3).unwrap().transactions[0] = transfer(1, 3);
        assert_eq!(m.validate(), Verdict::Invalid { first_bad_height: 3 });

        m.block_mut(3).unwrap().rehash();
        assert_eq!(m.validate(), Verdict::Invalid { first_bad_height: 4 });
    }

    #[test]
    fn push_checks_linkage() {
        let chain = chain_of(3);
        let mut other = chain_of(2);
        let b = chain.blocks()[2].clone();
        other.push(b.clone()).unwrap();
        assert_eq!(other, chain);
        let mut wrong = b;
        wrong.prev_hash = Hash([7; 32]);
        wrong.rehash();
        assert!(chain_of(2).push(wrong).is_err());
    }

    #[test]
    fn tamper_scan_ranges() {
        let chain = chain_of(6);
        let at = |h| Mutation::new(h, BlockField::Timestamp(1000));
        assert_eq!(tamper_scan(&chain, &at(0)).unwrap(), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(tamper_scan(&chain, &at(5)).unwrap(), vec![5]);
        assert_eq!(tamper_scan(&chain, &at(2)).unwrap(), vec![2, 3, 4, 5]);
        assert!(tamper_scan(&chain, &at(2).forged()).unwrap().is_empty());
        assert_eq!(
            tamper_scan(&chain, &at(6)),
            Err(LedgerError::OutOfRange { height: 6, len: 6 })
        );
    }
}
