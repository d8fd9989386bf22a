//! Hash-linked block chain: identities, canonical encoding, blocks,
//! validation, tamper probing and chain files.

mod block;
mod encode;
mod export;
mod tx;
mod types;

use thiserror::Error;

pub use block::{canonical_encode, tamper_scan, validate_chain, Block, BlockField, Chain, Mutation, Verdict};
pub use encode::{Canonical, Encoder};
pub use export::{export_chain, from_jsonl, import_chain, parse_jsonl, to_jsonl};
pub use tx::{ChainParams, DataRecord, Payload, Registration, Settlement, Transaction, TxKind};
pub use types::{compute_hash, Address, Hash};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("chain is invalid from height {first_bad_height}")]
    InvalidChain { first_bad_height: u64 },
    #[error("height {height} is out of range (chain length {len})")]
    OutOfRange { height: u64, len: u64 },
    #[error("block {height} does not extend the tip")]
    DoesNotExtend { height: u64 },
    #[error("block {height} stored hash does not match its contents")]
    BadSeal { height: u64 },
    #[error("malformed hex string {0:?}")]
    MalformedHex(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o: {0}")]
    Io(String),
}
