//! Line-delimited JSON chain files: one block object per line.

use std::fs;
use std::path::Path;

use super::{Block, Chain, LedgerError, Verdict};

pub fn to_jsonl(chain: &Chain) -> String {
    let mut out = String::new();
    for block in chain.blocks() {
        out.push_str(&serde_json::to_string(block).expect("block serializes"));
        out.push('\n');
    }
    out
}

/// Parse blocks without checking hashes or links.
pub fn parse_jsonl(text: &str) -> Result<Chain, LedgerError> {
    let mut blocks = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let block: Block = serde_json::from_str(line).map_err(|e| LedgerError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        blocks.push(block);
    }
    Ok(Chain::from_blocks(blocks))
}

/// Parse and validate; a tampered file yields `InvalidChain`.
pub fn from_jsonl(text: &str) -> Result<Chain, LedgerError> {
    let chain = parse_jsonl(text)?;
    match chain.validate() {
        Verdict::Valid => Ok(chain),
        Verdict::Invalid { first_bad_height } => Err(LedgerError::InvalidChain { first_bad_height }),
    }
}

pub fn export_chain(chain: &Chain, path: &Path) -> Result<(), LedgerError> {
    fs::write(path, to_jsonl(chain)).map_err(|e| LedgerError::Io(e.to_string()))
}

pub fn import_chain(path: &Path) -> Result<Chain, LedgerError> {
    let text = fs::read_to_string(path).map_err(|e| LedgerError::Io(e.to_string()))?;
    from_jsonl(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{Address, Payload, Transaction};

    fn sample() -> Chain {
        let mut chain = Chain::from_genesis(vec![]);
        let a = Address::from_name("a");
        for r in 1..4 {
            let tx = Transaction::new(a, r, Payload::Stake { amount: r * 7 });
            chain.append_block(vec![tx], Address::from_name("v"), r).unwrap();
        }
        chain
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let chain = sample();
        let text = to_jsonl(&chain);
        let back = from_jsonl(&text).unwrap();
        assert_eq!(back, chain);
        assert_eq!(to_jsonl(&back), text);
    }

    #[test]
    fn key_order() {
        let text = to_jsonl(&sample());
        let first = text.lines().next().unwrap();
        let keys = ["\"height\"", "\"prev_hash\"", "\"timestamp\"", "\"proposer\"", "\"transactions\"", "\"hash\""];
        let pos: Vec<usize> = keys.iter().map(|k| first.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn edited_amount_is_invalid() {
        let text = to_jsonl(&sample()).replace("\"amount\":14", "\"amount\":15");
        assert_eq!(from_jsonl(&text).unwrap_err(), LedgerError::InvalidChain { first_bad_height: 2 });
    }

    #[test]
    fn parse_error_reports_line() {
        let mut text = to_jsonl(&sample());
        text.push_str("{not json\n");
        assert!(matches!(from_jsonl(&text), Err(LedgerError::Parse { line: 5, .. })));
    }
}
