use std::cmp::Reverse;

use super::ConsensusError;
use crate::ledger::Chain;

/// Longest chain that passes `validate_chain`; equal lengths go to the
/// lexicographically smaller tip hash.
pub fn resolve_fork<'a>(
    candidates: impl IntoIterator<Item = &'a Chain>,
) -> Result<&'a Chain, ConsensusError> {
    candidates
        .into_iter()
        .filter(|c| !c.is_empty() && c.validate().is_valid())
        .max_by_key(|c| (c.len(), Reverse(c.tip_hash())))
        .ok_or(ConsensusError::NoValidCandidate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{Address, Hash};

    fn chain(len: usize, salt: u64) -> Chain {
        let p = Address::from_name("p");
        let mut c = Chain::from_genesis(vec![]);
        for r in 1..len as u64 {
            c.append_block(vec![], p, r * 100 + salt).unwrap();
        }
        c
    }

    #[test]
    fn longest_wins() {
        let (a, b) = (chain(4, 0), chain(6, 0));
        assert_eq!(resolve_fork([&a, &b]).unwrap().len(), 6);
    }

    #[test]
    fn tie_goes_to_smaller_tip() {
        let (a, b) = (chain(5, 1), chain(5, 2));
        let want = if a.tip_hash() < b.tip_hash() { a.tip_hash() } else { b.tip_hash() };
        assert_eq!(resolve_fork([&a, &b]).unwrap().tip_hash(), want);
        assert_eq!(resolve_fork([&b, &a]).unwrap().tip_hash(), want);
    }

    #[test]
    fn tampered_candidate_is_skipped() {
        let mut long = chain(7, 0);
        long.block_mut(3).unwrap().timestamp += 1;
        let short = chain(3, 0);
        assert_eq!(resolve_fork([&long, &short]).unwrap().tip_hash(), short.tip_hash());
    }

    #[test]
    fn nothing_valid() {
        let mut c = chain(2, 0);
        c.block_mut(1).unwrap().hash = Hash::ZERO;
        assert_eq!(resolve_fork([&c]).unwrap_err(), ConsensusError::NoValidCandidate);
        let none: [&Chain; 0] = [];
        assert!(resolve_fork(none).is_err());
    }
}
