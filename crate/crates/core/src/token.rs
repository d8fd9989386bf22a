//! XRG token ledger: ERC20-style balances and allowances, staking for
//! marketplace access, and participation rewards.
//!
//! Amounts are integers in the smallest unit (`UNITS_PER_XRG` per token).
//! Every operation validates before it mutates, so a failed call leaves the
//! state untouched. Zero entries are pruned so that equal states compare
//! equal regardless of history.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::Address;

pub const UNITS_PER_XRG: u64 = 1_000_000;
pub const DEFAULT_MIN_STAKE: u64 = 10 * UNITS_PER_XRG;
pub const DEFAULT_REWARD_PER_TRADE: u64 = UNITS_PER_XRG / 100;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenError {
    #[error("insufficient balance: need {needed}, have {available}")]
    InsufficientBalance { needed: u64, available: u64 },
    #[error("insufficient allowance: need {needed}, have {available}")]
    InsufficientAllowance { needed: u64, available: u64 },
    #[error("insufficient stake: need {needed}, have {available}")]
    InsufficientStake { needed: u64, available: u64 },
    #[error("amount overflows the token supply")]
    Overflow,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenState {
    balances: BTreeMap<Address, u64>,
    #[serde(with = "allowance_list")]
    allowances: BTreeMap<(Address, Address), u64>,
    stakes: BTreeMap<Address, u64>,
    total_supply: u64,
    min_stake: u64,
}

impl TokenState {
    pub fn new(min_stake: u64) -> Self {
        Self { min_stake, ..Self::default() }
    }

    pub fn min_stake(&self) -> u64 {
        self.min_stake
    }

    pub fn total_supply(&self) -> u64 {
        self.total_supply
    }

    pub fn balance_of(&self, who: &Address) -> u64 {
        self.balances.get(who).copied().unwrap_or(0)
    }

    pub fn stake_of(&self, who: &Address) -> u64 {
        self.stakes.get(who).copied().unwrap_or(0)
    }

    pub fn allowance(&self, owner: &Address, spender: &Address) -> u64 {
        self.allowances.get(&(*owner, *spender)).copied().unwrap_or(0)
    }

    pub fn balances(&self) -> &BTreeMap<Address, u64> {
        &self.balances
    }

    pub fn stakes(&self) -> &BTreeMap<Address, u64> {
        &self.stakes
    }

    pub fn allowances(&self) -> &BTreeMap<(Address, Address), u64> {
        &self.allowances
    }

    /// Sum of all balances and stakes; equals `total_supply` at all times.
    pub fn circulating(&self) -> u128 {
        self.balances.values().chain(self.stakes.values()).map(|&v| v as u128).sum()
    }

    pub fn has_market_access(&self, who: &Address) -> bool {
        self.stake_of(who) >= self.min_stake
    }

    pub fn transfer(&mut self, from: &Address, to: &Address, amount: u64) -> Result<(), TokenError> {
        let available = self.balance_of(from);
        if available < amount {
            return Err(TokenError::InsufficientBalance { needed: amount, available });
        }
        if from == to || amount == 0 {
            return Ok(());
        }
        self.balance_of(to).checked_add(amount).ok_or(TokenError::Overflow)?;
        set(&mut self.balances, *from, available - amount);
        let credited = self.balance_of(to) + amount;
        set(&mut self.balances, *to, credited);
        Ok(())
    }

    /// Set (not add to) the amount `spender` may move out of `owner`.
    pub fn approve(&mut self, owner: &Address, spender: &Address, amount: u64) {
        set(&mut self.allowances, (*owner, *spender), amount);
    }

    pub fn transfer_from(
        &mut self,
        spender: &Address,
        owner: &Address,
        to: &Address,
        amount: u64,
    ) -> Result<(), TokenError> {
        let allowed = self.allowance(owner, spender);
        if allowed < amount {
            return Err(TokenError::InsufficientAllowance { needed: amount, available: allowed });
        }
        self.transfer(owner, to, amount)?;
        set(&mut self.allowances, (*owner, *spender), allowed - amount);
        Ok(())
    }

    pub fn stake(&mut self, who: &Address, amount: u64) -> Result<(), TokenError> {
        let available = self.balance_of(who);
        if available < amount {
            return Err(TokenError::InsufficientBalance { needed: amount, available });
        }
        let staked = self.stake_of(who).checked_add(amount).ok_or(TokenError::Overflow)?;
        set(&mut self.balances, *who, available - amount);
        set(&mut self.stakes, *who, staked);
        Ok(())
    }

    pub fn unstake(&mut self, who: &Address, amount: u64) -> Result<(), TokenError> {
        let staked = self.stake_of(who);
        if staked < amount {
            return Err(TokenError::InsufficientStake { needed: amount, available: staked });
        }
        let balance = self.balance_of(who).checked_add(amount).ok_or(TokenError::Overflow)?;
        set(&mut self.stakes, *who, staked - amount);
        set(&mut self.balances, *who, balance);
        Ok(())
    }

    /// Create `amount` new tokens in `who`'s balance.
    pub fn mint_reward(&mut self, who: &Address, amount: u64) -> Result<(), TokenError> {
        let supply = self.total_supply.checked_add(amount).ok_or(TokenError::Overflow)?;
        let balance = self.balance_of(who).checked_add(amount).ok_or(TokenError::Overflow)?;
        self.total_supply = supply;
        set(&mut self.balances, *who, balance);
        Ok(())
    }
}

fn set<K: Ord>(map: &mut BTreeMap<K, u64>, key: K, value: u64) {
    if value == 0 {
        map.remove(&key);
    } else {
        map.insert(key, value);
    }
}

mod allowance_list {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::ledger::Address;

    #[derive(Serialize, Deserialize)]
    struct Entry {
        owner: Address,
        spender: Address,
        amount: u64,
    }

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<(Address, Address), u64>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let entries: Vec<Entry> = map
            .iter()
            .map(|(&(owner, spender), &amount)| Entry { owner, spender, amount })
            .collect();
        entries.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<(Address, Address), u64>, D::Error> {
        let entries = Vec::<Entry>::deserialize(d)?;
        Ok(entries.into_iter().map(|e| ((e.owner, e.spender), e.amount)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn addr(s: &str) -> Address {
        Address::from_name(s)
    }

    fn funded(min_stake: u64, balances: &[(&str, u64)]) -> TokenState {
        let mut t = TokenState::new(min_stake);
        for (who, amount) in balances {
            t.mint_reward(&addr(who), *amount).unwrap();
        }
        t
    }

    #[test]
    fn transfer_moves_funds() {
        let mut t = funded(10, &[("A", 100)]);
        t.transfer(&addr("A"), &addr("B"), 40).unwrap();
        assert_eq!(t.balance_of(&addr("A")), 60);
        assert_eq!(t.balance_of(&addr("B")), 40);
        assert_eq!(t.total_supply(), 100);
    }

    #[test]
    fn zero_transfer_is_noop() {
        let mut t = funded(10, &[("A", 100)]);
        let before = t.clone();
        t.transfer(&addr("A"), &addr("B"), 0).unwrap();
        assert_eq!(t, before);
    }

    #[test]
    fn overdraft_is_atomic() {
        let mut t = funded(10, &[("A", 100)]);
        let before = t.clone();
        assert_eq!(
            t.transfer(&addr("A"), &addr("B"), 101),
            Err(TokenError::InsufficientBalance { needed: 101, available: 100 })
        );
        assert_eq!(t, before);
    }

    #[test]
    fn self_transfer_unchanged() {
        let mut t = funded(10, &[("A", 100)]);
        let before = t.clone();
        t.transfer(&addr("A"), &addr("A"), 70).unwrap();
        assert_eq!(t, before);
    }

    #[test]
    fn transfer_from_spends_allowance() {
        let mut t = funded(10, &[("A", 100)]);
        t.approve(&addr("A"), &addr("S"), 50);
        t.transfer_from(&addr("S"), &addr("A"), &addr("B"), 30).unwrap();
        assert_eq!(t.allowance(&addr("A"), &addr("S")), 20);
        assert_eq!(t.balance_of(&addr("B")), 30);
        let before = t.clone();
        assert_eq!(
            t.transfer_from(&addr("S"), &addr("A"), &addr("B"), 30),
            Err(TokenError::InsufficientAllowance { needed: 30, available: 20 })
        );
        assert_eq!(t, before);
    }

    #[test]
    fn approve_overwrites() {
        let mut t = TokenState::new(10);
        t.approve(&addr("A"), &addr("S"), 50);
        t.approve(&addr("A"), &addr("S"), 10);
        assert_eq!(t.allowance(&addr("A"), &addr("S")), 10);
    }

    #[test]
    fn transfer_from_with_allowance_but_no_balance() {
        let mut t = funded(10, &[("A", 5)]);
        t.approve(&addr("A"), &addr("S"), 50);
        let before = t.clone();
        assert!(matches!(
            t.transfer_from(&addr("S"), &addr("A"), &addr("B"), 30),
            Err(TokenError::InsufficientBalance { .. })
        ));
        assert_eq!(t, before);
    }

    #[test]
    fn stake_threshold() {
        let mut t = funded(10, &[("A", 100), ("B", 100)]);
        t.stake(&addr("A"), 10).unwrap();
        assert!(t.has_market_access(&addr("A")));
        t.stake(&addr("B"), 9).unwrap();
        assert!(!t.has_market_access(&addr("B")));
    }

    #[test]
    fn unstake_restores_balance() {
        let mut t = funded(10, &[("A", 100)]);
        t.stake(&addr("A"), 10).unwrap();
        let before = t.circulating();
        t.unstake(&addr("A"), 5).unwrap();
        assert!(!t.has_market_access(&addr("A")));
        assert_eq!(t.balance_of(&addr("A")), 95);
        assert_eq!(t.circulating(), before);
        assert_eq!(t.circulating(), t.total_supply() as u128);
        assert!(matches!(t.unstake(&addr("A"), 6), Err(TokenError::InsufficientStake { .. })));
    }

    #[test]
    fn mint_changes_supply() {
        let mut t = TokenState::new(10);
        t.mint_reward(&addr("A"), 1).unwrap();
        assert_eq!(t.total_supply(), 1);
        let before = t.clone();
        t.mint_reward(&addr("A"), 0).unwrap();
        assert_eq!(t, before);
    }

    #[test]
    fn snapshot_json_round_trip() {
        let mut t = funded(10, &[("A", 100)]);
        t.approve(&addr("A"), &addr("S"), 7);
        t.stake(&addr("A"), 20).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: TokenState = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }
}
