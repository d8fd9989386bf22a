//! Independent oracles and fixtures shared by the integration tests. Nothing
//! here calls the code under test to compute an expected value.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use exergy_core::grid::{EdgeSpec, FeederSpec};
use exergy_core::ledger::Address;
use exergy_core::market::{Bid, ClearingResult, Offer, UseCase};
use exergy_core::sim::{load_scenario, ScenarioConfig};

pub type Q = Ratio<i128>;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

pub fn bundled(name: &str) -> ScenarioConfig {
    load_scenario(&scenario_path(name)).expect("bundled scenario loads")
}

// ---------------------------------------------------------------- auction

/// A small double-auction instance with whole-kWh quantities.
#[derive(Debug, Clone)]
pub struct AuctionInstance {
    /// (kWh, ask per kWh)
    pub asks: Vec<(u64, u64)>,
    /// (kWh, budget)
    pub bids: Vec<(u64, u64)>,
}

impl AuctionInstance {
    pub fn random(rng: &mut impl Rng, max_orders: usize) -> Self {
        let n_asks = rng.random_range(0..=max_orders);
        let n_bids = rng.random_range(0..=max_orders);
        let asks = (0..n_asks).map(|_| (rng.random_range(1..=3), rng.random_range(0..=10))).collect();
        let bids = (0..n_bids)
            .map(|_| {
                let q = rng.random_range(1..=3);
                (q, rng.random_range(0..=10 * q + 5))
            })
            .collect();
        Self { asks, bids }
    }

    pub fn seller(i: usize) -> Address {
        Address::from_name(&format!("seller-{i}"))
    }

    pub fn buyer(j: usize) -> Address {
        Address::from_name(&format!("buyer-{j}"))
    }

    /// Orders with `seq` values shuffled so that arrival order is irrelevant.
    pub fn orders(&self, rng: &mut impl Rng) -> (Vec<Offer>, Vec<Bid>) {
        let mut offers: Vec<Offer> = self
            .asks
            .iter()
            .enumerate()
            .map(|(i, &(kwh, price))| Offer {
                seller: Self::seller(i),
                use_case: UseCase::PeerToPeer,
                quantity_wh: kwh * 1000,
                unit_price: price,
                location: None,
                seq: i as u64,
            })
            .collect();
        let mut bids: Vec<Bid> = self
            .bids
            .iter()
            .enumerate()
            .map(|(j, &(kwh, budget))| Bid {
                buyer: Self::buyer(j),
                use_case: UseCase::PeerToPeer,
                quantity_wh: kwh * 1000,
                budget,
                location: None,
                seq: j as u64,
            })
            .collect();
        offers.shuffle(rng);
        bids.shuffle(rng);
        (offers, bids)
    }

    /// Per-kWh value of bid `j`.
    pub fn value(&self, j: usize) -> Q {
        let (kwh, budget) = self.bids[j];
        Q::new(budget as i128, kwh as i128)
    }
}

/// Brute-force maximum-surplus trade: every vector of per-offer sold
/// quantities and per-bid bought quantities is enumerated; for each total
/// the cheapest supply and the most valuable demand are kept. Returns
/// (max surplus, largest total quantity in kWh attaining it).
pub fn max_surplus_oracle(inst: &AuctionInstance) -> (Q, u64) {
    fn enumerate(caps: &[u64], weight: &dyn Fn(usize, u64) -> Q, best: &mut BTreeMap<u64, Q>, keep_max: bool) {
        let mut counter = vec![0u64; caps.len()];
        loop {
            let total: u64 = counter.iter().sum();
            let w: Q = counter.iter().enumerate().map(|(i, &c)| weight(i, c)).sum();
            best.entry(total)
                .and_modify(|b| {
                    if (keep_max && w > *b) || (!keep_max && w < *b) {
                        *b = w;
                    }
                })
                .or_insert(w);
            // odometer increment
            let mut k = 0;
            loop {
                if k == caps.len() {
                    return;
                }
                if counter[k] < caps[k] {
                    counter[k] += 1;
                    break;
                }
                counter[k] = 0;
                k += 1;
            }
        }
    }

    let ask_caps: Vec<u64> = inst.asks.iter().map(|a| a.0).collect();
    let bid_caps: Vec<u64> = inst.bids.iter().map(|b| b.0).collect();
    let mut cost = BTreeMap::new();
    let mut value = BTreeMap::new();
    enumerate(&ask_caps, &|i, c| Q::from((c * inst.asks[i].1) as i128), &mut cost, false);
    enumerate(&bid_caps, &|j, c| inst.value(j) * Q::from(c as i128), &mut value, true);

    let mut best = (Q::from(0), 0);
    for (&total, c) in &cost {
        if let Some(v) = value.get(&total) {
            let surplus = v - c;
            if surplus > best.0 || (surplus == best.0 && total > best.1) {
                best = (surplus, total);
            }
        }
    }
    best
}

/// Surplus realized by a clearing: per matched kWh, buyer value minus ask.
pub fn realized_surplus(inst: &AuctionInstance, result: &ClearingResult) -> Q {
    let ask_of: BTreeMap<Address, u64> =
        inst.asks.iter().enumerate().map(|(i, a)| (AuctionInstance::seller(i), a.1)).collect();
    let value_of: BTreeMap<Address, Q> =
        (0..inst.bids.len()).map(|j| (AuctionInstance::buyer(j), inst.value(j))).collect();
    result
        .fills
        .iter()
        .map(|f| {
            let kwh = Q::new(f.quantity as i128, 1000);
            (value_of[&f.buyer] - Q::from(ask_of[&f.seller] as i128)) * kwh
        })
        .sum()
}

// ---------------------------------------------------------------- grid

/// A random radial feeder: node `i > 0` hangs off a uniformly chosen
/// earlier node. Edges are listed shuffled and with random orientation.
#[derive(Debug, Clone)]
pub struct RandomTree {
    pub parent: Vec<Option<usize>>,
    pub capacity: Vec<u64>,
    pub spec: FeederSpec,
}

pub fn node_name(i: usize) -> String {
    format!("n{i}")
}

impl RandomTree {
    pub fn random(rng: &mut impl Rng, max_nodes: usize) -> Self {
        let n = rng.random_range(1..=max_nodes);
        let mut parent = vec![None];
        let mut capacity = vec![0];
        let mut edges = Vec::new();
        for i in 1..n {
            let p = rng.random_range(0..i);
            let cap = rng.random_range(1..=50);
            parent.push(Some(p));
            capacity.push(cap);
            let (a, b) = if rng.random_bool(0.5) { (i, p) } else { (p, i) };
            edges.push(EdgeSpec { a: node_name(a), b: node_name(b), capacity_w: cap });
        }
        edges.shuffle(rng);
        let mut nodes: Vec<String> = (0..n).map(node_name).collect();
        nodes.shuffle(rng);
        Self { parent, capacity, spec: FeederSpec { nodes, edges } }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    fn depth(&self, mut v: usize) -> usize {
        let mut d = 0;
        while let Some(p) = self.parent[v] {
            v = p;
            d += 1;
        }
        d
    }

    /// Edges on the tree path, each named by its child endpoint.
    pub fn path(&self, mut a: usize, mut b: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let (mut da, mut db) = (self.depth(a), self.depth(b));
        while da > db {
            out.push(a);
            a = self.parent[a].unwrap();
            da -= 1;
        }
        while db > da {
            out.push(b);
            b = self.parent[b].unwrap();
            db -= 1;
        }
        while a != b {
            out.push(a);
            out.push(b);
            a = self.parent[a].unwrap();
            b = self.parent[b].unwrap();
        }
        out
    }
}

/// Sequential residual-capacity bookkeeping, one slot per child node.
pub struct ResidualOracle<'a> {
    tree: &'a RandomTree,
    pub flow: Vec<u64>,
}

impl<'a> ResidualOracle<'a> {
    pub fn new(tree: &'a RandomTree) -> Self {
        Self { tree, flow: vec![0; tree.len()] }
    }

    pub fn request(&mut self, a: usize, b: usize, amount: u64) -> u64 {
        let path = self.tree.path(a, b);
        let granted = path
            .iter()
            .map(|&c| self.tree.capacity[c] - self.flow[c])
            .min()
            .map_or(amount, |r| r.min(amount));
        for &c in &path {
            self.flow[c] += granted;
        }
        granted
    }
}

// ---------------------------------------------------------------- token

/// Straight-line ERC20 reference: plain maps, signed arithmetic, explicit
/// failure checks, no pruning.
#[derive(Debug, Clone, Default)]
pub struct TokenModel {
    pub balances: BTreeMap<Address, i128>,
    pub stakes: BTreeMap<Address, i128>,
    pub allowances: BTreeMap<(Address, Address), i128>,
    pub supply: i128,
    pub minted: i128,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenOp {
    Transfer(usize, usize, u64),
    Approve(usize, usize, u64),
    TransferFrom(usize, usize, usize, u64),
    Stake(usize, u64),
    Unstake(usize, u64),
    Mint(usize, u64),
}

impl TokenOp {
    pub fn random(rng: &mut impl RngCore, accounts: usize) -> Self {
        let who = |rng: &mut dyn RngCore| rng.random_range(0..accounts);
        let amount = |rng: &mut dyn RngCore| match rng.random_range(0..10) {
            0 => 0,
            1..=6 => rng.random_range(1..=50),
            _ => rng.random_range(0..=400),
        };
        match rng.random_range(0..12) {
            0..=3 => TokenOp::Transfer(who(rng), who(rng), amount(rng)),
            4..=5 => TokenOp::Approve(who(rng), who(rng), amount(rng)),
            6..=7 => TokenOp::TransferFrom(who(rng), who(rng), who(rng), amount(rng)),
            8 => TokenOp::Stake(who(rng), amount(rng)),
            9 => TokenOp::Unstake(who(rng), amount(rng)),
            _ => TokenOp::Mint(who(rng), amount(rng)),
        }
    }
}

pub fn account(i: usize) -> Address {
    Address::from_name(&format!("account-{i}"))
}

impl TokenModel {
    fn get<K: Ord>(m: &BTreeMap<K, i128>, k: &K) -> i128 {
        m.get(k).copied().unwrap_or(0)
    }

    /// Apply `op`; `false` means the op must fail and leave state untouched.
    pub fn apply(&mut self, op: TokenOp) -> bool {
        match op {
            TokenOp::Transfer(f, t, x) => self.move_tokens(account(f), account(t), x as i128),
            TokenOp::Approve(o, s, x) => {
                self.allowances.insert((account(o), account(s)), x as i128);
                true
            }
            TokenOp::TransferFrom(s, o, t, x) => {
                let (s, o, t, x) = (account(s), account(o), account(t), x as i128);
                let allowed = Self::get(&self.allowances, &(o, s));
                if allowed < x || Self::get(&self.balances, &o) < x {
                    return false;
                }
                self.allowances.insert((o, s), allowed - x);
                self.move_tokens(o, t, x)
            }
            TokenOp::Stake(w, x) => {
                let (w, x) = (account(w), x as i128);
                if Self::get(&self.balances, &w) < x {
                    return false;
                }
                *self.balances.entry(w).or_default() -= x;
                *self.stakes.entry(w).or_default() += x;
                true
            }
            TokenOp::Unstake(w, x) => {
                let (w, x) = (account(w), x as i128);
                if Self::get(&self.stakes, &w) < x {
                    return false;
                }
                *self.stakes.entry(w).or_default() -= x;
                *self.balances.entry(w).or_default() += x;
                true
            }
            TokenOp::Mint(w, x) => {
                *self.balances.entry(account(w)).or_default() += x as i128;
                self.supply += x as i128;
                self.minted += x as i128;
                true
            }
        }
    }

    fn move_tokens(&mut self, from: Address, to: Address, x: i128) -> bool {
        if Self::get(&self.balances, &from) < x {
            return false;
        }
        *self.balances.entry(from).or_default() -= x;
        *self.balances.entry(to).or_default() += x;
        true
    }

    pub fn balance(&self, who: &Address) -> i128 {
        Self::get(&self.balances, who)
    }

    pub fn stake(&self, who: &Address) -> i128 {
        Self::get(&self.stakes, who)
    }

    pub fn allowance(&self, owner: &Address, spender: &Address) -> i128 {
        Self::get(&self.allowances, &(*owner, *spender))
    }
}
