//! Desk-scale simulator of a permissioned energy blockchain: a hash-linked
//! ledger replicated by a round-based validator network, an XRG staking
//! token, market clearing for four transactive-energy use cases, and a
//! radial feeder model for feasibility checks.

pub mod consensus;
pub mod grid;
pub mod ledger;
pub mod market;
pub mod token;
pub mod sim;
