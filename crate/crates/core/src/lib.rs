//! Core algorithms for turning raw Ethereum-style chain data and hourly market
//! ticks into windowed machine-learning datasets, plus the baseline predictors
//! and error measures used to evaluate them.
//!
//! Everything in this crate is pure computation over in-memory data: ledger
//! replay, per-tick property extraction, log-bucketed account distributions,
//! normalization with exact inverses, sliding-window dataset assembly, and
//! Adam-trained baseline models. File formats, storage, RPC and the command
//! line front end live in the companion `chainsight` crate.
//!
//! The crate is `no_std` (with `alloc`) so the numeric pipeline stays
//! independent of any IO or platform concerns.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod chain;
pub mod dataset;
pub mod distributions;
pub mod ledger;
pub mod model;
pub mod normalize;
pub mod properties;
pub mod rng;
pub mod types;

pub use types::{Address, Amount, Block, MarketTick, Trace, TraceKind, Transaction, TICK_SECONDS};
