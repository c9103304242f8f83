//! Account-state replay.
//!
//! Transactions and traces are applied in chain order to maintain every
//! account's balance plus its per-tick activity counters. At each market-tick
//! boundary the state is frozen into a [`LedgerSnapshot`] covering the tick's
//! activity, and the per-tick counters reset.
//!
//! Raw dumps carry no genesis allocations, so a transfer can exceed the
//! sender's recorded balance. Balances clamp at zero and every clamp is
//! counted in the replay report rather than treated as an error.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::types::{Address, Amount, Block, Trace, TraceKind, Transaction};

/// ERC20 `transfer(address,uint256)` selector.
pub const SELECTOR_TRANSFER: [u8; 4] = [0xa9, 0x05, 0x9c, 0xbb];
/// ERC20 `transferFrom(address,address,uint256)` selector.
pub const SELECTOR_TRANSFER_FROM: [u8; 4] = [0x23, 0xb8, 0x72, 0xdd];

#[derive(Clone, Debug)]
pub struct LedgerConfig {
    /// Flat reward credited to the block miner, zero by default.
    pub miner_reward: Amount,
    /// Debit `gas_used * gas_price` from senders to the miner. Off by
    /// default: the extracted features never reference fees.
    pub debit_gas_fees: bool,
    /// Call-data selectors that mark a transaction as an ERC20 operation.
    pub erc20_selectors: Vec<[u8; 4]>,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        LedgerConfig {
            miner_reward: Amount::ZERO,
            debit_gas_fees: false,
            erc20_selectors: vec![SELECTOR_TRANSFER, SELECTOR_TRANSFER_FROM],
        }
    }
}

/// Per-account state: persistent balance plus counters that reset every tick.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct AccountState {
    pub balance: Amount,
    pub last_seen: u64,
    pub volume_in: Amount,
    pub volume_out: Amount,
    pub transaction_n: u64,
    pub erc20_n: u64,
    pub is_contract: bool,
}

/// Frozen account map at one tick boundary. The per-tick counters describe
/// activity inside that tick's hour.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LedgerSnapshot {
    pub tick_time: u64,
    pub accounts: BTreeMap<Address, AccountState>,
    /// Number of addresses ever seen up to this tick.
    pub unique_accounts: u64,
}

impl LedgerSnapshot {
    pub fn empty(tick_time: u64) -> LedgerSnapshot {
        LedgerSnapshot {
            tick_time,
            accounts: BTreeMap::new(),
            unique_accounts: 0,
        }
    }

    /// Stable 64-bit digest of the full snapshot, for determinism checks.
    pub fn digest(&self) -> u64 {
        let mut h = Fnv64::new();
        h.write_u64(self.tick_time);
        h.write_u64(self.unique_accounts);
        for (addr, st) in &self.accounts {
            h.write_bytes(&addr.0);
            h.write_u128(st.balance.wei());
            h.write_u64(st.balance.is_saturated() as u64);
            h.write_u64(st.last_seen);
            h.write_u128(st.volume_in.wei());
            h.write_u128(st.volume_out.wei());
            h.write_u64(st.transaction_n);
            h.write_u64(st.erc20_n);
            h.write_u64(st.is_contract as u64);
        }
        h.finish()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct ReplayReport {
    pub blocks_applied: u64,
    pub transfers_applied: u64,
    /// Transfers whose value exceeded the sender's balance; the balance was
    /// clamped at zero and the full value still credited to the receiver.
    pub clamped_transfers: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LedgerError {
    BlockOutOfOrder { number: u64, last: u64 },
}

impl fmt::Display for LedgerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LedgerError::BlockOutOfOrder { number, last } => {
                write!(f, "block {number} replayed after block {last}")
            }
        }
    }
}

impl core::error::Error for LedgerError {}

/// The replay state machine. Blocks must be applied in increasing number
/// order; snapshots may be taken at any tick boundary between blocks.
#[derive(Clone, Debug)]
pub struct Ledger {
    config: LedgerConfig,
    accounts: BTreeMap<Address, AccountState>,
    last_block: Option<u64>,
    report: ReplayReport,
}

impl Ledger {
    pub fn new(config: LedgerConfig) -> Ledger {
        Ledger {
            config,
            accounts: BTreeMap::new(),
            last_block: None,
            report: ReplayReport::default(),
        }
    }

    pub fn report(&self) -> ReplayReport {
        self.report
    }

    pub fn account(&self, addr: &Address) -> Option<&AccountState> {
        self.accounts.get(addr)
    }

    pub fn unique_accounts(&self) -> u64 {
        self.accounts.len() as u64
    }

    /// Seed an account balance outside of replay (genesis-style allocation).
    /// Used by tests and synthetic data; does not touch activity counters.
    pub fn credit_initial(&mut self, addr: Address, amount: Amount) {
        let st = self.accounts.entry(addr).or_default();
        st.balance = st.balance.saturating_add(amount);
    }

    /// Apply a single value transfer.
    ///
    /// Both sides get their activity counters bumped and `last_seen` set.
    /// The sender's balance clamps at zero (recorded in the report) while the
    /// receiver is always credited in full. A self-transfer counts as one
    /// transaction.
    pub fn apply_value_transfer(
        &mut self,
        from: Address,
        to: Address,
        value: Amount,
        timestamp: u64,
        is_erc20: bool,
    ) {
        self.report.transfers_applied += 1;
        {
            let sender = self.accounts.entry(from).or_default();
            let (balance, clamped) = sender.balance.clamped_sub(value);
            sender.balance = balance;
            if clamped {
                self.report.clamped_transfers += 1;
            }
            sender.volume_out = sender.volume_out.saturating_add(value);
            sender.transaction_n += 1;
            sender.last_seen = timestamp;
        }
        {
            let receiver = self.accounts.entry(to).or_default();
            receiver.balance = receiver.balance.saturating_add(value);
            receiver.volume_in = receiver.volume_in.saturating_add(value);
            if to != from {
                receiver.transaction_n += 1;
            }
            receiver.last_seen = timestamp;
            if is_erc20 {
                receiver.erc20_n += 1;
            }
        }
    }

    /// Replay one block: transaction transfers first, then trace transfers,
    /// then the optional miner reward. Creation traces mark the created
    /// address as a contract before their value moves.
    pub fn apply_block(
        &mut self,
        block: &Block,
        txs: &[Transaction],
        traces: &[Trace],
    ) -> Result<(), LedgerError> {
        if let Some(last) = self.last_block {
            if block.number <= last {
                return Err(LedgerError::BlockOutOfOrder {
                    number: block.number,
                    last,
                });
            }
        }
        for tx in txs {
            let is_erc20 = tx
                .input_selector
                .map(|sel| self.config.erc20_selectors.contains(&sel))
                .unwrap_or(false);
            match tx.to {
                Some(to) => {
                    self.apply_value_transfer(tx.from, to, tx.value, block.timestamp, is_erc20)
                }
                None => {
                    // Contract creation: the created address is unknown at the
                    // transaction level (the matching `create` trace carries
                    // it), so only the sender's participation is recorded.
                    let sender = self.accounts.entry(tx.from).or_default();
                    sender.transaction_n += 1;
                    sender.last_seen = block.timestamp;
                }
            }
            if self.config.debit_gas_fees {
                let fee = Amount::new((tx.gas_used as u128).saturating_mul(tx.gas_price.wei()));
                if !fee.is_zero() {
                    let sender = self.accounts.entry(tx.from).or_default();
                    let (balance, clamped) = sender.balance.clamped_sub(fee);
                    sender.balance = balance;
                    if clamped {
                        self.report.clamped_transfers += 1;
                    }
                    let miner = self.accounts.entry(block.miner).or_default();
                    miner.balance = miner.balance.saturating_add(fee);
                }
            }
        }
        for trace in traces {
            if trace.kind == TraceKind::Create {
                self.accounts.entry(trace.to).or_default().is_contract = true;
            }
            self.apply_value_transfer(trace.from, trace.to, trace.value, block.timestamp, false);
        }
        if !self.config.miner_reward.is_zero() {
            let miner = self.accounts.entry(block.miner).or_default();
            miner.balance = miner.balance.saturating_add(self.config.miner_reward);
        }
        self.last_block = Some(block.number);
        self.report.blocks_applied += 1;
        Ok(())
    }

    /// Freeze the state into a snapshot for the tick labelled `tick_time`
    /// (all of that tick's blocks must already be applied), then reset the
    /// per-tick counters. Balances, `last_seen` and contract flags persist.
    pub fn snapshot_at_tick(&mut self, tick_time: u64) -> LedgerSnapshot {
        let snapshot = LedgerSnapshot {
            tick_time,
            accounts: self.accounts.clone(),
            unique_accounts: self.accounts.len() as u64,
        };
        for st in self.accounts.values_mut() {
            st.volume_in = Amount::ZERO;
            st.volume_out = Amount::ZERO;
            st.transaction_n = 0;
            st.erc20_n = 0;
        }
        snapshot
    }

    /// Sum of all account balances, for conservation checks. Saturates.
    pub fn total_balance(&self) -> u128 {
        self.accounts
            .values()
            .fold(0u128, |acc, st| acc.saturating_add(st.balance.wei()))
    }
}

struct Fnv64(u64);

impl Fnv64 {
    fn new() -> Fnv64 {
        Fnv64(0xcbf2_9ce4_8422_2325)
    }

    fn write_bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    fn write_u64(&mut self, v: u64) {
        self.write_bytes(&v.to_le_bytes());
    }

    fn write_u128(&mut self, v: u128) {
        self.write_bytes(&v.to_le_bytes());
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn addr(n: u8) -> Address {
        let mut a = [0u8; 20];
        a[19] = n;
        Address(a)
    }

    fn block(number: u64, timestamp: u64) -> Block {
        Block {
            timestamp,
            number,
            miner: addr(200),
            size_bytes: 500,
            difficulty: Amount::new(100),
            gas_limit: 8_000_000,
            gas_used: 21_000,
            tx_count: 1,
        }
    }

    fn tx(from: Address, to: Option<Address>, value: u128) -> Transaction {
        Transaction {
            block_number: 1,
            from,
            to,
            value: Amount::new(value),
            gas_used: 21_000,
            gas_price: Amount::new(1),
            input_selector: None,
        }
    }

    #[test]
    fn transfer_moves_value_and_counters() {
        let mut ledger = Ledger::new(LedgerConfig::default());
        ledger.credit_initial(addr(1), Amount::new(10));
        ledger.apply_value_transfer(addr(1), addr(2), Amount::new(4), 100, false);
        let a = ledger.account(&addr(1)).unwrap();
        let b = ledger.account(&addr(2)).unwrap();
        assert_eq!(a.balance.wei(), 6);
        assert_eq!(b.balance.wei(), 4);
        assert_eq!(a.volume_out.wei(), 4);
        assert_eq!(b.volume_in.wei(), 4);
        assert_eq!(a.transaction_n, 1);
        assert_eq!(b.transaction_n, 1);
        assert_eq!(a.last_seen, 100);
        assert_eq!(b.last_seen, 100);
        assert_eq!(ledger.report().clamped_transfers, 0);
    }

    #[test]
    fn zero_value_transfer_still_counts() {
        let mut ledger = Ledger::new(LedgerConfig::default());
        ledger.apply_value_transfer(addr(1), addr(2), Amount::ZERO, 50, false);
        let a = ledger.account(&addr(1)).unwrap();
        assert_eq!(a.balance.wei(), 0);
        assert_eq!(a.transaction_n, 1);
        assert_eq!(a.last_seen, 50);
        assert_eq!(ledger.account(&addr(2)).unwrap().transaction_n, 1);
    }

    #[test]
    fn overdraft_clamps_and_is_recorded() {
        let mut ledger = Ledger::new(LedgerConfig::default());
        ledger.credit_initial(addr(1), Amount::new(3));
        ledger.apply_value_transfer(addr(1), addr(2), Amount::new(5), 10, false);
        assert_eq!(ledger.account(&addr(1)).unwrap().balance.wei(), 0);
        assert_eq!(ledger.account(&addr(2)).unwrap().balance.wei(), 5);
        assert_eq!(ledger.report().clamped_transfers, 1);
    }

    #[test]
    fn erc20_transfer_bumps_receiver_counter() {
        let mut ledger = Ledger::new(LedgerConfig::default());
        ledger.apply_value_transfer(addr(1), addr(9), Amount::ZERO, 10, true);
        assert_eq!(ledger.account(&addr(9)).unwrap().erc20_n, 1);
        assert_eq!(ledger.account(&addr(1)).unwrap().erc20_n, 0);
    }

    #[test]
    fn contract_forwarding_nets_to_zero() {
        // A sends 10 to contract C, which forwards 10 to B via a trace.
        let mut ledger = Ledger::new(LedgerConfig::default());
        ledger.credit_initial(addr(1), Amount::new(10));
        let b = block(1, 100);
        let txs = [tx(addr(1), Some(addr(3)), 10)];
        let traces = [Trace {
            block_number: 1,
            from: addr(3),
            to: addr(2),
            value: Amount::new(10),
            kind: TraceKind::Call,
        }];
        ledger.apply_block(&b, &txs, &traces).unwrap();
        assert_eq!(ledger.account(&addr(1)).unwrap().balance.wei(), 0);
        assert_eq!(ledger.account(&addr(3)).unwrap().balance.wei(), 0);
        assert_eq!(ledger.account(&addr(2)).unwrap().balance.wei(), 10);
        assert_eq!(ledger.report().clamped_transfers, 0);
        let c = ledger.account(&addr(3)).unwrap();
        assert_eq!(c.volume_in.wei(), 10);
        assert_eq!(c.volume_out.wei(), 10);
        assert_eq!(c.transaction_n, 2);
    }

    #[test]
    fn create_trace_marks_contract() {
        let mut ledger = Ledger::new(LedgerConfig::default());
        let b = block(1, 100);
        let txs = [tx(addr(1), None, 0)];
        let traces = [Trace {
            block_number: 1,
            from: addr(1),
            to: addr(7),
            value: Amount::ZERO,
            kind: TraceKind::Create,
        }];
        ledger.apply_block(&b, &txs, &traces).unwrap();
        assert!(ledger.account(&addr(7)).unwrap().is_contract);
        // The creation tx itself only records the sender's participation.
        assert_eq!(ledger.account(&addr(1)).unwrap().transaction_n, 2);
    }

    #[test]
    fn replaying_same_block_is_rejected() {
        let mut ledger = Ledger::new(LedgerConfig::default());
        ledger.apply_block(&block(5, 100), &[], &[]).unwrap();
        let err = ledger.apply_block(&block(5, 100), &[], &[]).unwrap_err();
        assert_eq!(err, LedgerError::BlockOutOfOrder { number: 5, last: 5 });
        assert!(ledger.apply_block(&block(4, 100), &[], &[]).is_err());
        assert!(ledger.apply_block(&block(6, 100), &[], &[]).is_ok());
    }

    #[test]
    fn snapshot_resets_tick_counters_only() {
        let mut ledger = Ledger::new(LedgerConfig::default());
        ledger.credit_initial(addr(1), Amount::new(10));
        ledger.apply_value_transfer(addr(1), addr(2), Amount::new(4), 100, false);
        let snap1 = ledger.snapshot_at_tick(3600);
        assert_eq!(snap1.accounts[&addr(1)].volume_out.wei(), 4);
        let snap2 = ledger.snapshot_at_tick(7200);
        let a2 = &snap2.accounts[&addr(1)];
        assert_eq!(a2.volume_out.wei(), 0);
        assert_eq!(a2.transaction_n, 0);
        assert_eq!(a2.balance.wei(), 6);
        assert_eq!(a2.last_seen, 100);
    }

    #[test]
    fn unique_accounts_counts_all_seen() {
        let mut ledger = Ledger::new(LedgerConfig::default());
        ledger.apply_value_transfer(addr(1), addr(2), Amount::ZERO, 1, false);
        ledger.apply_value_transfer(addr(2), addr(3), Amount::ZERO, 2, false);
        let snap = ledger.snapshot_at_tick(3600);
        assert_eq!(snap.unique_accounts, 3);
    }

    #[test]
    fn empty_replay_snapshot() {
        let mut ledger = Ledger::new(LedgerConfig::default());
        let snap = ledger.snapshot_at_tick(0);
        assert!(snap.accounts.is_empty());
        assert_eq!(snap.unique_accounts, 0);
    }

    #[test]
    fn miner_reward_credits_miner() {
        let config = LedgerConfig {
            miner_reward: Amount::new(5),
            ..LedgerConfig::default()
        };
        let mut ledger = Ledger::new(config);
        ledger.apply_block(&block(1, 10), &[], &[]).unwrap();
        assert_eq!(ledger.account(&addr(200)).unwrap().balance.wei(), 5);
    }

    #[test]
    fn gas_fee_debit_is_opt_in() {
        let config = LedgerConfig {
            debit_gas_fees: true,
            ..LedgerConfig::default()
        };
        let mut ledger = Ledger::new(config);
        ledger.credit_initial(addr(1), Amount::new(100_000));
        let txs = [tx(addr(1), Some(addr(2)), 0)];
        ledger.apply_block(&block(1, 10), &txs, &[]).unwrap();
        // fee = 21000 gas * 1 wei
        assert_eq!(ledger.account(&addr(1)).unwrap().balance.wei(), 79_000);
        assert_eq!(ledger.account(&addr(200)).unwrap().balance.wei(), 21_000);
    }

    #[test]
    fn self_transfer_is_one_transaction() {
        let mut ledger = Ledger::new(LedgerConfig::default());
        ledger.credit_initial(addr(1), Amount::new(10));
        ledger.apply_value_transfer(addr(1), addr(1), Amount::new(4), 10, false);
        let a = ledger.account(&addr(1)).unwrap();
        assert_eq!(a.transaction_n, 1);
        assert_eq!(a.balance.wei(), 10);
        assert_eq!(a.volume_in.wei(), 4);
        assert_eq!(a.volume_out.wei(), 4);
    }

    #[test]
    fn digest_is_stable_and_discriminating() {
        let mut a = Ledger::new(LedgerConfig::default());
        let mut b = Ledger::new(LedgerConfig::default());
        for ledger in [&mut a, &mut b] {
            ledger.credit_initial(addr(1), Amount::new(10));
            ledger.apply_value_transfer(addr(1), addr(2), Amount::new(4), 100, false);
        }
        assert_eq!(
            a.snapshot_at_tick(3600).digest(),
            b.snapshot_at_tick(3600).digest()
        );
        let mut c = Ledger::new(LedgerConfig::default());
        c.credit_initial(addr(1), Amount::new(11));
        c.apply_value_transfer(addr(1), addr(2), Amount::new(4), 100, false);
        assert_ne!(
            a.snapshot_at_tick(7200).digest(),
            c.snapshot_at_tick(3600).digest()
        );
    }
}
