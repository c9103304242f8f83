//! Spatial account distributions: per-tick 2D histograms of account features
//! under log-scaled bucketing. These are the "pictures" of the chain that the
//! stacked dataset model feeds to spatial predictors.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::ledger::{AccountState, LedgerSnapshot};

/// Names of the built-in account-number distribution configurations.
pub mod names {
    pub const BALANCE_LAST_SEEN: &str = "balanceLastSeenDistribution";
    pub const CONTRACT_BALANCE_LAST_SEEN: &str = "contractBalanceLastSeenDistribution";
    pub const CONTRACT_VOLUME_IN_ERC20: &str = "contractVolumeInERC20Distribution";
}

/// Logarithmic bucketing function: `scl(x) = log_base(floor(x / pre_divisor))`.
///
/// Wei-denominated features are pre-divided to larger units (e.g. `10^17` wei
/// = 0.1 ETH) before the log to reduce noise; counts and ages use divisor 1.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct ScaleFn {
    pub base: f64,
    pub pre_divisor: u128,
}

impl ScaleFn {
    pub const fn new(base: f64, pre_divisor: u128) -> ScaleFn {
        ScaleFn { base, pre_divisor }
    }

    /// `log_base(floor(value / pre_divisor))`; `None` when the reduced value
    /// is zero and the log undefined.
    pub fn apply(&self, value: u128) -> Option<f64> {
        let reduced = value / self.pre_divisor;
        if reduced == 0 {
            None
        } else {
            Some(self.log(reduced as f64))
        }
    }

    /// Number of groups for a maximum constant: `floor(log_base(mx))`.
    /// `mx` is expressed in already-reduced units.
    pub fn group_count(&self, mx: f64) -> usize {
        let g = libm::floor(self.log(mx));
        if g < 1.0 {
            1
        } else {
            g as usize
        }
    }

    /// Entry-wise matrix rescale: plain `log_base(y)`, defined as 0 for
    /// `y < 1` so zero cells stay zero and the matrix stays non-negative.
    /// The pre-divisor intentionally does not apply here.
    pub fn rescale(&self, y: f64) -> f64 {
        if y < 1.0 {
            0.0
        } else {
            self.log(y)
        }
    }

    fn log(&self, x: f64) -> f64 {
        // Dedicated routines keep exact powers of the base exact (log2 of
        // 2^18 must floor to 18, not 17).
        if self.base == 2.0 {
            libm::log2(x)
        } else if self.base == 10.0 {
            libm::log10(x)
        } else {
            libm::log(x) / libm::log(self.base)
        }
    }
}

/// Bucket index for a feature value: `clamp(floor(scl(value)), 0, group_n-1)`.
/// Values the scale cannot express (below one reduced unit) land in group 0.
pub fn group_index(value: u128, scl: &ScaleFn, group_n: usize) -> usize {
    match scl.apply(value) {
        None => 0,
        Some(l) => {
            if l < 0.0 {
                0
            } else {
                let g = libm::floor(l) as usize;
                g.min(group_n - 1)
            }
        }
    }
}

/// Account feature selectors for distribution axes.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum AccountFeature {
    Balance,
    LastSeen,
    VolumeIn,
    VolumeOut,
    TransactionN,
    Erc20,
}

impl AccountFeature {
    pub fn from_name(name: &str) -> Result<AccountFeature, DistributionError> {
        match name {
            "balance" => Ok(AccountFeature::Balance),
            "lastSeen" => Ok(AccountFeature::LastSeen),
            "volumeIn" => Ok(AccountFeature::VolumeIn),
            "volumeOut" => Ok(AccountFeature::VolumeOut),
            "transactionN" => Ok(AccountFeature::TransactionN),
            "ERC20" => Ok(AccountFeature::Erc20),
            other => Err(DistributionError::UnknownFeature(String::from(other))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AccountFeature::Balance => "balance",
            AccountFeature::LastSeen => "lastSeen",
            AccountFeature::VolumeIn => "volumeIn",
            AccountFeature::VolumeOut => "volumeOut",
            AccountFeature::TransactionN => "transactionN",
            AccountFeature::Erc20 => "ERC20",
        }
    }

    /// Evaluate the feature for one account at a snapshot instant.
    /// `lastSeen` is the age in seconds relative to the snapshot's tick time
    /// (saturating at zero for activity inside the tick itself).
    pub fn value(&self, state: &AccountState, tick_time: u64) -> u128 {
        match self {
            AccountFeature::Balance => state.balance.wei(),
            AccountFeature::LastSeen => tick_time.saturating_sub(state.last_seen) as u128,
            AccountFeature::VolumeIn => state.volume_in.wei(),
            AccountFeature::VolumeOut => state.volume_out.wei(),
            AccountFeature::TransactionN => state.transaction_n as u128,
            AccountFeature::Erc20 => state.erc20_n as u128,
        }
    }
}

/// Which accounts enter a distribution.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum AccountSubset {
    All,
    Contracts,
}

impl AccountSubset {
    fn includes(&self, state: &AccountState) -> bool {
        match self {
            AccountSubset::All => true,
            AccountSubset::Contracts => state.is_contract,
        }
    }
}

/// Configuration of a 2D account-number distribution.
#[derive(Clone, PartialEq, Debug)]
pub struct DistributionConfig {
    pub name: String,
    pub subset: AccountSubset,
    pub feat1: AccountFeature,
    pub feat2: AccountFeature,
    pub scl1: ScaleFn,
    pub scl2: ScaleFn,
    pub mx1: f64,
    pub mx2: f64,
}

impl DistributionConfig {
    /// `(groupN_1, groupN_2)` grid shape.
    pub fn group_shape(&self) -> (usize, usize) {
        (
            self.scl1.group_count(self.mx1),
            self.scl2.group_count(self.mx2),
        )
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DistributionKind {
    BalanceActivity,
    AccountNumber,
}

/// One tick's distribution as a dense `rows x cols` matrix.
#[derive(Clone, PartialEq, Debug)]
pub struct DistributionMatrix {
    pub tick_time: u64,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub kind: DistributionKind,
}

impl DistributionMatrix {
    fn zeros(tick_time: u64, rows: usize, cols: usize, kind: DistributionKind) -> Self {
        DistributionMatrix {
            tick_time,
            rows,
            cols,
            values: vec![0.0; rows * cols],
            kind,
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    fn add(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] += v;
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum DistributionError {
    UnknownFeature(String),
}

impl fmt::Display for DistributionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistributionError::UnknownFeature(name) => {
                write!(f, "unsupported account feature selector: {name}")
            }
        }
    }
}

impl core::error::Error for DistributionError {}

/// Default scale and maximum for the balance-activity distribution:
/// plain `log2` over wei with `mx = 10^26` (86 balance groups).
pub fn balance_activity_scale() -> (ScaleFn, f64) {
    (ScaleFn::new(2.0, 1), 1e26)
}

/// Summarized recent account activity distributed over balance groups.
///
/// Rows accumulate `volumeIn`, `volumeOut` and `transactionN` of every
/// account active in the tick (`transaction_n > 0`), bucketed by the
/// account's balance group; the filled matrix is then rescaled entry-wise
/// with the same log (divisor 1).
pub fn account_balance_distribution(
    snapshot: &LedgerSnapshot,
    scl0: &ScaleFn,
    mx0: f64,
) -> DistributionMatrix {
    let group_n = scl0.group_count(mx0);
    let mut m = DistributionMatrix::zeros(
        snapshot.tick_time,
        3,
        group_n,
        DistributionKind::BalanceActivity,
    );
    for state in snapshot.accounts.values() {
        if state.transaction_n == 0 {
            continue;
        }
        let gr = group_index(state.balance.wei(), scl0, group_n);
        m.add(0, gr, state.volume_in.wei() as f64);
        m.add(1, gr, state.volume_out.wei() as f64);
        m.add(2, gr, state.transaction_n as f64);
    }
    for v in &mut m.values {
        *v = scl0.rescale(*v);
    }
    m
}

/// Raw account counts per `(group_1, group_2)` cell, before the final log2.
/// The total over all cells equals the subset size.
pub fn account_number_counts(
    snapshot: &LedgerSnapshot,
    config: &DistributionConfig,
) -> DistributionMatrix {
    let (n1, n2) = config.group_shape();
    let mut m =
        DistributionMatrix::zeros(snapshot.tick_time, n1, n2, DistributionKind::AccountNumber);
    for state in snapshot.accounts.values() {
        if !config.subset.includes(state) {
            continue;
        }
        let g1 = group_index(
            config.feat1.value(state, snapshot.tick_time),
            &config.scl1,
            n1,
        );
        let g2 = group_index(
            config.feat2.value(state, snapshot.tick_time),
            &config.scl2,
            n2,
        );
        m.add(g1, g2, 1.0);
    }
    m
}

/// Account-number distribution: cell counts rescaled entry-wise with `log2`
/// (zero below one) to mitigate the uneven clustering of accounts.
pub fn account_number_distribution(
    snapshot: &LedgerSnapshot,
    config: &DistributionConfig,
) -> DistributionMatrix {
    let log2 = ScaleFn::new(2.0, 1);
    let mut m = account_number_counts(snapshot, config);
    for v in &mut m.values {
        *v = log2.rescale(*v);
    }
    m
}

/// The three account-number distribution configurations used by the dataset
/// presets, with their exact scales and maxima.
pub fn builtin_configs() -> Vec<DistributionConfig> {
    let wei_unit = 100_000_000_000_000_000u128; // 10^17 wei = 0.1 ETH
    vec![
        DistributionConfig {
            name: String::from(names::BALANCE_LAST_SEEN),
            subset: AccountSubset::All,
            feat1: AccountFeature::Balance,
            feat2: AccountFeature::LastSeen,
            scl1: ScaleFn::new(1.2, wei_unit),
            scl2: ScaleFn::new(1.2, 1),
            mx1: 1e7,
            mx2: 20_736e3,
        },
        DistributionConfig {
            name: String::from(names::CONTRACT_BALANCE_LAST_SEEN),
            subset: AccountSubset::Contracts,
            feat1: AccountFeature::Balance,
            feat2: AccountFeature::LastSeen,
            scl1: ScaleFn::new(1.2, wei_unit),
            scl2: ScaleFn::new(1.2, 1),
            mx1: 1e7,
            mx2: 20_736e3,
        },
        DistributionConfig {
            name: String::from(names::CONTRACT_VOLUME_IN_ERC20),
            subset: AccountSubset::Contracts,
            feat1: AccountFeature::VolumeIn,
            feat2: AccountFeature::Erc20,
            scl1: ScaleFn::new(2.0, wei_unit),
            scl2: ScaleFn::new(2.0, 1),
            mx1: 1e7,
            mx2: 262_144.0,
        },
    ]
}

/// Min-max scale a matrix to 8-bit grayscale pixels, row-major. A constant
/// matrix renders as all zeroes.
pub fn render_frame(matrix: &DistributionMatrix) -> Vec<u8> {
    render_frame_values(&matrix.values)
}

/// Min-max scale raw cell values to 8-bit grayscale.
pub fn render_frame_values(values: &[f64]) -> Vec<u8> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if values.is_empty() || hi <= lo {
        return vec![0u8; values.len()];
    }
    values
        .iter()
        .map(|&v| libm::round((v - lo) / (hi - lo) * 255.0) as u8)
        .collect()
}
