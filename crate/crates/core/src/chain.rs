//! Chain continuity checks over a block stream.

use alloc::vec::Vec;

use crate::types::Block;

/// Report-only result of scanning a number-sorted block stream.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct ValidationReport {
    /// Inclusive intervals of missing block numbers.
    pub gaps: Vec<(u64, u64)>,
    /// Numbers of blocks whose timestamp is below their predecessor's.
    pub timestamp_regressions: Vec<u64>,
    pub blocks_seen: u64,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.gaps.is_empty() && self.timestamp_regressions.is_empty()
    }
}

/// Scan blocks (sorted by number) for missing numbers and timestamp
/// regressions. Never fails: anomalies are reported, not rejected.
pub fn validate_chain<'a, I>(blocks: I) -> ValidationReport
where
    I: IntoIterator<Item = &'a Block>,
{
    let mut report = ValidationReport::default();
    let mut prev: Option<(u64, u64)> = None;
    for block in blocks {
        report.blocks_seen += 1;
        if let Some((prev_number, prev_ts)) = prev {
            if block.number > prev_number + 1 {
                report.gaps.push((prev_number + 1, block.number - 1));
            }
            if block.timestamp < prev_ts {
                report.timestamp_regressions.push(block.number);
            }
        }
        prev = Some((block.number, block.timestamp));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Address, Amount};
    use alloc::vec;

    fn block(number: u64, timestamp: u64) -> Block {
        Block {
            timestamp,
            number,
            miner: Address::default(),
            size_bytes: 500,
            difficulty: Amount::new(100),
            gas_limit: 8_000_000,
            gas_used: 0,
            tx_count: 0,
        }
    }

    #[test]
    fn contiguous_chain_is_clean() {
        let blocks = vec![block(1, 10), block(2, 10), block(3, 20)];
        let report = validate_chain(&blocks);
        assert!(report.is_clean());
        assert_eq!(report.blocks_seen, 3);
    }

    #[test]
    fn missing_number_reported_as_gap() {
        let blocks = vec![block(1, 10), block(3, 20)];
        let report = validate_chain(&blocks);
        assert_eq!(report.gaps, vec![(2, 2)]);
    }

    #[test]
    fn wide_gap_is_one_interval() {
        let blocks = vec![block(1, 10), block(7, 20)];
        let report = validate_chain(&blocks);
        assert_eq!(report.gaps, vec![(2, 6)]);
    }

    #[test]
    fn timestamp_regression_names_offender() {
        let blocks = vec![block(1, 10), block(2, 5)];
        let report = validate_chain(&blocks);
        assert_eq!(report.timestamp_regressions, vec![2]);
        assert!(report.gaps.is_empty());
    }

    #[test]
    fn empty_stream_is_clean() {
        let report = validate_chain(core::iter::empty());
        assert!(report.is_clean());
        assert_eq!(report.blocks_seen, 0);
    }
}
