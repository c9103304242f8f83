//! Randomized store behavior: for any time-ordered record set and any query
//! interval, the store returns exactly the filtered records, byte-equal
//! after re-serialization, across chunk boundaries and repeated puts.

use proptest::prelude::*;
use serde::{Deserialize, Serialize};

use chainsight::store::{ChunkStore, StoreRecord, CHUNK_SPAN};

#[derive(Serialize, Deserialize, PartialEq, Eq, Debug, Clone)]
struct Rec {
    time: u64,
    tag: u32,
    payload: String,
}

impl StoreRecord for Rec {
    fn time(&self) -> u64 {
        self.time
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn round_trip_equals_filter(
        mut offsets in prop::collection::vec(0u64..(4 * CHUNK_SPAN), 1..60),
        from in 0u64..(4 * CHUNK_SPAN),
        span in 0u64..(4 * CHUNK_SPAN),
        double_put in any::<bool>(),
    ) {
        offsets.sort_unstable();
        let records: Vec<Rec> = offsets
            .iter()
            .enumerate()
            .map(|(i, &t)| Rec { time: t, tag: i as u32, payload: format!("r{i}@{t}") })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let store = ChunkStore::new(dir.path());
        store.put("series", &records).unwrap();
        if double_put {
            store.put("series", &records).unwrap();
        }
        let to = from.saturating_add(span);
        let got: Vec<Rec> = store.get("series", from, to).unwrap();
        let expect: Vec<Rec> =
            records.iter().filter(|r| r.time >= from && r.time < to).cloned().collect();
        prop_assert_eq!(&got, &expect);
        // byte equality after re-serialization
        let got_bytes: Vec<String> = got.iter().map(|r| serde_json::to_string(r).unwrap()).collect();
        let expect_bytes: Vec<String> =
            expect.iter().map(|r| serde_json::to_string(r).unwrap()).collect();
        prop_assert_eq!(got_bytes, expect_bytes);
        // the full interval returns everything
        let all: Vec<Rec> = store.get("series", 0, u64::MAX).unwrap();
        prop_assert_eq!(all, records);
    }
}
