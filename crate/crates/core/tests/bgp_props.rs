mod common;

use common::records::{random_record, random_records, unsupported_record};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sicn_core::bgp::{parse_mrt, parse_update_text, serialize_mrt, write_update_text, BgpUpdateRecord};

fn encode(records: &[BgpUpdateRecord]) -> Vec<u8> {
    records.iter().flat_map(|r| serialize_mrt(r).unwrap()).collect()
}

proptest! {
    #[test]
    fn mrt_round_trip(seed in any::<u64>(), n in 1usize..40) {
        let records = random_records(seed, n);
        let (back, stats) = parse_mrt(&encode(&records));
        prop_assert_eq!(back, records);
        prop_assert_eq!(stats.records_emitted, n as u64);
        prop_assert_eq!(stats.total(), n as u64);
        prop_assert!(stats.abort.is_none());
    }

    #[test]
    fn unsupported_records_are_counted(seed in any::<u64>(), layout in prop::collection::vec(any::<bool>(), 1..30)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bytes = Vec::new();
        let mut kept = Vec::new();
        for (i, good) in layout.iter().enumerate() {
            if *good {
                let r = random_record(&mut rng);
                bytes.extend(serialize_mrt(&r).unwrap());
                kept.push(r);
            } else {
                bytes.extend(unsupported_record(i as u32, [12, 13, 32][i % 3], i % 7 * 5));
            }
        }
        let (back, stats) = parse_mrt(&bytes);
        let skipped = layout.iter().filter(|g| !**g).count() as u64;
        prop_assert_eq!(back, kept);
        prop_assert_eq!(stats.records_skipped, skipped);
        prop_assert_eq!(stats.malformed, 0);
        prop_assert_eq!(stats.total(), layout.len() as u64);
    }
}

#[test]
fn text_round_trip() {
    // One line per prefix, so compare against per-prefix records.
    let records = random_records(5, 200);
    let mut text = Vec::new();
    write_update_text(&mut text, &records).unwrap();
    let back = parse_update_text(text.as_slice()).unwrap();
    let ann: usize = records.iter().map(|r| r.announced.len() + r.withdrawn.len()).sum();
    assert_eq!(back.len(), ann);
    let mut again = Vec::new();
    write_update_text(&mut again, &back).unwrap();
    assert_eq!(again, text);
}
