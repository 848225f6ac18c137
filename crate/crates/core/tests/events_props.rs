use std::collections::HashSet;

use ifsnn::events::{
    bin_events, decode_aedat, decode_nmnist, encode_aedat, encode_nmnist, parse_text_events, write_text_events,
    BinSpec, EventRecord, NMNIST_HEIGHT, NMNIST_MAX_TIMESTAMP, NMNIST_WIDTH,
};
use proptest::prelude::*;

fn sorted(mut v: Vec<EventRecord>) -> Vec<EventRecord> {
    v.sort_by_key(|e| e.timestamp_us);
    v
}

fn nmnist_events() -> impl Strategy<Value = Vec<EventRecord>> {
    prop::collection::vec(
        (0..NMNIST_WIDTH, 0..NMNIST_HEIGHT, any::<bool>(), 0..=NMNIST_MAX_TIMESTAMP)
            .prop_map(|(x, y, p, t)| EventRecord::new(x, y, p, t)),
        0..300,
    )
    .prop_map(sorted)
}

fn sensor_events(w: u32, h: u32, t_max: u64) -> impl Strategy<Value = Vec<EventRecord>> {
    prop::collection::vec(
        (0..w, 0..h, any::<bool>(), 0..t_max).prop_map(|(x, y, p, t)| EventRecord::new(x, y, p, t)),
        0..300,
    )
    .prop_map(sorted)
}

fn spec(dt_us: u64, downsample: u32) -> BinSpec {
    BinSpec {
        dt_us,
        width: 32,
        height: 32,
        t_s: 1.0,
        downsample,
        duration_us: None,
    }
}

proptest! {
    #[test]
    fn nmnist_decode_inverts_encode(events in nmnist_events()) {
        let bytes = encode_nmnist(&events).unwrap();
        prop_assert_eq!(bytes.len(), 5 * events.len());
        prop_assert_eq!(decode_nmnist(&bytes).unwrap(), events);
    }

    #[test]
    fn nmnist_encode_inverts_decode(records in prop::collection::vec((0u8..34, 0u8..34, any::<u8>(), any::<u8>(), any::<u8>()), 0..200)) {
        let bytes: Vec<u8> = records.iter().flat_map(|&(x, y, a, b, c)| [x, y, a, b, c]).collect();
        let events = decode_nmnist(&bytes).unwrap();
        prop_assert_eq!(encode_nmnist(&events).unwrap(), bytes);
    }

    #[test]
    fn nmnist_truncation_is_reported(events in nmnist_events(), cut in 1usize..5) {
        prop_assume!(!events.is_empty());
        let bytes = encode_nmnist(&events).unwrap();
        prop_assert!(decode_nmnist(&bytes[..bytes.len() - cut]).is_err());
    }

    #[test]
    fn aedat_round_trip(events in sensor_events(128, 128, 1 << 31), epoch in 0u64..4) {
        let events: Vec<EventRecord> = events
            .into_iter()
            .map(|e| EventRecord { timestamp_us: e.timestamp_us | (epoch << 31), ..e })
            .collect();
        let bytes = encode_aedat(&events).unwrap();
        prop_assert_eq!(decode_aedat(&bytes).unwrap(), events);
    }

    #[test]
    fn text_round_trip(events in sensor_events(1000, 1000, u64::MAX / 2)) {
        prop_assert_eq!(parse_text_events(&write_text_events(&events)).unwrap(), events);
    }

    #[test]
    fn binning_conserves_presence(events in sensor_events(32, 32, 50_000), dt in 100u64..5_000, ds in prop::sample::select(vec![1u32, 2, 4])) {
        let spec = spec(dt, ds);
        let frames = bin_events(&events, &spec).unwrap();
        let w = spec.out_width();
        let mut seen = HashSet::new();
        for e in &events {
            let k = (e.timestamp_us / dt) as usize;
            let (x, y) = ((e.x / ds) as usize, (e.y / ds) as usize);
            prop_assert!(frames[k].get(0, y, x));
            seen.insert(y * w + x);
        }
        let mut set = HashSet::new();
        for f in &frames {
            prop_assert_eq!(f.amplitude, 1.0);
            for (_, y, x) in f.active() {
                set.insert(y * w + x);
            }
        }
        prop_assert_eq!(seen, set);
        let total: usize = frames.iter().map(|f| f.count()).sum();
        prop_assert!(total <= events.len());
    }

    #[test]
    fn binning_ignores_event_order(events in sensor_events(32, 32, 20_000), seed in any::<u64>(), dt in 100u64..5_000) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = events.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let spec = spec(dt, 1);
        prop_assert_eq!(bin_events(&events, &spec).unwrap(), bin_events(&shuffled, &spec).unwrap());
    }
}

#[test]
fn out_of_range_coordinates_are_named() {
    let err = decode_nmnist(&[34, 0, 0, 0, 1]).unwrap_err().to_string();
    assert!(err.contains("34"), "{err}");
}
