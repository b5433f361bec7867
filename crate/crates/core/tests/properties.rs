mod common;

use proptest::prelude::*;
use survtx::bundle::{pack, unpack, BundleMeta};
use survtx::io::{read_sequence, write_sequence, SequenceFormat};
use survtx::keyframe::KeyFrameIndex;
use survtx::redundancy::{drop_redundant, restore_redundant, RedundancyConfig, RedundancyIndex};
use survtx::{CodecAdapter, Frame, FrameRate, Layout, VideoSequence};

fn arb_sequence(layout: Layout) -> impl Strategy<Value = VideoSequence> {
    (4usize..20, 4usize..20, 1usize..6).prop_flat_map(move |(w, h, t)| {
        prop::collection::vec(prop::collection::vec(any::<u8>(), w * h * layout.channels()), t).prop_map(
            move |frames| {
                VideoSequence::new(
                    frames.into_iter().map(|d| Frame::new(w, h, layout, d).unwrap()).collect(),
                    FrameRate::integer(15),
                )
                .unwrap()
            },
        )
    })
}

fn arb_redundancy(t: usize) -> impl Strategy<Value = RedundancyIndex> {
    prop::collection::vec(any::<bool>(), t).prop_map(move |bits| {
        let idx: Vec<usize> = (2..=t).filter(|&i| bits[i - 1]).collect();
        RedundancyIndex::new(idx, t).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn raw_round_trip(s in arb_sequence(Layout::Luma)) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.yuv");
        write_sequence(&p, &s, SequenceFormat::Raw).unwrap();
        prop_assert_eq!(read_sequence(&p, None).unwrap(), s);
    }

    #[test]
    fn image_dir_round_trip(s in arb_sequence(Layout::Rgb)) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("frames");
        write_sequence(&p, &s, SequenceFormat::ImageDir).unwrap();
        prop_assert_eq!(read_sequence(&p, None).unwrap(), s);
    }

    #[test]
    fn restore_after_drop(
        (s, idx) in arb_sequence(Layout::Luma).prop_flat_map(|s| { let t = s.len(); (Just(s), arb_redundancy(t)) })
    ) {
        let restored = restore_redundant(&drop_redundant(&s, &idx).unwrap(), &idx).unwrap();
        prop_assert_eq!(restored.len(), s.len());
        let mut last = 0;
        for t in 1..=s.len() {
            if idx.contains(t) {
                prop_assert_eq!(&restored.frames()[t - 1], &s.frames()[last - 1]);
            } else {
                prop_assert_eq!(&restored.frames()[t - 1], &s.frames()[t - 1]);
                last = t;
            }
        }
    }

    #[test]
    fn bundle_round_trip(
        (s, keys_bits, red_bits) in arb_sequence(Layout::Luma).prop_flat_map(|s| {
            let t = s.len();
            (Just(s), prop::collection::vec(any::<bool>(), t), prop::collection::vec(any::<bool>(), t))
        })
    ) {
        let t = s.len();
        let (w, h) = (s.width() * 4, s.height() * 4);
        let mut keys: Vec<usize> = (1..=t).filter(|&i| keys_bits[i - 1]).collect();
        if keys.is_empty() {
            keys.push(1);
        }
        let red: Vec<usize> = (2..=t).filter(|&i| red_bits[i - 1] && !keys.contains(&i)).collect();
        let key_index = KeyFrameIndex::new(keys.clone(), t).unwrap();
        let redundant = RedundancyIndex::new(red, t).unwrap();
        let lr = drop_redundant(&s, &redundant).unwrap();
        let keyframes: Vec<Frame> = keys
            .iter()
            .map(|&k| Frame::from_fn(w, h, |x, y| (x + y + k) as u8).unwrap())
            .collect();
        let meta = BundleMeta { hr_width: w, hr_height: h, fps: s.fps(), frame_count: t, layout: Layout::Luma };
        let packed = pack(&lr, &keyframes, &key_index, &redundant, &CodecAdapter::Raw, &meta).unwrap();
        prop_assert_eq!(packed.sizes.total_bytes(), packed.bytes.len());
        let d = unpack(&packed.bytes, &CodecAdapter::Raw).unwrap();
        prop_assert_eq!(d.lr, lr);
        prop_assert_eq!(d.keyframes, keyframes);
        prop_assert_eq!(d.key_index, key_index);
        prop_assert_eq!(d.redundant_index, redundant);
        prop_assert_eq!(d.meta, meta);
    }

    #[test]
    fn per_pair_test_is_monotone_in_thresholds(
        s in arb_sequence(Layout::Luma),
        ti in 0.0f64..50.0, tm in 0.0f64..500.0, dti in 0.0f64..50.0, dtm in 0.0f64..500.0, m in 0u8..8,
    ) {
        prop_assume!(s.len() >= 2);
        let lo = RedundancyConfig { tau_int: ti, tau_mot: tm, m };
        let hi = RedundancyConfig { tau_int: ti + dti, tau_mot: tm + dtm, m };
        let (a, b) = (&s.frames()[0], &s.frames()[1]);
        let r_lo = survtx::redundancy::redundancy_test(b, a, &lo).unwrap();
        let r_hi = survtx::redundancy::redundancy_test(b, a, &hi).unwrap();
        prop_assert!(!r_lo.redundant || r_hi.redundant);
    }

    #[test]
    fn luma_is_idempotent(s in arb_sequence(Layout::Rgb)) {
        for f in s.frames() {
            let l = f.to_luma();
            prop_assert_eq!(l.to_luma(), l.clone());
        }
    }
}
