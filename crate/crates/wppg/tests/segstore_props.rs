//! Segment files: round trips and corruption handling.

use proptest::prelude::*;
use wppg::segstore::{decode, encode, StoredSegment};
use wppg_core::sigproc::{Label, Modality, Quality, Segment, SourceKey, SEGMENT_LEN, SEGMENT_RATE_HZ};

fn stored() -> impl Strategy<Value = StoredSegment> {
    (
        "[a-zA-Z0-9_ é-]{0,12}",
        0usize..100_000,
        prop::sample::select(vec![Modality::Ecg, Modality::Ppg]),
        prop::sample::select(vec![Label::Af, Label::NonAf, Label::Unlabeled]),
        prop::sample::select(vec![Quality::Unassessed, Quality::Acceptable, Quality::Corrupted]),
        prop::option::of(prop::sample::select(vec![Quality::Acceptable, Quality::Corrupted])),
        1u8..=2,
        any::<u64>(),
    )
        .prop_map(|(subject_id, window, modality, label, quality, quality_truth, split, seed)| {
            // Cheap deterministic fill; bit patterns matter, not realism.
            let samples = (0..SEGMENT_LEN)
                .map(|i| f32::from_bits((seed as u32).wrapping_mul(2_654_435_761).wrapping_add(i as u32) & 0x3fff_ffff))
                .collect();
            StoredSegment {
                segment: Segment {
                    samples,
                    sample_rate_hz: SEGMENT_RATE_HZ,
                    modality,
                    label,
                    quality,
                    source: SourceKey { subject_id, window },
                },
                split,
                quality_truth,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_is_exact(items in prop::collection::vec(stored(), 0..5)) {
        let bytes = encode(&items);
        let back = decode(&bytes).unwrap();
        prop_assert_eq!(back.len(), items.len());
        for (a, b) in items.iter().zip(&back) {
            prop_assert_eq!(&a.segment.source, &b.segment.source);
            prop_assert_eq!(a.segment.modality, b.segment.modality);
            prop_assert_eq!(a.segment.label, b.segment.label);
            prop_assert_eq!(a.segment.quality, b.segment.quality);
            prop_assert_eq!(a.quality_truth, b.quality_truth);
            prop_assert_eq!(a.split, b.split);
            let bits = |s: &Segment| s.samples.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&a.segment), bits(&b.segment));
        }
    }

    #[test]
    fn truncation_and_trailing_bytes_are_rejected(items in prop::collection::vec(stored(), 1..3), cut in 1usize..64) {
        let bytes = encode(&items);
        prop_assert!(decode(&bytes[..bytes.len() - cut]).is_err());
        let mut extra = bytes.clone();
        extra.extend(std::iter::repeat(0u8).take(cut));
        prop_assert!(decode(&extra).is_err());
    }
}

#[test]
fn wrong_magic_is_rejected() {
    let mut bytes = encode(&[]);
    bytes[0] = b'X';
    assert!(decode(&bytes).is_err());
}
