use proptest::prelude::*;
use proptest::strategy::ValueTree;
use rand::{Rng, SeedableRng};
use sdx_core::ofp::arbitrary::message;
use sdx_core::ofp::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn decode_inverts_encode(msg in message()) {
        let bytes = encode(&msg).unwrap();
        prop_assert_eq!(bytes.len(), u16::from_be_bytes([bytes[2], bytes[3]]) as usize);
        prop_assert_eq!(bytes[0], OFP_VERSION);
        prop_assert_eq!(decode(&bytes).unwrap(), msg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    /// However a stream of frames is chopped into reads, the same frames
    /// come out in the same order.
    #[test]
    fn framing_is_chunking_independent(
        msgs in proptest::collection::vec(message(), 1..8),
        cuts in proptest::collection::vec(1usize..64, 0..40),
    ) {
        let stream: Vec<u8> = msgs.iter().flat_map(|m| encode(m).unwrap()).collect();
        let (whole, residual) = frame_stream(&stream).unwrap();
        prop_assert!(residual.is_empty());
        prop_assert_eq!(whole.len(), msgs.len());

        let mut fb = FrameBuffer::new();
        let mut chunked = Vec::new();
        let mut at = 0;
        for c in cuts.iter().chain(std::iter::repeat(&usize::MAX)) {
            if at >= stream.len() { break; }
            let end = at.saturating_add(*c).min(stream.len());
            fb.extend(&stream[at..end]);
            chunked.extend(fb.drain_frames().unwrap());
            at = end;
        }
        prop_assert_eq!(&chunked, &whole);
        prop_assert_eq!(chunked.concat(), stream);
    }
}

/// Random inputs never panic the decoder; every call yields a message or a
/// structured error.
#[test]
fn decoder_is_total_on_random_input() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5d);
    let mut decoded = 0;
    for i in 0..10_000 {
        let len = if i % 10 == 0 { rng.gen_range(0..=65536) } else { rng.gen_range(0..256) };
        let mut buf = vec![0u8; len];
        rng.fill(&mut buf[..]);
        // bias towards plausible headers so body decoders are exercised
        if len >= 8 && i % 2 == 0 {
            buf[0] = OFP_VERSION;
            buf[1] = rng.gen_range(0..24);
            let l = (len.min(65535)) as u16;
            buf[2..4].copy_from_slice(&l.to_be_bytes());
        }
        if decode(&buf).is_ok() {
            decoded += 1;
        }
        let _ = frame_stream(&buf);
    }
    assert!(decoded > 0);
}

/// Mutating single bytes of valid frames also never panics.
#[test]
fn decoder_survives_bit_flips() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    for _ in 0..2_000 {
        let msg = message().new_tree(&mut runner).unwrap().current();
        let mut bytes = encode(&msg).unwrap();
        for _ in 0..3 {
            let at = rng.gen_range(0..bytes.len());
            bytes[at] ^= 1 << rng.gen_range(0..8);
        }
        let _ = decode(&bytes);
    }
}
