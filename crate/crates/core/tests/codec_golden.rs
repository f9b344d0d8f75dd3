use sdx_core::ofp::golden::frames as golden;
use sdx_core::ofp::*;

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn unhex(s: &str) -> Vec<u8> {
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap())
        .collect()
}

#[test]
fn golden_frames_encode_exactly() {
    for (name, msg, want) in golden() {
        let got = encode(&msg).unwrap();
        assert_eq!(hex(&got), want, "{name}");
        assert_eq!(decode(&unhex(want)).unwrap(), msg, "{name}");
    }
}

#[test]
fn flow_mod_match_is_padded_to_eight() {
    let (_, msg, _) = &golden()[1];
    let bytes = encode(msg).unwrap();
    // match starts after the 48-byte fixed part; 23 bytes of match + 1 pad
    assert_eq!(&bytes[48..52], &[0x00, 0x01, 0x00, 0x17]);
    assert_eq!(bytes[48 + 23], 0);
    // instructions begin on the next 8-byte boundary
    assert_eq!(&bytes[72..76], &[0x00, 0x04, 0x00, 0x18]);
}

#[test]
fn echo_reply_mirrors_request() {
    let payload = b"liveness".to_vec();
    let req = encode(&OfMessage::new(42, OfBody::EchoRequest(payload.clone()))).unwrap();
    let rep = encode(&OfMessage::new(42, OfBody::EchoReply(payload))).unwrap();
    assert_eq!(req[1], OFPT_ECHO_REQUEST);
    assert_eq!(rep[1], OFPT_ECHO_REPLY);
    assert_eq!(req[0], rep[0]);
    assert_eq!(req[2..], rep[2..]);
}

#[test]
fn unsupported_version() {
    let e = decode(&[0x05, 0, 0, 8, 0, 0, 0, 1]).unwrap_err();
    assert_eq!(e, DecodeError::BadVersion(5));
    assert_eq!(e.to_string(), "unsupported version 0x05");
}

#[test]
fn unknown_type_keeps_frame_and_is_skippable() {
    let frame = [0x04, 0x63, 0, 10, 0, 0, 0, 1, 0xaa, 0xbb];
    let e = decode(&frame).unwrap_err();
    match &e {
        DecodeError::UnknownType { msg_type, frame: kept } => {
            assert_eq!(*msg_type, 0x63);
            assert_eq!(kept.as_slice(), &frame[..]);
        }
        other => panic!("{other:?}"),
    }
    assert!(e.is_skippable());
}

#[test]
fn oversized_body_is_rejected() {
    let msg = OfMessage::new(1, OfBody::EchoRequest(vec![0; MAX_BODY_LEN + 1]));
    assert!(matches!(encode(&msg), Err(EncodeError::TooLong(_))));
    let msg = OfMessage::new(1, OfBody::EchoRequest(vec![0; MAX_BODY_LEN]));
    assert_eq!(encode(&msg).unwrap().len(), 65535);
}

#[test]
fn malformed_oxm_length() {
    // flow mod whose IN_PORT OXM claims 3 bytes
    let mut bytes = unhex(golden()[2].2);
    bytes[48 + 7] = 3;
    assert!(matches!(decode(&bytes), Err(DecodeError::MalformedOxm(_))));
}

#[test]
fn masked_and_foreign_oxms_survive_round_trip() {
    let m = Match::new()
        .in_port(3)
        .with(MatchField::Other(RawOxm {
            class: OXM_CLASS_OPENFLOW_BASIC,
            field: OXM_ETH_DST,
            has_mask: true,
            payload: vec![1, 2, 3, 4, 5, 6, 0xff, 0xff, 0xff, 0, 0, 0],
        }))
        .with(MatchField::Other(RawOxm {
            class: 0x0001,
            field: 9,
            has_mask: false,
            payload: vec![7, 7],
        }));
    let msg = OfMessage::new(5, OfBody::FlowMod(FlowMod::new(FlowModCommand::Delete, 2, 10, m)));
    assert_eq!(decode(&encode(&msg).unwrap()).unwrap(), msg);
}
