//! Proptest strategies producing well-formed messages of every supported
//! variant.

use proptest::collection::vec;
use proptest::prelude::*;

use super::*;

fn mac() -> impl Strategy<Value = MacAddr> {
    any::<[u8; 6]>()
}

pub fn match_field() -> impl Strategy<Value = MatchField> {
    prop_oneof![
        any::<u32>().prop_map(MatchField::InPort),
        any::<u64>().prop_map(MatchField::Metadata),
        mac().prop_map(MatchField::EthDst),
        mac().prop_map(MatchField::EthSrc),
        any::<u16>().prop_map(MatchField::EthType),
        any::<u16>().prop_map(MatchField::VlanVid),
        any::<u8>().prop_map(MatchField::IpProto),
        (any::<u16>(), 0u8..0x80, vec(any::<u8>(), 0..16)).prop_map(|(class, field, payload)| {
            // masked, so never confused with an interpreted field
            MatchField::Other(RawOxm {
                class,
                field,
                has_mask: true,
                payload,
            })
        }),
    ]
}

pub fn matches() -> impl Strategy<Value = Match> {
    vec(match_field(), 0..6).prop_map(Match)
}

pub fn action() -> impl Strategy<Value = Action> {
    prop_oneof![
        4 => (any::<u32>(), any::<u16>()).prop_map(|(port, max_len)| Action::Output { port, max_len }),
        1 => (1u16..100, 0usize..3).prop_map(|(t, words)| Action::Other {
            action_type: t,
            body: vec![0xab; 4 + words * 8],
        }),
    ]
}

pub fn instruction() -> impl Strategy<Value = Instruction> {
    prop_oneof![
        any::<u8>().prop_map(Instruction::GotoTable),
        (any::<u64>(), any::<u64>())
            .prop_map(|(metadata, mask)| Instruction::WriteMetadata { metadata, mask }),
        vec(action(), 0..4).prop_map(Instruction::ApplyActions),
    ]
}

fn command() -> impl Strategy<Value = FlowModCommand> {
    prop_oneof![
        Just(FlowModCommand::Add),
        Just(FlowModCommand::Modify),
        Just(FlowModCommand::ModifyStrict),
        Just(FlowModCommand::Delete),
        Just(FlowModCommand::DeleteStrict),
    ]
}

fn flow_mod() -> impl Strategy<Value = FlowMod> {
    (
        (any::<u64>(), any::<u64>(), any::<u8>(), command()),
        (any::<u16>(), any::<u16>(), any::<u16>(), any::<u32>()),
        (any::<u32>(), any::<u32>(), any::<u16>()),
        matches(),
        vec(instruction(), 0..4),
    )
        .prop_map(
            |(
                (cookie, cookie_mask, table_id, command),
                (idle_timeout, hard_timeout, priority, buffer_id),
                (out_port, out_group, flags),
                matches,
                instructions,
            )| FlowMod {
                cookie,
                cookie_mask,
                table_id,
                command,
                idle_timeout,
                hard_timeout,
                priority,
                buffer_id,
                out_port,
                out_group,
                flags,
                matches,
                instructions,
            },
        )
}

fn ascii(max: usize) -> impl Strategy<Value = String> {
    proptest::string::string_regex(&format!("[ -~]{{0,{max}}}")).unwrap()
}

fn port_stats() -> impl Strategy<Value = PortStatsEntry> {
    (any::<u32>(), any::<[u64; 12]>(), any::<u32>(), any::<u32>()).prop_map(|(port_no, c, s, ns)| {
        PortStatsEntry {
            port_no,
            rx_packets: c[0],
            tx_packets: c[1],
            rx_bytes: c[2],
            tx_bytes: c[3],
            rx_dropped: c[4],
            tx_dropped: c[5],
            rx_errors: c[6],
            tx_errors: c[7],
            rx_frame_err: c[8],
            rx_over_err: c[9],
            rx_crc_err: c[10],
            collisions: c[11],
            duration_sec: s,
            duration_nsec: ns,
        }
    })
}

fn port_desc() -> impl Strategy<Value = PortDesc> {
    (any::<u32>(), mac(), ascii(15), any::<[u32; 8]>()).prop_map(|(port_no, hw_addr, name, v)| {
        PortDesc {
            port_no,
            hw_addr,
            name,
            config: v[0],
            state: v[1],
            curr: v[2],
            advertised: v[3],
            supported: v[4],
            peer: v[5],
            curr_speed: v[6],
            max_speed: v[7],
        }
    })
}

fn hello() -> impl Strategy<Value = Hello> {
    let element = prop_oneof![
        vec(any::<u32>(), 0..3).prop_map(HelloElement::VersionBitmap),
        (2u16..10, vec(any::<u8>(), 0..12))
            .prop_map(|(element_type, body)| HelloElement::Other { element_type, body }),
    ];
    vec(element, 0..3).prop_map(|elements| Hello { elements })
}

pub fn body() -> impl Strategy<Value = OfBody> {
    prop_oneof![
        hello().prop_map(OfBody::Hello),
        (any::<u16>(), any::<u16>(), vec(any::<u8>(), 0..64))
            .prop_map(|(err_type, code, data)| OfBody::Error(ErrorMsg { err_type, code, data })),
        vec(any::<u8>(), 0..64).prop_map(OfBody::EchoRequest),
        vec(any::<u8>(), 0..64).prop_map(OfBody::EchoReply),
        Just(OfBody::FeaturesRequest),
        (any::<u64>(), any::<u32>(), any::<u8>(), any::<u8>(), any::<u32>(), any::<u32>()).prop_map(
            |(datapath_id, n_buffers, n_tables, auxiliary_id, capabilities, reserved)| {
                OfBody::FeaturesReply(FeaturesReply {
                    datapath_id,
                    n_buffers,
                    n_tables,
                    auxiliary_id,
                    capabilities,
                    reserved,
                })
            }
        ),
        (
            any::<u32>(),
            any::<u16>(),
            any::<u8>(),
            any::<u8>(),
            any::<u64>(),
            matches(),
            vec(any::<u8>(), 0..128)
        )
            .prop_map(|(buffer_id, total_len, reason, table_id, cookie, matches, data)| {
                OfBody::PacketIn(PacketIn {
                    buffer_id,
                    total_len,
                    reason,
                    table_id,
                    cookie,
                    matches,
                    data,
                })
            }),
        (any::<u8>(), port_desc()).prop_map(|(reason, desc)| OfBody::PortStatus(PortStatus { reason, desc })),
        (any::<u32>(), any::<u32>(), vec(action(), 0..4), vec(any::<u8>(), 0..128)).prop_map(
            |(buffer_id, in_port, actions, data)| OfBody::PacketOut(PacketOut {
                buffer_id,
                in_port,
                actions,
                data,
            })
        ),
        flow_mod().prop_map(OfBody::FlowMod),
        (any::<u16>(), prop_oneof![
            Just(MultipartRequestBody::Desc),
            any::<u32>().prop_map(|port_no| MultipartRequestBody::PortStats { port_no }),
        ])
        .prop_map(|(flags, body)| OfBody::MultipartRequest(MultipartRequest { flags, body })),
        (any::<u16>(), prop_oneof![
            (ascii(255), ascii(255), ascii(255), ascii(31), ascii(255)).prop_map(
                |(mfr_desc, hw_desc, sw_desc, serial_num, dp_desc)| MultipartReplyBody::Desc(DescStats {
                    mfr_desc,
                    hw_desc,
                    sw_desc,
                    serial_num,
                    dp_desc,
                })
            ),
            vec(port_stats(), 0..8).prop_map(MultipartReplyBody::PortStats),
        ])
        .prop_map(|(flags, body)| OfBody::MultipartReply(MultipartReply { flags, body })),
        Just(OfBody::BarrierRequest),
        Just(OfBody::BarrierReply),
    ]
}

pub fn message() -> impl Strategy<Value = OfMessage> {
    (any::<u32>(), body()).prop_map(|(xid, body)| OfMessage { xid, body })
}
