//! Reference encodings, checked against an independent OpenFlow 1.3
//! dissector (scapy `contrib.openflow3`): each frame was decoded by it and
//! its fields compared with the values used to build the message here.

use super::*;

/// (name, message, expected wire bytes as hex)
pub fn frames() -> Vec<(&'static str, OfMessage, &'static str)> {
    let mut mirror = FlowMod::new(
        FlowModCommand::Add,
        0,
        19999,
        Match::new().in_port(2).eth_type(0x0800).ip_proto(1),
    );
    mirror.cookie = 0x0100_0000_0000_0001;
    mirror.instructions = vec![Instruction::ApplyActions(vec![Action::output(4)])];

    let mut goto = FlowMod::new(FlowModCommand::Add, 0, 1, Match::new().in_port(1));
    goto.cookie = 0x0200_0000_0000_0001;
    goto.instructions = vec![Instruction::GotoTable(1)];

    vec![
        (
            "hello",
            OfMessage::new(0x11, OfBody::Hello(Hello::default())),
            "0400000800000011",
        ),
        (
            "flow_mod_mirror",
            OfMessage::new(7, OfBody::FlowMod(mirror)),
            concat!(
                "040e006000000007",
                "0100000000000001",
                "0000000000000000",
                "0000000000004e1f",
                "ffffffffffffffffffffffff00000000",
                "00010017",
                "8000000400000002",
                "80000a020800",
                "8000140101",
                "00",
                "0004001800000000",
                "00000010000000040000000000000000",
            ),
        ),
        (
            "flow_mod_goto",
            OfMessage::new(8, OfBody::FlowMod(goto)),
            concat!(
                "040e004800000008",
                "0200000000000001",
                "0000000000000000",
                "0000000000000001",
                "ffffffffffffffffffffffff00000000",
                "0001000c8000000400000001",
                "00000000",
                "0001000801000000",
            ),
        ),
        (
            "port_stats_request",
            OfMessage::new(
                9,
                OfBody::MultipartRequest(MultipartRequest {
                    flags: 0,
                    body: MultipartRequestBody::PortStats { port_no: OFPP_ANY },
                }),
            ),
            "04120018000000090004000000000000ffffffff00000000",
        ),
        (
            "features_reply",
            OfMessage::new(
                3,
                OfBody::FeaturesReply(FeaturesReply {
                    datapath_id: 1,
                    n_buffers: 256,
                    n_tables: 3,
                    auxiliary_id: 0,
                    capabilities: 0x4f,
                    reserved: 0,
                }),
            ),
            "0406002000000003000000000000000100000100030000000000004f00000000",
        ),
        (
            "packet_out",
            OfMessage::new(
                10,
                OfBody::PacketOut(PacketOut {
                    buffer_id: OFP_NO_BUFFER,
                    in_port: 2,
                    actions: vec![Action::output(1), Action::output(3)],
                    data: Vec::new(),
                }),
            ),
            concat!(
                "040d00380000000affffffff00000002",
                "002000000000000000000010000000010000000000000000",
                "00000010000000030000000000000000",
            ),
        ),
    ]
}
