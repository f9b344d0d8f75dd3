//! A software OpenFlow switch holding the tables the controller pushes and
//! forwarding metadata-only frames through them.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::compile::{FlowEntry, FlowTable, TABLE_ACL};
use crate::config::PortNo;
use crate::eth::FrameHeader;
use crate::ofp::{
    Action, DescStats, FeaturesReply, FlowMod, FlowModCommand, Hello, Instruction, MatchField, MultipartReply,
    MultipartReplyBody, MultipartRequestBody, OfBody, OfMessage, PacketIn, PacketOut, PortStatsEntry, OFPP_ALL,
    OFPP_ANY, OFPP_CONTROLLER, OFPP_FLOOD, OFPP_IN_PORT, OFPR_ACTION, OFPR_NO_MATCH, OFPTT_ALL, OFP_NO_BUFFER,
};

/// Number of tables the simulated switch advertises.
pub const SIM_TABLES: u8 = 3;

/// Answers table-miss PacketIns synchronously.
pub trait ControlPlane {
    fn packet_in(&mut self, dp_id: u64, pi: &PacketIn, now_ms: u64) -> Vec<OfBody>;
}

/// A control plane that never answers; punted frames go nowhere.
pub struct Disconnected;

impl ControlPlane for Disconnected {
    fn packet_in(&mut self, _: u64, _: &PacketIn, _: u64) -> Vec<OfBody> {
        Vec::new()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimEntry {
    pub entry: FlowEntry,
    pub packets: u64,
    pub bytes: u64,
    pub last_hit_ms: u64,
}

/// Header fields visible to the pipeline.
#[derive(Debug, Clone, Copy)]
struct Fields {
    in_port: PortNo,
    metadata: u64,
    hdr: FrameHeader,
}

fn entry_matches(e: &FlowEntry, f: &Fields) -> bool {
    e.matches.fields().iter().all(|m| match m {
        MatchField::InPort(p) => *p == f.in_port,
        MatchField::Metadata(v) => *v == f.metadata,
        MatchField::EthDst(m) => *m == f.hdr.dst,
        MatchField::EthSrc(m) => *m == f.hdr.src,
        MatchField::EthType(t) => *t == f.hdr.eth_type,
        MatchField::IpProto(p) => Some(*p) == f.hdr.ip_proto,
        // untagged frames only
        MatchField::VlanVid(_) | MatchField::Other(_) => false,
    })
}

/// Where one frame went.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct FrameOutcome {
    /// Physical egress ports, one element per copy sent.
    pub outputs: Vec<PortNo>,
    /// The frame was sent to the controller.
    pub punted: bool,
}

/// Result of walking the tables for one frame, before side effects.
struct Trace {
    hits: Vec<usize>,
    outputs: Vec<PortNo>,
    punt: Option<(u8, usize)>,
    metadata: u64,
}

#[derive(Debug, Clone)]
pub struct SimSwitch {
    pub name: String,
    pub dp_id: u64,
    pub ports: Vec<PortNo>,
    pub connected: bool,
    entries: Vec<SimEntry>,
    counters: BTreeMap<PortNo, PortStatsEntry>,
    egress: BTreeMap<PortNo, BTreeMap<(u16, Option<u8>), u64>>,
    received: BTreeMap<&'static str, u64>,
    now_ms: u64,
}

impl SimSwitch {
    pub fn new(name: &str, dp_id: u64, ports: u32) -> Self {
        let ports: Vec<PortNo> = (1..=ports).collect();
        SimSwitch {
            name: name.to_string(),
            dp_id,
            counters: ports
                .iter()
                .map(|p| {
                    (
                        *p,
                        PortStatsEntry {
                            port_no: *p,
                            ..Default::default()
                        },
                    )
                })
                .collect(),
            ports,
            connected: false,
            entries: Vec::new(),
            egress: BTreeMap::new(),
            received: BTreeMap::new(),
            now_ms: 0,
        }
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    /// Move the switch clock forward and age out idle entries.
    pub fn set_time(&mut self, now_ms: u64) {
        self.now_ms = now_ms;
        self.entries.retain(|e| {
            e.entry.idle_timeout == 0 || now_ms.saturating_sub(e.last_hit_ms) < e.entry.idle_timeout as u64 * 1000
        });
    }

    pub fn entries(&self) -> &[SimEntry] {
        &self.entries
    }

    pub fn flow_table(&self) -> FlowTable {
        FlowTable::from_entries(
            self.dp_id,
            self.entries.iter().map(|e| e.entry.clone()).collect(),
            String::new(),
        )
    }

    pub fn port_stats(&self) -> Vec<PortStatsEntry> {
        let secs = self.now_ms / 1000;
        let nsec = (self.now_ms % 1000) * 1_000_000;
        self.counters
            .values()
            .map(|c| PortStatsEntry {
                duration_sec: secs as u32,
                duration_nsec: nsec as u32,
                ..c.clone()
            })
            .collect()
    }

    pub fn counters(&self, port: PortNo) -> Option<&PortStatsEntry> {
        self.counters.get(&port)
    }

    /// Frames sent out of `port`, by (eth_type, ip_proto).
    pub fn egress(&self, port: PortNo) -> BTreeMap<(u16, Option<u8>), u64> {
        self.egress.get(&port).cloned().unwrap_or_default()
    }

    /// Controller messages received so far, by message name.
    pub fn received(&self) -> &BTreeMap<&'static str, u64> {
        &self.received
    }

    pub fn flow_mods_received(&self) -> u64 {
        self.received.get("FLOW_MOD").copied().unwrap_or(0)
    }

    pub fn reset_capture(&mut self) {
        self.received.clear();
    }

    fn cookie_selects(fm: &FlowMod, e: &FlowEntry) -> bool {
        e.cookie & fm.cookie_mask == fm.cookie & fm.cookie_mask
    }

    fn outputs_to(e: &FlowEntry, port: u32) -> bool {
        port == OFPP_ANY
            || e.instructions.iter().any(|i| {
                matches!(i, Instruction::ApplyActions(a)
                    if a.iter().any(|x| matches!(x, Action::Output { port: p, .. } if *p == port)))
            })
    }

    pub fn apply_flow_mod(&mut self, fm: &FlowMod) {
        let now = self.now_ms;
        let strict_same = |e: &FlowEntry| {
            e.table_id == fm.table_id && e.priority == fm.priority && e.matches.same_fields(&fm.matches)
        };
        match fm.command {
            FlowModCommand::Add => {
                if fm.table_id == OFPTT_ALL || fm.table_id >= SIM_TABLES {
                    return;
                }
                let new = SimEntry {
                    entry: FlowEntry::from_flow_mod(fm),
                    packets: 0,
                    bytes: 0,
                    last_hit_ms: now,
                };
                match self.entries.iter_mut().find(|e| strict_same(&e.entry)) {
                    Some(slot) => *slot = new,
                    None => self.entries.push(new),
                }
            }
            FlowModCommand::Modify | FlowModCommand::ModifyStrict => {
                let strict = fm.command == FlowModCommand::ModifyStrict;
                for e in &mut self.entries {
                    let hit = if strict {
                        strict_same(&e.entry)
                    } else {
                        (fm.table_id == OFPTT_ALL || e.entry.table_id == fm.table_id)
                            && fm.matches.contains(&e.entry.matches)
                    };
                    if hit && Self::cookie_selects(fm, &e.entry) {
                        e.entry.instructions = fm.instructions.clone();
                    }
                }
            }
            FlowModCommand::Delete | FlowModCommand::DeleteStrict => {
                let strict = fm.command == FlowModCommand::DeleteStrict;
                self.entries.retain(|e| {
                    let selected = if strict {
                        strict_same(&e.entry)
                    } else {
                        (fm.table_id == OFPTT_ALL || e.entry.table_id == fm.table_id)
                            && fm.matches.contains(&e.entry.matches)
                    };
                    !(selected && Self::cookie_selects(fm, &e.entry) && Self::outputs_to(&e.entry, fm.out_port))
                });
            }
        }
    }

    /// Handle one controller message; returns the replies.
    pub fn handle_message(&mut self, msg: &OfMessage) -> Vec<OfMessage> {
        *self.received.entry(msg.body.name()).or_default() += 1;
        let reply = |body| vec![OfMessage::new(msg.xid, body)];
        match &msg.body {
            OfBody::Hello(_) => Vec::new(),
            OfBody::EchoRequest(data) => reply(OfBody::EchoReply(data.clone())),
            OfBody::FeaturesRequest => reply(OfBody::FeaturesReply(FeaturesReply {
                datapath_id: self.dp_id,
                n_buffers: 0,
                n_tables: SIM_TABLES,
                auxiliary_id: 0,
                capabilities: 0x1 | 0x4,
                reserved: 0,
            })),
            OfBody::BarrierRequest => reply(OfBody::BarrierReply),
            OfBody::FlowMod(fm) => {
                self.apply_flow_mod(fm);
                Vec::new()
            }
            OfBody::PacketOut(po) => {
                self.packet_out(po);
                Vec::new()
            }
            OfBody::MultipartRequest(req) => match req.body {
                MultipartRequestBody::PortStats { port_no } => {
                    let rows = self
                        .port_stats()
                        .into_iter()
                        .filter(|r| port_no == OFPP_ANY || r.port_no == port_no)
                        .collect();
                    reply(OfBody::MultipartReply(MultipartReply {
                        flags: 0,
                        body: MultipartReplyBody::PortStats(rows),
                    }))
                }
                MultipartRequestBody::Desc => reply(OfBody::MultipartReply(MultipartReply {
                    flags: 0,
                    body: MultipartReplyBody::Desc(DescStats {
                        mfr_desc: "sdx".into(),
                        hw_desc: "simulated switch".into(),
                        sw_desc: env!("CARGO_PKG_VERSION").into(),
                        serial_num: format!("{:x}", self.dp_id),
                        dp_desc: self.name.clone(),
                    }),
                })),
            },
            _ => Vec::new(),
        }
    }

    /// The Hello a switch opens a session with.
    pub fn hello() -> OfMessage {
        OfMessage::new(0, OfBody::Hello(Hello::v13_only()))
    }

    fn best(&self, table: u8, f: &Fields) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, e) in self.entries.iter().enumerate() {
            if e.entry.table_id != table || !entry_matches(&e.entry, f) {
                continue;
            }
            // strictly greater: ties go to the earlier entry
            if best.is_none_or(|b| e.entry.priority > self.entries[b].entry.priority) {
                best = Some(i);
            }
        }
        best
    }

    fn resolve(&self, port: u32, in_port: PortNo, out: &mut Vec<PortNo>) {
        match port {
            OFPP_FLOOD | OFPP_ALL => out.extend(self.ports.iter().filter(|p| **p != in_port)),
            OFPP_IN_PORT => out.push(in_port),
            p if p != in_port && self.ports.contains(&p) => out.push(p),
            _ => {}
        }
    }

    fn trace(&self, in_port: PortNo, hdr: &FrameHeader) -> Trace {
        let mut f = Fields {
            in_port,
            metadata: 0,
            hdr: *hdr,
        };
        let mut t = Trace {
            hits: Vec::new(),
            outputs: Vec::new(),
            punt: None,
            metadata: 0,
        };
        let mut table = TABLE_ACL;
        loop {
            let Some(i) = self.best(table, &f) else { break };
            t.hits.push(i);
            let mut next = None;
            for ins in &self.entries[i].entry.instructions {
                match ins {
                    Instruction::ApplyActions(actions) => {
                        for a in actions {
                            if let Action::Output { port, .. } = a {
                                if *port == OFPP_CONTROLLER {
                                    t.punt = Some((table, i));
                                } else {
                                    self.resolve(*port, in_port, &mut t.outputs);
                                }
                            }
                        }
                    }
                    Instruction::WriteMetadata { metadata, mask } => {
                        f.metadata = (f.metadata & !mask) | (metadata & mask);
                    }
                    Instruction::GotoTable(n) if *n > table => next = Some(*n),
                    _ => {}
                }
            }
            match next {
                Some(n) => table = n,
                None => break,
            }
        }
        t.metadata = f.metadata;
        t
    }

    fn emit(&mut self, port: PortNo, hdr: &FrameHeader, size: u64, count: u64) {
        if let Some(c) = self.counters.get_mut(&port) {
            c.tx_packets += count;
            c.tx_bytes += size * count;
        }
        *self
            .egress
            .entry(port)
            .or_default()
            .entry((hdr.eth_type, hdr.ip_proto))
            .or_default() += count;
    }

    fn account(&mut self, in_port: PortNo, hdr: &FrameHeader, size: u64, count: u64, t: &Trace) {
        if let Some(c) = self.counters.get_mut(&in_port) {
            c.rx_packets += count;
            c.rx_bytes += size * count;
        }
        for &i in &t.hits {
            let e = &mut self.entries[i];
            e.packets += count;
            e.bytes += size * count;
            e.last_hit_ms = self.now_ms;
        }
        for &p in &t.outputs {
            self.emit(p, hdr, size, count);
        }
    }

    fn packet_out(&mut self, po: &PacketOut) -> Vec<PortNo> {
        let Some(hdr) = FrameHeader::parse(&po.data) else {
            return Vec::new();
        };
        let mut outs = Vec::new();
        for a in &po.actions {
            if let Action::Output { port, .. } = a {
                self.resolve(*port, po.in_port, &mut outs);
            }
        }
        let size = po.data.len().max(64) as u64;
        for &p in &outs {
            self.emit(p, &hdr, size, 1);
        }
        outs
    }

    /// Forward `count` identical frames arriving on `in_port`. Frames that
    /// reach the controller are handled one at a time, since the reply may
    /// change the tables; once a frame passes without the controller the
    /// rest of the batch follows the same path.
    pub fn process_frames(
        &mut self,
        in_port: PortNo,
        hdr: &FrameHeader,
        size: u32,
        count: u64,
        cp: &mut dyn ControlPlane,
    ) -> Vec<(FrameOutcome, u64)> {
        let size = size as u64;
        let mut out = Vec::new();
        let mut remaining = count;
        while remaining > 0 {
            let t = self.trace(in_port, hdr);
            let Some((table, entry)) = t.punt else {
                self.account(in_port, hdr, size, remaining, &t);
                out.push((
                    FrameOutcome {
                        outputs: t.outputs,
                        punted: false,
                    },
                    remaining,
                ));
                break;
            };
            self.account(in_port, hdr, size, 1, &t);
            let e = &self.entries[entry].entry;
            let mut matches = crate::ofp::Match::new().in_port(in_port);
            if t.metadata != 0 {
                matches = matches.metadata(t.metadata);
            }
            let pi = PacketIn {
                buffer_id: OFP_NO_BUFFER,
                total_len: size.min(u16::MAX as u64) as u16,
                reason: if e.priority == 0 && e.matches.is_empty() {
                    OFPR_NO_MATCH
                } else {
                    OFPR_ACTION
                },
                table_id: table,
                cookie: e.cookie,
                matches,
                data: hdr.encode(),
            };
            let mut outputs = t.outputs;
            for body in cp.packet_in(self.dp_id, &pi, self.now_ms) {
                let msg = OfMessage::new(0, body);
                *self.received.entry(msg.body.name()).or_default() += 1;
                match &msg.body {
                    OfBody::FlowMod(fm) => self.apply_flow_mod(fm),
                    OfBody::PacketOut(po) => {
                        let mut po = po.clone();
                        if po.buffer_id == OFP_NO_BUFFER && po.data.is_empty() {
                            po.data = pi.data.clone();
                        }
                        // the copy keeps the original frame's size
                        let Some(h) = FrameHeader::parse(&po.data) else { continue };
                        let mut outs = Vec::new();
                        for a in &po.actions {
                            if let Action::Output { port, .. } = a {
                                self.resolve(*port, po.in_port, &mut outs);
                            }
                        }
                        for &p in &outs {
                            self.emit(p, &h, size, 1);
                        }
                        outputs.extend(outs);
                    }
                    _ => {}
                }
            }
            out.push((
                FrameOutcome {
                    outputs,
                    punted: true,
                },
                1,
            ));
            remaining -= 1;
        }
        out
    }
}
