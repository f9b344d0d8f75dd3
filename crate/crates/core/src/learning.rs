//! Controller-side MAC learning: per (datapath, VLAN) tables of where each
//! source address was last seen, and the FlowMods/PacketOuts that follow
//! from a table-miss PacketIn.

use std::collections::BTreeMap;

use crate::compile::{learned_entry, l2_match, CookieTag, L2_LEARNED_PRIORITY, TABLE_L2};
use crate::config::{FabricConfig, PortNo};
use crate::eth::{is_multicast, FrameHeader};
use crate::ofp::{Action, FlowMod, FlowModCommand, MacAddr, OfBody, PacketIn, PacketOut, OFP_NO_BUFFER};

pub const DEFAULT_IDLE_TIMEOUT_MS: u64 = 300_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct L2Entry {
    pub port: PortNo,
    pub last_seen_ms: u64,
}

#[derive(Debug, Clone)]
pub struct L2Table {
    idle_timeout_ms: u64,
    tables: BTreeMap<(u64, u16), BTreeMap<MacAddr, L2Entry>>,
    /// PacketIns that could not be interpreted.
    pub malformed: u64,
}

impl Default for L2Table {
    fn default() -> Self {
        L2Table::new(DEFAULT_IDLE_TIMEOUT_MS)
    }
}

impl L2Table {
    pub fn new(idle_timeout_ms: u64) -> Self {
        L2Table {
            idle_timeout_ms,
            tables: BTreeMap::new(),
            malformed: 0,
        }
    }

    pub fn lookup(&self, dp_id: u64, vid: u16, mac: &MacAddr, now_ms: u64) -> Option<PortNo> {
        let e = self.tables.get(&(dp_id, vid))?.get(mac)?;
        (now_ms.saturating_sub(e.last_seen_ms) < self.idle_timeout_ms).then_some(e.port)
    }

    pub fn expire(&mut self, now_ms: u64) {
        let idle = self.idle_timeout_ms;
        for t in self.tables.values_mut() {
            t.retain(|_, e| now_ms.saturating_sub(e.last_seen_ms) < idle);
        }
        self.tables.retain(|_, t| !t.is_empty());
    }

    pub fn forget_datapath(&mut self, dp_id: u64) {
        self.tables.retain(|(d, _), _| *d != dp_id);
    }

    /// (vid, mac, entry) for one datapath, sorted.
    pub fn entries(&self, dp_id: u64) -> Vec<(u16, MacAddr, L2Entry)> {
        self.tables
            .range((dp_id, 0)..=(dp_id, u16::MAX))
            .flat_map(|((_, vid), t)| t.iter().map(move |(m, e)| (*vid, *m, *e)))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.tables.values().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// React to a table-miss PacketIn from `dp`. Returns the messages to
    /// send back, in order.
    pub fn handle_packet_in(&mut self, cfg: &FabricConfig, dp: &str, pi: &PacketIn, now_ms: u64) -> Vec<OfBody> {
        let Some(dpc) = cfg.dps.get(dp) else {
            self.malformed += 1;
            return Vec::new();
        };
        let (Some(in_port), Some(hdr)) = (pi.in_port(), FrameHeader::parse(&pi.data)) else {
            self.malformed += 1;
            return Vec::new();
        };
        let Some(vid) = dpc
            .interfaces
            .get(&in_port)
            .and_then(|i| cfg.vlans.get(&i.native_vlan))
            .map(|v| v.vid)
        else {
            self.malformed += 1;
            return Vec::new();
        };
        let dp_id = dpc.dp_id;
        let mut out = Vec::new();

        if !is_multicast(&hdr.src) {
            let table = self.tables.entry((dp_id, vid)).or_default();
            let prev = table.insert(
                hdr.src,
                L2Entry {
                    port: in_port,
                    last_seen_ms: now_ms,
                },
            );
            if matches!(prev, Some(p) if p.port != in_port) {
                // the host moved; the flow towards its old port is stale
                let mut del = FlowMod::new(
                    FlowModCommand::DeleteStrict,
                    TABLE_L2,
                    L2_LEARNED_PRIORITY,
                    l2_match(vid, hdr.src),
                );
                del.cookie = CookieTag::Learned { vid }.encode();
                out.push(OfBody::FlowMod(del));
            }
        }

        let known = if is_multicast(&hdr.dst) {
            None
        } else {
            self.lookup(dp_id, vid, &hdr.dst, now_ms)
        };
        let actions = match known {
            Some(port) if port == in_port => Vec::new(),
            Some(port) => {
                out.push(OfBody::FlowMod(
                    learned_entry(vid, hdr.dst, port).to_flow_mod(FlowModCommand::Add),
                ));
                vec![Action::output(port)]
            }
            None => cfg.vlan_peers(dp, in_port).into_iter().map(Action::output).collect(),
        };
        if !actions.is_empty() {
            let buffered = pi.buffer_id != OFP_NO_BUFFER;
            out.push(OfBody::PacketOut(PacketOut {
                buffer_id: pi.buffer_id,
                in_port,
                actions,
                data: if buffered { Vec::new() } else { pi.data.clone() },
            }));
        }
        out
    }
}
