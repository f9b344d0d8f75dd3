use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, MutexGuard};

use serde::Serialize;

use super::switch::{ControlPlane, FrameOutcome, SimSwitch};
use super::topology::{FlowSpec, HostSpec, TopologyError, TopologySpec};
use crate::compile::FlowTable;
use crate::config::PortNo;
use crate::eth::{FrameHeader, BROADCAST, ETH_TYPE_ARP};
use crate::ofp::PortStatsEntry;

pub type SwitchHandle = Arc<Mutex<SimSwitch>>;

/// Size of the ARP frames hosts announce themselves with.
pub const ANNOUNCE_BYTES: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("unknown datapath {0:#x}")]
    UnknownDatapath(u64),
    #[error("no session")]
    NoSession,
    #[error("unknown host '{0}'")]
    UnknownHost(String),
}

/// What happened to one flow's frames. Every frame is exactly one of
/// delivered (reached the destination host's port), diverted (left the
/// switch, but not towards the destination) or dropped. Extra copies made
/// by mirroring or flooding are counted separately.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FlowLedger {
    pub name: String,
    pub src: String,
    pub dst: String,
    pub sent: u64,
    pub delivered: u64,
    pub diverted: u64,
    pub dropped: u64,
    pub copies: u64,
    pub punted: u64,
    pub bytes_sent: u64,
    /// Frames of this flow leaving each port.
    pub egress: BTreeMap<PortNo, u64>,
}

impl FlowLedger {
    pub fn conserved(&self) -> bool {
        self.sent == self.delivered + self.diverted + self.dropped
            && self.egress.values().sum::<u64>() == self.delivered + self.diverted + self.copies
    }

    pub fn egress_on(&self, port: PortNo) -> u64 {
        self.egress.get(&port).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct HostLedger {
    pub name: String,
    pub sent: u64,
    pub received: u64,
    /// Received frames keyed `eth_type/ip_proto`, e.g. `0x0800/1`.
    pub received_by: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AdvanceSummary {
    pub from_ms: u64,
    pub to_ms: u64,
    pub frames: u64,
    pub punted: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub now_ms: u64,
    pub flows: Vec<FlowLedger>,
    pub hosts: Vec<HostLedger>,
    pub ports: BTreeMap<String, Vec<PortStatsEntry>>,
}

impl SimReport {
    /// Line-oriented summary.
    pub fn text(&self) -> String {
        let mut out = format!("t={:.3}s\n", self.now_ms as f64 / 1000.0);
        for f in &self.flows {
            out.push_str(&format!(
                "flow {} {}->{} sent={} delivered={} diverted={} dropped={} copies={} egress={:?}\n",
                f.name, f.src, f.dst, f.sent, f.delivered, f.diverted, f.dropped, f.copies, f.egress
            ));
        }
        for h in &self.hosts {
            out.push_str(&format!("host {} sent={} received={} by={:?}\n", h.name, h.sent, h.received, h.received_by));
        }
        for (sw, rows) in &self.ports {
            for r in rows {
                out.push_str(&format!(
                    "port {sw}:{} rx_packets={} rx_bytes={} tx_packets={} tx_bytes={}\n",
                    r.port_no, r.rx_packets, r.rx_bytes, r.tx_packets, r.tx_bytes
                ));
            }
        }
        out
    }
}

pub struct SimFabric {
    spec: TopologySpec,
    switches: BTreeMap<String, SwitchHandle>,
    now_ms: u64,
    flows: Vec<FlowLedger>,
    host_sent: BTreeMap<String, u64>,
}

fn lock(h: &SwitchHandle) -> MutexGuard<'_, SimSwitch> {
    h.lock().unwrap_or_else(|p| p.into_inner())
}

impl SimFabric {
    pub fn load(spec: TopologySpec) -> Result<SimFabric, TopologyError> {
        spec.validate()?;
        let switches = spec
            .switches
            .iter()
            .map(|s| (s.name.clone(), Arc::new(Mutex::new(SimSwitch::new(&s.name, s.dp_id, s.ports)))))
            .collect();
        let flows = spec
            .flows
            .iter()
            .map(|f| FlowLedger {
                name: f.name.clone(),
                src: f.src.clone(),
                dst: f.dst.clone(),
                ..Default::default()
            })
            .collect();
        Ok(SimFabric {
            switches,
            flows,
            host_sent: spec.hosts.iter().map(|h| (h.name.clone(), 0)).collect(),
            spec,
            now_ms: 0,
        })
    }

    pub fn spec(&self) -> &TopologySpec {
        &self.spec
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    pub fn switches(&self) -> impl Iterator<Item = (&String, &SwitchHandle)> {
        self.switches.iter()
    }

    pub fn switch(&self, name: &str) -> Option<&SwitchHandle> {
        self.switches.get(name)
    }

    pub fn switch_by_dp(&self, dp_id: u64) -> Option<&SwitchHandle> {
        self.spec
            .switches
            .iter()
            .find(|s| s.dp_id == dp_id)
            .and_then(|s| self.switches.get(&s.name))
    }

    /// The switch's current tables, for comparison with compiler output.
    pub fn read_flow_table(&self, dp_id: u64) -> Result<FlowTable, SimError> {
        let sw = lock(self.switch_by_dp(dp_id).ok_or(SimError::UnknownDatapath(dp_id))?);
        if !sw.connected {
            return Err(SimError::NoSession);
        }
        Ok(sw.flow_table())
    }

    fn host(&self, name: &str) -> Result<&HostSpec, SimError> {
        self.spec.host(name).ok_or_else(|| SimError::UnknownHost(name.to_string()))
    }

    /// Inject `count` frames from a host, outside any declared flow.
    pub fn inject(
        &mut self,
        src: &str,
        hdr: FrameHeader,
        size: u32,
        count: u64,
        cp: &mut dyn ControlPlane,
    ) -> Result<Vec<(FrameOutcome, u64)>, SimError> {
        let h = self.host(src)?.clone();
        *self.host_sent.entry(h.name.clone()).or_default() += count;
        let sw = self.switches[&h.switch].clone();
        let mut sw = lock(&sw);
        sw.set_time(self.now_ms);
        Ok(sw.process_frames(h.port, &hdr, size, count, cp))
    }

    /// Every host sends one broadcast ARP so the controller learns where it
    /// is, much as hosts do when an interface comes up.
    pub fn announce_hosts(&mut self, cp: &mut dyn ControlPlane) {
        let hosts: Vec<HostSpec> = self.spec.hosts.clone();
        for h in hosts {
            let hdr = FrameHeader {
                dst: BROADCAST,
                src: h.mac,
                eth_type: ETH_TYPE_ARP,
                ip_proto: None,
            };
            let _ = self.inject(&h.name, hdr, ANNOUNCE_BYTES, 1, cp);
        }
    }

    fn flow_header(&self, f: &FlowSpec) -> (HostSpec, HostSpec, FrameHeader) {
        let src = self.spec.host(&f.src).expect("validated").clone();
        let dst = self.spec.host(&f.dst).expect("validated").clone();
        let hdr = FrameHeader {
            dst: dst.mac,
            src: src.mac,
            eth_type: f.eth_type,
            ip_proto: f.ip_proto,
        };
        (src, dst, hdr)
    }

    /// Run the declared flows for `duration_ms` of simulated time, one tick
    /// at a time. Frames of a tick are stamped with the tick's end.
    pub fn advance(&mut self, duration_ms: u64, cp: &mut dyn ControlPlane) -> AdvanceSummary {
        let from = self.now_ms;
        let end = from + duration_ms;
        let mut summary = AdvanceSummary {
            from_ms: from,
            to_ms: end,
            ..Default::default()
        };
        while self.now_ms < end {
            let t0 = self.now_ms;
            let t1 = (t0 + self.spec.tick_ms).min(end);
            for sw in self.switches.values() {
                lock(sw).set_time(t1);
            }
            for i in 0..self.spec.flows.len() {
                let f = self.spec.flows[i].clone();
                let n = f.emitted_by(t1) - f.emitted_by(t0);
                if n == 0 {
                    continue;
                }
                let (src, dst, hdr) = self.flow_header(&f);
                *self.host_sent.entry(src.name.clone()).or_default() += n;
                let outcomes = {
                    let mut sw = lock(&self.switches[&src.switch]);
                    sw.process_frames(src.port, &hdr, f.bytes, n, cp)
                };
                let ledger = &mut self.flows[i];
                ledger.sent += n;
                ledger.bytes_sent += n * f.bytes as u64;
                summary.frames += n;
                for (o, count) in outcomes {
                    if o.punted {
                        ledger.punted += count;
                        summary.punted += count;
                    }
                    if o.outputs.contains(&dst.port) {
                        ledger.delivered += count;
                    } else if o.outputs.is_empty() {
                        ledger.dropped += count;
                    } else {
                        ledger.diverted += count;
                    }
                    ledger.copies += count * o.outputs.len().saturating_sub(1) as u64;
                    for p in &o.outputs {
                        *ledger.egress.entry(*p).or_default() += count;
                    }
                }
            }
            self.now_ms = t1;
        }
        summary
    }

    pub fn flow_ledger(&self, name: &str) -> Option<&FlowLedger> {
        self.flows.iter().find(|f| f.name == name)
    }

    pub fn flow_ledgers(&self) -> &[FlowLedger] {
        &self.flows
    }

    /// A host receives whatever leaves the switch port it is attached to.
    pub fn host_ledger(&self, name: &str) -> Result<HostLedger, SimError> {
        let h = self.host(name)?;
        let by = lock(&self.switches[&h.switch]).egress(h.port);
        Ok(HostLedger {
            name: h.name.clone(),
            sent: self.host_sent.get(name).copied().unwrap_or(0),
            received: by.values().sum(),
            received_by: by
                .into_iter()
                .map(|((t, p), n)| {
                    let key = match p {
                        Some(p) => format!("{t:#06x}/{p}"),
                        None => format!("{t:#06x}"),
                    };
                    (key, n)
                })
                .collect(),
        })
    }

    pub fn report(&self) -> SimReport {
        SimReport {
            now_ms: self.now_ms,
            flows: self.flows.clone(),
            hosts: self
                .spec
                .hosts
                .iter()
                .map(|h| self.host_ledger(&h.name).expect("declared host"))
                .collect(),
            ports: self
                .switches
                .iter()
                .map(|(n, sw)| (n.clone(), lock(sw).port_stats()))
                .collect(),
        }
    }
}
