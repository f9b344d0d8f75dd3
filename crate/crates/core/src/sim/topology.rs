//! Declarative description of a simulated fabric: switches, the hosts
//! attached to them and the traffic the hosts generate.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::config::yaml::{self, Node};
use crate::config::{entries, fields, int_in, require, text, type_error, ConfigError, ErrorCode, PortNo};
use crate::ofp::{fmt_mac, parse_mac, MacAddr};

pub const DEFAULT_TICK_MS: u64 = 100;
pub const MIN_FRAME_BYTES: u32 = 64;
pub const MAX_FRAME_BYTES: u32 = 9000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SwitchSpec {
    pub name: String,
    pub dp_id: u64,
    pub ports: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HostSpec {
    pub name: String,
    pub switch: String,
    pub port: PortNo,
    #[serde(serialize_with = "ser_mac")]
    pub mac: MacAddr,
    /// Informational: hosts are untagged, the port's native VLAN applies.
    pub vlan: Option<String>,
}

fn ser_mac<S: serde::Serializer>(mac: &MacAddr, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_mac(mac))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlowSpec {
    pub name: String,
    pub src: String,
    pub dst: String,
    pub pps: u64,
    pub bytes: u32,
    pub eth_type: u16,
    pub ip_proto: Option<u8>,
    pub start_ms: u64,
    pub stop_ms: Option<u64>,
}

impl FlowSpec {
    /// Frames emitted from the flow's start up to time `t_ms`.
    pub fn emitted_by(&self, t_ms: u64) -> u64 {
        let end = self.stop_ms.map_or(t_ms, |s| s.min(t_ms));
        if end <= self.start_ms {
            return 0;
        }
        ((self.pps as u128 * (end - self.start_ms) as u128) / 1000) as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TopologySpec {
    pub tick_ms: u64,
    pub switches: Vec<SwitchSpec>,
    pub hosts: Vec<HostSpec>,
    pub flows: Vec<FlowSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TopologyError {
    #[error(transparent)]
    Document(#[from] ConfigError),
    #[error("{0}")]
    Invalid(String),
}

impl TopologySpec {
    pub fn switch(&self, name: &str) -> Option<&SwitchSpec> {
        self.switches.iter().find(|s| s.name == name)
    }

    pub fn host(&self, name: &str) -> Option<&HostSpec> {
        self.hosts.iter().find(|h| h.name == name)
    }

    pub fn validate(&self) -> Result<(), TopologyError> {
        let bad = |m: String| Err(TopologyError::Invalid(m));
        if self.tick_ms == 0 {
            return bad("tick_ms must be positive".into());
        }
        let mut names = BTreeSet::new();
        let mut ids = BTreeSet::new();
        for s in &self.switches {
            if !names.insert(&s.name) {
                return bad(format!("duplicate switch '{}'", s.name));
            }
            if !ids.insert(s.dp_id) {
                return bad(format!("duplicate dp_id {:#x}", s.dp_id));
            }
            if s.ports == 0 {
                return bad(format!("switch '{}' has no ports", s.name));
            }
        }
        let mut hosts = BTreeSet::new();
        let mut macs = BTreeSet::new();
        let mut attached = BTreeSet::new();
        for h in &self.hosts {
            if !hosts.insert(&h.name) {
                return bad(format!("duplicate host '{}'", h.name));
            }
            let Some(sw) = self.switch(&h.switch) else {
                return bad(format!("host '{}' attaches to unknown switch '{}'", h.name, h.switch));
            };
            if h.port == 0 || h.port > sw.ports {
                return bad(format!(
                    "host '{}' attaches to port {} but '{}' has ports 1-{}",
                    h.name, h.port, sw.name, sw.ports
                ));
            }
            if !attached.insert((&h.switch, h.port)) {
                return bad(format!("two hosts on {} port {}", h.switch, h.port));
            }
            if h.mac[0] & 1 == 1 || !macs.insert(h.mac) {
                return bad(format!("host '{}' needs a unique unicast MAC", h.name));
            }
        }
        let mut flows = BTreeSet::new();
        for f in &self.flows {
            if !flows.insert(&f.name) {
                return bad(format!("duplicate flow '{}'", f.name));
            }
            for h in [&f.src, &f.dst] {
                if !hosts.contains(h) {
                    return bad(format!("flow '{}' names unknown host '{h}'", f.name));
                }
            }
            let (a, b) = (self.host(&f.src).unwrap(), self.host(&f.dst).unwrap());
            if a.switch != b.switch {
                return bad(format!("flow '{}' crosses switches, which is not modelled", f.name));
            }
            if f.pps == 0 {
                return bad(format!("flow '{}': pps must be positive", f.name));
            }
            if !(MIN_FRAME_BYTES..=MAX_FRAME_BYTES).contains(&f.bytes) {
                return bad(format!(
                    "flow '{}': bytes must be within {MIN_FRAME_BYTES}-{MAX_FRAME_BYTES}",
                    f.name
                ));
            }
            if f.stop_ms.is_some_and(|s| s <= f.start_ms) {
                return bad(format!("flow '{}' stops before it starts", f.name));
            }
        }
        Ok(())
    }
}

fn seconds_ms(node: &Node, field: &str, ctx: &str) -> Result<u64, ConfigError> {
    node.plain()
        .and_then(|s| s.parse::<f64>().ok())
        .filter(|v| v.is_finite() && *v >= 0.0)
        .map(|v| (v * 1000.0).round() as u64)
        .ok_or_else(|| type_error(node, field, "a non-negative number of seconds", ctx))
}

/// Parse and validate a topology document.
pub fn parse_topology(text_in: &str) -> Result<TopologySpec, TopologyError> {
    let root = yaml::parse(text_in)
        .map_err(|e| ConfigError::at(ErrorCode::Syntax, e.message, e.pos))?
        .ok_or_else(|| ConfigError::new(ErrorCode::MissingSection, "missing section: switches", None))?;
    let top = fields(&root, &["tick_ms", "switches", "hosts", "flows"], "topology")?;
    let tick_ms = match top.get("tick_ms") {
        Some(n) => int_in(n, "tick_ms", "topology")?,
        None => DEFAULT_TICK_MS,
    };
    let sw_node = require(&top, "switches", &root, "topology")
        .map_err(|_| ConfigError::new(ErrorCode::MissingSection, "missing section: switches", None))?;

    let mut spec = TopologySpec {
        tick_ms,
        switches: Vec::new(),
        hosts: Vec::new(),
        flows: Vec::new(),
    };
    for (name, node) in entries(sw_node, "switches")? {
        let ctx = format!("switch {name}");
        let f = fields(node, &["dp_id", "ports"], &ctx)?;
        spec.switches.push(SwitchSpec {
            name: name.to_string(),
            dp_id: int_in(require(&f, "dp_id", node, &ctx)?, "dp_id", &ctx)?,
            ports: int_in(require(&f, "ports", node, &ctx)?, "ports", &ctx)?,
        });
    }
    if let Some(hosts) = top.get("hosts") {
        for (name, node) in entries(hosts, "hosts")? {
            let ctx = format!("host {name}");
            let f = fields(node, &["switch", "port", "mac", "vlan"], &ctx)?;
            let mac_node = require(&f, "mac", node, &ctx)?;
            let mac = mac_node
                .scalar()
                .and_then(parse_mac)
                .ok_or_else(|| type_error(mac_node, "mac", "a MAC address", &ctx))?;
            spec.hosts.push(HostSpec {
                name: name.to_string(),
                switch: text(require(&f, "switch", node, &ctx)?, "switch", &ctx)?,
                port: int_in(require(&f, "port", node, &ctx)?, "port", &ctx)?,
                mac,
                vlan: f.get("vlan").map(|n| text(n, "vlan", &ctx)).transpose()?,
            });
        }
    }
    if let Some(flows) = top.get("flows") {
        for (name, node) in entries(flows, "flows")? {
            let ctx = format!("flow {name}");
            let f = fields(
                node,
                &["src", "dst", "pps", "bytes", "eth_type", "ip_proto", "start", "stop"],
                &ctx,
            )?;
            spec.flows.push(FlowSpec {
                name: name.to_string(),
                src: text(require(&f, "src", node, &ctx)?, "src", &ctx)?,
                dst: text(require(&f, "dst", node, &ctx)?, "dst", &ctx)?,
                pps: int_in(require(&f, "pps", node, &ctx)?, "pps", &ctx)?,
                bytes: int_in(require(&f, "bytes", node, &ctx)?, "bytes", &ctx)?,
                eth_type: match f.get("eth_type") {
                    Some(n) => int_in(n, "eth_type", &ctx)?,
                    None => 0x0800,
                },
                ip_proto: f.get("ip_proto").map(|n| int_in(n, "ip_proto", &ctx)).transpose()?,
                start_ms: f.get("start").map(|n| seconds_ms(n, "start", &ctx)).transpose()?.unwrap_or(0),
                stop_ms: f.get("stop").map(|n| seconds_ms(n, "stop", &ctx)).transpose()?,
            });
        }
    }
    spec.validate()?;
    Ok(spec)
}
