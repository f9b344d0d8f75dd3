//! Lowering of a fabric configuration into per-datapath OpenFlow tables.
//!
//! Table 0 holds the ingress ACLs, table 1 maps each port to its native
//! VLAN (carried in the metadata register) and table 2 does L2 forwarding,
//! punting misses to the controller.

mod cookie;
mod plan;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

pub use cookie::{acl_hash, is_learned, CookieTag, LEARNED_BIT, MAX_RULE_INDEX};
pub use plan::{plan_update, FlowUpdatePlan, PlanCounts, PlanStep};

use crate::config::{self, AclRule, FabricConfig, PortNo};
use crate::ofp::{Action, FlowMod, FlowModCommand, Instruction, Match, OFPP_CONTROLLER};

pub const TABLE_ACL: u8 = 0;
pub const TABLE_VLAN: u8 = 1;
pub const TABLE_L2: u8 = 2;

/// Priority of the k-th (1-based) ACL rule on a port is `ACL_BASE_PRIORITY - k`.
pub const ACL_BASE_PRIORITY: u16 = 20000;
pub const CATCH_ALL_PRIORITY: u16 = 1;
pub const VLAN_PRIORITY: u16 = 1;
pub const L2_MISS_PRIORITY: u16 = 0;
pub const L2_LEARNED_PRIORITY: u16 = 10;
pub const L2_IDLE_TIMEOUT: u16 = 300;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("unknown datapath '{0}'")]
    UnknownDatapath(String),
    #[error("datapath {dp} port {port}: unresolved ACL '{acl}'")]
    UnresolvedAcl { dp: String, port: PortNo, acl: String },
    #[error("datapath {dp} port {port}: unresolved VLAN '{vlan}'")]
    UnresolvedVlan { dp: String, port: PortNo, vlan: String },
    #[error("ACL '{acl}' sends to port {target}, which is not on datapath {dp}")]
    PortAbsent { dp: String, acl: String, target: PortNo },
    #[error("datapath {dp} port {port}: {count} ACL rules exceed the priority range")]
    TooManyRules { dp: String, port: PortNo, count: usize },
    #[error("cannot plan between datapaths {current:#x} and {target:#x}")]
    DpIdMismatch { current: u64, target: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FlowEntry {
    pub table_id: u8,
    pub priority: u16,
    pub cookie: u64,
    pub matches: Match,
    pub instructions: Vec<Instruction>,
    pub idle_timeout: u16,
}

impl FlowEntry {
    pub fn new(table_id: u8, priority: u16, cookie: u64, matches: Match, instructions: Vec<Instruction>) -> Self {
        FlowEntry {
            table_id,
            priority,
            cookie,
            matches,
            instructions,
            idle_timeout: 0,
        }
    }

    /// Identity of an entry within a switch: OpenFlow's strict match key.
    pub fn key(&self) -> (u8, u16, &Match) {
        (self.table_id, self.priority, &self.matches)
    }

    pub fn to_flow_mod(&self, command: FlowModCommand) -> FlowMod {
        let mut fm = FlowMod::new(command, self.table_id, self.priority, self.matches.clone());
        fm.cookie = self.cookie;
        fm.idle_timeout = self.idle_timeout;
        fm.instructions = self.instructions.clone();
        fm
    }

    pub fn from_flow_mod(fm: &FlowMod) -> Self {
        FlowEntry {
            table_id: fm.table_id,
            priority: fm.priority,
            cookie: fm.cookie,
            matches: fm.matches.clone(),
            instructions: fm.instructions.clone(),
            idle_timeout: fm.idle_timeout,
        }
    }

    /// The instruction list rendered as a comma-separated action summary;
    /// an entry without instructions drops.
    pub fn actions_text(&self) -> String {
        let parts: Vec<String> = self
            .instructions
            .iter()
            .filter(|i| !matches!(i, Instruction::ApplyActions(a) if a.is_empty()))
            .map(|i| i.to_string())
            .collect();
        if parts.is_empty() {
            "drop".into()
        } else {
            parts.join(",")
        }
    }

    /// Order used for dumps and structural comparison.
    pub fn sort_key(&self) -> (u8, Reverse<u16>, &Match) {
        (self.table_id, Reverse(self.priority), &self.matches)
    }
}

impl fmt::Display for FlowEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "table={} prio={} {}", self.table_id, self.priority, self.matches)?;
        if self.idle_timeout != 0 {
            write!(f, " idle_timeout={}", self.idle_timeout)?;
        }
        write!(f, " -> {}", self.actions_text())
    }
}

impl Serialize for FlowEntry {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("FlowEntry", 6)?;
        st.serialize_field("table", &self.table_id)?;
        st.serialize_field("priority", &self.priority)?;
        st.serialize_field("cookie", &format!("{:#018x}", self.cookie))?;
        st.serialize_field("match", &self.matches.to_string())?;
        st.serialize_field("actions", &self.actions_text())?;
        st.serialize_field("idle_timeout", &self.idle_timeout)?;
        st.end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlowTable {
    pub dp_id: u64,
    pub entries: Vec<FlowEntry>,
    pub fingerprint: String,
}

impl FlowTable {
    /// Entries in dump order, regardless of how they were collected.
    pub fn from_entries(dp_id: u64, mut entries: Vec<FlowEntry>, fingerprint: String) -> Self {
        entries.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        FlowTable {
            dp_id,
            entries,
            fingerprint,
        }
    }

    pub fn dump(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn table(&self, table_id: u8) -> impl Iterator<Item = &FlowEntry> {
        self.entries.iter().filter(move |e| e.table_id == table_id)
    }

    /// Same entries, ignoring the fingerprint.
    pub fn same_entries(&self, other: &FlowTable) -> bool {
        self.dp_id == other.dp_id && self.entries == other.entries
    }

    /// Only the entries the compiler produced (drops controller-learned ones).
    pub fn compiled_only(&self) -> FlowTable {
        FlowTable {
            dp_id: self.dp_id,
            entries: self.entries.iter().filter(|e| !is_learned(e.cookie)).cloned().collect(),
            fingerprint: self.fingerprint.clone(),
        }
    }
}

/// Instructions realising one ACL rule's disposition.
pub fn rule_instructions(rule: &AclRule) -> Vec<Instruction> {
    let mut outputs = Vec::new();
    if let Some(m) = rule.actions.mirror {
        outputs.push(Action::output(m));
    }
    if let Some(r) = rule.actions.redirect {
        outputs.push(Action::output(r));
    }
    let mut out = Vec::new();
    if !outputs.is_empty() {
        out.push(Instruction::ApplyActions(outputs));
    }
    if rule.actions.allow && rule.actions.redirect.is_none() {
        out.push(Instruction::GotoTable(TABLE_VLAN));
    }
    out
}

pub fn acl_match(port: PortNo, rule: &AclRule) -> Match {
    let mut m = Match::new().in_port(port);
    if let Some(t) = rule.dl_type {
        m = m.eth_type(t);
    }
    if let Some(p) = rule.ip_proto {
        m = m.ip_proto(p);
    }
    m
}

pub fn vlan_metadata(vid: u16) -> u64 {
    vid as u64
}

/// Match for a learned destination in the L2 table.
pub fn l2_match(vid: u16, mac: crate::ofp::MacAddr) -> Match {
    Match::new().metadata(vlan_metadata(vid)).eth_dst(mac)
}

pub fn learned_entry(vid: u16, mac: crate::ofp::MacAddr, port: PortNo) -> FlowEntry {
    let mut e = FlowEntry::new(
        TABLE_L2,
        L2_LEARNED_PRIORITY,
        CookieTag::Learned { vid }.encode(),
        l2_match(vid, mac),
        vec![Instruction::ApplyActions(vec![Action::output(port)])],
    );
    e.idle_timeout = L2_IDLE_TIMEOUT;
    e
}

/// The part of the configuration one datapath's table depends on.
pub fn config_slice(cfg: &FabricConfig, dp: &str) -> Option<FabricConfig> {
    let dpc = cfg.dps.get(dp)?;
    let mut slice = FabricConfig::default();
    slice.dps.insert(dp.to_string(), dpc.clone());
    for iface in dpc.interfaces.values() {
        if let Some(v) = cfg.vlans.get(&iface.native_vlan) {
            slice.vlans.insert(iface.native_vlan.clone(), v.clone());
        }
        for acl in &iface.acls_in {
            if let Some(rules) = cfg.acls.get(acl) {
                slice.acls.insert(acl.clone(), rules.clone());
            }
        }
    }
    Some(slice)
}

pub fn compile_datapath(cfg: &FabricConfig, dp: &str) -> Result<FlowTable, CompileError> {
    let dpc = cfg
        .dps
        .get(dp)
        .ok_or_else(|| CompileError::UnknownDatapath(dp.to_string()))?;
    let ports: BTreeSet<PortNo> = dpc.interfaces.keys().copied().collect();
    let mut entries = Vec::new();

    for (&port, iface) in &dpc.interfaces {
        let mut k = 0usize;
        let mut terminal = false;
        for acl in &iface.acls_in {
            let rules = cfg.acls.get(acl).ok_or_else(|| CompileError::UnresolvedAcl {
                dp: dp.to_string(),
                port,
                acl: acl.clone(),
            })?;
            for (index, rule) in rules.iter().enumerate() {
                for target in rule.actions.mirror.iter().chain(&rule.actions.redirect) {
                    if !ports.contains(target) {
                        return Err(CompileError::PortAbsent {
                            dp: dp.to_string(),
                            acl: acl.clone(),
                            target: *target,
                        });
                    }
                }
                k += 1;
                if k >= ACL_BASE_PRIORITY as usize - CATCH_ALL_PRIORITY as usize || index > MAX_RULE_INDEX {
                    return Err(CompileError::TooManyRules {
                        dp: dp.to_string(),
                        port,
                        count: k,
                    });
                }
                terminal |= rule.matches_everything();
                entries.push(FlowEntry::new(
                    TABLE_ACL,
                    ACL_BASE_PRIORITY - k as u16,
                    CookieTag::acl_rule(acl, index).encode(),
                    acl_match(port, rule),
                    rule_instructions(rule),
                ));
            }
        }
        if !terminal {
            entries.push(FlowEntry::new(
                TABLE_ACL,
                CATCH_ALL_PRIORITY,
                CookieTag::CatchAll { port }.encode(),
                Match::new().in_port(port),
                vec![Instruction::GotoTable(TABLE_VLAN)],
            ));
        }

        let vlan = cfg
            .vlans
            .get(&iface.native_vlan)
            .ok_or_else(|| CompileError::UnresolvedVlan {
                dp: dp.to_string(),
                port,
                vlan: iface.native_vlan.clone(),
            })?;
        entries.push(FlowEntry::new(
            TABLE_VLAN,
            VLAN_PRIORITY,
            CookieTag::VlanAssign { port }.encode(),
            Match::new().in_port(port),
            vec![
                Instruction::WriteMetadata {
                    metadata: vlan_metadata(vlan.vid),
                    mask: u64::MAX,
                },
                Instruction::GotoTable(TABLE_L2),
            ],
        ));
    }

    entries.push(FlowEntry::new(
        TABLE_L2,
        L2_MISS_PRIORITY,
        CookieTag::L2Miss.encode(),
        Match::new(),
        vec![Instruction::ApplyActions(vec![Action::output(OFPP_CONTROLLER)])],
    ));

    let slice = config_slice(cfg, dp).expect("datapath present");
    Ok(FlowTable::from_entries(
        dpc.dp_id,
        entries,
        config::digest(&config::render(&slice)),
    ))
}

/// Compile every datapath, keyed by name.
pub fn compile_all(cfg: &FabricConfig) -> Result<BTreeMap<String, FlowTable>, CompileError> {
    cfg.dps
        .keys()
        .map(|dp| Ok((dp.clone(), compile_datapath(cfg, dp)?)))
        .collect()
}
