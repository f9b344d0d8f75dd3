use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// OpenFlow port number as used in the configuration file.
pub type PortNo = u32;

pub const ETH_TYPE_IPV4: u16 = 0x0800;
pub const ETH_TYPE_IPV6: u16 = 0x86dd;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VlanConfig {
    pub vid: u16,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub native_vlan: String,
    #[serde(default)]
    pub acls_in: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatapathConfig {
    pub dp_id: u64,
    #[serde(default)]
    pub hardware: String,
    #[serde(default)]
    pub interfaces: BTreeMap<PortNo, InterfaceConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AclActions {
    #[serde(default)]
    pub allow: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mirror: Option<PortNo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub redirect: Option<PortNo>,
}

/// One `rule:` entry of an ACL. An empty match covers every frame.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AclRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dl_type: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ip_proto: Option<u8>,
    #[serde(default)]
    pub actions: AclActions,
}

impl AclRule {
    pub fn matches_everything(&self) -> bool {
        self.dl_type.is_none() && self.ip_proto.is_none()
    }

    /// Whether a frame with the given header fields is covered by this rule.
    pub fn covers(&self, eth_type: u16, ip_proto: Option<u8>) -> bool {
        if let Some(t) = self.dl_type {
            if t != eth_type {
                return false;
            }
        }
        match self.ip_proto {
            None => true,
            Some(p) => ip_proto == Some(p),
        }
    }
}

/// The whole fabric: VLANs, datapaths with their interfaces, and named ACLs.
/// Maps are keyed by name, so iteration order is the canonical (sorted) order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FabricConfig {
    #[serde(default)]
    pub vlans: BTreeMap<String, VlanConfig>,
    #[serde(default)]
    pub dps: BTreeMap<String, DatapathConfig>,
    #[serde(default)]
    pub acls: BTreeMap<String, Vec<AclRule>>,
}

impl FabricConfig {
    pub fn dp_by_id(&self, dp_id: u64) -> Option<(&str, &DatapathConfig)> {
        self.dps
            .iter()
            .find(|(_, dp)| dp.dp_id == dp_id)
            .map(|(name, dp)| (name.as_str(), dp))
    }

    /// All (datapath, port) pairs whose `acls_in` mentions `acl`.
    pub fn acl_users(&self, acl: &str) -> Vec<(String, PortNo)> {
        let mut out = Vec::new();
        for (dp_name, dp) in &self.dps {
            for (port, iface) in &dp.interfaces {
                if iface.acls_in.iter().any(|a| a == acl) {
                    out.push((dp_name.clone(), *port));
                }
            }
        }
        out
    }

    /// All (datapath, port) pairs whose native VLAN is `vlan`.
    pub fn vlan_users(&self, vlan: &str) -> Vec<(String, PortNo)> {
        let mut out = Vec::new();
        for (dp_name, dp) in &self.dps {
            for (port, iface) in &dp.interfaces {
                if iface.native_vlan == vlan {
                    out.push((dp_name.clone(), *port));
                }
            }
        }
        out
    }

    /// Ports on `dp` that share a native VLAN with `port`, excluding `port`.
    pub fn vlan_peers(&self, dp: &str, port: PortNo) -> Vec<PortNo> {
        let Some(dpc) = self.dps.get(dp) else {
            return Vec::new();
        };
        let Some(iface) = dpc.interfaces.get(&port) else {
            return Vec::new();
        };
        dpc.interfaces
            .iter()
            .filter(|(p, i)| **p != port && i.native_vlan == iface.native_vlan)
            .map(|(p, _)| *p)
            .collect()
    }
}
