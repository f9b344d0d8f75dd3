use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::model::{AclRule, DatapathConfig, FabricConfig, InterfaceConfig, PortNo, VlanConfig};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PortRef {
    pub dp: String,
    pub port: PortNo,
}

impl PortRef {
    pub fn new(dp: impl Into<String>, port: PortNo) -> Self {
        PortRef { dp: dp.into(), port }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Change<T> {
    Added { new: T },
    Removed { old: T },
    Changed { old: T, new: T },
}

/// One changed object, tagged with the datapath ports whose forwarding it
/// can alter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeltaEntry<K, T> {
    pub key: K,
    pub change: Change<T>,
    pub affects: Vec<PortRef>,
}

/// Datapath attributes other than its interfaces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatapathMeta {
    pub dp_id: u64,
    pub hardware: String,
}

impl From<&DatapathConfig> for DatapathMeta {
    fn from(dp: &DatapathConfig) -> Self {
        DatapathMeta {
            dp_id: dp.dp_id,
            hardware: dp.hardware.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConfigDelta {
    pub vlans: Vec<DeltaEntry<String, VlanConfig>>,
    pub datapaths: Vec<DeltaEntry<String, DatapathMeta>>,
    pub interfaces: Vec<DeltaEntry<PortRef, InterfaceConfig>>,
    pub acls: Vec<DeltaEntry<String, Vec<AclRule>>>,
}

impl ConfigDelta {
    pub fn is_empty(&self) -> bool {
        self.vlans.is_empty()
            && self.datapaths.is_empty()
            && self.interfaces.is_empty()
            && self.acls.is_empty()
    }

    pub fn len(&self) -> usize {
        self.vlans.len() + self.datapaths.len() + self.interfaces.len() + self.acls.len()
    }

    /// Union of every entry's affected ports.
    pub fn affected_ports(&self) -> BTreeSet<PortRef> {
        let mut out = BTreeSet::new();
        out.extend(self.vlans.iter().flat_map(|e| e.affects.iter().cloned()));
        out.extend(self.datapaths.iter().flat_map(|e| e.affects.iter().cloned()));
        out.extend(self.interfaces.iter().flat_map(|e| e.affects.iter().cloned()));
        out.extend(self.acls.iter().flat_map(|e| e.affects.iter().cloned()));
        out
    }

    pub fn affected_datapaths(&self) -> BTreeSet<String> {
        self.affected_ports().into_iter().map(|p| p.dp).collect()
    }

    /// Replay this delta over `base`.
    pub fn apply(&self, base: &FabricConfig) -> FabricConfig {
        let mut cfg = base.clone();
        apply_map(&mut cfg.vlans, &self.vlans);
        apply_map(&mut cfg.acls, &self.acls);
        for e in &self.datapaths {
            match &e.change {
                Change::Removed { .. } => {
                    cfg.dps.remove(&e.key);
                }
                Change::Added { new } => {
                    cfg.dps.insert(
                        e.key.clone(),
                        DatapathConfig {
                            dp_id: new.dp_id,
                            hardware: new.hardware.clone(),
                            interfaces: BTreeMap::new(),
                        },
                    );
                }
                Change::Changed { new, .. } => {
                    if let Some(dp) = cfg.dps.get_mut(&e.key) {
                        dp.dp_id = new.dp_id;
                        dp.hardware = new.hardware.clone();
                    }
                }
            }
        }
        for e in &self.interfaces {
            let Some(dp) = cfg.dps.get_mut(&e.key.dp) else {
                continue;
            };
            match &e.change {
                Change::Removed { .. } => {
                    dp.interfaces.remove(&e.key.port);
                }
                Change::Added { new } | Change::Changed { new, .. } => {
                    dp.interfaces.insert(e.key.port, new.clone());
                }
            }
        }
        cfg
    }
}

fn apply_map<T: Clone>(map: &mut BTreeMap<String, T>, entries: &[DeltaEntry<String, T>]) {
    for e in entries {
        match &e.change {
            Change::Removed { .. } => {
                map.remove(&e.key);
            }
            Change::Added { new } | Change::Changed { new, .. } => {
                map.insert(e.key.clone(), new.clone());
            }
        }
    }
}

fn changes<K: Ord + Clone, T: Clone + PartialEq>(
    old: &BTreeMap<K, T>,
    new: &BTreeMap<K, T>,
) -> Vec<(K, Change<T>)> {
    let keys: BTreeSet<&K> = old.keys().chain(new.keys()).collect();
    keys.into_iter()
        .filter_map(|k| {
            let change = match (old.get(k), new.get(k)) {
                (Some(o), Some(n)) if o == n => return None,
                (Some(o), Some(n)) => Change::Changed {
                    old: o.clone(),
                    new: n.clone(),
                },
                (Some(o), None) => Change::Removed { old: o.clone() },
                (None, Some(n)) => Change::Added { new: n.clone() },
                (None, None) => unreachable!(),
            };
            Some((k.clone(), change))
        })
        .collect()
}

fn port_refs(list: Vec<(String, PortNo)>) -> BTreeSet<PortRef> {
    list.into_iter().map(|(dp, port)| PortRef { dp, port }).collect()
}

fn all_ports(cfg: &FabricConfig, dp: &str) -> BTreeSet<PortRef> {
    cfg.dps
        .get(dp)
        .map(|d| d.interfaces.keys().map(|p| PortRef::new(dp, *p)).collect())
        .unwrap_or_default()
}

/// Per-object difference between two configurations.
pub fn diff_config(old: &FabricConfig, new: &FabricConfig) -> ConfigDelta {
    let mut delta = ConfigDelta::default();

    for (key, change) in changes(&old.vlans, &new.vlans) {
        let forwarding_relevant = match &change {
            Change::Changed { old: o, new: n } => o.vid != n.vid,
            _ => true,
        };
        let affects = if forwarding_relevant {
            let mut s = port_refs(old.vlan_users(&key));
            s.extend(port_refs(new.vlan_users(&key)));
            s.into_iter().collect()
        } else {
            Vec::new()
        };
        delta.vlans.push(DeltaEntry { key, change, affects });
    }

    let old_meta: BTreeMap<String, DatapathMeta> =
        old.dps.iter().map(|(k, v)| (k.clone(), v.into())).collect();
    let new_meta: BTreeMap<String, DatapathMeta> =
        new.dps.iter().map(|(k, v)| (k.clone(), v.into())).collect();
    for (key, change) in changes(&old_meta, &new_meta) {
        let relevant = match &change {
            Change::Changed { old: o, new: n } => o.dp_id != n.dp_id,
            _ => true,
        };
        let affects = if relevant {
            let mut s = all_ports(old, &key);
            s.extend(all_ports(new, &key));
            s.into_iter().collect()
        } else {
            Vec::new()
        };
        delta.datapaths.push(DeltaEntry { key, change, affects });
    }

    let flatten = |cfg: &FabricConfig| -> BTreeMap<PortRef, InterfaceConfig> {
        cfg.dps
            .iter()
            .flat_map(|(dp, d)| {
                d.interfaces
                    .iter()
                    .map(move |(p, i)| (PortRef::new(dp.clone(), *p), i.clone()))
            })
            .collect()
    };
    for (key, change) in changes(&flatten(old), &flatten(new)) {
        let affects = vec![key.clone()];
        delta.interfaces.push(DeltaEntry { key, change, affects });
    }

    for (key, change) in changes(&old.acls, &new.acls) {
        let mut s = port_refs(old.acl_users(&key));
        s.extend(port_refs(new.acl_users(&key)));
        delta.acls.push(DeltaEntry {
            key,
            change,
            affects: s.into_iter().collect(),
        });
    }

    delta
}
