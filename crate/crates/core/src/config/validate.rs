use std::collections::BTreeMap;

use super::error::{ValidationReport, Violation, ViolationKind};
use super::model::{FabricConfig, ETH_TYPE_IPV4, ETH_TYPE_IPV6};

/// Check every model invariant. Violations are data: the report is empty
/// exactly when the configuration is usable.
pub fn validate(cfg: &FabricConfig) -> ValidationReport {
    let mut v = Vec::new();
    let mut push = |kind, path: String, message: String| v.push(Violation { kind, path, message });

    if cfg.vlans.is_empty() {
        push(ViolationKind::NoVlans, "vlans".into(), "no VLANs declared".into());
    }
    if cfg.dps.is_empty() {
        push(ViolationKind::NoDatapaths, "dps".into(), "no datapaths declared".into());
    }

    let mut vids: BTreeMap<u16, &str> = BTreeMap::new();
    for (name, vlan) in &cfg.vlans {
        let path = format!("vlans.{name}");
        if !(1..=4094).contains(&vlan.vid) {
            push(
                ViolationKind::VidRange,
                path.clone(),
                format!("vid {} out of range 1..4094", vlan.vid),
            );
        }
        if vids.insert(vlan.vid, name).is_some() {
            push(ViolationKind::DuplicateVid, path, format!("duplicate vid {}", vlan.vid));
        }
    }

    let mut dp_ids: BTreeMap<u64, &str> = BTreeMap::new();
    for (dp_name, dp) in &cfg.dps {
        let path = format!("dps.{dp_name}");
        if dp.dp_id == 0 {
            push(ViolationKind::DpIdZero, path.clone(), "dp_id must be positive".into());
        } else if dp_ids.insert(dp.dp_id, dp_name).is_some() {
            push(
                ViolationKind::DuplicateDpId,
                path.clone(),
                format!("duplicate dp_id {:#x}", dp.dp_id),
            );
        }
        for (port, iface) in &dp.interfaces {
            let ipath = format!("{path}.interfaces.{port}");
            if *port == 0 {
                push(ViolationKind::PortZero, ipath.clone(), "port number must be positive".into());
            }
            if !cfg.vlans.contains_key(&iface.native_vlan) {
                push(
                    ViolationKind::UnresolvedVlan,
                    ipath.clone(),
                    format!("unresolved VLAN '{}' on {dp_name} port {port}", iface.native_vlan),
                );
            }
            for acl in &iface.acls_in {
                match cfg.acls.get(acl) {
                    None => push(
                        ViolationKind::UnresolvedAcl,
                        ipath.clone(),
                        format!("unresolved ACL '{acl}' on {dp_name} port {port}"),
                    ),
                    Some(rules) => {
                        for rule in rules {
                            for (target, kind, label) in [
                                (rule.actions.mirror, ViolationKind::MirrorPortMissing, "mirror"),
                                (rule.actions.redirect, ViolationKind::RedirectPortMissing, "redirect"),
                            ] {
                                if let Some(t) = target {
                                    if !dp.interfaces.contains_key(&t) {
                                        push(
                                            kind,
                                            format!("acls.{acl}"),
                                            format!("{label} port {t} not on datapath {dp_name}"),
                                        );
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    for (name, rules) in &cfg.acls {
        for (i, rule) in rules.iter().enumerate() {
            let path = format!("acls.{name}[{i}]");
            if let Some(proto) = rule.ip_proto {
                if !matches!(rule.dl_type, Some(ETH_TYPE_IPV4 | ETH_TYPE_IPV6)) {
                    push(
                        ViolationKind::IpProtoWithoutDlType,
                        path.clone(),
                        format!("ip_proto {proto} requires dl_type 0x800 or 0x86dd"),
                    );
                }
            }
            if rule.actions.redirect.is_some() && rule.actions.allow {
                push(
                    ViolationKind::ConflictingDisposition,
                    path,
                    "redirect cannot be combined with allow: true".into(),
                );
            }
        }
    }

    // an ACL shared by several ports of one datapath reports a missing port once
    let mut seen = std::collections::BTreeSet::new();
    v.retain(|x| seen.insert((x.path.clone(), x.message.clone())));
    ValidationReport { violations: v }
}
