//! Proptest strategies for valid fabric configurations.

use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;


pub fn text_strategy() -> impl Strategy<Value = String> {
    prop_oneof![
        Just(String::new()),
        "[a-zA-Z0-9 ._:-]{1,12}",
        Just("quote \" and \\ slash".to_string()),
        Just("true".to_string()),
        Just("0x10".to_string()),
        Just("ünïcødé # not a comment".to_string()),
    ]
}

pub fn name_strategy() -> impl Strategy<Value = String> {
    prop_oneof!["[a-z][a-z0-9-]{0,6}", Just("True".to_string()), Just("9lives".to_string())]
}

pub fn rule_strategy(max_port: u32) -> impl Strategy<Value = AclRule> {
    let matchers = prop_oneof![
        Just((None, None)),
        Just((Some(0x0806u16), None)),
        (prop_oneof![Just(0x0800u16), Just(0x86ddu16)], proptest::option::of(prop_oneof![
            3 => prop::sample::select(vec![1u8, 6, 17, 58]),
            1 => any::<u8>(),
        ]))
            .prop_map(|(t, p)| (Some(t), p)),
    ];
    (
        matchers,
        any::<bool>(),
        proptest::option::of(1..=max_port),
        proptest::option::of(1..=max_port),
    )
        .prop_map(|((dl_type, ip_proto), allow, mirror, redirect)| AclRule {
            dl_type,
            ip_proto,
            actions: AclActions {
                allow: allow && redirect.is_none(),
                mirror,
                redirect,
            },
        })
}

prop_compose! {
    pub fn config_strategy()(
        vlan_names in proptest::collection::btree_set(name_strategy(), 1..4),
        vid_seed in proptest::collection::btree_set(1u16..=4094, 4),
        dp_count in 1usize..3,
        min_ports in 1u32..5,
        acl_names in proptest::collection::btree_set(name_strategy(), 0..4),
    )(
        vlans in Just(vlan_names.clone()),
        vids in Just(vid_seed.clone()),
        descs in proptest::collection::vec(text_strategy(), 4),
        dps in proptest::collection::vec((1u64..u64::MAX, 0u32..3, text_strategy()), dp_count),
        acls in proptest::collection::vec(
            proptest::collection::vec(rule_strategy(min_ports), 0..4), acl_names.len()),
        acl_names in Just(acl_names),
        min_ports in Just(min_ports),
        wiring in proptest::collection::vec((any::<prop::sample::Index>(), any::<prop::sample::Index>(), any::<bool>(), text_strategy()), 8),
    ) -> FabricConfig {
        let mut cfg = FabricConfig::default();
        for ((name, vid), desc) in vlans.iter().zip(vids.iter()).zip(descs.iter()) {
            cfg.vlans.insert(name.clone(), VlanConfig { vid: *vid, description: desc.clone() });
        }
        let vlan_list: Vec<&String> = cfg.vlans.keys().collect();
        let acl_list: Vec<&String> = acl_names.iter().collect();
        let mut seen_ids = std::collections::BTreeSet::new();
        for (i, (dp_id, extra, hw)) in dps.iter().enumerate() {
            if !seen_ids.insert(*dp_id) { continue; }
            let mut interfaces = BTreeMap::new();
            for port in 1..=(min_ports + extra) {
                let (vi, ai, with_acl, name) = &wiring[(port as usize + i) % wiring.len()];
                let acls_in = if *with_acl && !acl_list.is_empty() {
                    let start = ai.index(acl_list.len());
                    acl_list[start..].iter().map(|s| s.to_string()).collect()
                } else {
                    Vec::new()
                };
                interfaces.insert(port, InterfaceConfig {
                    name: name.clone(),
                    description: format!("port {port}"),
                    native_vlan: vlan_list[vi.index(vlan_list.len())].clone(),
                    acls_in,
                });
            }
            cfg.dps.insert(format!("sw{i}"), DatapathConfig { dp_id: *dp_id, hardware: hw.clone(), interfaces });
        }
        for (name, rules) in acl_names.iter().zip(acls) {
            cfg.acls.insert(name.clone(), rules);
        }
        cfg
    }
}

