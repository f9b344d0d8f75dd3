use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use sdx_core::compile::*;
use sdx_core::config::arbitrary::config_strategy;
use sdx_core::config::*;
use sdx_core::ofp::{Action, FlowModCommand, Instruction, Match, MatchField, OFPP_CONTROLLER};

fn reference() -> FabricConfig {
    parse_config(include_str!("../../../fixtures/reference.yaml")).unwrap()
}

fn lines(t: &FlowTable, table: u8) -> Vec<String> {
    t.table(table).map(|e| e.to_string()).collect()
}

#[test]
fn reference_acl_table() {
    let t = compile_datapath(&reference(), "sw1").unwrap();
    assert_eq!(t.dp_id, 1);
    assert_eq!(
        lines(&t, TABLE_ACL),
        [
            "table=0 prio=19999 in_port=2,eth_type=0x0800,ip_proto=1 -> output:4",
            "table=0 prio=19998 in_port=2,eth_type=0x86dd,ip_proto=58 -> output:4",
            "table=0 prio=19997 in_port=2 -> goto:1",
            "table=0 prio=1 in_port=1 -> goto:1",
            "table=0 prio=1 in_port=3 -> goto:1",
            "table=0 prio=1 in_port=4 -> goto:1",
        ]
    );
    assert_eq!(
        lines(&t, TABLE_VLAN),
        (1..=4)
            .map(|p| format!("table=1 prio=1 in_port={p} -> write_metadata:0x64,goto:2"))
            .collect::<Vec<_>>()
    );
    assert_eq!(lines(&t, TABLE_L2), ["table=2 prio=0 * -> output:controller"]);
    assert_eq!(t.dump().lines().count(), t.len());
}

#[test]
fn no_acls_gives_one_catch_all_per_port() {
    let mut cfg = reference();
    cfg.dps.get_mut("sw1").unwrap().interfaces.get_mut(&2).unwrap().acls_in.clear();
    let t = compile_datapath(&cfg, "sw1").unwrap();
    let acl: Vec<&FlowEntry> = t.table(TABLE_ACL).collect();
    assert_eq!(acl.len(), 4);
    for (e, port) in acl.iter().zip(1..) {
        assert_eq!(e.priority, CATCH_ALL_PRIORITY);
        assert_eq!(e.matches, Match::new().in_port(port));
        assert_eq!(e.instructions, vec![Instruction::GotoTable(TABLE_VLAN)]);
    }
}

fn with_block_on_port_3(mut cfg: FabricConfig) -> FabricConfig {
    cfg.acls.insert(
        "block".into(),
        vec![AclRule {
            dl_type: Some(ETH_TYPE_IPV4),
            ip_proto: None,
            actions: AclActions::default(),
        }],
    );
    cfg.dps.get_mut("sw1").unwrap().interfaces.get_mut(&3).unwrap().acls_in = vec!["block".into()];
    cfg
}

#[test]
fn block_acl_is_an_empty_action_list() {
    let t = compile_datapath(&with_block_on_port_3(reference()), "sw1").unwrap();
    let e = t
        .entries
        .iter()
        .find(|e| e.matches == Match::new().in_port(3).eth_type(0x0800))
        .unwrap();
    assert_eq!(e.priority, 19999);
    assert!(e.instructions.is_empty());
    assert_eq!(e.to_string(), "table=0 prio=19999 in_port=3,eth_type=0x0800 -> drop");
    // the block rule does not cover everything, so the catch-all stays
    assert!(t.entries.iter().any(|e| e.priority == 1 && e.matches == Match::new().in_port(3)));
}

#[test]
fn dispositions() {
    let rule = |allow, mirror, redirect| AclRule {
        dl_type: None,
        ip_proto: None,
        actions: AclActions { allow, mirror, redirect },
    };
    let out = |p| Instruction::ApplyActions(vec![Action::output(p)]);
    let goto = Instruction::GotoTable(TABLE_VLAN);
    assert_eq!(rule_instructions(&rule(false, Some(4), None)), vec![out(4)]);
    assert_eq!(rule_instructions(&rule(false, None, None)), vec![]);
    assert_eq!(rule_instructions(&rule(false, None, Some(3))), vec![out(3)]);
    assert_eq!(rule_instructions(&rule(true, Some(4), None)), vec![out(4), goto.clone()]);
    assert_eq!(rule_instructions(&rule(true, None, None)), vec![goto]);
}

#[test]
fn unknown_datapath_and_absent_ports() {
    let cfg = reference();
    assert_eq!(
        compile_datapath(&cfg, "sw9"),
        Err(CompileError::UnknownDatapath("sw9".into()))
    );
    let mut bad = cfg.clone();
    bad.acls.get_mut("mirror").unwrap()[0].actions.mirror = Some(9);
    assert!(matches!(
        compile_datapath(&bad, "sw1"),
        Err(CompileError::PortAbsent { target: 9, .. })
    ));
}

#[test]
fn compile_is_deterministic_and_fingerprints_the_slice() {
    let cfg = reference();
    let a = compile_datapath(&cfg, "sw1").unwrap();
    let b = compile_datapath(&cfg.clone(), "sw1").unwrap();
    assert_eq!(a, b);
    assert_eq!(a.dump(), b.dump());

    // an unrelated datapath leaves sw1's fingerprint alone
    let mut other = cfg.clone();
    other.dps.insert(
        "sw2".into(),
        DatapathConfig {
            dp_id: 2,
            hardware: String::new(),
            interfaces: BTreeMap::from([(1, cfg.dps["sw1"].interfaces[&1].clone())]),
        },
    );
    assert_eq!(compile_datapath(&other, "sw1").unwrap().fingerprint, a.fingerprint);
    let changed = with_block_on_port_3(cfg);
    assert_ne!(compile_datapath(&changed, "sw1").unwrap().fingerprint, a.fingerprint);
}

// ---------------------------------------------------------------------------
// First-match fidelity and cookie provenance
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Packet {
    in_port: u32,
    eth_type: u16,
    ip_proto: Option<u8>,
}

fn universe(ports: impl Iterator<Item = u32> + Clone) -> Vec<Packet> {
    let mut out = Vec::new();
    for in_port in ports {
        for eth_type in [0x0800u16, 0x86dd, 0x0806] {
            let protos: Vec<Option<u8>> = if eth_type == 0x0806 {
                vec![None]
            } else {
                [1, 6, 17, 58].into_iter().map(Some).collect()
            };
            for ip_proto in protos {
                out.push(Packet { in_port, eth_type, ip_proto });
            }
        }
    }
    out
}

/// Highest-priority table-0 entry whose every field equals the packet's.
fn lookup<'t>(t: &'t FlowTable, p: &Packet) -> Option<&'t FlowEntry> {
    t.table(TABLE_ACL)
        .filter(|e| {
            e.matches.fields().iter().all(|f| match f {
                MatchField::InPort(x) => *x == p.in_port,
                MatchField::EthType(x) => *x == p.eth_type,
                MatchField::IpProto(x) => Some(*x) == p.ip_proto,
                _ => false,
            })
        })
        .max_by_key(|e| e.priority)
}

/// The first rule, in YAML order across the port's ACL list, covering p.
fn first_rule<'c>(cfg: &'c FabricConfig, dp: &str, p: &Packet) -> Option<(&'c str, usize, &'c AclRule)> {
    let iface = cfg.dps[dp].interfaces.get(&p.in_port)?;
    for acl in &iface.acls_in {
        for (i, rule) in cfg.acls[acl].iter().enumerate() {
            if rule.covers(p.eth_type, p.ip_proto) {
                return Some((acl, i, rule));
            }
        }
    }
    None
}

/// (output ports, continues to forwarding) as the entry's instructions say.
fn entry_disposition(e: &FlowEntry) -> (BTreeSet<u32>, bool) {
    let mut outs = BTreeSet::new();
    let mut cont = false;
    for i in &e.instructions {
        match i {
            Instruction::ApplyActions(acts) => {
                for a in acts {
                    if let Action::Output { port, .. } = a {
                        outs.insert(*port);
                    }
                }
            }
            Instruction::GotoTable(t) => cont = *t == TABLE_VLAN,
            _ => panic!("unexpected instruction {i}"),
        }
    }
    (outs, cont)
}

fn check_fidelity(cfg: &FabricConfig) -> Result<usize, TestCaseError> {
    let mut checked = 0;
    for (dp, dpc) in &cfg.dps {
        let t = compile_datapath(cfg, dp).unwrap();
        let hashes: BTreeMap<u32, &str> = cfg.acls.keys().map(|a| (acl_hash(a), a.as_str())).collect();
        let max_port = dpc.interfaces.keys().max().copied().unwrap_or(0);
        for p in universe(1..=max_port.max(4)) {
            let hit = lookup(&t, &p);
            if !dpc.interfaces.contains_key(&p.in_port) {
                prop_assert!(hit.is_none());
                continue;
            }
            let hit = hit.expect("every configured port has a table-0 entry");
            match first_rule(cfg, dp, &p) {
                Some((acl, index, rule)) => {
                    let tag = CookieTag::decode(hit.cookie);
                    prop_assert!(
                        matches!(tag, Some(CookieTag::AclRule { acl_hash: h, index: i })
                            if hashes.get(&h) == Some(&acl) && i as usize == index),
                        "{p:?} hit {hit} ({tag:?}), expected {acl}[{index}]"
                    );
                    let want: BTreeSet<u32> = rule.actions.mirror.iter().chain(&rule.actions.redirect).copied().collect();
                    let cont = rule.actions.allow && rule.actions.redirect.is_none();
                    prop_assert_eq!(entry_disposition(hit), (want, cont));
                }
                None => {
                    prop_assert_eq!(CookieTag::decode(hit.cookie), Some(CookieTag::CatchAll { port: p.in_port }));
                    prop_assert_eq!(entry_disposition(hit), (BTreeSet::new(), true));
                }
            }
            checked += 1;
        }
    }
    Ok(checked)
}

#[test]
fn reference_first_match_fidelity() {
    let cfg = with_block_on_port_3(reference());
    assert_eq!(check_fidelity(&cfg).unwrap(), 4 * 9);
}

fn check_structure(cfg: &FabricConfig) -> Result<(), TestCaseError> {
    for (dp, dpc) in &cfg.dps {
        let t = compile_datapath(cfg, dp).unwrap();
        let mut keys = BTreeSet::new();
        for e in &t.entries {
            prop_assert!(keys.insert((e.table_id, e.priority, e.matches.clone())), "duplicate {e}");
            if let Some(p) = e.matches.get_in_port() {
                prop_assert!(dpc.interfaces.contains_key(&p));
            }
            for i in &e.instructions {
                if let Instruction::ApplyActions(acts) = i {
                    for a in acts {
                        if let Action::Output { port, .. } = a {
                            prop_assert!(dpc.interfaces.contains_key(port) || *port == OFPP_CONTROLLER);
                        }
                    }
                }
            }
            if e.table_id == TABLE_ACL {
                prop_assert!(CookieTag::decode(e.cookie).is_some());
            }
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn first_match_fidelity(cfg in config_strategy()) {
        check_fidelity(&cfg)?;
    }

    #[test]
    fn entries_are_unique_and_reference_real_ports(cfg in config_strategy()) {
        check_structure(&cfg)?;
    }
}

// ---------------------------------------------------------------------------
// Update plans
// ---------------------------------------------------------------------------

/// Reference FlowMod semantics over a keyed table: ADD overwrites by strict
/// key, DELETE_STRICT removes by strict key.
fn apply_plan(t: &FlowTable, plan: &FlowUpdatePlan) -> FlowTable {
    let mut map: BTreeMap<(u8, u16, Match), FlowEntry> = t
        .entries
        .iter()
        .map(|e| ((e.table_id, e.priority, e.matches.clone()), e.clone()))
        .collect();
    for fm in plan.flow_mods() {
        let key = (fm.table_id, fm.priority, fm.matches.clone());
        match fm.command {
            FlowModCommand::Add => {
                map.insert(key, FlowEntry::from_flow_mod(fm));
            }
            FlowModCommand::DeleteStrict => {
                map.remove(&key);
            }
            other => panic!("plan used {other:?}"),
        }
    }
    FlowTable::from_entries(t.dp_id, map.into_values().collect(), String::new())
}

#[test]
fn identical_tables_plan_nothing() {
    let t = compile_datapath(&reference(), "sw1").unwrap();
    let plan = plan_update(&t, &t).unwrap();
    assert!(plan.is_empty());
    assert_eq!(plan.barriers(), 0);
}

#[test]
fn adding_a_block_rule_is_one_add_and_a_barrier() {
    let a = compile_datapath(&reference(), "sw1").unwrap();
    let b = compile_datapath(&with_block_on_port_3(reference()), "sw1").unwrap();
    let plan = plan_update(&a, &b).unwrap();
    assert_eq!(plan.steps.len(), 2);
    let fm = plan.flow_mods().next().unwrap();
    assert_eq!(fm.command, FlowModCommand::Add);
    assert_eq!(fm.matches, Match::new().in_port(3).eth_type(0x0800));
    assert!(matches!(plan.steps[1], PlanStep::Barrier));
    assert_eq!((plan.added, plan.removed, plan.modified), (1, 0, 0));
    assert!(apply_plan(&a, &plan).same_entries(&b));
}

#[test]
fn priority_change_is_delete_strict_then_add() {
    let base = with_block_on_port_3(reference());
    let a = compile_datapath(&base, "sw1").unwrap();
    // a second ACL ahead of the block rule pushes it one priority down
    let mut moved = base.clone();
    moved.acls.insert(
        "icmp-only".into(),
        vec![AclRule {
            dl_type: Some(ETH_TYPE_IPV6),
            ip_proto: Some(58),
            actions: AclActions { allow: true, ..Default::default() },
        }],
    );
    moved.dps.get_mut("sw1").unwrap().interfaces.get_mut(&3).unwrap().acls_in =
        vec!["icmp-only".into(), "block".into()];
    let b = compile_datapath(&moved, "sw1").unwrap();
    let plan = plan_update(&a, &b).unwrap();
    let cmds: Vec<FlowModCommand> = plan.flow_mods().map(|f| f.command).collect();
    assert_eq!(
        cmds,
        [FlowModCommand::DeleteStrict, FlowModCommand::Add, FlowModCommand::Add]
    );
    assert_eq!((plan.added, plan.removed), (2, 1));
    assert!(apply_plan(&a, &plan).same_entries(&b));

    // a pure priority move of a single rule
    let mut t2 = a.clone();
    let i = t2.entries.iter().position(|e| e.priority == 19999 && e.matches.get_in_port() == Some(3)).unwrap();
    t2.entries[i].priority = 19000;
    let t2 = FlowTable::from_entries(t2.dp_id, t2.entries, String::new());
    let plan = plan_update(&a, &t2).unwrap();
    let cmds: Vec<FlowModCommand> = plan.flow_mods().map(|f| f.command).collect();
    assert_eq!(cmds, [FlowModCommand::DeleteStrict, FlowModCommand::Add]);
    assert_eq!(plan.barriers(), 1);
}

#[test]
fn plan_requires_same_datapath() {
    let a = compile_datapath(&reference(), "sw1").unwrap();
    let mut b = a.clone();
    b.dp_id = 2;
    assert_eq!(
        plan_update(&a, &b),
        Err(CompileError::DpIdMismatch { current: 1, target: 2 })
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// Any two compiled tables for the same dp_id: the plan converts one
    /// into the other and touches only differing entries.
    #[test]
    fn plans_are_sound(a in config_strategy(), b in config_strategy()) {
        let ta = compile_all(&a).unwrap();
        let tb = compile_all(&b).unwrap();
        for (name, t1) in &ta {
            for t2 in tb.values() {
                let mut t2 = t2.clone();
                t2.dp_id = t1.dp_id;
                let plan = plan_update(t1, &t2).unwrap();
                let applied = apply_plan(t1, &plan);
                prop_assert!(applied.same_entries(&t2), "{name}: plan did not converge");
                let differing = t1.entries.iter().filter(|e| !t2.entries.contains(e)).count()
                    + t2.entries.iter().filter(|e| !t1.entries.contains(e)).count();
                prop_assert!(plan.flow_mods().count() <= differing);
                prop_assert!(plan.flow_mods().count() >= differing / 2);
                prop_assert!(plan_update(&t2, &t2).unwrap().is_empty());
            }
        }
    }
}

// ---------------------------------------------------------------------------
// ACL snippets
// ---------------------------------------------------------------------------

/// The `mirror:` entry of the fixture's `acls:` section, dedented.
fn fixture_acl_block(name: &str) -> String {
    let text = include_str!("../../../fixtures/reference.yaml");
    let acls = &text[text.find("\nacls:\n").unwrap() + 7..];
    let mut out = String::new();
    let mut inside = false;
    for line in acls.lines() {
        if !line.starts_with("    ") {
            inside = line == format!("  {name}:");
        }
        if inside {
            out.push_str(&line[2..]);
            out.push('\n');
        }
    }
    out
}

#[test]
fn mirror_snippet_reproduces_the_fixture_block() {
    let rules = acl_rules(
        AclKind::Mirror { to: 4, allow: false },
        &[RuleMatch::IPV4_ICMP, RuleMatch::IPV6_ICMP],
    );
    let text = render_acl("mirror", &rules);
    assert_eq!(text, fixture_acl_block("mirror"));
    assert_eq!(reference().acls["mirror"], rules);
}

#[test]
fn allow_all_snippet_reproduces_the_fixture_block() {
    let rules = acl_rules(AclKind::AllowAll, &[]);
    assert_eq!(render_acl("allow-all", &rules), fixture_acl_block("allow-all"));
}

#[test]
fn snippets_parse_back() {
    for kind in [AclKind::Block, AclKind::Redirect { to: 3 }, AclKind::Mirror { to: 4, allow: true }] {
        let rules = acl_rules(kind, &[RuleMatch { dl_type: Some(0x0806), ip_proto: None }]);
        // acls is the last section, so an indented snippet can be appended
        let doc = format!(
            "{}{}",
            emit_config(&reference()).unwrap(),
            render_acl("generated", &rules)
                .lines()
                .map(|l| format!("  {l}\n"))
                .collect::<String>()
        );
        let parsed = parse_config(&doc).unwrap();
        assert_eq!(parsed.acls["generated"], rules);
    }
}
