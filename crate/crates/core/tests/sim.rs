use std::collections::BTreeMap;

use proptest::prelude::*;
use sdx_core::compile::compile_datapath;
use sdx_core::config::arbitrary::config_strategy;
use sdx_core::config::*;
use sdx_core::eth::{FrameHeader, BROADCAST};
use sdx_core::ofp::MacAddr;
use sdx_core::sim::*;

const REFERENCE: &str = include_str!("../../../fixtures/reference.yaml");
const TWO_NODE: &str = include_str!("../../../fixtures/two-node.yaml");
const FOUR_NODE: &str = include_str!("../../../fixtures/four-node.yaml");

fn reference() -> FabricConfig {
    parse_config(REFERENCE).unwrap()
}

fn flow(name: &str, src: &str, dst: &str, pps: u64, bytes: u32, eth_type: u16, ip_proto: Option<u8>) -> FlowSpec {
    FlowSpec {
        name: name.into(),
        src: src.into(),
        dst: dst.into(),
        pps,
        bytes,
        eth_type,
        ip_proto,
        start_ms: 0,
        stop_ms: None,
    }
}

/// Load a topology, connect it under `cfg` and let hosts announce.
fn bring_up(topology: &str, cfg: FabricConfig, flows: Vec<FlowSpec>) -> (SimFabric, LocalController) {
    let mut spec = parse_topology(topology).unwrap();
    spec.flows = flows;
    let mut fabric = SimFabric::load(spec).unwrap();
    let mut ctl = LocalController::new(cfg);
    ctl.connect(&fabric).unwrap();
    fabric.announce_hosts(&mut ctl);
    (fabric, ctl)
}

#[test]
fn fixtures_load() {
    let two = parse_topology(TWO_NODE).unwrap();
    assert_eq!(two.switches.len(), 1);
    assert_eq!(two.hosts.iter().map(|h| h.port).collect::<Vec<_>>(), [1, 2]);
    assert_eq!(two.flows[0].stop_ms, Some(60_000));
    let four = parse_topology(FOUR_NODE).unwrap();
    assert_eq!(four.hosts.iter().map(|h| h.port).collect::<Vec<_>>(), [1, 2, 3, 4]);
    assert_eq!(four.flows[2].start_ms, 5000);
}

#[test]
fn invalid_topologies_are_rejected() {
    let bad_port = TWO_NODE.replace("port: 2,", "port: 7,");
    let e = parse_topology(&bad_port).unwrap_err().to_string();
    assert!(e.contains("port 7") && e.contains("ports 1-4"), "{e}");

    let dup = format!("{}  sw2: {{dp_id: 0x1, ports: 2}}\n", TWO_NODE.split("hosts:").next().unwrap());
    assert!(parse_topology(&dup).unwrap_err().to_string().contains("duplicate dp_id"));

    let mut spec = parse_topology(TWO_NODE).unwrap();
    spec.flows[0].bytes = 63;
    assert!(SimFabric::load(spec.clone()).is_err());
    spec.flows[0].bytes = 9001;
    assert!(SimFabric::load(spec.clone()).is_err());
    spec.flows[0].bytes = 64;
    spec.flows[0].pps = 0;
    assert!(SimFabric::load(spec).is_err());

    assert!(parse_topology("switches:\n  sw1: {dp_id: 1, ports: 2, colour: red}\n").is_err());
    assert!(parse_topology("hosts: {}\n").is_err());
}

#[test]
fn connected_switch_holds_the_compiled_table() {
    let (fabric, _) = bring_up(TWO_NODE, reference(), vec![]);
    let table = fabric.read_flow_table(1).unwrap();
    assert!(table.compiled_only().same_entries(&compile_datapath(&reference(), "sw1").unwrap()));
    // announcements are broadcasts, so nothing was learned into the table
    assert_eq!(table.len(), compile_datapath(&reference(), "sw1").unwrap().len());
}

#[test]
fn unconnected_switch_has_no_session() {
    let fabric = SimFabric::load(parse_topology(TWO_NODE).unwrap()).unwrap();
    assert_eq!(fabric.read_flow_table(1), Err(SimError::NoSession));
    assert_eq!(fabric.read_flow_table(0x99), Err(SimError::UnknownDatapath(0x99)));
}

#[test]
fn one_second_at_line_rate_without_acls() {
    let mut cfg = reference();
    cfg.dps.get_mut("sw1").unwrap().interfaces.get_mut(&2).unwrap().acls_in.clear();
    let (mut fabric, mut ctl) = bring_up(
        TWO_NODE,
        cfg,
        vec![flow("bulk", "AS2", "AS1", 100_000, 1250, 0x0800, Some(6))],
    );
    let before_rx = fabric.switch("sw1").unwrap().lock().unwrap().counters(2).unwrap().rx_bytes;
    let before = fabric.host_ledger("AS1").unwrap().received;
    fabric.advance(1000, &mut ctl);
    let l = fabric.flow_ledger("bulk").unwrap();
    assert_eq!((l.sent, l.delivered, l.dropped, l.diverted), (100_000, 100_000, 0, 0));
    assert_eq!(fabric.host_ledger("AS1").unwrap().received - before, 100_000);
    let rx = fabric.switch("sw1").unwrap().lock().unwrap().counters(2).unwrap().rx_bytes;
    assert_eq!(rx - before_rx, 125_000_000);
    // one PacketIn installed the unicast flow, the rest hit it
    assert_eq!(l.punted, 1);
    assert!(l.conserved());
}

fn acl_suite(topology: &str) {
    let flows = vec![
        flow("icmp4", "AS2", "AS1", 1000, 100, 0x0800, Some(1)),
        flow("icmp6", "AS2", "AS1", 1000, 100, 0x86dd, Some(58)),
        flow("tcp", "AS2", "AS1", 5000, 1250, 0x0800, Some(6)),
    ];
    let (mut fabric, mut ctl) = bring_up(topology, reference(), flows);
    fabric.advance(60_000, &mut ctl);
    for name in ["icmp4", "icmp6"] {
        let l = fabric.flow_ledger(name).unwrap();
        assert_eq!(l.sent, 60_000);
        assert_eq!(l.egress_on(4), l.sent, "{name} mirrored");
        assert_eq!(l.delivered, 0, "{name} delivered");
        assert_eq!(l.egress_on(1), 0);
        assert!(l.conserved());
    }
    let l = fabric.flow_ledger("tcp").unwrap();
    assert_eq!(l.sent, 300_000);
    assert_eq!(l.delivered, l.sent);
    assert_eq!(l.egress_on(4), 0);
    assert_eq!(l.copies, 0);
    assert!(l.conserved());
}

#[test]
fn reference_acls_on_two_nodes() {
    acl_suite(TWO_NODE);
}

#[test]
fn reference_acls_on_four_nodes() {
    acl_suite(FOUR_NODE);
}

#[test]
fn block_and_redirect() {
    let mut cfg = reference();
    cfg.acls.insert(
        "block".into(),
        acl_rules(AclKind::Block, &[RuleMatch { dl_type: Some(0x0800), ip_proto: Some(6) }]),
    );
    cfg.acls.insert(
        "redirect".into(),
        acl_rules(AclKind::Redirect { to: 4 }, &[RuleMatch { dl_type: Some(0x0800), ip_proto: Some(17) }]),
    );
    cfg.dps.get_mut("sw1").unwrap().interfaces.get_mut(&3).unwrap().acls_in = vec!["block".into(), "redirect".into()];
    let flows = vec![
        flow("blocked", "AS3", "AS1", 1000, 500, 0x0800, Some(6)),
        flow("redirected", "AS3", "AS1", 1000, 500, 0x0800, Some(17)),
        flow("other", "AS3", "AS1", 1000, 500, 0x86dd, Some(6)),
    ];
    let (mut fabric, mut ctl) = bring_up(FOUR_NODE, cfg, flows);
    fabric.advance(10_000, &mut ctl);
    let b = fabric.flow_ledger("blocked").unwrap();
    assert_eq!((b.sent, b.dropped, b.egress.len()), (10_000, 10_000, 0));
    let r = fabric.flow_ledger("redirected").unwrap();
    assert_eq!(r.diverted, r.sent);
    assert_eq!(r.egress, BTreeMap::from([(4, 10_000)]));
    let o = fabric.flow_ledger("other").unwrap();
    assert_eq!(o.delivered, o.sent);
    assert_eq!(o.egress, BTreeMap::from([(1, 10_000)]));
    // the redirect target's host saw exactly the redirected frames
    let h4 = fabric.host_ledger("AS4").unwrap();
    assert_eq!(h4.received_by.get("0x0800/17"), Some(&10_000));
    for l in fabric.flow_ledgers() {
        assert!(l.conserved(), "{l:?}");
    }
}

#[test]
fn runs_are_deterministic() {
    let run = || {
        let spec = parse_topology(FOUR_NODE).unwrap();
        let flows = spec.flows.clone();
        let (mut fabric, mut ctl) = bring_up(FOUR_NODE, reference(), flows);
        fabric.advance(7_350, &mut ctl);
        serde_json::to_string(&fabric.report()).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn host_totals_match_flow_egress() {
    let spec = parse_topology(FOUR_NODE).unwrap();
    let flows = spec.flows.clone();
    let (mut fabric, mut ctl) = bring_up(FOUR_NODE, reference(), flows);
    let announced: u64 = ["AS1", "AS2", "AS3", "AS4"]
        .iter()
        .map(|h| fabric.host_ledger(h).unwrap().received)
        .sum();
    fabric.advance(20_000, &mut ctl);
    let flow_egress: u64 = fabric.flow_ledgers().iter().flat_map(|l| l.egress.values()).sum();
    let received: u64 = ["AS1", "AS2", "AS3", "AS4"]
        .iter()
        .map(|h| fabric.host_ledger(h).unwrap().received)
        .sum();
    assert_eq!(received - announced, flow_egress);
    let sent: u64 = fabric.flow_ledgers().iter().map(|l| l.sent).sum();
    let host_sent: u64 = ["AS1", "AS2", "AS3", "AS4"]
        .iter()
        .map(|h| fabric.host_ledger(h).unwrap().sent)
        .sum();
    assert_eq!(host_sent, sent + 4);
}

#[test]
fn learned_flows_idle_out() {
    let mut f = flow("burst", "AS2", "AS1", 10, 100, 0x0800, Some(6));
    f.stop_ms = Some(1000);
    let (mut fabric, mut ctl) = bring_up(TWO_NODE, reference(), vec![f]);
    fabric.advance(1000, &mut ctl);
    let n = |fabric: &SimFabric| fabric.read_flow_table(1).unwrap().len();
    let compiled = compile_datapath(&reference(), "sw1").unwrap().len();
    assert_eq!(n(&fabric), compiled + 1);
    fabric.advance(299_000, &mut ctl);
    assert_eq!(n(&fabric), compiled + 1);
    fabric.advance(1000, &mut ctl);
    assert_eq!(n(&fabric), compiled);
}

#[test]
fn apply_converges_and_unchanged_config_sends_nothing() {
    let (fabric, mut ctl) = bring_up(FOUR_NODE, reference(), vec![]);
    let mut new = reference();
    new.acls.insert("block".into(), acl_rules(AclKind::Block, &[RuleMatch { dl_type: Some(0x0800), ip_proto: None }]));
    new.dps.get_mut("sw1").unwrap().interfaces.get_mut(&3).unwrap().acls_in = vec!["block".into()];
    let plans = ctl.apply(&fabric, new.clone()).unwrap();
    assert_eq!(plans["sw1"].counts().added, 1);
    assert!(fabric.read_flow_table(1).unwrap().same_entries(&compile_datapath(&new, "sw1").unwrap()));

    fabric.switch("sw1").unwrap().lock().unwrap().reset_capture();
    let plans = ctl.apply(&fabric, new).unwrap();
    assert!(plans["sw1"].is_empty());
    assert_eq!(fabric.switch("sw1").unwrap().lock().unwrap().flow_mods_received(), 0);
}

// ---------------------------------------------------------------------------
// Pipeline equivalence
// ---------------------------------------------------------------------------

fn host_mac(dp: usize, port: u32) -> MacAddr {
    [0x02, 0, 0, 0, dp as u8, port as u8]
}

/// Expected egress ports of one frame: the first covering ACL rule's
/// mirror/redirect outputs, then, if the frame continues, plain learning
/// switch behaviour over the controller's current MAC table. OpenFlow never
/// sends a frame back out of its ingress port.
fn oracle(cfg: &FabricConfig, dp: &str, l2: &sdx_core::learning::L2Table, in_port: u32, h: &FrameHeader) -> Vec<u32> {
    let dpc = &cfg.dps[dp];
    let iface = &dpc.interfaces[&in_port];
    let mut outs = Vec::new();
    let mut cont = true;
    'acl: for acl in &iface.acls_in {
        for rule in &cfg.acls[acl] {
            if rule.covers(h.eth_type, h.ip_proto) {
                outs.extend(rule.actions.mirror);
                outs.extend(rule.actions.redirect);
                cont = rule.actions.allow && rule.actions.redirect.is_none();
                break 'acl;
            }
        }
    }
    if cont {
        let vid = cfg.vlans[&iface.native_vlan].vid;
        let known = (h.dst != BROADCAST).then(|| l2.lookup(dpc.dp_id, vid, &h.dst, 0)).flatten();
        match known {
            Some(p) => outs.push(p),
            None => outs.extend(cfg.vlan_peers(dp, in_port)),
        }
    }
    outs.retain(|p| *p != in_port);
    outs.sort();
    outs
}

fn check_equivalence(cfg: &FabricConfig) -> Result<u64, TestCaseError> {
    let mut spec = TopologySpec {
        tick_ms: 100,
        switches: vec![],
        hosts: vec![],
        flows: vec![],
    };
    for (i, (name, dpc)) in cfg.dps.iter().enumerate() {
        let ports = *dpc.interfaces.keys().max().unwrap();
        spec.switches.push(SwitchSpec { name: name.clone(), dp_id: dpc.dp_id, ports });
        for port in dpc.interfaces.keys() {
            spec.hosts.push(HostSpec {
                name: format!("{name}-{port}"),
                switch: name.clone(),
                port: *port,
                mac: host_mac(i, *port),
                vlan: None,
            });
        }
    }
    let mut fabric = SimFabric::load(spec.clone()).unwrap();
    let mut ctl = LocalController::new(cfg.clone());
    ctl.connect(&fabric).unwrap();
    fabric.announce_hosts(&mut ctl);

    let kinds: Vec<(u16, Option<u8>)> = [(0x0806, None)]
        .into_iter()
        .chain([0x0800u16, 0x86dd].into_iter().flat_map(|t| [1u8, 6, 17, 58].map(|p| (t, Some(p)))))
        .collect();
    let mut frames = 0;
    for src in &spec.hosts {
        let dp_index = cfg.dps.keys().position(|d| *d == src.switch).unwrap();
        let dsts: Vec<MacAddr> = spec
            .hosts
            .iter()
            .filter(|h| h.switch == src.switch && h.name != src.name)
            .map(|h| h.mac)
            .chain([BROADCAST, host_mac(dp_index, 200)])
            .collect();
        for dst in dsts {
            for &(eth_type, ip_proto) in &kinds {
                let hdr = FrameHeader { dst, src: src.mac, eth_type, ip_proto };
                let want = oracle(cfg, &src.switch, &ctl.l2, src.port, &hdr);
                let got = fabric.inject(&src.name, hdr, 100, 1, &mut ctl).unwrap();
                prop_assert_eq!(got.len(), 1);
                let mut outs = got[0].0.outputs.clone();
                outs.sort();
                prop_assert_eq!(&outs, &want, "{} -> {:?} {:#x}/{:?}", src.name, dst, eth_type, ip_proto);
                frames += 1;
            }
        }
    }
    Ok(frames)
}

#[test]
fn reference_pipeline_equivalence() {
    assert!(check_equivalence(&reference()).unwrap() > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pipeline_matches_brute_force(cfg in config_strategy()) {
        check_equivalence(&cfg)?;
    }
}
