use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use sdx_core::compile::{compile_datapath, plan_update};
use sdx_core::config::*;
use sdx_core::ofp::*;
use sdx_core::sim::{parse_topology, SimSwitch};
use sdx_runtime::harness::{runtime, Harness};
use sdx_runtime::{ApplyError, Service, ServiceSettings, SessionState, SimAgent, StartError, UserDb};

const REFERENCE: &str = include_str!("../../../fixtures/reference.yaml");
const TWO_NODE: &str = include_str!("../../../fixtures/two-node.yaml");

fn reference() -> FabricConfig {
    parse_config(REFERENCE).unwrap()
}

fn settings() -> ServiceSettings {
    let mut s = ServiceSettings::loopback(UserDb::default());
    s.run_poller = false;
    s
}

fn up(cfg: FabricConfig, topology: &str) -> Harness {
    Harness::start(cfg, parse_topology(topology).unwrap(), settings()).unwrap()
}

fn wait_until(timeout: Duration, mut f: impl FnMut() -> bool) -> bool {
    let deadline = Instant::now() + timeout;
    while Instant::now() < deadline {
        if f() {
            return true;
        }
        thread::sleep(Duration::from_millis(20));
    }
    f()
}

/// Two switches: sw1 as in the fixture, sw2 a copy on dp 0x2.
fn two_dp_config() -> FabricConfig {
    let mut cfg = reference();
    let mut sw2 = cfg.dps["sw1"].clone();
    sw2.dp_id = 2;
    cfg.dps.insert("sw2".into(), sw2);
    cfg
}

fn block_udp(mut cfg: FabricConfig) -> FabricConfig {
    cfg.acls.insert(
        "block".into(),
        acl_rules(AclKind::Block, &[RuleMatch { dl_type: Some(0x0800), ip_proto: Some(17) }]),
    );
    for dp in cfg.dps.values_mut() {
        dp.interfaces.get_mut(&1).unwrap().acls_in = vec!["block".into(), "allow-all".into()];
    }
    cfg
}

/// A hand-driven OpenFlow peer.
struct RawPeer {
    stream: TcpStream,
    buf: FrameBuffer,
}

impl RawPeer {
    fn connect(addr: std::net::SocketAddr) -> RawPeer {
        let stream = TcpStream::connect(addr).unwrap();
        stream.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
        RawPeer {
            stream,
            buf: FrameBuffer::new(),
        }
    }

    fn send_raw(&mut self, bytes: &[u8]) {
        self.stream.write_all(bytes).unwrap();
    }

    fn send(&mut self, xid: u32, body: OfBody) {
        let bytes = OfMessage::new(xid, body).encode().unwrap();
        self.send_raw(&bytes);
    }

    /// Next frame, or None once the controller closed the connection.
    fn recv(&mut self) -> Option<OfMessage> {
        loop {
            if let Some(frame) = self.buf.next_frame().unwrap() {
                return Some(OfMessage::decode(&frame).unwrap());
            }
            let mut chunk = [0u8; 4096];
            match self.stream.read(&mut chunk) {
                Ok(0) | Err(_) => return None,
                Ok(n) => self.buf.extend(&chunk[..n]),
            }
        }
    }

    fn handshake(&mut self, dp_id: u64) {
        self.send(1, OfBody::Hello(Hello::v13_only()));
        assert!(matches!(self.recv().unwrap().body, OfBody::Hello(_)));
        let req = self.recv().unwrap();
        assert_eq!(req.body, OfBody::FeaturesRequest);
        self.send(
            req.xid,
            OfBody::FeaturesReply(FeaturesReply {
                datapath_id: dp_id,
                n_buffers: 0,
                n_tables: 3,
                auxiliary_id: 0,
                capabilities: 0,
                reserved: 0,
            }),
        );
    }
}

#[test]
fn connected_switch_reaches_steady_with_the_compiled_table() {
    let h = up(reference(), TWO_NODE);
    let expected = compile_datapath(&reference(), "sw1").unwrap();
    let session = h.service.controller.session(1).unwrap();
    assert_eq!(session.state(), SessionState::Steady);
    assert_eq!(session.dp_name(), "sw1");
    assert_eq!(session.fingerprint(), Some(expected.fingerprint.clone()));
    let on_switch = h.fabric.read_flow_table(1).unwrap();
    assert!(on_switch.compiled_only().same_entries(&expected));
    // the sync wipes and pushes every entry
    let sw = h.fabric.switch("sw1").unwrap().lock().unwrap();
    assert_eq!(sw.flow_mods_received(), expected.len() as u64 + 1);
}

#[test]
fn unknown_datapath_is_rejected_without_flows() {
    let h = up(reference(), TWO_NODE);
    let stranger = Arc::new(Mutex::new(SimSwitch::new("stranger", 0x99, 4)));
    let agent = SimAgent::connect(h.service.control_addr, stranger.clone()).unwrap();
    assert!(!agent.wait_synced(Duration::from_secs(2)));
    assert!(wait_until(Duration::from_secs(2), || !agent.is_alive()));
    assert_eq!(h.service.controller.rejected_sessions(), 1);
    assert!(h.service.controller.session(0x99).is_none());
    assert_eq!(stranger.lock().unwrap().flow_mods_received(), 0);
    assert!(stranger.lock().unwrap().entries().is_empty());
}

#[test]
fn openflow_1_0_peer_gets_hello_failed() {
    let h = up(reference(), TWO_NODE);
    let mut peer = RawPeer::connect(h.service.control_addr);
    // an OF 1.0 hello: version 1, type 0, length 8
    peer.send_raw(&[0x01, 0x00, 0x00, 0x08, 0, 0, 0, 7]);
    assert!(matches!(peer.recv().unwrap().body, OfBody::Hello(_)));
    let err = peer.recv().unwrap();
    assert_eq!(err.xid, 7);
    match err.body {
        OfBody::Error(e) => {
            assert_eq!(e.err_type, OFPET_HELLO_FAILED);
            assert_eq!(e.code, OFPHFC_INCOMPATIBLE);
        }
        other => panic!("expected an error, got {other:?}"),
    }
    assert!(peer.recv().is_none());
    assert_eq!(h.service.controller.sessions().len(), 1);
}

#[test]
fn echo_during_handshake_is_answered() {
    let h = up(reference(), TWO_NODE);
    let mut peer = RawPeer::connect(h.service.control_addr);
    peer.send(1, OfBody::Hello(Hello::v13_only()));
    assert!(matches!(peer.recv().unwrap().body, OfBody::Hello(_)));
    assert_eq!(peer.recv().unwrap().body, OfBody::FeaturesRequest);
    peer.send(0x42, OfBody::EchoRequest(b"ping".to_vec()));
    let reply = peer.recv().unwrap();
    assert_eq!((reply.xid, reply.body), (0x42, OfBody::EchoReply(b"ping".to_vec())));
}

#[test]
fn start_fails_on_a_taken_port_and_an_invalid_config() {
    let rt = runtime();
    let first = rt.block_on(Service::start(reference(), settings())).unwrap();
    let mut clash = settings();
    clash.control_addr = first.control_addr.to_string();
    match rt.block_on(Service::start(reference(), clash)) {
        Err(StartError::Bind { addr, .. }) => assert_eq!(addr, first.control_addr.to_string()),
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("second bind succeeded"),
    }
    let mut bad = reference();
    bad.dps.get_mut("sw1").unwrap().interfaces.get_mut(&2).unwrap().acls_in = vec!["nope".into()];
    assert!(matches!(rt.block_on(Service::start(bad, settings())), Err(StartError::Invalid(_))));
}

#[test]
fn silent_switch_is_declared_dead() {
    let mut s = settings();
    s.controller.echo_interval = Duration::from_millis(100);
    let h = Harness::start(reference(), parse_topology(TWO_NODE).unwrap(), s).unwrap();
    // replies keep the session up across several intervals
    thread::sleep(Duration::from_millis(600));
    let session = h.service.controller.session(1).unwrap();
    assert_eq!(session.state(), SessionState::Steady);
    assert!(session.echo_rtt_ms().is_some());

    h.cp.agent(1).unwrap().mute_echo(true);
    let started = Instant::now();
    assert!(wait_until(Duration::from_secs(3), || session.state() == SessionState::Dead));
    // three missed intervals, give or take one tick
    assert!(started.elapsed() >= Duration::from_millis(200), "{:?}", started.elapsed());
    assert!(h.service.controller.session(1).is_none());
    assert!(wait_until(Duration::from_secs(2), || !h.cp.agent(1).unwrap().is_alive()));
}

#[test]
fn apply_converges_and_unchanged_apply_sends_nothing() {
    let mut h = up(reference(), TWO_NODE);
    h.advance(1000);
    let old = compile_datapath(&reference(), "sw1").unwrap();
    let target_cfg = block_udp(reference());
    let target = compile_datapath(&target_cfg, "sw1").unwrap();
    let plan = plan_update(&old, &target).unwrap();

    let report = h.apply(target_cfg.clone()).unwrap();
    let dp = report.dp("sw1").unwrap();
    assert_eq!((dp.added, dp.removed, dp.modified), (plan.added, plan.removed, plan.modified));
    assert_eq!(dp.flow_mods, plan.flow_mods().count());
    assert!(!dp.learned_flushed);
    assert_eq!(report.fingerprint, fingerprint(&target_cfg));
    assert_eq!(h.service.controller.active_fingerprint(), fingerprint(&target_cfg));
    assert!(h.fabric.read_flow_table(1).unwrap().compiled_only().same_entries(&target));
    assert_eq!(h.service.controller.session(1).unwrap().fingerprint(), Some(target.fingerprint.clone()));

    h.fabric.switch("sw1").unwrap().lock().unwrap().reset_capture();
    let again = h.apply(target_cfg).unwrap();
    let dp = again.dp("sw1").unwrap();
    assert_eq!((dp.added, dp.removed, dp.modified, dp.flow_mods), (0, 0, 0, 0));
    assert_eq!(h.fabric.switch("sw1").unwrap().lock().unwrap().flow_mods_received(), 0);
}

#[test]
fn vlan_change_flushes_learned_flows() {
    let mut spec = parse_topology(TWO_NODE).unwrap();
    spec.flows[0].stop_ms = Some(1000);
    let mut h = Harness::start(reference(), spec, settings()).unwrap();
    h.advance(1000);
    let learned = |h: &Harness| h.fabric.read_flow_table(1).unwrap().len() - compile_datapath(&h.service.controller.active(), "sw1").unwrap().len();
    assert!(learned(&h) > 0);
    assert!(h.service.controller.l2_len() > 0);

    let mut cfg = reference();
    cfg.vlans.get_mut("office").unwrap().vid = 200;
    let report = h.apply(cfg.clone()).unwrap();
    assert!(report.dp("sw1").unwrap().learned_flushed);
    assert_eq!(learned(&h), 0);
    assert_eq!(h.service.controller.l2_len(), 0);
    assert!(h.fabric.read_flow_table(1).unwrap().same_entries(&compile_datapath(&cfg, "sw1").unwrap()));
}

#[test]
fn invalid_apply_changes_nothing() {
    let h = up(reference(), TWO_NODE);
    let mut bad = reference();
    bad.dps.get_mut("sw1").unwrap().interfaces.get_mut(&1).unwrap().native_vlan = "ghost".into();
    h.fabric.switch("sw1").unwrap().lock().unwrap().reset_capture();
    assert!(matches!(h.apply(bad), Err(ApplyError::Invalid(_))));
    assert_eq!(h.service.controller.active_fingerprint(), fingerprint(&reference()));
    assert_eq!(h.fabric.switch("sw1").unwrap().lock().unwrap().flow_mods_received(), 0);
}

#[test]
fn absent_datapath_is_deferred_and_synced_on_connect() {
    let h = up(two_dp_config(), TWO_NODE);
    let target_cfg = block_udp(two_dp_config());
    let report = h.apply(target_cfg.clone()).unwrap();
    assert_eq!(report.deferred, ["sw2"]);
    assert!(report.dp("sw2").is_none());

    let sw2 = Arc::new(Mutex::new(SimSwitch::new("sw2", 2, 4)));
    let agent = SimAgent::connect(h.service.control_addr, sw2.clone()).unwrap();
    assert!(agent.wait_synced(Duration::from_secs(5)));
    let steady = h.block_on(h.service.controller.wait_steady(&[2], Duration::from_secs(5)));
    assert!(steady);
    assert!(sw2.lock().unwrap().flow_table().same_entries(&compile_datapath(&target_cfg, "sw2").unwrap()));
}

#[test]
fn removed_datapath_is_disconnected() {
    let h = up(reference(), TWO_NODE);
    let mut cfg = two_dp_config();
    cfg.dps.remove("sw1");
    let report = h.apply(cfg).unwrap();
    assert_eq!(report.disconnected, ["sw1"]);
    assert!(wait_until(Duration::from_secs(2), || !h.cp.agent(1).unwrap().is_alive()));
    assert!(h.service.controller.session(1).is_none());
}

/// Serves a session like a switch that stops confirming barriers after
/// the initial sync.
fn stalling_switch(addr: std::net::SocketAddr, dp_id: u64) -> thread::JoinHandle<()> {
    let mut peer = RawPeer::connect(addr);
    peer.handshake(dp_id);
    thread::spawn(move || {
        let mut barriers = 0;
        while let Some(m) = peer.recv() {
            match m.body {
                OfBody::BarrierRequest => {
                    barriers += 1;
                    if barriers == 1 {
                        peer.send(m.xid, OfBody::BarrierReply);
                    }
                }
                OfBody::EchoRequest(d) => peer.send(m.xid, OfBody::EchoReply(d)),
                _ => {}
            }
        }
    })
}

#[test]
fn failed_push_rolls_back_and_keeps_the_active_config() {
    let mut s = settings();
    s.controller.barrier_timeout = Duration::from_millis(300);
    let h = Harness::start(two_dp_config(), parse_topology(TWO_NODE).unwrap(), s).unwrap();
    let stall = stalling_switch(h.service.control_addr, 2);
    assert!(h.block_on(h.service.controller.wait_steady(&[1, 2], Duration::from_secs(5))));

    let before = fingerprint(&two_dp_config());
    match h.apply(block_udp(two_dp_config())) {
        Err(ApplyError::PushFailed(report)) => {
            assert_eq!(report.failed, ["sw2"]);
            assert!(report.dp("sw1").is_some());
        }
        other => panic!("expected a push failure, got {other:?}"),
    }
    assert_eq!(h.service.controller.active_fingerprint(), before);
    // sw1 is back on the old table, the stalled switch lost its session
    let old = compile_datapath(&two_dp_config(), "sw1").unwrap();
    assert!(h.fabric.read_flow_table(1).unwrap().compiled_only().same_entries(&old));
    assert_eq!(h.service.controller.session(1).unwrap().fingerprint(), Some(old.fingerprint));
    assert!(h.service.controller.session(2).is_none());
    stall.join().unwrap();
}
