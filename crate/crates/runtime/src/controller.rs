//! The control role: accepts switch sessions, pushes compiled tables, runs
//! L2 learning and applies configuration changes.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use futures::future::join_all;
use sdx_core::compile::{
    compile_datapath, plan_update, CompileError, FlowTable, FlowUpdatePlan, PlanStep, LEARNED_BIT, TABLE_L2,
    TABLE_VLAN,
};
use sdx_core::config::{fingerprint, validate, ConfigError, FabricConfig};
use sdx_core::learning::L2Table;
use sdx_core::ofp::{
    DecodeError, ErrorMsg, FlowMod, FlowModCommand, Hello, Match, OfBody, OfHeader, OfMessage, OFPET_HELLO_FAILED,
    OFPHFC_INCOMPATIBLE, OFPTT_ALL, OFPT_HELLO, OFP_VERSION,
};
use serde::Serialize;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc;
use tokio::task::JoinHandle;

use crate::clock::SharedClock;
use crate::session::{spawn_writer, MsgReader, Outgoing, ReadError, Session, SessionError, SessionState};
use crate::status::{Heartbeats, SessionSummary, ROLE_CONTROLLER};

pub const DEFAULT_CONTROL_PORT: u16 = 6653;

#[derive(Debug, Clone)]
pub struct ControllerSettings {
    pub echo_interval: Duration,
    /// Sessions die after this many echo intervals without a reply.
    pub echo_misses: u32,
    pub handshake_timeout: Duration,
    pub barrier_timeout: Duration,
    pub heartbeat_interval: Duration,
}

impl Default for ControllerSettings {
    fn default() -> Self {
        ControllerSettings {
            echo_interval: Duration::from_secs(5),
            echo_misses: 3,
            handshake_timeout: Duration::from_secs(10),
            barrier_timeout: Duration::from_secs(5),
            heartbeat_interval: Duration::from_secs(1),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StartError {
    #[error("invalid configuration: {0}")]
    Invalid(ConfigError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpReport {
    pub dp: String,
    pub dp_id: String,
    pub added: usize,
    pub removed: usize,
    pub modified: usize,
    pub flow_mods: usize,
    pub learned_flushed: bool,
    pub duration_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApplyReport {
    pub datapaths: Vec<DpReport>,
    /// Configured datapaths with no session; they get the new tables when
    /// they connect.
    pub deferred: Vec<String>,
    /// Sessions closed because their datapath left the configuration.
    pub disconnected: Vec<String>,
    pub failed: Vec<String>,
    pub fingerprint: String,
    pub duration_ms: f64,
}

impl ApplyReport {
    pub fn dp(&self, name: &str) -> Option<&DpReport> {
        self.datapaths.iter().find(|d| d.dp == name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ApplyError {
    #[error("invalid configuration: {0}")]
    Invalid(ConfigError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    /// Some switch did not confirm its update. The active configuration is
    /// unchanged; failed sessions were closed and resync on reconnect.
    #[error("push failed on {}", .0.failed.join(", "))]
    PushFailed(ApplyReport),
}

struct Inner {
    settings: ControllerSettings,
    clock: SharedClock,
    origin: Instant,
    active: RwLock<Arc<FabricConfig>>,
    sessions: Mutex<BTreeMap<u64, Arc<Session>>>,
    l2: Mutex<L2Table>,
    apply_fifo: tokio::sync::Mutex<()>,
    heartbeats: Arc<Heartbeats>,
    rejected: AtomicU64,
    xid_seed: AtomicU64,
}

#[derive(Clone)]
pub struct Controller {
    inner: Arc<Inner>,
}

/// A bound controller and the tasks serving it.
pub struct ControllerHandle {
    pub controller: Controller,
    pub local_addr: SocketAddr,
    pub accept_task: JoinHandle<()>,
    pub housekeeping_task: JoinHandle<()>,
}

impl ControllerHandle {
    pub fn abort(&self) {
        self.accept_task.abort();
        self.housekeeping_task.abort();
        self.controller.close_all();
    }
}

impl Controller {
    pub fn new(cfg: FabricConfig, settings: ControllerSettings, clock: SharedClock, heartbeats: Arc<Heartbeats>) -> Result<Self, StartError> {
        let report = validate(&cfg);
        if !report.is_valid() {
            return Err(StartError::Invalid(ConfigError::from_report(report)));
        }
        Ok(Controller {
            inner: Arc::new(Inner {
                settings,
                clock,
                origin: Instant::now(),
                active: RwLock::new(Arc::new(cfg)),
                sessions: Mutex::new(BTreeMap::new()),
                l2: Mutex::new(L2Table::default()),
                apply_fifo: tokio::sync::Mutex::new(()),
                heartbeats,
                rejected: AtomicU64::new(0),
                xid_seed: AtomicU64::new(1),
            }),
        })
    }

    /// Bind the control endpoint and start serving switches.
    pub async fn start(self, addr: &str) -> Result<ControllerHandle, StartError> {
        let listener = TcpListener::bind(addr).await.map_err(|source| StartError::Bind {
            addr: addr.to_string(),
            source,
        })?;
        let local_addr = listener.local_addr().map_err(|source| StartError::Bind {
            addr: addr.to_string(),
            source,
        })?;
        tracing::info!("controller listening on {local_addr}");
        self.inner.heartbeats.beat(ROLE_CONTROLLER);
        let accept = {
            let c = self.clone();
            tokio::spawn(async move {
                loop {
                    match listener.accept().await {
                        Ok((stream, peer)) => {
                            let c = c.clone();
                            tokio::spawn(async move { c.serve(stream, peer).await });
                        }
                        Err(e) => tracing::warn!("accept failed: {e}"),
                    }
                }
            })
        };
        let housekeeping = {
            let c = self.clone();
            tokio::spawn(async move {
                let mut tick = tokio::time::interval(c.inner.settings.heartbeat_interval);
                loop {
                    tick.tick().await;
                    c.inner.heartbeats.beat(ROLE_CONTROLLER);
                    let now = c.inner.clock.now_ms();
                    c.inner.l2.lock().unwrap().expire(now);
                }
            })
        };
        Ok(ControllerHandle {
            controller: self,
            local_addr,
            accept_task: accept,
            housekeeping_task: housekeeping,
        })
    }

    pub fn active(&self) -> Arc<FabricConfig> {
        self.inner.active.read().unwrap().clone()
    }

    pub fn active_fingerprint(&self) -> String {
        fingerprint(&self.active())
    }

    pub fn sessions(&self) -> Vec<Arc<Session>> {
        self.inner.sessions.lock().unwrap().values().cloned().collect()
    }

    pub fn session(&self, dp_id: u64) -> Option<Arc<Session>> {
        self.inner.sessions.lock().unwrap().get(&dp_id).cloned()
    }

    pub fn steady_sessions(&self) -> Vec<Arc<Session>> {
        self.sessions()
            .into_iter()
            .filter(|s| s.state() == SessionState::Steady)
            .collect()
    }

    pub fn rejected_sessions(&self) -> u64 {
        self.inner.rejected.load(Ordering::Relaxed)
    }

    pub fn l2_len(&self) -> usize {
        self.inner.l2.lock().unwrap().len()
    }

    pub fn summaries(&self) -> Vec<SessionSummary> {
        self.sessions()
            .iter()
            .map(|s| SessionSummary {
                dp: s.dp_name(),
                dp_id: format!("{:#x}", s.dp_id),
                state: s.state().as_str().to_string(),
                version: s.version,
                echo_rtt_ms: s.echo_rtt_ms(),
                fingerprint: s.fingerprint(),
                peer: s.peer.to_string(),
            })
            .collect()
    }

    /// Wait until every listed datapath has a STEADY session.
    pub async fn wait_steady(&self, dp_ids: &[u64], timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        loop {
            let ready = dp_ids
                .iter()
                .all(|d| self.session(*d).is_some_and(|s| s.state() == SessionState::Steady));
            if ready {
                return true;
            }
            if Instant::now() >= deadline {
                return false;
            }
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
    }

    pub fn close_all(&self) {
        let sessions: Vec<_> = std::mem::take(&mut *self.inner.sessions.lock().unwrap()).into_values().collect();
        for s in sessions {
            s.kill();
        }
    }

    fn next_xid_seed(&self) -> u32 {
        // spread sessions over the xid space so logs stay readable
        (self.inner.xid_seed.fetch_add(1, Ordering::Relaxed) as u32).wrapping_mul(0x0001_0000) | 1
    }

    async fn serve(self, stream: TcpStream, peer: SocketAddr) {
        let _ = stream.set_nodelay(true);
        let (rd, wr) = stream.into_split();
        let tx = spawn_writer(wr);
        let mut reader = MsgReader::new(rd);
        let timeout = self.inner.settings.handshake_timeout;
        let features = tokio::time::timeout(timeout, handshake(&mut reader, &tx)).await;
        let (version, dp_id) = match features {
            Ok(Ok(v)) => v,
            Ok(Err(e)) => {
                tracing::warn!("handshake with {peer} failed: {e}");
                let _ = tx.send(Outgoing::Close);
                return;
            }
            Err(_) => {
                tracing::warn!("handshake with {peer} timed out");
                let _ = tx.send(Outgoing::Close);
                return;
            }
        };
        let cfg = self.active();
        let Some((name, _)) = cfg.dp_by_id(dp_id) else {
            self.inner.rejected.fetch_add(1, Ordering::Relaxed);
            tracing::warn!("rejecting {peer}: dp_id {dp_id:#x} is not configured");
            let _ = tx.send(Outgoing::Close);
            return;
        };
        let session = Arc::new(Session::new(dp_id, name, peer, version, tx, self.next_xid_seed()));
        if let Some(old) = self.inner.sessions.lock().unwrap().insert(dp_id, session.clone()) {
            tracing::info!("dp {dp_id:#x} reconnected from {peer}; closing the old session");
            old.kill();
        }
        self.inner.l2.lock().unwrap().forget_datapath(dp_id);
        tracing::info!("dp {name} ({dp_id:#x}) connected from {peer}");

        let reader_task = {
            let c = self.clone();
            let s = session.clone();
            tokio::spawn(async move { c.read_loop(reader, s).await })
        };

        if let Err(e) = self.sync(&session).await {
            tracing::warn!("initial sync of {dp_id:#x} failed: {e}");
            self.drop_session(&session);
        } else {
            self.echo_loop(&session).await;
        }
        reader_task.abort();
    }

    /// Wipe the switch and push the full compiled table of the active config.
    async fn sync(&self, session: &Arc<Session>) -> Result<(), SessionError> {
        let _fifo = self.inner.apply_fifo.lock().await;
        let cfg = self.active();
        let Some((name, _)) = cfg.dp_by_id(session.dp_id) else {
            return Err(SessionError::Closed);
        };
        session.set_dp_name(name);
        let table = compile_datapath(&cfg, name).map_err(|_| SessionError::Closed)?;
        session.send(OfBody::FlowMod(FlowMod::new(FlowModCommand::Delete, OFPTT_ALL, 0, Match::new())))?;
        for e in &table.entries {
            session.send(OfBody::FlowMod(e.to_flow_mod(FlowModCommand::Add)))?;
        }
        session.barrier(self.inner.settings.barrier_timeout).await?;
        session.set_table(Some(table));
        session.set_state(SessionState::Steady);
        tracing::info!("dp {name} synced");
        Ok(())
    }

    async fn echo_loop(&self, session: &Arc<Session>) {
        let interval = self.inner.settings.echo_interval;
        let limit = interval * self.inner.settings.echo_misses;
        let mut tick = tokio::time::interval_at(tokio::time::Instant::now() + interval, interval);
        loop {
            tokio::select! {
                _ = tick.tick() => {}
                _ = session.killed() => return,
            }
            if session.state() == SessionState::Dead {
                return;
            }
            if session.since_echo_reply() > limit {
                tracing::warn!("dp {:#x} missed {} echo replies; marking dead", session.dp_id, self.inner.settings.echo_misses);
                self.drop_session(session);
                return;
            }
            let payload = Session::echo_sent_payload(self.inner.origin);
            if session.send(OfBody::EchoRequest(payload)).is_err() {
                self.drop_session(session);
                return;
            }
        }
    }

    async fn read_loop(self, mut reader: MsgReader, session: Arc<Session>) {
        loop {
            let next = tokio::select! {
                r = reader.next() => r,
                _ = session.killed() => return,
            };
            let msg = match next {
                Ok((_, Ok(m))) => m,
                Ok((frame, Err(e))) if e.is_skippable() => {
                    tracing::debug!("skipping undecodable frame of {} bytes: {e}", frame.len());
                    continue;
                }
                Ok((_, Err(e))) => {
                    tracing::warn!("dp {:#x} sent a malformed message: {e}", session.dp_id);
                    continue;
                }
                Err(ReadError::Eof) => {
                    tracing::info!("dp {:#x} disconnected", session.dp_id);
                    self.drop_session(&session);
                    return;
                }
                Err(e) => {
                    tracing::warn!("dp {:#x}: {e}", session.dp_id);
                    self.drop_session(&session);
                    return;
                }
            };
            self.dispatch(&session, msg);
        }
    }

    fn dispatch(&self, session: &Arc<Session>, msg: OfMessage) {
        match msg.body {
            OfBody::EchoRequest(data) => {
                let _ = session.send_with_xid(msg.xid, OfBody::EchoReply(data));
            }
            OfBody::EchoReply(ref data) => {
                session.echo_replied(self.inner.origin, data);
            }
            OfBody::PacketIn(ref pi) => {
                if !matches!(session.state(), SessionState::Syncing | SessionState::Steady) {
                    return;
                }
                let cfg = self.active();
                let now = self.inner.clock.now_ms();
                let name = session.dp_name();
                let out = self.inner.l2.lock().unwrap().handle_packet_in(&cfg, &name, pi, now);
                for body in out {
                    let _ = session.send_with_xid(msg.xid, body);
                }
            }
            OfBody::BarrierRequest => {
                let _ = session.send_with_xid(msg.xid, OfBody::BarrierReply);
            }
            OfBody::Hello(_) | OfBody::PortStatus(_) => {}
            _ => {
                let name = msg.body.name();
                if !session.resolve(msg) {
                    tracing::debug!("unsolicited {name} from dp {:#x}", session.dp_id);
                }
            }
        }
    }

    fn drop_session(&self, session: &Arc<Session>) {
        session.kill();
        let mut map = self.inner.sessions.lock().unwrap();
        if map.get(&session.dp_id).is_some_and(|s| Arc::ptr_eq(s, session)) {
            map.remove(&session.dp_id);
            self.inner.l2.lock().unwrap().forget_datapath(session.dp_id);
        }
    }

    /// Move every connected switch to `new_cfg`. Applies are serialized in
    /// arrival order. The active configuration changes only if every
    /// connected switch confirmed its update.
    pub async fn apply_config(&self, new_cfg: FabricConfig) -> Result<ApplyReport, ApplyError> {
        let report = validate(&new_cfg);
        if !report.is_valid() {
            return Err(ApplyError::Invalid(ConfigError::from_report(report)));
        }
        let _fifo = self.inner.apply_fifo.lock().await;
        let started = Instant::now();
        let old_cfg = self.active();

        let mut targets = BTreeMap::new();
        for name in new_cfg.dps.keys() {
            targets.insert(name.clone(), compile_datapath(&new_cfg, name)?);
        }

        let mut work: Vec<(Arc<Session>, String, FlowTable, FlowTable, FlowUpdatePlan)> = Vec::new();
        let mut deferred = Vec::new();
        for (name, dpc) in &new_cfg.dps {
            let target = targets[name].clone();
            match self.session(dpc.dp_id).filter(|s| s.state() == SessionState::Steady) {
                Some(s) => {
                    let current = s.table().unwrap_or_else(|| FlowTable::from_entries(dpc.dp_id, Vec::new(), String::new()));
                    let plan = plan_update(&current, &target)?;
                    work.push((s, name.clone(), current, target, plan));
                }
                None => deferred.push(name.clone()),
            }
        }
        let leaving: Vec<Arc<Session>> = self
            .sessions()
            .into_iter()
            .filter(|s| new_cfg.dp_by_id(s.dp_id).is_none())
            .collect();

        let timeout = self.inner.settings.barrier_timeout;
        let results = join_all(work.iter().map(|(s, name, _, _, plan)| {
            let s = s.clone();
            let name = name.clone();
            let plan = plan.clone();
            let c = self.clone();
            async move {
                let t0 = Instant::now();
                let flushed = vlan_changed(&plan);
                let r = c.execute(&s, &plan, flushed, timeout).await;
                (name, r, flushed, t0.elapsed())
            }
        }))
        .await;

        let mut datapaths = Vec::new();
        let mut failed = Vec::new();
        for ((s, _, _, _, plan), (name, r, flushed, took)) in work.iter().zip(&results) {
            let counts = plan.counts();
            datapaths.push(DpReport {
                dp: name.clone(),
                dp_id: format!("{:#x}", s.dp_id),
                added: counts.added,
                removed: counts.removed,
                modified: counts.modified,
                flow_mods: plan.flow_mods().count() + usize::from(*flushed),
                learned_flushed: *flushed,
                duration_ms: took.as_secs_f64() * 1000.0,
            });
            if let Err(e) = r {
                tracing::warn!("apply on {name} failed: {e}");
                failed.push(name.clone());
            }
        }

        let mut report = ApplyReport {
            datapaths,
            deferred,
            disconnected: Vec::new(),
            failed: failed.clone(),
            fingerprint: fingerprint(&new_cfg),
            duration_ms: 0.0,
        };

        if !failed.is_empty() {
            // undo on the switches that did take the update; close the rest
            for ((s, name, current, target, _), (_, r, _, _)) in work.iter().zip(&results) {
                if r.is_err() {
                    self.drop_session(s);
                    continue;
                }
                let back = plan_update(target, current)?;
                if self.execute(s, &back, vlan_changed(&back), timeout).await.is_err() {
                    tracing::warn!("rollback on {name} failed; closing its session");
                    self.drop_session(s);
                }
            }
            report.fingerprint = fingerprint(&old_cfg);
            report.duration_ms = started.elapsed().as_secs_f64() * 1000.0;
            return Err(ApplyError::PushFailed(report));
        }

        for (s, name, _, target, _) in &work {
            s.set_table(Some(target.clone()));
            s.set_dp_name(name);
        }
        for s in leaving {
            report.disconnected.push(s.dp_name());
            self.drop_session(&s);
        }
        *self.inner.active.write().unwrap() = Arc::new(new_cfg);
        report.duration_ms = started.elapsed().as_secs_f64() * 1000.0;
        Ok(report)
    }

    async fn execute(&self, s: &Session, plan: &FlowUpdatePlan, flush_learned: bool, timeout: Duration) -> Result<(), SessionError> {
        if flush_learned {
            self.inner.l2.lock().unwrap().forget_datapath(s.dp_id);
        }
        let last = plan.steps.len().saturating_sub(1);
        for (i, step) in plan.steps.iter().enumerate() {
            match step {
                PlanStep::FlowMod(fm) => {
                    s.send(OfBody::FlowMod(fm.clone()))?;
                }
                PlanStep::Barrier => {
                    if flush_learned && i == last {
                        s.send(OfBody::FlowMod(flush_learned_mod()))?;
                    }
                    s.barrier(timeout).await?;
                }
            }
        }
        Ok(())
    }
}

/// Learned entries carry the VLAN in their match, so they go stale when
/// port-to-VLAN assignments change.
fn vlan_changed(plan: &FlowUpdatePlan) -> bool {
    plan.flow_mods().any(|fm| fm.table_id == TABLE_VLAN)
}

fn flush_learned_mod() -> FlowMod {
    let mut fm = FlowMod::new(FlowModCommand::Delete, TABLE_L2, 0, Match::new());
    fm.cookie = LEARNED_BIT;
    fm.cookie_mask = LEARNED_BIT;
    fm
}

#[derive(Debug, thiserror::Error)]
enum HandshakeError {
    #[error("peer does not speak OpenFlow 1.3 (version {0:#04x})")]
    Version(u8),
    #[error("expected HELLO, got {0}")]
    NotHello(String),
    #[error(transparent)]
    Read(#[from] ReadError),
    #[error("decode: {0}")]
    Decode(DecodeError),
}

async fn handshake(reader: &mut MsgReader, tx: &mpsc::UnboundedSender<Outgoing>) -> Result<(u8, u64), HandshakeError> {
    let send = |xid, body| {
        let _ = tx.send(Outgoing::Msg(OfMessage::new(xid, body)));
    };
    send(1, OfBody::Hello(Hello::v13_only()));
    let (frame, first) = reader.next().await?;
    let header = OfHeader::parse(&frame).map_err(HandshakeError::Decode)?;
    let hello_failed = |xid| {
        send(
            xid,
            OfBody::Error(ErrorMsg {
                err_type: OFPET_HELLO_FAILED,
                code: OFPHFC_INCOMPATIBLE,
                data: b"OpenFlow 1.3 required".to_vec(),
            }),
        )
    };
    match first {
        Ok(OfMessage {
            body: OfBody::Hello(h), ..
        }) => {
            if !h.supports(OFP_VERSION) {
                hello_failed(header.xid);
                return Err(HandshakeError::Version(header.version));
            }
        }
        Err(DecodeError::BadVersion(v)) if header.msg_type == OFPT_HELLO => {
            hello_failed(header.xid);
            return Err(HandshakeError::Version(v));
        }
        Ok(m) => return Err(HandshakeError::NotHello(m.body.name().to_string())),
        Err(e) => return Err(HandshakeError::Decode(e)),
    }
    send(2, OfBody::FeaturesRequest);
    loop {
        let (_, msg) = reader.next().await?;
        match msg {
            Ok(OfMessage {
                body: OfBody::FeaturesReply(f), ..
            }) => return Ok((OFP_VERSION, f.datapath_id)),
            Ok(OfMessage {
                xid,
                body: OfBody::EchoRequest(d),
            }) => send(xid, OfBody::EchoReply(d)),
            Ok(_) => {}
            Err(e) if e.is_skippable() => {}
            Err(e) => return Err(HandshakeError::Decode(e)),
        }
    }
}
