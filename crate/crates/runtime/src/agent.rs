//! Connects simulated switches to a controller over TCP, so the simulator
//! can run against the real service.
//!
//! Each agent has a reader thread and a worker thread. The reader never
//! touches the switch: it answers echoes, hands replies to a waiting
//! PacketIn round trip, and queues everything else for the worker, which
//! applies it to the switch under its lock. The simulator holds that lock
//! while a frame waits on the controller, so the split keeps them apart.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use std::net::{Shutdown, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU32, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use sdx_core::ofp::{FrameBuffer, OfBody, OfMessage, PacketIn};
use sdx_core::sim::{ControlPlane, SimFabric, SimSwitch, SwitchHandle};

use crate::session::XID_SWITCH_RANGE;

pub const DEFAULT_ROUND_TRIP_TIMEOUT: Duration = Duration::from_secs(5);

type Pending = Arc<Mutex<Option<(u32, mpsc::Sender<OfMessage>)>>>;

#[derive(Default)]
struct SyncFlag {
    done: Mutex<bool>,
    cv: Condvar,
}

pub struct SimAgent {
    pub dp_id: u64,
    switch: SwitchHandle,
    writer: Arc<Mutex<TcpStream>>,
    pending: Pending,
    synced: Arc<SyncFlag>,
    alive: Arc<AtomicBool>,
    answer_echo: Arc<AtomicBool>,
    next_xid: AtomicU32,
    threads: Vec<JoinHandle<()>>,
}

fn write_msg(w: &Mutex<TcpStream>, msg: &OfMessage) -> io::Result<()> {
    let bytes = msg.encode().map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    w.lock().unwrap().write_all(&bytes)
}

fn lock(h: &SwitchHandle) -> std::sync::MutexGuard<'_, SimSwitch> {
    h.lock().unwrap_or_else(|p| p.into_inner())
}

impl SimAgent {
    pub fn connect(addr: impl ToSocketAddrs, switch: SwitchHandle) -> io::Result<SimAgent> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let dp_id = lock(&switch).dp_id;
        let writer = Arc::new(Mutex::new(stream.try_clone()?));
        let pending: Pending = Arc::new(Mutex::new(None));
        let synced = Arc::new(SyncFlag::default());
        let alive = Arc::new(AtomicBool::new(true));
        let answer_echo = Arc::new(AtomicBool::new(true));
        write_msg(&writer, &SimSwitch::hello())?;

        let (work_tx, work_rx) = mpsc::channel::<OfMessage>();
        let reader = {
            let mut stream = stream;
            let writer = writer.clone();
            let pending = pending.clone();
            let alive = alive.clone();
            let answer_echo = answer_echo.clone();
            std::thread::spawn(move || {
                let mut buf = FrameBuffer::new();
                let mut chunk = vec![0u8; 64 * 1024];
                'read: loop {
                    let n = match stream.read(&mut chunk) {
                        Ok(0) | Err(_) => break,
                        Ok(n) => n,
                    };
                    buf.extend(&chunk[..n]);
                    loop {
                        let frame = match buf.next_frame() {
                            Ok(Some(f)) => f,
                            Ok(None) => break,
                            Err(_) => break 'read,
                        };
                        let Ok(msg) = OfMessage::decode(&frame) else { continue };
                        {
                            let p = pending.lock().unwrap();
                            if let Some((xid, tx)) = p.as_ref() {
                                if *xid == msg.xid {
                                    let _ = tx.send(msg);
                                    continue;
                                }
                            }
                        }
                        match &msg.body {
                            OfBody::EchoRequest(d) => {
                                if answer_echo.load(Ordering::Relaxed) {
                                    let _ = write_msg(&writer, &OfMessage::new(msg.xid, OfBody::EchoReply(d.clone())));
                                }
                            }
                            OfBody::Error(e) => {
                                tracing::warn!("controller error type {} code {}", e.err_type, e.code);
                            }
                            _ => {
                                if work_tx.send(msg).is_err() {
                                    break 'read;
                                }
                            }
                        }
                    }
                }
                alive.store(false, Ordering::SeqCst);
            })
        };
        let worker = {
            let switch = switch.clone();
            let writer = writer.clone();
            let synced = synced.clone();
            let alive = alive.clone();
            std::thread::spawn(move || {
                for msg in work_rx {
                    let is_barrier = matches!(msg.body, OfBody::BarrierRequest);
                    let replies = {
                        let mut sw = lock(&switch);
                        let r = sw.handle_message(&msg);
                        if is_barrier {
                            // the controller's sync ends with the first barrier
                            sw.connected = true;
                        }
                        r
                    };
                    for r in &replies {
                        let _ = write_msg(&writer, r);
                    }
                    if is_barrier {
                        *synced.done.lock().unwrap() = true;
                        synced.cv.notify_all();
                    }
                }
                lock(&switch).connected = false;
                alive.store(false, Ordering::SeqCst);
                synced.cv.notify_all();
            })
        };
        Ok(SimAgent {
            dp_id,
            switch,
            writer,
            pending,
            synced,
            alive,
            answer_echo,
            next_xid: AtomicU32::new(1),
            threads: vec![reader, worker],
        })
    }

    pub fn is_alive(&self) -> bool {
        self.alive.load(Ordering::SeqCst)
    }

    /// Block until the controller has pushed the initial tables.
    pub fn wait_synced(&self, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        let mut done = self.synced.done.lock().unwrap();
        while !*done {
            let now = Instant::now();
            if now >= deadline || !self.is_alive() {
                return false;
            }
            done = self.synced.cv.wait_timeout(done, deadline - now).unwrap().0;
        }
        true
    }

    /// Stop answering echo requests, as a hung switch would.
    pub fn mute_echo(&self, mute: bool) {
        self.answer_echo.store(!mute, Ordering::Relaxed);
    }

    /// Send a PacketIn and collect the controller's answer, delimited by a
    /// barrier on the same xid.
    pub fn round_trip(&self, pi: &PacketIn, timeout: Duration) -> Vec<OfBody> {
        if !self.is_alive() {
            return Vec::new();
        }
        let xid = XID_SWITCH_RANGE | (self.next_xid.fetch_add(1, Ordering::Relaxed) % XID_SWITCH_RANGE);
        let (tx, rx) = mpsc::channel();
        *self.pending.lock().unwrap() = Some((xid, tx));
        let sent = write_msg(&self.writer, &OfMessage::new(xid, OfBody::PacketIn(pi.clone())))
            .and_then(|_| write_msg(&self.writer, &OfMessage::new(xid, OfBody::BarrierRequest)));
        let mut out = Vec::new();
        if sent.is_ok() {
            let deadline = Instant::now() + timeout;
            loop {
                let left = deadline.saturating_duration_since(Instant::now());
                match rx.recv_timeout(left) {
                    Ok(OfMessage {
                        body: OfBody::BarrierReply, ..
                    }) => break,
                    Ok(m) => out.push(m.body),
                    Err(_) => {
                        tracing::warn!("dp {:#x}: no answer to PacketIn {xid:#x}", self.dp_id);
                        break;
                    }
                }
            }
        }
        *self.pending.lock().unwrap() = None;
        out
    }

    pub fn switch(&self) -> &SwitchHandle {
        &self.switch
    }

    /// Close the connection; the switch keeps its tables but loses its
    /// session.
    pub fn disconnect(mut self) {
        self.close();
    }

    fn close(&mut self) {
        let _ = self.writer.lock().unwrap().shutdown(Shutdown::Both);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
        lock(&self.switch).connected = false;
    }
}

impl Drop for SimAgent {
    fn drop(&mut self) {
        self.close();
    }
}

/// A control plane reached over TCP, one agent per simulated switch.
pub struct TcpControlPlane {
    agents: BTreeMap<u64, SimAgent>,
    pub round_trip_timeout: Duration,
}

impl TcpControlPlane {
    /// Connect every switch of `fabric` to the controller at `addr`.
    pub fn connect(addr: impl ToSocketAddrs + Copy, fabric: &SimFabric) -> io::Result<Self> {
        let mut agents = BTreeMap::new();
        for (_, handle) in fabric.switches() {
            let agent = SimAgent::connect(addr, handle.clone())?;
            agents.insert(agent.dp_id, agent);
        }
        Ok(TcpControlPlane {
            agents,
            round_trip_timeout: DEFAULT_ROUND_TRIP_TIMEOUT,
        })
    }

    pub fn empty() -> Self {
        TcpControlPlane {
            agents: BTreeMap::new(),
            round_trip_timeout: DEFAULT_ROUND_TRIP_TIMEOUT,
        }
    }

    pub fn insert(&mut self, agent: SimAgent) {
        self.agents.insert(agent.dp_id, agent);
    }

    pub fn agent(&self, dp_id: u64) -> Option<&SimAgent> {
        self.agents.get(&dp_id)
    }

    pub fn remove(&mut self, dp_id: u64) -> Option<SimAgent> {
        self.agents.remove(&dp_id)
    }

    /// Wait for every agent's initial sync; false if any did not finish.
    pub fn wait_synced(&self, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        self.agents
            .values()
            .all(|a| a.wait_synced(deadline.saturating_duration_since(Instant::now())))
    }
}

impl ControlPlane for TcpControlPlane {
    fn packet_in(&mut self, dp_id: u64, pi: &PacketIn, _now_ms: u64) -> Vec<OfBody> {
        match self.agents.get(&dp_id) {
            Some(a) => a.round_trip(pi, self.round_trip_timeout),
            None => Vec::new(),
        }
    }
}
