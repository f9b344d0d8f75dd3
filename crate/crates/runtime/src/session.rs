//! One switch connection as seen from the controller.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use sdx_core::compile::FlowTable;
use sdx_core::ofp::{DecodeError, FrameBuffer, FramingError, OfBody, OfMessage};
use serde::Serialize;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::sync::{mpsc, oneshot, watch};

/// Controller-initiated xids stay below this; switches may use the upper half.
pub const XID_SWITCH_RANGE: u32 = 0x8000_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SessionState {
    Handshake,
    Syncing,
    Steady,
    Dead,
}

impl SessionState {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionState::Handshake => "HANDSHAKE",
            SessionState::Syncing => "SYNCING",
            SessionState::Steady => "STEADY",
            SessionState::Dead => "DEAD",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error("session closed")]
    Closed,
    #[error("timed out waiting for {0}")]
    Timeout(&'static str),
    #[error("switch answered with an error (type {err_type}, code {code})")]
    Rejected { err_type: u16, code: u16 },
    #[error("unexpected reply {0}")]
    Unexpected(&'static str),
}

pub(crate) enum Outgoing {
    Msg(OfMessage),
    Close,
}

/// Reads whole OpenFlow messages from the socket.
pub(crate) struct MsgReader {
    rd: OwnedReadHalf,
    buf: FrameBuffer,
    chunk: Vec<u8>,
}

#[derive(Debug, thiserror::Error)]
pub(crate) enum ReadError {
    #[error("connection closed")]
    Eof,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Framing(#[from] FramingError),
}

impl MsgReader {
    pub fn new(rd: OwnedReadHalf) -> Self {
        MsgReader {
            rd,
            buf: FrameBuffer::new(),
            chunk: vec![0; 64 * 1024],
        }
    }

    /// The next frame, decoded. Decode failures are returned with the raw
    /// frame so the caller can decide whether the session survives.
    pub async fn next(&mut self) -> Result<(Vec<u8>, Result<OfMessage, DecodeError>), ReadError> {
        loop {
            if let Some(frame) = self.buf.next_frame()? {
                let msg = OfMessage::decode(&frame);
                return Ok((frame, msg));
            }
            let n = self.rd.read(&mut self.chunk).await?;
            if n == 0 {
                return Err(ReadError::Eof);
            }
            self.buf.extend(&self.chunk[..n]);
        }
    }
}

pub(crate) fn spawn_writer(mut wr: OwnedWriteHalf) -> mpsc::UnboundedSender<Outgoing> {
    let (tx, mut rx) = mpsc::unbounded_channel::<Outgoing>();
    tokio::spawn(async move {
        while let Some(out) = rx.recv().await {
            match out {
                Outgoing::Msg(m) => {
                    let bytes = match m.encode() {
                        Ok(b) => b,
                        Err(e) => {
                            tracing::error!("dropping unencodable {}: {e}", m.body.name());
                            continue;
                        }
                    };
                    if wr.write_all(&bytes).await.is_err() {
                        break;
                    }
                }
                Outgoing::Close => break,
            }
        }
        let _ = wr.shutdown().await;
    });
    tx
}

pub struct Session {
    pub dp_id: u64,
    pub peer: SocketAddr,
    pub version: u8,
    dp_name: Mutex<String>,
    state: Mutex<SessionState>,
    tx: mpsc::UnboundedSender<Outgoing>,
    pending: Mutex<HashMap<u32, oneshot::Sender<OfMessage>>>,
    next_xid: AtomicU32,
    echo_rtt_ms: Mutex<Option<f64>>,
    last_echo_reply: Mutex<Instant>,
    table: Mutex<Option<FlowTable>>,
    flow_mods_sent: AtomicU64,
    killed: watch::Sender<bool>,
}

impl Session {
    pub(crate) fn new(
        dp_id: u64,
        dp_name: &str,
        peer: SocketAddr,
        version: u8,
        tx: mpsc::UnboundedSender<Outgoing>,
        next_xid: u32,
    ) -> Self {
        Session {
            dp_id,
            peer,
            version,
            dp_name: Mutex::new(dp_name.to_string()),
            state: Mutex::new(SessionState::Syncing),
            tx,
            pending: Mutex::new(HashMap::new()),
            next_xid: AtomicU32::new(next_xid),
            echo_rtt_ms: Mutex::new(None),
            last_echo_reply: Mutex::new(Instant::now()),
            table: Mutex::new(None),
            flow_mods_sent: AtomicU64::new(0),
            killed: watch::Sender::new(false),
        }
    }

    pub fn dp_name(&self) -> String {
        self.dp_name.lock().unwrap().clone()
    }

    pub(crate) fn set_dp_name(&self, name: &str) {
        *self.dp_name.lock().unwrap() = name.to_string();
    }

    pub fn state(&self) -> SessionState {
        *self.state.lock().unwrap()
    }

    pub(crate) fn set_state(&self, s: SessionState) {
        let mut st = self.state.lock().unwrap();
        if *st != SessionState::Dead {
            *st = s;
        }
    }

    pub fn echo_rtt_ms(&self) -> Option<f64> {
        *self.echo_rtt_ms.lock().unwrap()
    }

    /// The compiled table last confirmed on the switch.
    pub fn table(&self) -> Option<FlowTable> {
        self.table.lock().unwrap().clone()
    }

    pub(crate) fn set_table(&self, t: Option<FlowTable>) {
        *self.table.lock().unwrap() = t;
    }

    pub fn fingerprint(&self) -> Option<String> {
        self.table.lock().unwrap().as_ref().map(|t| t.fingerprint.clone())
    }

    pub fn flow_mods_sent(&self) -> u64 {
        self.flow_mods_sent.load(Ordering::Relaxed)
    }

    pub(crate) fn alloc_xid(&self) -> u32 {
        loop {
            let x = self.next_xid.fetch_add(1, Ordering::Relaxed) % XID_SWITCH_RANGE;
            if x != 0 {
                return x;
            }
        }
    }

    pub(crate) fn send_with_xid(&self, xid: u32, body: OfBody) -> Result<(), SessionError> {
        if self.state() == SessionState::Dead {
            return Err(SessionError::Closed);
        }
        if matches!(body, OfBody::FlowMod(_)) {
            self.flow_mods_sent.fetch_add(1, Ordering::Relaxed);
        }
        self.tx
            .send(Outgoing::Msg(OfMessage::new(xid, body)))
            .map_err(|_| SessionError::Closed)
    }

    pub fn send(&self, body: OfBody) -> Result<u32, SessionError> {
        let xid = self.alloc_xid();
        self.send_with_xid(xid, body)?;
        Ok(xid)
    }

    /// Send a request and wait for the message answering its xid.
    pub async fn request(&self, body: OfBody, timeout: Duration) -> Result<OfMessage, SessionError> {
        let what = body.name();
        let xid = self.alloc_xid();
        let (tx, rx) = oneshot::channel();
        self.pending.lock().unwrap().insert(xid, tx);
        if let Err(e) = self.send_with_xid(xid, body) {
            self.pending.lock().unwrap().remove(&xid);
            return Err(e);
        }
        let reply = match tokio::time::timeout(timeout, rx).await {
            Ok(Ok(m)) => m,
            Ok(Err(_)) => return Err(SessionError::Closed),
            Err(_) => {
                self.pending.lock().unwrap().remove(&xid);
                return Err(SessionError::Timeout(what));
            }
        };
        if let OfBody::Error(e) = &reply.body {
            return Err(SessionError::Rejected {
                err_type: e.err_type,
                code: e.code,
            });
        }
        Ok(reply)
    }

    pub async fn barrier(&self, timeout: Duration) -> Result<(), SessionError> {
        match self.request(OfBody::BarrierRequest, timeout).await?.body {
            OfBody::BarrierReply => Ok(()),
            other => Err(SessionError::Unexpected(other.name())),
        }
    }

    /// Route a reply to whoever is waiting on its xid; false if nobody is.
    pub(crate) fn resolve(&self, msg: OfMessage) -> bool {
        match self.pending.lock().unwrap().remove(&msg.xid) {
            Some(tx) => {
                let _ = tx.send(msg);
                true
            }
            None => false,
        }
    }

    pub(crate) fn echo_sent_payload(origin: Instant) -> Vec<u8> {
        (origin.elapsed().as_micros() as u64).to_be_bytes().to_vec()
    }

    pub(crate) fn echo_replied(&self, origin: Instant, payload: &[u8]) {
        *self.last_echo_reply.lock().unwrap() = Instant::now();
        if let Ok(b) = <[u8; 8]>::try_from(payload) {
            let sent = u64::from_be_bytes(b);
            let now = origin.elapsed().as_micros() as u64;
            *self.echo_rtt_ms.lock().unwrap() = Some(now.saturating_sub(sent) as f64 / 1000.0);
        }
    }

    pub(crate) fn since_echo_reply(&self) -> Duration {
        self.last_echo_reply.lock().unwrap().elapsed()
    }

    /// Mark the session dead and close the socket. Waiters see `Closed`.
    pub fn kill(&self) {
        *self.state.lock().unwrap() = SessionState::Dead;
        self.pending.lock().unwrap().clear();
        let _ = self.tx.send(Outgoing::Close);
        self.killed.send_replace(true);
    }

    pub(crate) async fn killed(&self) {
        let mut rx = self.killed.subscribe();
        let _ = rx.wait_for(|k| *k).await;
    }
}
