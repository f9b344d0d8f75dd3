//! Role heartbeats, listening endpoints and the status snapshot.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use sdx_core::stats::{ProcessSample, ProcessSampler};
use serde::Serialize;

use crate::clock::SharedClock;
use crate::controller::Controller;

pub const ROLE_CONTROLLER: &str = "controller";
pub const ROLE_STATS_POLLER: &str = "stats_poller";

/// A role counts as live if it beat within this many milliseconds.
pub const LIVENESS_WINDOW_MS: u64 = 5000;

pub struct Heartbeats {
    clock: SharedClock,
    window_ms: u64,
    last: Mutex<BTreeMap<&'static str, u64>>,
}

impl Heartbeats {
    pub fn new(clock: SharedClock, window_ms: u64) -> Self {
        Heartbeats {
            clock,
            window_ms,
            last: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn beat(&self, role: &'static str) {
        let now = self.clock.now_ms();
        self.last.lock().unwrap().insert(role, now);
    }

    pub fn is_live(&self, role: &str) -> bool {
        let now = self.clock.now_ms();
        self.last
            .lock()
            .unwrap()
            .get(role)
            .is_some_and(|t| now.saturating_sub(*t) < self.window_ms)
    }

    pub fn last_beat(&self, role: &str) -> Option<u64> {
        self.last.lock().unwrap().get(role).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Endpoint {
    pub name: String,
    pub address: String,
    pub listening: bool,
}

/// Listening state of the control, metrics and admin endpoints.
#[derive(Default)]
pub struct Endpoints {
    inner: Mutex<BTreeMap<String, Endpoint>>,
}

impl Endpoints {
    pub fn set(&self, name: &str, address: String, listening: bool) {
        self.inner.lock().unwrap().insert(
            name.to_string(),
            Endpoint {
                name: name.to_string(),
                address,
                listening,
            },
        );
    }

    pub fn mark_down(&self, name: &str) {
        if let Some(e) = self.inner.lock().unwrap().get_mut(name) {
            e.listening = false;
        }
    }

    pub fn list(&self) -> Vec<Endpoint> {
        self.inner.lock().unwrap().values().cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Roles {
    pub controller: bool,
    pub stats_poller: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSummary {
    pub dp: String,
    pub dp_id: String,
    pub state: String,
    pub version: u8,
    pub echo_rtt_ms: Option<f64>,
    pub fingerprint: Option<String>,
    pub peer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllerStatus {
    pub endpoints: Vec<Endpoint>,
    pub roles: Roles,
    pub cpu_percent: f64,
    pub resident_memory_bytes: u64,
    pub virtual_memory_bytes: u64,
    pub sessions: Vec<SessionSummary>,
    pub active_fingerprint: String,
    pub rejected_sessions: u64,
}

/// Assembles status snapshots from the live parts of the service.
pub struct StatusBoard {
    pub controller: Controller,
    pub heartbeats: Arc<Heartbeats>,
    pub endpoints: Arc<Endpoints>,
    sampler: Mutex<ProcessSampler>,
}

impl StatusBoard {
    pub fn new(controller: Controller, heartbeats: Arc<Heartbeats>, endpoints: Arc<Endpoints>) -> Self {
        StatusBoard {
            controller,
            heartbeats,
            endpoints,
            sampler: Mutex::new(ProcessSampler::new()),
        }
    }

    pub fn process(&self) -> ProcessSample {
        self.sampler.lock().unwrap().sample().unwrap_or_default()
    }

    pub fn snapshot(&self) -> ControllerStatus {
        let p = self.process();
        ControllerStatus {
            endpoints: self.endpoints.list(),
            roles: Roles {
                controller: self.heartbeats.is_live(ROLE_CONTROLLER),
                stats_poller: self.heartbeats.is_live(ROLE_STATS_POLLER),
            },
            cpu_percent: p.cpu_percent,
            resident_memory_bytes: p.resident_memory_bytes,
            virtual_memory_bytes: p.virtual_memory_bytes,
            sessions: self.controller.summaries(),
            active_fingerprint: self.controller.active_fingerprint(),
            rejected_sessions: self.controller.rejected_sessions(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ManualClock;

    #[test]
    fn role_goes_stale_after_window() {
        let clock = ManualClock::new(1000);
        let hb = Heartbeats::new(clock.clone(), LIVENESS_WINDOW_MS);
        assert!(!hb.is_live(ROLE_CONTROLLER));
        hb.beat(ROLE_CONTROLLER);
        clock.advance(4999);
        assert!(hb.is_live(ROLE_CONTROLLER));
        // five seconds without a beat is no longer "within the last 5 s"
        clock.advance(1);
        assert!(!hb.is_live(ROLE_CONTROLLER));
    }
}
