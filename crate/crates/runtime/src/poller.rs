//! The stats role: polls PORT_STATS from every STEADY session into the
//! metric store.

use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use futures::future::join_all;
use sdx_core::ofp::{MultipartReplyBody, MultipartRequest, MultipartRequestBody, OfBody, OFPP_ANY};
use sdx_core::stats::MetricStore;
use serde::Serialize;
use tokio::task::JoinHandle;

use crate::clock::SharedClock;
use crate::controller::Controller;
use crate::status::{Heartbeats, ROLE_STATS_POLLER};

pub const DEFAULT_POLL_INTERVAL: Duration = Duration::from_secs(15);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetResult {
    pub target: String,
    pub success: bool,
    pub appended: u64,
    pub duration_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleReport {
    pub t_ms: u64,
    pub targets: Vec<TargetResult>,
}

impl CycleReport {
    pub fn appended(&self) -> u64 {
        self.targets.iter().map(|t| t.appended).sum()
    }
}

pub struct StatsPoller {
    controller: Controller,
    store: Arc<RwLock<MetricStore>>,
    timeout: Duration,
    heartbeats: Arc<Heartbeats>,
    next_due: Mutex<Option<u64>>,
}

impl StatsPoller {
    pub fn new(controller: Controller, store: Arc<RwLock<MetricStore>>, timeout: Duration, heartbeats: Arc<Heartbeats>) -> Self {
        StatsPoller {
            controller,
            store,
            timeout,
            heartbeats,
            next_due: Mutex::new(None),
        }
    }

    pub fn store(&self) -> &Arc<RwLock<MetricStore>> {
        &self.store
    }

    /// One scrape of every STEADY session, stamped `t_ms`. Targets are
    /// polled concurrently; a slow one only fails itself.
    pub async fn poll_cycle(&self, t_ms: u64) -> CycleReport {
        let sessions = self.controller.steady_sessions();
        let replies = join_all(sessions.iter().map(|s| async move {
            let t0 = Instant::now();
            let req = OfBody::MultipartRequest(MultipartRequest {
                flags: 0,
                body: MultipartRequestBody::PortStats { port_no: OFPP_ANY },
            });
            let r = s.request(req, self.timeout).await;
            (s.dp_name(), r, t0.elapsed())
        }))
        .await;
        let mut targets = Vec::new();
        let mut store = self.store.write().unwrap();
        for (dp, reply, took) in replies {
            let rows = match reply.map(|m| m.body) {
                Ok(OfBody::MultipartReply(r)) => match r.body {
                    MultipartReplyBody::PortStats(rows) => Some(rows),
                    _ => None,
                },
                Ok(_) => None,
                Err(e) => {
                    tracing::warn!("scrape of {dp} failed: {e}");
                    None
                }
            };
            let appended = rows.and_then(|rows| store.record_port_stats(&dp, &rows, t_ms).ok());
            let duration = took.as_secs_f64();
            store.record_scrape(&dp, duration, appended.is_some(), appended.unwrap_or(0));
            targets.push(TargetResult {
                target: dp,
                success: appended.is_some(),
                appended: appended.unwrap_or(0),
                duration_seconds: duration,
            });
        }
        CycleReport { t_ms, targets }
    }

    /// Beat the stats_poller heartbeat and scrape if a cycle is due at
    /// `now_ms`. Cycles are aligned to the first one; missed slots are
    /// skipped rather than replayed.
    pub async fn tick(&self, now_ms: u64, interval: Duration) -> Option<CycleReport> {
        let interval_ms = interval.as_millis().max(1) as u64;
        self.heartbeats.beat(ROLE_STATS_POLLER);
        {
            let mut next = self.next_due.lock().unwrap();
            let due = next.unwrap_or(now_ms);
            if now_ms < due {
                return None;
            }
            let mut n = due + interval_ms;
            while n <= now_ms {
                n += interval_ms;
            }
            *next = Some(n);
        }
        let report = self.poll_cycle(now_ms).await;
        self.heartbeats.beat(ROLE_STATS_POLLER);
        Some(report)
    }

    /// Run `tick` against `clock` at least once a second.
    pub fn spawn(self: Arc<Self>, clock: SharedClock, interval: Duration) -> JoinHandle<()> {
        let period = interval.min(Duration::from_secs(1));
        tokio::spawn(async move {
            let mut ticker = tokio::time::interval(period);
            loop {
                ticker.tick().await;
                self.tick(clock.now_ms(), interval).await;
            }
        })
    }
}
