//! Synchronous driver for a simulated fabric attached over TCP to an
//! in-process service. The service runs on its own tokio runtime; the
//! simulator runs on the calling thread.

use std::time::Duration;

use sdx_core::config::FabricConfig;
use sdx_core::sim::{AdvanceSummary, SimFabric, TopologySpec};

use crate::agent::TcpControlPlane;
use crate::controller::{ApplyError, ApplyReport, StartError};
use crate::poller::CycleReport;
use crate::service::{Service, ServiceSettings};

pub const SYNC_TIMEOUT: Duration = Duration::from_secs(15);

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Start(#[from] StartError),
    #[error("topology: {0}")]
    Topology(String),
    #[error("connect: {0}")]
    Connect(#[from] std::io::Error),
    #[error("switches did not reach STEADY within {0:?}")]
    Sync(Duration),
}

// field order is drop order: agents close before the service and runtime go
pub struct Harness {
    pub cp: TcpControlPlane,
    pub fabric: SimFabric,
    pub service: Service,
    pub rt: tokio::runtime::Runtime,
}

pub fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .expect("tokio runtime")
}

impl Harness {
    /// Start a service on loopback, connect every switch of `topology`
    /// and wait until the configured ones are STEADY. Hosts announce
    /// themselves before this returns.
    pub fn start(cfg: FabricConfig, topology: TopologySpec, settings: ServiceSettings) -> Result<Harness, HarnessError> {
        let rt = runtime();
        let service = rt.block_on(Service::start(cfg.clone(), settings))?;
        let mut fabric = SimFabric::load(topology).map_err(|e| HarnessError::Topology(e.to_string()))?;
        let mut cp = TcpControlPlane::connect(service.control_addr, &fabric)?;
        let configured: Vec<u64> = fabric
            .switches()
            .map(|(_, h)| h.lock().unwrap().dp_id)
            .filter(|id| cfg.dp_by_id(*id).is_some())
            .collect();
        let steady = rt.block_on(service.controller.wait_steady(&configured, SYNC_TIMEOUT));
        let synced = configured
            .iter()
            .all(|id| cp.agent(*id).is_some_and(|a| a.wait_synced(SYNC_TIMEOUT)));
        if !steady || !synced {
            return Err(HarnessError::Sync(SYNC_TIMEOUT));
        }
        fabric.announce_hosts(&mut cp);
        Ok(Harness { cp, fabric, service, rt })
    }

    pub fn advance(&mut self, ms: u64) -> AdvanceSummary {
        self.fabric.advance(ms, &mut self.cp)
    }

    /// One stats cycle stamped with the simulator's clock.
    pub fn poll(&self) -> CycleReport {
        self.rt.block_on(self.service.poller.poll_cycle(self.fabric.now_ms()))
    }

    pub fn apply(&self, cfg: FabricConfig) -> Result<ApplyReport, ApplyError> {
        self.rt.block_on(self.service.controller.apply_config(cfg))
    }

    pub fn block_on<F: std::future::Future>(&self, f: F) -> F::Output {
        self.rt.block_on(f)
    }

    /// Base URL of the admin API.
    pub fn api(&self) -> String {
        format!("http://{}", self.service.admin_addr)
    }
}
