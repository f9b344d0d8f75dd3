//! Wiring of the whole service: control endpoint, stats poller, admin API
//! and metrics endpoint sharing one configuration and one metric store.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use sdx_core::config::FabricConfig;
use sdx_core::stats::{MetricStore, DEFAULT_CAPACITY, DEFAULT_RATE_WINDOW_S};
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

use crate::api::{self, AppState, SharedState, DEFAULT_ADMIN_PORT, DEFAULT_METRICS_PORT};
use crate::clock::{SharedClock, SystemClock};
use crate::controller::{Controller, ControllerHandle, ControllerSettings, StartError, DEFAULT_CONTROL_PORT};
use crate::poller::{StatsPoller, DEFAULT_POLL_INTERVAL};
use crate::status::{Endpoints, Heartbeats, StatusBoard, LIVENESS_WINDOW_MS};
use crate::users::UserDb;

pub struct ServiceSettings {
    pub control_addr: String,
    pub admin_addr: String,
    pub metrics_addr: String,
    pub users: UserDb,
    pub users_path: Option<PathBuf>,
    pub controller: ControllerSettings,
    pub poll_interval: Duration,
    pub poll_timeout: Duration,
    /// Start the background poll loop. Tests that drive cycles by hand
    /// turn this off.
    pub run_poller: bool,
    pub rate_window_s: f64,
    pub liveness_window_ms: u64,
    pub store_capacity: usize,
    pub clock: SharedClock,
}

impl ServiceSettings {
    /// Default ports on all interfaces, overridable through
    /// SDX_CONTROL_PORT, SDX_ADMIN_PORT and SDX_METRICS_PORT.
    pub fn from_env(users: UserDb) -> Self {
        let port = |var: &str, default: u16| {
            std::env::var(var)
                .ok()
                .and_then(|v| v.parse::<u16>().ok())
                .unwrap_or(default)
        };
        let mut s = Self::loopback(users);
        s.control_addr = format!("0.0.0.0:{}", port("SDX_CONTROL_PORT", DEFAULT_CONTROL_PORT));
        s.admin_addr = format!("0.0.0.0:{}", port("SDX_ADMIN_PORT", DEFAULT_ADMIN_PORT));
        s.metrics_addr = format!("0.0.0.0:{}", port("SDX_METRICS_PORT", DEFAULT_METRICS_PORT));
        s
    }

    /// Ephemeral loopback ports for every endpoint.
    pub fn loopback(users: UserDb) -> Self {
        ServiceSettings {
            control_addr: "127.0.0.1:0".into(),
            admin_addr: "127.0.0.1:0".into(),
            metrics_addr: "127.0.0.1:0".into(),
            users,
            users_path: None,
            controller: ControllerSettings::default(),
            poll_interval: DEFAULT_POLL_INTERVAL,
            poll_timeout: Duration::from_secs(5),
            run_poller: true,
            rate_window_s: DEFAULT_RATE_WINDOW_S,
            liveness_window_ms: LIVENESS_WINDOW_MS,
            store_capacity: DEFAULT_CAPACITY,
            clock: Arc::new(SystemClock::new()),
        }
    }
}

pub struct Service {
    pub controller: Controller,
    pub poller: Arc<StatsPoller>,
    pub state: SharedState,
    pub board: Arc<StatusBoard>,
    pub control_addr: SocketAddr,
    pub admin_addr: SocketAddr,
    pub metrics_addr: SocketAddr,
    pub clock: SharedClock,
    endpoints: Arc<Endpoints>,
    controller_handle: ControllerHandle,
    poller_task: Mutex<Option<JoinHandle<()>>>,
    servers: Vec<JoinHandle<()>>,
}

async fn bind(addr: &str) -> Result<TcpListener, StartError> {
    TcpListener::bind(addr).await.map_err(|source| StartError::Bind {
        addr: addr.to_string(),
        source,
    })
}

fn serve_http(listener: TcpListener, router: axum::Router, name: &'static str, endpoints: Arc<Endpoints>) -> JoinHandle<()> {
    tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, router).await {
            tracing::error!("{name} endpoint failed: {e}");
        }
        endpoints.mark_down(name);
    })
}

impl Service {
    pub async fn start(cfg: FabricConfig, settings: ServiceSettings) -> Result<Service, StartError> {
        let clock = settings.clock.clone();
        let heartbeats = Arc::new(Heartbeats::new(clock.clone(), settings.liveness_window_ms));
        let endpoints = Arc::new(Endpoints::default());
        let controller = Controller::new(cfg.clone(), settings.controller.clone(), clock.clone(), heartbeats.clone())?;

        // bind everything before serving anything, so a clash fails cleanly
        let admin_listener = bind(&settings.admin_addr).await?;
        let metrics_listener = bind(&settings.metrics_addr).await?;
        let handle = controller.clone().start(&settings.control_addr).await?;
        let admin_addr = admin_listener.local_addr().expect("bound");
        let metrics_addr = metrics_listener.local_addr().expect("bound");
        endpoints.set("control", handle.local_addr.to_string(), true);
        endpoints.set("admin", admin_addr.to_string(), true);
        endpoints.set("metrics", metrics_addr.to_string(), true);

        let store = Arc::new(RwLock::new(MetricStore::new(settings.store_capacity)));
        let poller = Arc::new(StatsPoller::new(
            controller.clone(),
            store.clone(),
            settings.poll_timeout,
            heartbeats.clone(),
        ));
        let board = Arc::new(StatusBoard::new(controller.clone(), heartbeats, endpoints.clone()));
        let state = Arc::new(AppState {
            controller: controller.clone(),
            store,
            board: board.clone(),
            staged: Mutex::new(cfg),
            users: RwLock::new(settings.users),
            users_path: settings.users_path,
            rate_window_s: settings.rate_window_s,
        });

        let servers = vec![
            serve_http(admin_listener, api::router(state.clone()), "admin", endpoints.clone()),
            serve_http(metrics_listener, api::metrics_router(state.clone()), "metrics", endpoints.clone()),
        ];
        let poller_task = settings
            .run_poller
            .then(|| poller.clone().spawn(clock.clone(), settings.poll_interval));

        Ok(Service {
            controller,
            poller,
            state,
            board,
            control_addr: handle.local_addr,
            admin_addr,
            metrics_addr,
            clock,
            endpoints,
            controller_handle: handle,
            poller_task: Mutex::new(poller_task),
            servers,
        })
    }

    /// Kill the background poll loop and wait until it has stopped, so no
    /// heartbeat follows the return.
    pub async fn stop_poller(&self) {
        let task = self.poller_task.lock().unwrap().take();
        if let Some(t) = task {
            t.abort();
            let _ = t.await;
        }
    }

    pub fn shutdown(&self) {
        if let Some(t) = self.poller_task.lock().unwrap().take() {
            t.abort();
        }
        self.controller_handle.abort();
        self.endpoints.mark_down("control");
        for s in &self.servers {
            s.abort();
        }
        self.endpoints.mark_down("admin");
        self.endpoints.mark_down("metrics");
    }
}

impl Drop for Service {
    fn drop(&mut self) {
        self.shutdown();
    }
}
