//! The SDX fabric service: OpenFlow controller, stats poller, admin API and
//! the TCP agents that attach simulated switches to it.

pub mod agent;
pub mod api;
pub mod clock;
pub mod controller;
pub mod harness;
pub mod poller;
pub mod service;
pub mod session;
pub mod status;
pub mod users;

pub use agent::{SimAgent, TcpControlPlane};
pub use controller::{ApplyError, ApplyReport, Controller, ControllerSettings, DpReport, StartError};
pub use service::{Service, ServiceSettings};
pub use session::SessionState;
pub use users::{Role, User, UserDb};
