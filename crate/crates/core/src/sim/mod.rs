//! A deterministic simulated switch fabric with hosts and traffic
//! generators, for exercising the controller end to end.

mod fabric;
mod local;
mod switch;
mod topology;

pub use fabric::{AdvanceSummary, FlowLedger, HostLedger, SimError, SimFabric, SimReport, SwitchHandle, ANNOUNCE_BYTES};
pub use local::LocalController;
pub use switch::{ControlPlane, Disconnected, FrameOutcome, SimEntry, SimSwitch, SIM_TABLES};
pub use topology::{
    parse_topology, FlowSpec, HostSpec, SwitchSpec, TopologyError, TopologySpec, DEFAULT_TICK_MS, MAX_FRAME_BYTES,
    MIN_FRAME_BYTES,
};
