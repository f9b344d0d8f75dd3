//! Core of the SDX fabric controller: configuration model, OpenFlow codec,
//! flow compilation, statistics and the simulated switch fabric.

pub mod compile;
pub mod config;
pub mod eth;
pub mod learning;
pub mod ofp;
pub mod sim;
pub mod stats;
