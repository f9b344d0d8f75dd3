//! An in-process controller for driving the simulator without sockets.

use std::collections::BTreeMap;

use super::fabric::SimFabric;
use super::switch::ControlPlane;
use crate::compile::{compile_datapath, plan_update, CompileError, FlowUpdatePlan, PlanStep};
use crate::config::FabricConfig;
use crate::learning::L2Table;
use crate::ofp::{FlowMod, FlowModCommand, Match, OfBody, OfMessage, PacketIn, OFPTT_ALL};

pub struct LocalController {
    pub cfg: FabricConfig,
    pub l2: L2Table,
}

impl LocalController {
    pub fn new(cfg: FabricConfig) -> Self {
        LocalController {
            cfg,
            l2: L2Table::default(),
        }
    }

    /// Bring up every configured switch: wipe its tables and push the
    /// compiled ones. Switches with unconfigured dp_ids stay disconnected.
    pub fn connect(&mut self, fabric: &SimFabric) -> Result<(), CompileError> {
        for (_, handle) in fabric.switches() {
            let mut sw = handle.lock().unwrap();
            let Some((name, _)) = self.cfg.dp_by_id(sw.dp_id) else {
                continue;
            };
            let table = compile_datapath(&self.cfg, name)?;
            sw.handle_message(&OfMessage::new(
                0,
                OfBody::FlowMod(FlowMod::new(FlowModCommand::Delete, OFPTT_ALL, 0, Match::new())),
            ));
            for e in &table.entries {
                sw.handle_message(&OfMessage::new(0, OfBody::FlowMod(e.to_flow_mod(FlowModCommand::Add))));
            }
            sw.handle_message(&OfMessage::new(0, OfBody::BarrierRequest));
            sw.connected = true;
        }
        Ok(())
    }

    /// Move connected switches to `new_cfg`'s tables; returns each plan.
    pub fn apply(&mut self, fabric: &SimFabric, new_cfg: FabricConfig) -> Result<BTreeMap<String, FlowUpdatePlan>, CompileError> {
        let mut plans = BTreeMap::new();
        for (_, handle) in fabric.switches() {
            let mut sw = handle.lock().unwrap();
            if !sw.connected {
                continue;
            }
            let (Some((old_name, _)), Some((new_name, _))) = (self.cfg.dp_by_id(sw.dp_id), new_cfg.dp_by_id(sw.dp_id)) else {
                continue;
            };
            let current = compile_datapath(&self.cfg, old_name)?;
            let target = compile_datapath(&new_cfg, new_name)?;
            let plan = plan_update(&current, &target)?;
            for step in &plan.steps {
                let body = match step {
                    PlanStep::FlowMod(fm) => OfBody::FlowMod(fm.clone()),
                    PlanStep::Barrier => OfBody::BarrierRequest,
                };
                sw.handle_message(&OfMessage::new(0, body));
            }
            plans.insert(new_name.to_string(), plan);
        }
        self.cfg = new_cfg;
        Ok(plans)
    }
}

impl ControlPlane for LocalController {
    fn packet_in(&mut self, dp_id: u64, pi: &PacketIn, now_ms: u64) -> Vec<OfBody> {
        let Some((name, _)) = self.cfg.dp_by_id(dp_id) else {
            return Vec::new();
        };
        let name = name.to_string();
        self.l2.handle_packet_in(&self.cfg, &name, pi, now_ms)
    }
}
