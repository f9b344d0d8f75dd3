use std::collections::BTreeMap;

use serde::Serialize;

use super::{CompileError, FlowEntry, FlowTable};
use crate::ofp::{FlowMod, FlowModCommand, Match};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanStep {
    FlowMod(FlowMod),
    Barrier,
}

/// FlowMods taking a switch from one compiled table to another. Deletes
/// come first, then adds; a barrier closes the plan. Replacing the
/// instructions of an existing entry is an ADD on the same key, which
/// OpenFlow treats as an overwrite.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FlowUpdatePlan {
    pub dp_id: u64,
    pub steps: Vec<PlanStep>,
    pub added: usize,
    pub removed: usize,
    pub modified: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PlanCounts {
    pub added: usize,
    pub removed: usize,
    pub modified: usize,
}

impl FlowUpdatePlan {
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn flow_mods(&self) -> impl Iterator<Item = &FlowMod> {
        self.steps.iter().filter_map(|s| match s {
            PlanStep::FlowMod(fm) => Some(fm),
            PlanStep::Barrier => None,
        })
    }

    pub fn barriers(&self) -> usize {
        self.steps.iter().filter(|s| matches!(s, PlanStep::Barrier)).count()
    }

    pub fn counts(&self) -> PlanCounts {
        PlanCounts {
            added: self.added,
            removed: self.removed,
            modified: self.modified,
        }
    }
}

pub fn plan_update(current: &FlowTable, target: &FlowTable) -> Result<FlowUpdatePlan, CompileError> {
    if current.dp_id != target.dp_id {
        return Err(CompileError::DpIdMismatch {
            current: current.dp_id,
            target: target.dp_id,
        });
    }
    let index = |t: &FlowTable| -> BTreeMap<(u8, u16, Match), FlowEntry> {
        t.entries
            .iter()
            .map(|e| ((e.table_id, e.priority, e.matches.clone()), e.clone()))
            .collect()
    };
    let cur = index(current);
    let tgt = index(target);

    let mut plan = FlowUpdatePlan {
        dp_id: target.dp_id,
        ..Default::default()
    };
    for (key, e) in &cur {
        if !tgt.contains_key(key) {
            let mut fm = e.to_flow_mod(FlowModCommand::DeleteStrict);
            fm.instructions.clear();
            plan.steps.push(PlanStep::FlowMod(fm));
            plan.removed += 1;
        }
    }
    for (key, e) in &tgt {
        match cur.get(key) {
            None => plan.added += 1,
            Some(old) if old != e => plan.modified += 1,
            Some(_) => continue,
        }
        plan.steps.push(PlanStep::FlowMod(e.to_flow_mod(FlowModCommand::Add)));
    }
    if !plan.steps.is_empty() {
        plan.steps.push(PlanStep::Barrier);
    }
    Ok(plan)
}
