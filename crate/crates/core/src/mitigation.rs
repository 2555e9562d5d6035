//! Resilience measures for diagnosed faults. Plans are declarative: an
//! ordered action list an external orchestrator can execute.
//!
//! JSON schema:
//! ```json
//! { "verdict": "outage_r1_r2",
//!   "actions": [ { "action": "backhaul_switch", "target": ["N7", "N1", "N0"],
//!                  "rationale": "..." },
//!                { "action": "repair_dispatch", "target": ["R1:eth-r2", "R2:eth-r1"],
//!                  "components": [{ "router": "R1", "interface": "eth-r2" }, ...],
//!                  "rationale": "..." } ] }
//! ```
//! `bridged_path` appears on `hap_dispatch` only; `components` on
//! `repair_dispatch` only.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::{Component, Diagnosis, RootCause, Verdict};
use crate::simnet::{Medium, NetworkRole, NodeKind, Topology};

/// Label of the temporary relay in a HAP bridged path.
pub const HAP_NODE: &str = "HAP";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MitigationError {
    #[error("fault verdict {0} carries no root cause")]
    MissingRootCause(&'static str),
    #[error("root cause names unknown link {0}")]
    UnknownLink(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    BackhaulSwitch,
    HapDispatch,
    BandSwitch,
    RepairDispatch,
    None,
    DeferToNid,
}

impl ActionKind {
    pub fn name(self) -> &'static str {
        match self {
            ActionKind::BackhaulSwitch => "backhaul_switch",
            ActionKind::HapDispatch => "hap_dispatch",
            ActionKind::BandSwitch => "band_switch",
            ActionKind::RepairDispatch => "repair_dispatch",
            ActionKind::None => "none",
            ActionKind::DeferToNid => "defer_to_nid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub action: ActionKind,
    /// Link, router, network or `router:interface` ids.
    pub target: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bridged_path: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<Component>>,
    pub rationale: String,
}

impl Action {
    fn new(action: ActionKind, target: Vec<String>, rationale: String) -> Self {
        Self {
            action,
            target,
            bridged_path: None,
            components: None,
            rationale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MitigationPlan {
    pub verdict: String,
    pub actions: Vec<Action>,
}

impl MitigationPlan {
    pub fn has(&self, kind: ActionKind) -> bool {
        self.actions.iter().any(|a| a.action == kind)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

/// Rules, in list order: backhaul switch for dual-homed communities that
/// keep a surviving backhaul; HAP bridge for cellular communities left with
/// no backhaul while a satellite still reaches the backbone; band switch for
/// weather on a satellite link; repair dispatch for every fault.
pub fn plan(diagnosis: &Diagnosis, topology: &Topology) -> Result<MitigationPlan, MitigationError> {
    let verdict = diagnosis.verdict.name().to_string();
    let actions = match diagnosis.verdict {
        Verdict::Normal => vec![Action::new(
            ActionKind::None,
            Vec::new(),
            "no anomaly identified".into(),
        )],
        Verdict::Intrusion(c) => vec![Action::new(
            ActionKind::DeferToNid,
            Vec::new(),
            format!(
                "{} is an intrusion; countermeasures belong to intrusion response",
                c.name()
            ),
        )],
        Verdict::Fault(f) => {
            let rc = diagnosis
                .root_cause
                .as_ref()
                .ok_or(MitigationError::MissingRootCause(f.name()))?;
            fault_actions(rc, topology)?
        }
    };
    Ok(MitigationPlan { verdict, actions })
}

fn fault_actions(rc: &RootCause, topology: &Topology) -> Result<Vec<Action>, MitigationError> {
    let link = topology
        .link(&rc.link)
        .ok_or_else(|| MitigationError::UnknownLink(rc.link.clone()))?;
    let failed = [rc.link.as_str()];
    let mut actions = Vec::new();
    let mut haps = Vec::new();

    for net in topology.networks().iter().filter(|n| n.role.is_community()) {
        let before = topology.backhaul_paths(&net.id, &[]);
        let after = topology.backhaul_paths(&net.id, &failed);
        let lost: Vec<&String> = before.iter().filter(|b| !after.contains(b)).collect();
        if lost.is_empty() {
            continue;
        }
        if before.len() >= 2 && !after.is_empty() {
            let mut target = vec![net.id.clone()];
            target.extend(lost.iter().map(|b| b.to_string()));
            target.push(after[0].clone());
            actions.push(Action::new(
                ActionKind::BackhaulSwitch,
                target,
                format!(
                    "{} lost backhaul {} with {} down; schedule backup connection over {}",
                    net.id,
                    lost.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(","),
                    rc.link,
                    after[0]
                ),
            ));
        } else if after.is_empty() && net.role == NetworkRole::CommunityCellular {
            if let Some(a) = hap_bridge(&net.id, &failed, topology) {
                haps.push(a);
            }
        }
    }
    actions.extend(haps);

    if rc.weather_suspected && link.medium == Medium::SatelliteRf {
        actions.push(Action::new(
            ActionKind::BandSwitch,
            vec![rc.link.clone()],
            format!("rain fade suspected on {}; move from Ka to C band", rc.link),
        ));
    }

    let mut repair = Action::new(
        ActionKind::RepairDispatch,
        rc.components
            .iter()
            .map(|c| format!("{}:{}", c.router, c.interface))
            .collect(),
        format!(
            "dispatch repair crew to {} ({} {})",
            rc.link,
            link.medium,
            rc.endpoints.join("-")
        ),
    );
    repair.components = Some(rc.components.clone());
    actions.push(repair);
    Ok(actions)
}

fn hap_bridge(network: &str, failed: &[&str], topology: &Topology) -> Option<Action> {
    let bs = topology
        .routers()
        .iter()
        .find(|r| r.network == network && r.kind == NodeKind::BaseStation)?;
    let sat = topology
        .routers()
        .iter()
        .find(|r| r.kind == NodeKind::Satellite && topology.reaches_backbone(&r.id, failed))?;
    let mut a = Action::new(
        ActionKind::HapDispatch,
        vec![network.to_string(), bs.id.clone(), sat.id.clone()],
        format!(
            "{network} has no backhaul; commission a HAP relay between {} and {}",
            bs.id, sat.id
        ),
    );
    a.bridged_path = Some(vec![bs.id.clone(), HAP_NODE.to_string(), sat.id.clone()]);
    Some(a)
}
