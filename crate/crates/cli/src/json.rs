//! JSON documents of the API and of `--format json` output. Every document
//! carries the schema version `"v": 1`.

use std::collections::{BTreeMap, BTreeSet};

use rybu_core::imds::{ActionId, AgentSlot, Configuration, NamedConfiguration, SystemModel};
use rybu_core::lts::{
    find_partial_deadlocks, find_total_deadlocks, Completeness, DeadlockReport, Lts, Statistics,
    Verdict,
};
use rybu_core::report::{build_trace, TraceDocument};
use rybu_core::rybu::Value;
use serde::Serialize;

use crate::input::Loaded;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct ActionView {
    pub id: ActionId,
    pub agent: String,
    /// Consumed message as `server.service`.
    pub message: String,
    pub text: String,
    /// State of the acting server after the action, as `server.value`.
    pub next_state: String,
    /// The agent's next message, absent when the action terminates it.
    pub next_message: Option<String>,
}

impl ActionView {
    pub fn new(model: &SystemModel, id: ActionId) -> Self {
        let a = model.action(id).expect("ids come from the model");
        let msg = |m: rybu_core::imds::Message| {
            format!(
                "{}.{}",
                model.server_name(m.server),
                model.service_name(m.service)
            )
        };
        Self {
            id,
            agent: model.agent_name(a.agent()).to_string(),
            message: msg(a.in_message),
            text: model.fmt_action(a),
            next_state: model.fmt_state(&a.out_state),
            next_message: a.out_message.map(msg),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ServerView {
    pub name: String,
    pub state: String,
    /// Values of the Rybu state variables behind `state`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vars: Option<BTreeMap<String, Value>>,
}

#[derive(Debug, Serialize)]
pub struct AgentView {
    pub name: String,
    pub terminated: bool,
    pub message: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct StateView {
    pub v: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub session: Option<u64>,
    pub step: usize,
    pub configuration: NamedConfiguration,
    pub servers: Vec<ServerView>,
    pub agents: Vec<AgentView>,
    pub enabled: Vec<ActionView>,
    pub deadlock: bool,
}

impl StateView {
    pub fn new(loaded: &Loaded, config: &Configuration, step: usize, session: Option<u64>) -> Self {
        let model = &loaded.model;
        let enabled = model.enabled_actions(config).unwrap_or_default();
        let servers = model
            .servers()
            .map(|s| {
                let name = model.server_name(s).to_string();
                let state = config
                    .state(s)
                    .map(|v| model.value_name(v).to_string())
                    .unwrap_or_default();
                let vars = loaded.state_vars(&name, &state);
                ServerView { name, state, vars }
            })
            .collect();
        let agents = model
            .agents()
            .map(|a| AgentView {
                name: model.agent_name(a).to_string(),
                terminated: config.slot(a) == Some(AgentSlot::Terminated),
                message: config.pending(a).map(|m| {
                    format!(
                        "{}.{}",
                        model.server_name(m.server),
                        model.service_name(m.service)
                    )
                }),
            })
            .collect();
        Self {
            v: SCHEMA_VERSION,
            session,
            step,
            configuration: model.named_configuration(config),
            servers,
            agents,
            deadlock: config.has_pending() && enabled.is_empty(),
            enabled: enabled
                .into_iter()
                .map(|id| ActionView::new(model, id))
                .collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ServerDecl {
    pub name: String,
    pub values: Vec<String>,
    pub services: Vec<String>,
    pub initial: String,
}

#[derive(Debug, Serialize)]
pub struct ModelView {
    pub v: u32,
    pub name: String,
    pub servers: Vec<ServerDecl>,
    pub agents: Vec<String>,
    pub actions: Vec<ActionView>,
}

impl ModelView {
    pub fn new(model: &SystemModel) -> Self {
        let servers = model
            .servers()
            .map(|s| {
                let services: BTreeSet<String> = model
                    .messages_decl()
                    .iter()
                    .filter(|m| m.server == s)
                    .map(|m| model.service_name(m.service).to_string())
                    .collect();
                ServerDecl {
                    name: model.server_name(s).to_string(),
                    values: model
                        .server_values(s)
                        .into_iter()
                        .map(|v| model.value_name(v).to_string())
                        .collect(),
                    services: services.into_iter().collect(),
                    initial: model
                        .initial()
                        .state(s)
                        .map(|v| model.value_name(v).to_string())
                        .unwrap_or_default(),
                }
            })
            .collect();
        Self {
            v: SCHEMA_VERSION,
            name: model.name().to_string(),
            servers,
            agents: model
                .agents()
                .map(|a| model.agent_name(a).to_string())
                .collect(),
            actions: (0..model.actions().len())
                .map(|i| ActionView::new(model, ActionId::from_index(i)))
                .collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct TotalView {
    pub node: usize,
    pub configuration: NamedConfiguration,
    pub path: Vec<ActionId>,
}

#[derive(Debug, Serialize)]
pub struct PartialView {
    pub agent: String,
    pub node: usize,
    pub configuration: NamedConfiguration,
    pub path: Vec<ActionId>,
}

#[derive(Debug, Serialize)]
pub struct VerifyView {
    pub v: u32,
    pub model: String,
    pub verdict: Verdict,
    pub statistics: Statistics,
    pub total_deadlocks: Vec<TotalView>,
    pub partial_deadlocks: Vec<PartialView>,
    /// Trace of the shortest witness.
    pub witness: Option<TraceDocument>,
}

impl VerifyView {
    pub fn new(model: &SystemModel, lts: &Lts, report: &DeadlockReport) -> Self {
        let config =
            |n: usize| model.named_configuration(lts.node(n).expect("reported nodes exist"));
        Self {
            v: SCHEMA_VERSION,
            model: model.name().to_string(),
            verdict: report.verdict,
            statistics: report.statistics.clone(),
            total_deadlocks: report
                .total_deadlocks
                .iter()
                .map(|t| TotalView {
                    node: t.node,
                    configuration: config(t.node),
                    path: t.path.clone(),
                })
                .collect(),
            partial_deadlocks: report
                .partial_deadlocks
                .iter()
                .map(|p| PartialView {
                    agent: model.agent_name(p.agent).to_string(),
                    node: p.node,
                    configuration: config(p.node),
                    path: p.path.clone(),
                })
                .collect(),
            witness: report
                .primary_witness()
                .map(|(_, path)| build_trace(model, path).expect("witnesses replay")),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct NodeView {
    pub id: usize,
    pub configuration: NamedConfiguration,
    pub deadlock: bool,
}

#[derive(Debug, Serialize)]
pub struct EdgeView {
    pub from: usize,
    pub to: usize,
    pub action: ActionId,
    pub label: String,
}

#[derive(Debug, Serialize)]
pub struct GraphView {
    pub v: u32,
    pub status: Completeness,
    pub nodes: Vec<NodeView>,
    pub edges: Vec<EdgeView>,
    /// Earliest partial deadlocks as (agent, node); empty when incomplete.
    pub partial_deadlocks: Vec<(String, usize)>,
}

impl GraphView {
    pub fn new(model: &SystemModel, lts: &Lts) -> Self {
        let total: BTreeSet<usize> = find_total_deadlocks(lts)
            .unwrap_or_default()
            .into_iter()
            .collect();
        Self {
            v: SCHEMA_VERSION,
            status: lts.status(),
            nodes: lts
                .nodes()
                .map(|(id, c)| NodeView {
                    id,
                    configuration: model.named_configuration(c),
                    deadlock: total.contains(&id),
                })
                .collect(),
            edges: lts
                .edges()
                .iter()
                .map(|e| {
                    let a = lts.action(e.action);
                    EdgeView {
                        from: e.from,
                        to: e.to,
                        action: e.action,
                        label: format!(
                            "{}:{}.{}",
                            model.agent_name(a.agent()),
                            model.server_name(a.in_message.server),
                            model.service_name(a.in_message.service)
                        ),
                    }
                })
                .collect(),
            partial_deadlocks: find_partial_deadlocks(lts, model)
                .unwrap_or_default()
                .into_iter()
                .map(|p| (model.agent_name(p.agent).to_string(), p.node))
                .collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorView {
    pub v: u32,
    pub error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enabled: Option<Vec<ActionView>>,
}

impl ErrorView {
    pub fn new(error: impl Into<String>) -> Self {
        Self {
            v: SCHEMA_VERSION,
            error: error.into(),
            enabled: None,
        }
    }
}
