//! Line-oriented counterexample traces.
//!
//! ```text
//! trace of two_sem: 2 steps
//! initial {sem.up} {A.sem.wait}
//! step 1  agent A  recv sem.wait  sem: up -> down  send proc.ok
//! step 2  agent A  recv proc.ok  proc: p1 -> stop  TERMINATES
//! final {proc.stop, sem.down} {A:terminated}
//! blocked agents: none
//! blocked servers: none
//! ```
//!
//! The footer is omitted for an empty path. Step lines carry enough to be
//! parsed back into action ids with [`parse_trace_actions`].

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write;

use serde::Serialize;

use crate::imds::{Action, ActionId, Configuration, NamedConfiguration, SystemModel};

use super::ReportError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceEvent {
    /// The acting server answers by sending the agent's next message.
    MessagePass {
        agent: String,
        from: String,
        to: String,
        service: String,
    },
    StateChange {
        server: String,
        old: String,
        new: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceStep {
    pub step: usize,
    pub action: ActionId,
    pub agent: String,
    /// The consumed message as `server.service`.
    pub received: String,
    pub events: Vec<TraceEvent>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlockedAgent {
    pub agent: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceDocument {
    pub model: String,
    pub initial: NamedConfiguration,
    pub steps: Vec<TraceStep>,
    #[serde(rename = "final")]
    pub final_configuration: NamedConfiguration,
    /// Agents whose pending message no action can consume at the end.
    pub blocked_agents: Vec<BlockedAgent>,
    /// Servers those messages are waiting at.
    pub blocked_servers: Vec<String>,
}

fn events(model: &SystemModel, a: &Action) -> Vec<TraceEvent> {
    let server = model.server_name(a.server()).to_string();
    let mut out = vec![TraceEvent::StateChange {
        server: server.clone(),
        old: model.value_name(a.in_state.value).to_string(),
        new: model.value_name(a.out_state.value).to_string(),
    }];
    if let Some(m) = a.out_message {
        out.push(TraceEvent::MessagePass {
            agent: model.agent_name(m.agent).to_string(),
            from: server,
            to: model.server_name(m.server).to_string(),
            service: model.service_name(m.service).to_string(),
        });
    }
    out
}

/// Replays `path` from the initial configuration and records every step.
pub fn build_trace(model: &SystemModel, path: &[ActionId]) -> Result<TraceDocument, ReportError> {
    let mut config = model.initial().clone();
    let mut steps = Vec::with_capacity(path.len());
    for (i, &id) in path.iter().enumerate() {
        let not_enabled = ReportError::NotEnabled {
            step: i + 1,
            action: id.index(),
        };
        let action = model.action(id).map_err(|_| not_enabled.clone())?;
        config = config.apply(action).map_err(|_| not_enabled)?;
        steps.push(TraceStep {
            step: i + 1,
            action: id,
            agent: model.agent_name(action.agent()).to_string(),
            received: format!(
                "{}.{}",
                model.server_name(action.in_message.server),
                model.service_name(action.in_message.service)
            ),
            events: events(model, action),
        });
    }
    let (blocked_agents, blocked_servers) = blocked(model, &config);
    Ok(TraceDocument {
        model: model.name().to_string(),
        initial: model.named_configuration(model.initial()),
        steps,
        final_configuration: model.named_configuration(&config),
        blocked_agents,
        blocked_servers,
    })
}

fn blocked(model: &SystemModel, config: &Configuration) -> (Vec<BlockedAgent>, Vec<String>) {
    let enabled = model.enabled_actions(config).unwrap_or_default();
    let active: BTreeSet<_> = enabled
        .iter()
        .filter_map(|&id| model.action(id).ok())
        .map(Action::agent)
        .collect();
    let mut agents = Vec::new();
    let mut servers = BTreeSet::new();
    for m in config.pending_messages() {
        if active.contains(&m.agent) {
            continue;
        }
        let server = model.server_name(m.server);
        agents.push(BlockedAgent {
            agent: model.agent_name(m.agent).to_string(),
            message: format!("{server}.{}", model.service_name(m.service)),
        });
        servers.insert(server.to_string());
    }
    (agents, servers.into_iter().collect())
}

fn step_body(step: &TraceStep) -> String {
    let mut line = format!("agent {}  recv {}", step.agent, step.received);
    let mut sent = false;
    for e in &step.events {
        match e {
            TraceEvent::StateChange { server, old, new } => {
                let _ = write!(line, "  {server}: {old} -> {new}");
            }
            TraceEvent::MessagePass { to, service, .. } => {
                let _ = write!(line, "  send {to}.{service}");
                sent = true;
            }
        }
    }
    if !sent {
        line.push_str("  TERMINATES");
    }
    line
}

impl TraceDocument {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let n = self.steps.len();
        let _ = writeln!(
            out,
            "trace of {}: {n} step{}",
            self.model,
            if n == 1 { "" } else { "s" }
        );
        let _ = writeln!(out, "initial {}", self.initial);
        for s in &self.steps {
            let _ = writeln!(out, "step {}  {}", s.step, step_body(s));
        }
        if n > 0 {
            let _ = writeln!(out, "final {}", self.final_configuration);
            let agents: Vec<String> = self
                .blocked_agents
                .iter()
                .map(|b| format!("{} -> {}", b.agent, b.message))
                .collect();
            let _ = writeln!(out, "blocked agents: {}", list_or_none(&agents));
            let _ = writeln!(
                out,
                "blocked servers: {}",
                list_or_none(&self.blocked_servers)
            );
        }
        out
    }
}

fn list_or_none(items: &[String]) -> String {
    if items.is_empty() {
        "none".to_string()
    } else {
        items.join(", ")
    }
}

/// Renders the witness `path` as a text trace.
pub fn render_trace(model: &SystemModel, path: &[ActionId]) -> Result<String, ReportError> {
    Ok(build_trace(model, path)?.render())
}

/// Reads the step lines of a rendered trace back into the actions of
/// `model`, checking that each one is enabled when it is reached. Lines
/// other than step lines are ignored.
pub fn parse_trace_actions(model: &SystemModel, text: &str) -> Result<Vec<ActionId>, ReportError> {
    let mut by_text: HashMap<String, ActionId> = HashMap::new();
    for i in 0..model.actions().len() {
        let id = ActionId::from_index(i);
        let a = &model.actions()[i];
        let step = TraceStep {
            step: 0,
            action: id,
            agent: model.agent_name(a.agent()).to_string(),
            received: format!(
                "{}.{}",
                model.server_name(a.in_message.server),
                model.service_name(a.in_message.service)
            ),
            events: events(model, a),
        };
        by_text.insert(step_body(&step), id);
    }
    let mut config = model.initial().clone();
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let Some(rest) = line.strip_prefix("step ") else {
            continue;
        };
        let bad = |message: String| ReportError::BadTrace {
            line: lineno + 1,
            message,
        };
        let (number, body) = rest
            .split_once("  ")
            .ok_or_else(|| bad("missing step body".to_string()))?;
        let expected = out.len() + 1;
        if number.parse::<usize>().ok() != Some(expected) {
            return Err(bad(format!("expected step {expected}")));
        }
        let &id = by_text
            .get(body.trim_end())
            .ok_or_else(|| bad("no action of the model matches this step".to_string()))?;
        config =
            config
                .apply(&model.actions()[id.index()])
                .map_err(|_| ReportError::NotEnabled {
                    step: expected,
                    action: id.index(),
                })?;
        out.push(id);
    }
    Ok(out)
}
