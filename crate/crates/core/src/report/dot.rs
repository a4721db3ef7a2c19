//! Graphviz DOT output.
//!
//! The full view draws one node per reachable configuration. Projections
//! draw a single component as an automaton: a server over its values with
//! the actions of its server view, or an agent over its messages with the
//! actions of its agent view.

use std::collections::BTreeSet;
use std::fmt::Write;

use crate::imds::{Action, ActionId, SystemModel};
use crate::lts::{find_partial_deadlocks, find_total_deadlocks, Lts};

use super::ReportError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DotView {
    Full,
    Server(String),
    Agent(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DotOptions {
    /// Largest graph the full view will draw.
    pub cap: usize,
    pub view: DotView,
}

impl Default for DotOptions {
    fn default() -> Self {
        Self {
            cap: 2000,
            view: DotView::Full,
        }
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// `agent:server.service` of the consumed message.
fn edge_label(model: &SystemModel, a: &Action) -> String {
    format!(
        "{}:{}.{}",
        model.agent_name(a.agent()),
        model.server_name(a.in_message.server),
        model.service_name(a.in_message.service)
    )
}

fn config_label(model: &SystemModel, config: &crate::imds::Configuration) -> String {
    let named = model.named_configuration(config);
    let text = named.to_string();
    // states and agents on separate lines
    text.replacen("} {", "}\n{", 1)
}

pub fn render_dot(
    model: &SystemModel,
    lts: &Lts,
    options: &DotOptions,
) -> Result<String, ReportError> {
    match &options.view {
        DotView::Full => full(model, lts, options.cap),
        DotView::Server(name) => server_projection(model, name),
        DotView::Agent(name) => agent_projection(model, name),
    }
}

fn full(model: &SystemModel, lts: &Lts, cap: usize) -> Result<String, ReportError> {
    if lts.node_count() > cap {
        return Err(ReportError::TooLarge {
            nodes: lts.node_count(),
            cap,
        });
    }
    let total: BTreeSet<usize> = find_total_deadlocks(lts)
        .unwrap_or_default()
        .into_iter()
        .collect();
    let partial: BTreeSet<usize> = find_partial_deadlocks(lts, model)
        .unwrap_or_default()
        .into_iter()
        .map(|p| p.node)
        .collect();
    let mut out = format!("digraph {} {{\n  node [shape=box];\n", quote(model.name()));
    for (id, config) in lts.nodes() {
        let mut attrs = vec![format!("label={}", quote(&config_label(model, config)))];
        if id == 0 {
            attrs.push("penwidth=2".into());
        }
        if total.contains(&id) {
            attrs.push("shape=doubleoctagon, color=red".into());
        } else if partial.contains(&id) {
            attrs.push("color=orange".into());
        }
        let _ = writeln!(out, "  n{id} [{}];", attrs.join(", "));
    }
    for e in lts.edges() {
        let label = edge_label(model, lts.action(e.action));
        let _ = writeln!(out, "  n{} -> n{} [label={}];", e.from, e.to, quote(&label));
    }
    out.push_str("}\n");
    Ok(out)
}

fn server_projection(model: &SystemModel, name: &str) -> Result<String, ReportError> {
    let server = model
        .server_id(name)
        .ok_or_else(|| ReportError::UnknownServer(name.to_string()))?;
    let initial = model.initial().state(server);
    let mut out = format!("digraph {} {{\n", quote(name));
    for v in model.server_values(server) {
        let shape = if Some(v) == initial {
            "doublecircle"
        } else {
            "circle"
        };
        let _ = writeln!(out, "  {} [shape={shape}];", quote(model.value_name(v)));
    }
    for &id in &model.server_view()[&server] {
        let a = &model.actions()[id.index()];
        let _ = writeln!(
            out,
            "  {} -> {} [label={}];",
            quote(model.value_name(a.in_state.value)),
            quote(model.value_name(a.out_state.value)),
            quote(&edge_label(model, a))
        );
    }
    out.push_str("}\n");
    Ok(out)
}

fn agent_projection(model: &SystemModel, name: &str) -> Result<String, ReportError> {
    let agent = model
        .agent_id(name)
        .ok_or_else(|| ReportError::UnknownAgent(name.to_string()))?;
    let msg = |server, service| {
        format!(
            "{}.{}",
            model.server_name(server),
            model.service_name(service)
        )
    };
    let initial = model
        .initial()
        .pending(agent)
        .map(|m| msg(m.server, m.service));
    let mut nodes = BTreeSet::new();
    let mut edges = Vec::new();
    for &id in &model.agent_view()[&agent] {
        let a = &model.actions()[id.index()];
        let from = msg(a.in_message.server, a.in_message.service);
        let to = match a.out_message {
            Some(m) => msg(m.server, m.service),
            None => "terminated".to_string(),
        };
        let label = format!(
            "{}: {} -> {}",
            model.server_name(a.server()),
            model.value_name(a.in_state.value),
            model.value_name(a.out_state.value)
        );
        nodes.insert(from.clone());
        nodes.insert(to.clone());
        edges.push((from, to, label));
    }
    nodes.extend(initial.clone());
    let mut out = format!("digraph {} {{\n", quote(name));
    for n in &nodes {
        let shape = if Some(n) == initial.as_ref() {
            "doublecircle"
        } else {
            "ellipse"
        };
        let _ = writeln!(out, "  {} [shape={shape}];", quote(n));
    }
    for (from, to, label) in edges {
        let _ = writeln!(
            out,
            "  {} -> {} [label={}];",
            quote(&from),
            quote(&to),
            quote(&label)
        );
    }
    out.push_str("}\n");
    Ok(out)
}

/// A witness path as a chain of configurations. The last node is drawn as
/// a deadlock when nothing is enabled there.
pub fn render_path_dot(model: &SystemModel, path: &[ActionId]) -> Result<String, ReportError> {
    let mut config = model.initial().clone();
    let mut out = format!("digraph {} {{\n  node [shape=box];\n", quote(model.name()));
    let _ = writeln!(
        out,
        "  n0 [label={}, penwidth=2];",
        quote(&config_label(model, &config))
    );
    for (i, &id) in path.iter().enumerate() {
        let not_enabled = || ReportError::NotEnabled {
            step: i + 1,
            action: id.index(),
        };
        let a = model.action(id).map_err(|_| not_enabled())?;
        config = config.apply(a).map_err(|_| not_enabled())?;
        let stuck =
            config.has_pending() && model.enabled_actions(&config).is_ok_and(|e| e.is_empty());
        let style = if stuck {
            ", shape=doubleoctagon, color=red"
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "  n{} [label={}{style}];",
            i + 1,
            quote(&config_label(model, &config))
        );
        let _ = writeln!(
            out,
            "  n{i} -> n{} [label={}];",
            i + 1,
            quote(&edge_label(model, a))
        );
    }
    out.push_str("}\n");
    Ok(out)
}
