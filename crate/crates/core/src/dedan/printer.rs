use std::fmt::Write;

use super::expand::check_templates;
use super::{
    ActionTemplate, DedanError, DedanUnit, Index, InitItem, MessageTemplate, Ref, Repeater,
    ServerInstanceDecl, StateTemplate, VectorDecl,
};

/// Renders a unit as Dedan source. Fails if an action template uses a name
/// that is neither a formal parameter, the server itself, a declared state
/// or service, nor a repeater variable.
pub fn print_dedan(unit: &DedanUnit) -> Result<String, DedanError> {
    check_templates(unit)?;
    let mut out = String::new();
    writeln!(out, "system {};", unit.system_name).unwrap();
    for ty in &unit.server_types {
        out.push('\n');
        write!(out, "server: {}", ty.name).unwrap();
        let mut groups = Vec::new();
        if !ty.formal_agents.is_empty() {
            groups.push(format!("agents {}", vector_list(&ty.formal_agents)));
        }
        if !ty.formal_servers.is_empty() {
            groups.push(format!("servers {}", vector_list(&ty.formal_servers)));
        }
        if !groups.is_empty() {
            write!(out, " ({})", groups.join("; ")).unwrap();
        }
        out.push_str(",\n");
        writeln!(out, "services {{{}}},", vector_list(&ty.services)).unwrap();
        writeln!(out, "states {{{}}},", vector_list(&ty.states)).unwrap();
        if ty.actions.is_empty() {
            out.push_str("actions { };\n");
        } else {
            out.push_str("actions {\n");
            for action in &ty.actions {
                writeln!(out, "  {},", action_text(action)).unwrap();
            }
            out.push_str("};\n");
        }
    }
    out.push('\n');
    if !unit.agents.is_empty() {
        writeln!(out, "agents: {};", vector_list(&unit.agents)).unwrap();
    }
    if !unit.servers.is_empty() {
        let servers: Vec<String> = unit.servers.iter().map(instance_text).collect();
        writeln!(out, "servers: {};", servers.join(", ")).unwrap();
    }
    out.push_str("\ninit -> {\n");
    for item in &unit.init {
        writeln!(out, "  {},", init_text(item)).unwrap();
    }
    out.push_str("}.\n");
    Ok(out)
}

fn vector_list(items: &[VectorDecl]) -> String {
    items.iter().map(vector_text).collect::<Vec<_>>().join(", ")
}

fn vector_text(v: &VectorDecl) -> String {
    match v.size {
        Some(n) => format!("{}[{n}]", v.name),
        None => v.name.clone(),
    }
}

fn instance_text(s: &ServerInstanceDecl) -> String {
    let mut text = vector_text(&s.as_vector());
    if let Some(t) = &s.type_name {
        text.push(':');
        text.push_str(t);
    }
    text
}

fn repeaters_text(repeaters: &[Repeater]) -> String {
    repeaters
        .iter()
        .map(|r| format!("<{}={}..{}> ", r.var, r.low, r.high))
        .collect()
}

pub(super) fn ref_text(r: &Ref) -> String {
    match &r.index {
        None => r.name.clone(),
        Some(Index::Lit(n)) => format!("{}[{n}]", r.name),
        Some(Index::Var(v)) => format!("{}[{v}]", r.name),
        Some(Index::Offset(v, d)) if *d > 0 => format!("{}[{v}+{d}]", r.name),
        Some(Index::Offset(v, d)) => format!("{}[{v}-{}]", r.name, -d),
    }
}

fn message_text(m: &MessageTemplate) -> String {
    format!(
        "{}.{}.{}",
        ref_text(&m.agent),
        ref_text(&m.server),
        ref_text(&m.service)
    )
}

fn state_text(s: &StateTemplate) -> String {
    format!("{}.{}", ref_text(&s.server), ref_text(&s.value))
}

fn action_text(a: &ActionTemplate) -> String {
    let output = match &a.out_message {
        Some(m) => format!("{}, {}", message_text(m), state_text(&a.out_state)),
        None => state_text(&a.out_state),
    };
    format!(
        "{}{{{}, {}}} -> {{{}}}",
        repeaters_text(&a.repeaters),
        message_text(&a.in_message),
        state_text(&a.in_state),
        output
    )
}

fn init_text(item: &InitItem) -> String {
    match item {
        InitItem::Message { repeaters, message } => {
            format!("{}{}", repeaters_text(repeaters), message_text(message))
        }
        InitItem::Server {
            repeaters,
            server,
            actuals,
            state,
        } => {
            let args: Vec<String> = actuals.iter().map(ref_text).collect();
            format!(
                "{}{}({}).{}",
                repeaters_text(repeaters),
                ref_text(server),
                args.join(","),
                ref_text(state)
            )
        }
    }
}
