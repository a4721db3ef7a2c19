//! Lowering of checked Rybu programs to IMDS.
//!
//! Every server instance becomes a Dedan server type of its own whose
//! formal parameters are exactly the agents and thread servers that call it.
//! Every thread `t` becomes the server `S_t` with program-counter values and
//! the agent `A_t`. The generated [`DedanUnit`] is expanded to obtain the
//! [`SystemModel`], so the model and the emitted text always agree.

mod server;
mod thread;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::dedan::{
    expand, ActionTemplate, DedanError, DedanUnit, InitItem, MessageTemplate, Ref,
    ServerInstanceDecl, ServerTypeDecl, StateTemplate, VectorDecl,
};
use crate::imds::SystemModel;
use crate::rybu::ast::Program;
use crate::rybu::{analyze, parse_source, Diagnostic, SyntaxError, Value};

pub use server::{
    enumerate_states, eval_expr, lower_server, Caller, Eval, LoweredServer, NamedAction,
    StateAssignment,
};
pub use thread::{
    call_sites, lower_thread, LoweredThread, PcState, BOOT_SERVICE, BOOT_STATE, STOP,
};

/// Words that would confuse a Dedan reader if used as server names.
const RESERVED: [&str; 8] = [
    "system", "server", "agents", "servers", "init", "services", "states", "actions",
];

#[derive(Debug, Error)]
pub enum LowerError {
    #[error("{0}")]
    Syntax(#[from] SyntaxError),
    #[error("{}", render(.0))]
    Diagnostics(Vec<Diagnostic>),
    #[error("empty program")]
    EmptyProgram,
    #[error("{0}")]
    OutOfRange(Box<RangeViolation>),
    #[error("server `{server}`: two states share the label `{label}`; rename variables or values")]
    LabelCollision { server: String, label: String },
    #[error("the name `{0}` is used for two different servers")]
    NameClash(String),
    #[error("`{0}` cannot be used as an instance name")]
    Reserved(String),
    #[error("thread `{thread}`: `{instance}.{service}` may return :{atom}, which is not handled")]
    UnhandledReturn {
        thread: String,
        instance: String,
        service: String,
        atom: String,
    },
    #[error("thread `{0}` contains no service call")]
    EmptyThread(String),
    #[error("thread `{0}` has a loop without any service call")]
    SilentLoop(String),
    #[error("{0}")]
    Eval(String),
    #[error(transparent)]
    Dedan(#[from] DedanError),
}

/// An update that moves a variable outside its declared type.
#[derive(Debug, Error)]
#[error("in `{server}.{service}` at state {state}: `{var}` becomes {value}, outside {ty}")]
pub struct RangeViolation {
    pub server: String,
    pub service: String,
    pub state: String,
    pub var: String,
    pub value: String,
    pub ty: String,
}

fn render(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn agent_name(thread: &str) -> String {
    format!("A_{thread}")
}

pub fn thread_server_name(thread: &str) -> String {
    format!("S_{thread}")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LowerOptions {
    pub system_name: String,
    /// Start every thread in `ini` with a pending `start` message, the way
    /// hand-written Dedan processes usually begin.
    pub bootstrap: bool,
}

impl Default for LowerOptions {
    fn default() -> Self {
        Self {
            system_name: "rybu".to_string(),
            bootstrap: false,
        }
    }
}

/// Output of [`lower_program`].
#[derive(Clone, Debug)]
pub struct LoweredProgram {
    pub model: SystemModel,
    pub dedan: DedanUnit,
    pub warnings: Vec<Diagnostic>,
    /// For every server instance, each state label mapped to the variable
    /// values it stands for.
    pub state_vars: BTreeMap<String, BTreeMap<String, Vec<(String, Value)>>>,
    pub threads: Vec<LoweredThread>,
}

/// Parses, checks and lowers Rybu source text.
pub fn compile_source(text: &str, options: &LowerOptions) -> Result<LoweredProgram, LowerError> {
    lower_program(&parse_source(text)?, options)
}

/// Lowers a program. Typecheck errors are returned as
/// [`LowerError::Diagnostics`]; warnings travel with the result.
pub fn lower_program(
    program: &Program,
    options: &LowerOptions,
) -> Result<LoweredProgram, LowerError> {
    if program.is_empty() {
        return Err(LowerError::EmptyProgram);
    }
    let (analysis, diags) = analyze(program);
    let (errors, mut warnings): (Vec<_>, Vec<_>) =
        diags.into_iter().partition(Diagnostic::is_error);
    if !errors.is_empty() {
        return Err(LowerError::Diagnostics(errors));
    }

    let mut names = BTreeSet::new();
    for inst in &program.instances {
        if RESERVED.contains(&inst.name.as_str()) {
            return Err(LowerError::Reserved(inst.name.clone()));
        }
        names.insert(inst.name.clone());
    }
    for t in &program.threads {
        let s = thread_server_name(&t.name);
        if !names.insert(s.clone()) {
            return Err(LowerError::NameClash(s));
        }
    }

    let returns = |instance: &str, service: &str| -> Vec<String> {
        program
            .instance(instance)
            .and_then(|i| analysis.servers.get(&i.server))
            .and_then(|s| s.returns.get(service))
            .cloned()
            .unwrap_or_default()
    };
    let threads = program
        .threads
        .iter()
        .map(|t| lower_thread(t, &returns, options.bootstrap))
        .collect::<Result<Vec<_>, _>>()?;
    let sites = call_sites(&program.threads);

    let mut unit = DedanUnit {
        system_name: options.system_name.clone(),
        ..DedanUnit::default()
    };
    let mut state_vars = BTreeMap::new();
    let mut unsatisfiable_reported = BTreeSet::new();

    for inst in &program.instances {
        let decl = program
            .server(&inst.server)
            .expect("typecheck resolves instance servers");
        let info = &analysis.servers[&inst.server];
        let callers: Vec<Caller> = program
            .threads
            .iter()
            .filter_map(|t| {
                let services: BTreeSet<String> = sites[&t.name]
                    .iter()
                    .filter(|(i, _)| *i == inst.name)
                    .map(|(_, s)| s.clone())
                    .collect();
                (!services.is_empty()).then(|| Caller {
                    thread: t.name.clone(),
                    services,
                })
            })
            .collect();
        let lowered = lower_server(&inst.name, decl, info, &analysis.consts, &callers)?;

        for idx in &lowered.unsatisfiable {
            if unsatisfiable_reported.insert((inst.server.clone(), *idx)) {
                let a = &decl.actions[*idx];
                warnings.push(Diagnostic::warning(
                    a.span,
                    format!(
                        "no state of `{}` satisfies the predicate of this `{}` action",
                        inst.server, a.service
                    ),
                ));
            }
        }
        for service in decl.services() {
            if !callers.iter().any(|c| c.services.contains(service)) {
                warnings.push(Diagnostic::warning(
                    inst.span,
                    format!("service `{}.{service}` is never called", inst.name),
                ));
            }
        }

        let initial = initial_assignment(inst, info, &analysis.consts)?;
        let labels: BTreeMap<String, Vec<(String, Value)>> = lowered
            .states
            .iter()
            .map(|s| (s.label(), s.0.clone()))
            .collect();
        state_vars.insert(inst.name.clone(), labels);

        unit.server_types.push(ServerTypeDecl {
            name: inst.name.clone(),
            formal_agents: callers
                .iter()
                .map(|c| VectorDecl::scalar(agent_name(&c.thread)))
                .collect(),
            formal_servers: callers
                .iter()
                .map(|c| VectorDecl::scalar(thread_server_name(&c.thread)))
                .collect(),
            services: decl
                .services()
                .into_iter()
                .map(VectorDecl::scalar)
                .collect(),
            states: lowered
                .states
                .iter()
                .map(|s| VectorDecl::scalar(s.label()))
                .collect(),
            actions: lowered.actions.iter().map(template).collect(),
        });
        unit.servers.push(ServerInstanceDecl {
            name: inst.name.clone(),
            size: None,
            type_name: None,
        });
        let actuals = callers
            .iter()
            .map(|c| Ref::plain(agent_name(&c.thread)))
            .chain(
                callers
                    .iter()
                    .map(|c| Ref::plain(thread_server_name(&c.thread))),
            )
            .collect();
        unit.init.push(InitItem::Server {
            repeaters: Vec::new(),
            server: Ref::plain(inst.name.clone()),
            actuals,
            state: Ref::plain(initial.label()),
        });
    }

    for t in &threads {
        unit.agents.push(VectorDecl::scalar(t.agent.clone()));
        unit.server_types.push(ServerTypeDecl {
            name: t.server.clone(),
            formal_agents: vec![VectorDecl::scalar(t.agent.clone())],
            formal_servers: t.callees.iter().map(VectorDecl::scalar).collect(),
            services: t.services.iter().map(VectorDecl::scalar).collect(),
            states: t.values.iter().map(VectorDecl::scalar).collect(),
            actions: t.actions.iter().map(template).collect(),
        });
        unit.servers.push(ServerInstanceDecl {
            name: t.server.clone(),
            size: None,
            type_name: None,
        });
        unit.init.push(InitItem::Server {
            repeaters: Vec::new(),
            server: Ref::plain(t.server.clone()),
            actuals: std::iter::once(Ref::plain(t.agent.clone()))
                .chain(t.callees.iter().map(Ref::plain))
                .collect(),
            state: Ref::plain(t.initial_value.clone()),
        });
        unit.init.push(InitItem::Message {
            repeaters: Vec::new(),
            message: MessageTemplate {
                agent: Ref::plain(t.agent.clone()),
                server: Ref::plain(t.initial_message.0.clone()),
                service: Ref::plain(t.initial_message.1.clone()),
            },
        });
    }

    let model = expand(&unit)?;
    Ok(LoweredProgram {
        model,
        dedan: unit,
        warnings,
        state_vars,
        threads,
    })
}

fn initial_assignment(
    inst: &crate::rybu::ast::InstanceDecl,
    info: &crate::rybu::ServerInfo,
    consts: &BTreeMap<String, i64>,
) -> Result<StateAssignment, LowerError> {
    info.vars
        .iter()
        .map(|(name, _)| {
            let expr = inst
                .init
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, e)| e)
                .ok_or_else(|| {
                    LowerError::Eval(format!("`{}.{name}` has no initial value", inst.name))
                })?;
            let value = crate::rybu::const_value(expr, consts).map_err(LowerError::Eval)?;
            Ok((name.clone(), value))
        })
        .collect::<Result<_, _>>()
        .map(StateAssignment)
}

fn template(a: &NamedAction) -> ActionTemplate {
    let message = |server: &str, service: &str| MessageTemplate {
        agent: Ref::plain(a.agent.clone()),
        server: Ref::plain(server),
        service: Ref::plain(service),
    };
    let state = |value: &str| StateTemplate {
        server: Ref::plain(a.server.clone()),
        value: Ref::plain(value),
    };
    ActionTemplate {
        repeaters: Vec::new(),
        in_message: message(&a.server, &a.service),
        in_state: state(&a.in_value),
        out_message: a.out_message.as_ref().map(|(s, v)| message(s, v)),
        out_state: state(&a.out_value),
    }
}
