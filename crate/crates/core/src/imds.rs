//! Integrated Model of Distributed Systems (IMDS).
//!
//! A system is a finite set of servers holding states and agents carrying
//! messages. Behaviour is a set of actions, each consuming one pending
//! message together with the matching server state and producing a new state
//! of the same server and, unless the action terminates the agent, a new
//! message of the same agent. Actions execute one at a time (interleaving).
//!
//! Names are interned per namespace; every id type is only meaningful
//! together with the [`SystemModel`] that issued it.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
        #[serde(transparent)]
        pub struct $name(u32);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }

            pub fn from_index(index: usize) -> Self {
                Self(u32::try_from(index).expect("id space exhausted"))
            }
        }
    };
}

id_type!(
    /// Interned server name.
    ServerId
);
id_type!(
    /// Interned agent name.
    AgentId
);
id_type!(
    /// Interned server value name (the value half of a state).
    ValueId
);
id_type!(
    /// Interned service name.
    ServiceId
);
id_type!(
    /// Position of an action in [`SystemModel::actions`]. Stable for a given model.
    ActionId
);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ImdsError {
    #[error("malformed configuration: {0}")]
    MalformedConfiguration(String),
    #[error("action is not enabled in this configuration: {0}")]
    NotEnabled(String),
    #[error("server `{0}` has no initial state")]
    MissingInitialState(String),
    #[error("unknown action id {0}")]
    UnknownAction(usize),
}

/// A server state: the pair (server, value).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State {
    pub server: ServerId,
    pub value: ValueId,
}

/// A message: the triple (agent, server, service).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Message {
    pub agent: AgentId,
    pub server: ServerId,
    pub service: ServiceId,
}

/// `(in_message, in_state) -> (out_message, out_state)`, or
/// `(in_message, in_state) -> (out_state)` for an agent-terminating action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Action {
    pub in_message: Message,
    pub in_state: State,
    pub out_message: Option<Message>,
    pub out_state: State,
}

impl Action {
    pub fn agent(&self) -> AgentId {
        self.in_message.agent
    }

    /// The server executing the action.
    pub fn server(&self) -> ServerId {
        self.in_state.server
    }

    pub fn is_terminating(&self) -> bool {
        self.out_message.is_none()
    }
}

/// What an agent is doing in a configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AgentSlot {
    Pending {
        server: ServerId,
        service: ServiceId,
    },
    Terminated,
    /// Neither pending nor terminated. Never reachable from a valid initial
    /// configuration; only representable so that validation can report it.
    Idle,
}

/// One state per server and at most one message per agent.
///
/// Servers and agents are stored in model id order, so two configurations of
/// the same model are equal exactly when they are equal as sets.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Configuration {
    states: Box<[ValueId]>,
    agents: Box<[AgentSlot]>,
}

impl Configuration {
    pub fn new(states: Vec<ValueId>, agents: Vec<AgentSlot>) -> Self {
        Self {
            states: states.into_boxed_slice(),
            agents: agents.into_boxed_slice(),
        }
    }

    pub fn server_count(&self) -> usize {
        self.states.len()
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn state(&self, server: ServerId) -> Option<ValueId> {
        self.states.get(server.index()).copied()
    }

    pub fn slot(&self, agent: AgentId) -> Option<AgentSlot> {
        self.agents.get(agent.index()).copied()
    }

    pub fn pending(&self, agent: AgentId) -> Option<Message> {
        match self.slot(agent)? {
            AgentSlot::Pending { server, service } => Some(Message {
                agent,
                server,
                service,
            }),
            _ => None,
        }
    }

    pub fn is_terminated(&self, agent: AgentId) -> bool {
        self.slot(agent) == Some(AgentSlot::Terminated)
    }

    pub fn states(&self) -> impl Iterator<Item = State> + '_ {
        self.states.iter().enumerate().map(|(i, &value)| State {
            server: ServerId::from_index(i),
            value,
        })
    }

    pub fn pending_messages(&self) -> impl Iterator<Item = Message> + '_ {
        (0..self.agents.len()).filter_map(|i| self.pending(AgentId::from_index(i)))
    }

    pub fn terminated_agents(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.agents
            .iter()
            .enumerate()
            .filter(|(_, slot)| **slot == AgentSlot::Terminated)
            .map(|(i, _)| AgentId::from_index(i))
    }

    pub fn has_pending(&self) -> bool {
        self.agents
            .iter()
            .any(|slot| matches!(slot, AgentSlot::Pending { .. }))
    }

    /// The action's input message is pending and its input state is current.
    pub fn is_enabled(&self, action: &Action) -> bool {
        self.pending(action.in_message.agent) == Some(action.in_message)
            && self.state(action.in_state.server) == Some(action.in_state.value)
    }

    /// Executes `action`: the input message and input state are replaced by
    /// the output state and, if present, the output message. An action
    /// without an output message terminates its agent.
    pub fn apply(&self, action: &Action) -> Result<Configuration, ImdsError> {
        if !self.is_enabled(action) {
            return Err(ImdsError::NotEnabled(format!("{action:?}")));
        }
        let mut next = self.clone();
        next.states[action.out_state.server.index()] = action.out_state.value;
        let agent = action.in_message.agent.index();
        next.agents[agent] = match action.out_message {
            Some(m) => AgentSlot::Pending {
                server: m.server,
                service: m.service,
            },
            None => AgentSlot::Terminated,
        };
        Ok(next)
    }
}

/// Free function form of [`Configuration::apply`].
pub fn apply_action(config: &Configuration, action: &Action) -> Result<Configuration, ImdsError> {
    config.apply(action)
}

#[derive(Clone, Debug, Default)]
struct Names {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Names {
    fn intern(&mut self, name: &str) -> u32 {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = u32::try_from(self.names.len()).expect("name space exhausted");
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), i);
        i
    }

    fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    fn len(&self) -> usize {
        self.names.len()
    }
}

/// Incremental constructor for [`SystemModel`]. Names are interned on first
/// use; declaring the same name twice yields the same id.
#[derive(Clone, Debug, Default)]
pub struct ModelBuilder {
    name: String,
    servers: Names,
    agents: Names,
    values: Names,
    services: Names,
    states_decl: BTreeSet<State>,
    messages_decl: BTreeSet<Message>,
    actions: Vec<Action>,
    seen_actions: BTreeSet<Action>,
    initial_states: BTreeMap<ServerId, ValueId>,
    initial_messages: BTreeMap<AgentId, Message>,
}

impl ModelBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn server(&mut self, name: &str) -> ServerId {
        ServerId(self.servers.intern(name))
    }

    pub fn agent(&mut self, name: &str) -> AgentId {
        AgentId(self.agents.intern(name))
    }

    pub fn value(&mut self, name: &str) -> ValueId {
        ValueId(self.values.intern(name))
    }

    pub fn service(&mut self, name: &str) -> ServiceId {
        ServiceId(self.services.intern(name))
    }

    pub fn state(&mut self, server: &str, value: &str) -> State {
        State {
            server: self.server(server),
            value: self.value(value),
        }
    }

    pub fn message(&mut self, agent: &str, server: &str, service: &str) -> Message {
        Message {
            agent: self.agent(agent),
            server: self.server(server),
            service: self.service(service),
        }
    }

    pub fn declare_state(&mut self, state: State) {
        self.states_decl.insert(state);
    }

    pub fn declare_message(&mut self, message: Message) {
        self.messages_decl.insert(message);
    }

    /// Adds an action; an identical action added twice is kept once.
    pub fn add_action(&mut self, action: Action) {
        if self.seen_actions.insert(action) {
            self.actions.push(action);
        }
    }

    pub fn set_initial_state(&mut self, state: State) {
        self.initial_states.insert(state.server, state.value);
    }

    pub fn set_initial_message(&mut self, message: Message) {
        self.initial_messages.insert(message.agent, message);
    }

    pub fn build(self) -> Result<SystemModel, ImdsError> {
        let mut states = Vec::with_capacity(self.servers.len());
        for i in 0..self.servers.len() {
            match self.initial_states.get(&ServerId::from_index(i)) {
                Some(&v) => states.push(v),
                None => {
                    return Err(ImdsError::MissingInitialState(
                        self.servers.name(i).to_owned(),
                    ))
                }
            }
        }
        let agents = (0..self.agents.len())
            .map(
                |i| match self.initial_messages.get(&AgentId::from_index(i)) {
                    Some(m) => AgentSlot::Pending {
                        server: m.server,
                        service: m.service,
                    },
                    None => AgentSlot::Idle,
                },
            )
            .collect();
        let mut by_message: HashMap<Message, Vec<ActionId>> = HashMap::new();
        for (i, action) in self.actions.iter().enumerate() {
            by_message
                .entry(action.in_message)
                .or_default()
                .push(ActionId::from_index(i));
        }
        Ok(SystemModel {
            name: self.name,
            servers: self.servers,
            agents: self.agents,
            values: self.values,
            services: self.services,
            states_decl: self.states_decl,
            messages_decl: self.messages_decl,
            actions: self.actions,
            initial: Configuration::new(states, agents),
            by_message,
        })
    }
}

/// The complete IMDS system: declared servers, agents, values, services,
/// states and messages, the action set and the initial configuration.
#[derive(Clone, Debug)]
pub struct SystemModel {
    name: String,
    servers: Names,
    agents: Names,
    values: Names,
    services: Names,
    states_decl: BTreeSet<State>,
    messages_decl: BTreeSet<Message>,
    actions: Vec<Action>,
    initial: Configuration,
    by_message: HashMap<Message, Vec<ActionId>>,
}

impl SystemModel {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn server_count(&self) -> usize {
        self.servers.len()
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn servers(&self) -> impl Iterator<Item = ServerId> {
        (0..self.servers.len()).map(ServerId::from_index)
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> {
        (0..self.agents.len()).map(AgentId::from_index)
    }

    pub fn server_name(&self, id: ServerId) -> &str {
        self.servers.name(id.index())
    }

    pub fn agent_name(&self, id: AgentId) -> &str {
        self.agents.name(id.index())
    }

    pub fn value_name(&self, id: ValueId) -> &str {
        self.values.name(id.index())
    }

    pub fn service_name(&self, id: ServiceId) -> &str {
        self.services.name(id.index())
    }

    pub fn server_id(&self, name: &str) -> Option<ServerId> {
        self.servers.get(name).map(ServerId)
    }

    pub fn agent_id(&self, name: &str) -> Option<AgentId> {
        self.agents.get(name).map(AgentId)
    }

    pub fn value_id(&self, name: &str) -> Option<ValueId> {
        self.values.get(name).map(ValueId)
    }

    pub fn service_id(&self, name: &str) -> Option<ServiceId> {
        self.services.get(name).map(ServiceId)
    }

    pub fn states_decl(&self) -> &BTreeSet<State> {
        &self.states_decl
    }

    pub fn messages_decl(&self) -> &BTreeSet<Message> {
        &self.messages_decl
    }

    /// Declared values of one server, in value id order.
    pub fn server_values(&self, server: ServerId) -> Vec<ValueId> {
        self.states_decl
            .iter()
            .filter(|s| s.server == server)
            .map(|s| s.value)
            .collect()
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn action(&self, id: ActionId) -> Result<&Action, ImdsError> {
        self.actions
            .get(id.index())
            .ok_or(ImdsError::UnknownAction(id.index()))
    }

    pub fn initial(&self) -> &Configuration {
        &self.initial
    }

    /// Checks that `config` has exactly one state per server and one slot
    /// per agent, all referring to names of this model.
    pub fn check_configuration(&self, config: &Configuration) -> Result<(), ImdsError> {
        if config.server_count() != self.server_count() {
            return Err(ImdsError::MalformedConfiguration(format!(
                "{} server states for {} servers",
                config.server_count(),
                self.server_count()
            )));
        }
        if config.agent_count() != self.agent_count() {
            return Err(ImdsError::MalformedConfiguration(format!(
                "{} agent slots for {} agents",
                config.agent_count(),
                self.agent_count()
            )));
        }
        if let Some(s) = config
            .states()
            .find(|s| s.value.index() >= self.values.len())
        {
            return Err(ImdsError::MalformedConfiguration(format!(
                "server `{}` has an unknown value",
                self.server_name(s.server)
            )));
        }
        Ok(())
    }

    /// Actions whose input message is pending and whose input state is the
    /// current state of its server, in action id order.
    pub fn enabled_actions(&self, config: &Configuration) -> Result<Vec<ActionId>, ImdsError> {
        self.check_configuration(config)?;
        Ok(self.enabled_unchecked(config))
    }

    pub(crate) fn enabled_unchecked(&self, config: &Configuration) -> Vec<ActionId> {
        let mut out = Vec::new();
        for message in config.pending_messages() {
            if let Some(candidates) = self.by_message.get(&message) {
                let current = config.state(message.server);
                out.extend(
                    candidates
                        .iter()
                        .copied()
                        .filter(|&id| Some(self.actions[id.index()].in_state.value) == current),
                );
            }
        }
        out.sort_unstable();
        out
    }

    /// Server view: actions grouped by the server whose state they consume.
    /// Every server is a key, possibly with an empty set.
    pub fn server_view(&self) -> BTreeMap<ServerId, BTreeSet<ActionId>> {
        let mut view: BTreeMap<_, BTreeSet<_>> =
            self.servers().map(|s| (s, BTreeSet::new())).collect();
        for (i, a) in self.actions.iter().enumerate() {
            view.entry(a.server())
                .or_default()
                .insert(ActionId::from_index(i));
        }
        view
    }

    /// Agent view: actions grouped by the agent whose message they consume.
    pub fn agent_view(&self) -> BTreeMap<AgentId, BTreeSet<ActionId>> {
        let mut view: BTreeMap<_, BTreeSet<_>> =
            self.agents().map(|a| (a, BTreeSet::new())).collect();
        for (i, a) in self.actions.iter().enumerate() {
            view.entry(a.agent())
                .or_default()
                .insert(ActionId::from_index(i));
        }
        view
    }

    pub fn fmt_message(&self, m: &Message) -> String {
        format!(
            "{}.{}.{}",
            self.agent_name(m.agent),
            self.server_name(m.server),
            self.service_name(m.service)
        )
    }

    pub fn fmt_state(&self, s: &State) -> String {
        format!(
            "{}.{}",
            self.server_name(s.server),
            self.value_name(s.value)
        )
    }

    /// Dedan notation, e.g. `{A.sem.wait, sem.up} -> {A.proc.ok, sem.down}`.
    pub fn fmt_action(&self, a: &Action) -> String {
        let input = format!(
            "{{{}, {}}}",
            self.fmt_message(&a.in_message),
            self.fmt_state(&a.in_state)
        );
        match &a.out_message {
            Some(m) => format!(
                "{input} -> {{{}, {}}}",
                self.fmt_message(m),
                self.fmt_state(&a.out_state)
            ),
            None => format!("{input} -> {{{}}}", self.fmt_state(&a.out_state)),
        }
    }

    /// Name-level view of a configuration, independent of interning order.
    pub fn named_configuration(&self, config: &Configuration) -> NamedConfiguration {
        let mut named = NamedConfiguration::default();
        for s in config.states() {
            named.states.insert(
                self.server_name(s.server).to_owned(),
                self.value_name(s.value).to_owned(),
            );
        }
        for a in self.agents() {
            match config.slot(a) {
                Some(AgentSlot::Pending { server, service }) => {
                    named.pending.insert(
                        self.agent_name(a).to_owned(),
                        NamedMessage {
                            server: self.server_name(server).to_owned(),
                            service: self.service_name(service).to_owned(),
                        },
                    );
                }
                Some(AgentSlot::Terminated) => {
                    named.terminated.insert(self.agent_name(a).to_owned());
                }
                _ => {}
            }
        }
        named
    }

    /// Name-level snapshot of the whole model. Two models built along
    /// different routes are the same system iff their snapshots are equal.
    pub fn named(&self) -> NamedModel {
        NamedModel {
            servers: self.servers.names.iter().cloned().collect(),
            agents: self.agents.names.iter().cloned().collect(),
            states: self
                .states_decl
                .iter()
                .map(|s| {
                    (
                        self.server_name(s.server).to_owned(),
                        self.value_name(s.value).to_owned(),
                    )
                })
                .collect(),
            messages: self
                .messages_decl
                .iter()
                .map(|m| self.fmt_message(m))
                .collect(),
            actions: self.actions.iter().map(|a| self.fmt_action(a)).collect(),
            initial: self.named_configuration(&self.initial),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct NamedMessage {
    pub server: String,
    pub service: String,
}

impl fmt::Display for NamedMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.server, self.service)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct NamedConfiguration {
    pub states: BTreeMap<String, String>,
    pub pending: BTreeMap<String, NamedMessage>,
    pub terminated: BTreeSet<String>,
}

impl fmt::Display for NamedConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let states: Vec<String> = self
            .states
            .iter()
            .map(|(s, v)| format!("{s}.{v}"))
            .collect();
        let mut agents: Vec<String> = self
            .pending
            .iter()
            .map(|(a, m)| format!("{a}.{m}"))
            .collect();
        agents.extend(self.terminated.iter().map(|a| format!("{a}:terminated")));
        write!(f, "{{{}}} {{{}}}", states.join(", "), agents.join(", "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NamedModel {
    pub servers: BTreeSet<String>,
    pub agents: BTreeSet<String>,
    pub states: BTreeSet<(String, String)>,
    pub messages: BTreeSet<String>,
    pub actions: BTreeSet<String>,
    pub initial: NamedConfiguration,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationKind {
    /// Output state belongs to a different server than the input state.
    ServerContinuity,
    /// Output message belongs to a different agent than the input message.
    AgentContinuity,
    /// Input state is not a state of the server the input message targets.
    MessageTarget,
    UndeclaredState,
    UndeclaredMessage,
    /// The initial configuration lacks a message for some agent.
    InitialCompleteness,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ServerContinuity => "server continuity",
            Self::AgentContinuity => "agent continuity",
            Self::MessageTarget => "message target",
            Self::UndeclaredState => "undeclared state",
            Self::UndeclaredMessage => "undeclared message",
            Self::InitialCompleteness => "T0 completeness",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub element: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.element)
    }
}

/// Well-formedness check. Returns every violation found; an empty list
/// means the model is a proper IMDS system.
pub fn validate_model(model: &SystemModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |kind, element: String| out.push(Violation { kind, element });

    for a in model.agents() {
        match model.initial.slot(a) {
            Some(AgentSlot::Pending { .. }) => {}
            Some(AgentSlot::Terminated) => push(
                ViolationKind::InitialCompleteness,
                format!("agent `{}` is terminated initially", model.agent_name(a)),
            ),
            _ => push(
                ViolationKind::InitialCompleteness,
                format!("agent `{}` has no initial message", model.agent_name(a)),
            ),
        }
    }
    for s in model.initial.states() {
        if !model.states_decl.contains(&s) {
            push(
                ViolationKind::UndeclaredState,
                format!("initial state {}", model.fmt_state(&s)),
            );
        }
    }
    for m in model.initial.pending_messages() {
        if !model.messages_decl.contains(&m) {
            push(
                ViolationKind::UndeclaredMessage,
                format!("initial message {}", model.fmt_message(&m)),
            );
        }
    }

    for a in &model.actions {
        let shown = model.fmt_action(a);
        if a.in_state.server != a.in_message.server {
            push(ViolationKind::MessageTarget, shown.clone());
        }
        if a.out_state.server != a.in_state.server {
            push(ViolationKind::ServerContinuity, shown.clone());
        }
        if let Some(m) = &a.out_message {
            if m.agent != a.in_message.agent {
                push(ViolationKind::AgentContinuity, shown.clone());
            }
            if !model.messages_decl.contains(m) {
                push(
                    ViolationKind::UndeclaredMessage,
                    format!("{} in {shown}", model.fmt_message(m)),
                );
            }
        }
        if !model.messages_decl.contains(&a.in_message) {
            push(
                ViolationKind::UndeclaredMessage,
                format!("{} in {shown}", model.fmt_message(&a.in_message)),
            );
        }
        for s in [a.in_state, a.out_state] {
            if !model.states_decl.contains(&s) {
                push(
                    ViolationKind::UndeclaredState,
                    format!("{} in {shown}", model.fmt_state(&s)),
                );
            }
        }
    }
    out
}
