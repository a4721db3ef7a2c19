use std::collections::{BTreeMap, HashMap, HashSet};

use super::printer::ref_text;
use super::{
    ActionTemplate, DedanError, DedanUnit, Index, InitItem, MessageTemplate, Ref, Repeater,
    ServerTypeDecl, StateTemplate, VectorDecl,
};
use crate::imds::{Action, ModelBuilder, SystemModel};

type Env = BTreeMap<String, i64>;

/// Every assignment of the repeater variables, first repeater outermost.
/// No repeaters yields a single empty environment.
pub fn repeater_environments(repeaters: &[Repeater]) -> Vec<BTreeMap<String, i64>> {
    let mut envs = vec![Env::new()];
    for r in repeaters {
        let mut next = Vec::with_capacity(envs.len() * (r.high - r.low + 1).max(0) as usize);
        for env in &envs {
            for v in r.low..=r.high {
                let mut e = env.clone();
                e.insert(r.var.clone(), v);
                next.push(e);
            }
        }
        envs = next;
    }
    envs
}

fn eval_index(index: &Index, env: &Env, context: &str) -> Result<i64, DedanError> {
    let lookup = |v: &str| {
        env.get(v).copied().ok_or_else(|| DedanError::Unbound {
            name: v.to_owned(),
            context: context.to_owned(),
        })
    };
    match index {
        Index::Lit(n) => Ok(*n),
        Index::Var(v) => lookup(v),
        Index::Offset(v, d) => Ok(lookup(v)? + d),
    }
}

/// Position (0-based) of the element `r` selects in a declaration of `size`.
fn element(
    r: &Ref,
    size: Option<u32>,
    env: &Env,
    context: &str,
) -> Result<Option<usize>, DedanError> {
    match (size, &r.index) {
        (None, None) => Ok(None),
        (None, Some(_)) => Err(DedanError::UnexpectedIndex(ref_text(r))),
        (Some(_), None) => Err(DedanError::MissingIndex(r.name.clone())),
        (Some(n), Some(idx)) => {
            let k = eval_index(idx, env, context)?;
            if k < 1 || k > i64::from(n) {
                return Err(DedanError::IndexOutOfRange {
                    name: r.name.clone(),
                    index: k,
                    size: n,
                });
            }
            Ok(Some((k - 1) as usize))
        }
    }
}

fn element_name(name: &str, position: Option<usize>) -> String {
    match position {
        None => name.to_owned(),
        Some(i) => format!("{name}[{}]", i + 1),
    }
}

fn find_decl<'a>(decls: &'a [VectorDecl], name: &str) -> Option<&'a VectorDecl> {
    decls.iter().find(|d| d.name == name)
}

/// Resolves a service or state reference to its flat name.
fn symbol(decls: &[VectorDecl], r: &Ref, env: &Env, context: &str) -> Result<String, DedanError> {
    let decl = find_decl(decls, &r.name).ok_or_else(|| DedanError::Unbound {
        name: r.name.clone(),
        context: context.to_owned(),
    })?;
    Ok(element_name(
        &decl.name,
        element(r, decl.size, env, context)?,
    ))
}

fn flat_names(decls: &[VectorDecl]) -> Vec<String> {
    decls.iter().flat_map(VectorDecl::element_names).collect()
}

fn check_unique<'a>(names: impl IntoIterator<Item = &'a str>) -> Result<(), DedanError> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(DedanError::Duplicate(n.to_owned()));
        }
    }
    Ok(())
}

/// Every name in every action template is bound in its server type.
pub(super) fn check_templates(unit: &DedanUnit) -> Result<(), DedanError> {
    check_unique(unit.server_types.iter().map(|t| t.name.as_str()))?;
    for ty in &unit.server_types {
        check_unique(
            ty.formal_agents
                .iter()
                .chain(&ty.formal_servers)
                .map(|d| d.name.as_str()),
        )?;
        check_unique(ty.services.iter().map(|d| d.name.as_str()))?;
        check_unique(ty.states.iter().map(|d| d.name.as_str()))?;
        let context = format!("server type `{}`", ty.name);
        for action in &ty.actions {
            let vars: HashSet<&str> = action.repeaters.iter().map(|r| r.var.as_str()).collect();
            let unbound = |name: &str| DedanError::Unbound {
                name: name.to_owned(),
                context: context.clone(),
            };
            let check_vars = |r: &Ref| -> Result<(), DedanError> {
                match &r.index {
                    Some(Index::Var(v) | Index::Offset(v, _)) if !vars.contains(v.as_str()) => {
                        Err(unbound(v))
                    }
                    _ => Ok(()),
                }
            };
            let check_message = |m: &MessageTemplate| -> Result<(), DedanError> {
                if find_decl(&ty.formal_agents, &m.agent.name).is_none() {
                    return Err(unbound(&m.agent.name));
                }
                if find_decl(&ty.formal_servers, &m.server.name).is_none()
                    && m.server.name != ty.name
                {
                    return Err(unbound(&m.server.name));
                }
                for r in [&m.agent, &m.server, &m.service] {
                    check_vars(r)?;
                }
                Ok(())
            };
            let check_state = |s: &StateTemplate| -> Result<(), DedanError> {
                if s.server.name != ty.name
                    && find_decl(&ty.formal_servers, &s.server.name).is_none()
                {
                    return Err(unbound(&s.server.name));
                }
                if find_decl(&ty.states, &s.value.name).is_none() {
                    return Err(unbound(&s.value.name));
                }
                check_vars(&s.server)?;
                check_vars(&s.value)
            };
            check_message(&action.in_message)?;
            if action.in_message.server.name == ty.name
                && find_decl(&ty.services, &action.in_message.service.name).is_none()
            {
                return Err(unbound(&action.in_message.service.name));
            }
            check_state(&action.in_state)?;
            if let Some(m) = &action.out_message {
                check_message(m)?;
            }
            check_state(&action.out_state)?;
        }
    }
    Ok(())
}

/// A concrete server instance with its actual parameters bound.
struct BoundServer<'u> {
    name: String,
    ty: &'u ServerTypeDecl,
    /// formal name -> flat actual names (one per formal element)
    bindings: HashMap<&'u str, Vec<String>>,
    initial_state: String,
}

struct Resolved<'u> {
    agents: Vec<String>,
    servers: Vec<BoundServer<'u>>,
    /// (agent, server, service)
    messages: Vec<(String, String, String)>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Agent,
    Server,
}

fn resolve(unit: &DedanUnit) -> Result<Resolved<'_>, DedanError> {
    let types: HashMap<&str, &ServerTypeDecl> = unit
        .server_types
        .iter()
        .map(|t| (t.name.as_str(), t))
        .collect();
    check_unique(
        unit.agents
            .iter()
            .map(|a| a.name.as_str())
            .chain(unit.servers.iter().map(|s| s.name.as_str())),
    )?;
    let agent_sizes: HashMap<&str, Option<u32>> = unit
        .agents
        .iter()
        .map(|a| (a.name.as_str(), a.size))
        .collect();
    let mut server_sizes: HashMap<&str, (Option<u32>, &ServerTypeDecl)> = HashMap::new();
    let mut server_order = Vec::new();
    for s in &unit.servers {
        let ty = *types
            .get(s.type_name())
            .ok_or_else(|| DedanError::UnknownServerType(s.type_name().to_owned()))?;
        server_sizes.insert(s.name.as_str(), (s.size, ty));
        for name in s.as_vector().element_names() {
            server_order.push((name, ty));
        }
    }
    let context = "init";
    let resolve_instance = |r: &Ref, kind: Kind, env: &Env| -> Result<String, DedanError> {
        let size = match kind {
            Kind::Agent => agent_sizes.get(r.name.as_str()).copied(),
            Kind::Server => server_sizes.get(r.name.as_str()).map(|(s, _)| *s),
        };
        let size = size.ok_or_else(|| DedanError::Unbound {
            name: r.name.clone(),
            context: context.to_owned(),
        })?;
        Ok(element_name(&r.name, element(r, size, env, context)?))
    };

    let mut bound: HashMap<String, BoundServer<'_>> = HashMap::new();
    let mut messages = Vec::new();
    let mut seen_agents = HashSet::new();
    for item in &unit.init {
        match item {
            InitItem::Message { repeaters, message } => {
                for env in repeater_environments(repeaters) {
                    let agent = resolve_instance(&message.agent, Kind::Agent, &env)?;
                    let server = resolve_instance(&message.server, Kind::Server, &env)?;
                    let ty = server_sizes[message.server.name.as_str()].1;
                    let service = symbol(&ty.services, &message.service, &env, context)?;
                    if !seen_agents.insert(agent.clone()) {
                        return Err(DedanError::DuplicateInit {
                            what: "agent",
                            name: agent,
                        });
                    }
                    messages.push((agent, server, service));
                }
            }
            InitItem::Server {
                repeaters,
                server,
                actuals,
                state,
            } => {
                for env in repeater_environments(repeaters) {
                    let name = resolve_instance(server, Kind::Server, &env)?;
                    let ty = server_sizes[server.name.as_str()].1;
                    let bindings =
                        bind_actuals(&name, ty, actuals, &env, &agent_sizes, &server_sizes)?;
                    let initial_state = symbol(&ty.states, state, &env, context)?;
                    if bound.contains_key(&name) {
                        return Err(DedanError::DuplicateInit {
                            what: "server",
                            name,
                        });
                    }
                    bound.insert(
                        name.clone(),
                        BoundServer {
                            name,
                            ty,
                            bindings,
                            initial_state,
                        },
                    );
                }
            }
        }
    }
    let mut servers = Vec::with_capacity(server_order.len());
    for (name, _) in server_order {
        match bound.remove(&name) {
            Some(b) => servers.push(b),
            None => return Err(DedanError::UninitializedServer(name)),
        }
    }
    Ok(Resolved {
        agents: flat_names(&unit.agents),
        servers,
        messages,
    })
}

fn bind_actuals<'u>(
    instance: &str,
    ty: &'u ServerTypeDecl,
    actuals: &[Ref],
    env: &Env,
    agent_sizes: &HashMap<&str, Option<u32>>,
    server_sizes: &HashMap<&str, (Option<u32>, &ServerTypeDecl)>,
) -> Result<HashMap<&'u str, Vec<String>>, DedanError> {
    // formal slots in declaration order, agents first
    let slots: Vec<(Kind, &str)> = ty
        .formal_agents
        .iter()
        .map(|d| (Kind::Agent, d))
        .chain(ty.formal_servers.iter().map(|d| (Kind::Server, d)))
        .flat_map(|(k, d)| std::iter::repeat_n((k, d.name.as_str()), d.width()))
        .collect();
    let mut flat: Vec<String> = Vec::new();
    for actual in actuals {
        let kind = match slots.get(flat.len()) {
            Some((k, _)) => *k,
            None => Kind::Agent,
        };
        let size = match kind {
            Kind::Agent => agent_sizes.get(actual.name.as_str()).copied(),
            Kind::Server => server_sizes.get(actual.name.as_str()).map(|(s, _)| *s),
        };
        let Some(size) = size else {
            return Err(DedanError::ActualKind {
                instance: instance.to_owned(),
                actual: ref_text(actual),
                expected: if kind == Kind::Agent {
                    "an agent"
                } else {
                    "a server"
                },
            });
        };
        match (size, &actual.index) {
            // a whole vector passed to consecutive formal slots
            (Some(n), None) => {
                flat.extend((0..n as usize).map(|i| element_name(&actual.name, Some(i))))
            }
            _ => flat.push(element_name(
                &actual.name,
                element(actual, size, env, "init")?,
            )),
        }
    }
    if flat.len() != slots.len() {
        return Err(DedanError::Arity {
            instance: instance.to_owned(),
            server_type: ty.name.clone(),
            expected: slots.len(),
            found: flat.len(),
        });
    }
    let mut bindings: HashMap<&str, Vec<String>> = HashMap::new();
    for ((_, formal), actual) in slots.into_iter().zip(flat) {
        bindings.entry(formal).or_default().push(actual);
    }
    Ok(bindings)
}

/// Template identifiers are bound and the init phrase initializes every
/// server instance exactly once with matching arity.
pub(super) fn check_unit(unit: &DedanUnit) -> Result<(), DedanError> {
    check_templates(unit)?;
    resolve(unit).map(|_| ())
}

struct Instantiation<'a, 'u> {
    server: &'a BoundServer<'u>,
    env: Env,
    context: String,
}

impl Instantiation<'_, '_> {
    fn formal(&self, decls: &[VectorDecl], r: &Ref) -> Result<Option<String>, DedanError> {
        let Some(decl) = find_decl(decls, &r.name) else {
            return Ok(None);
        };
        let position = element(r, decl.size, &self.env, &self.context)?.unwrap_or(0);
        Ok(Some(
            self.server.bindings[decl.name.as_str()][position].clone(),
        ))
    }

    fn agent(&self, r: &Ref) -> Result<String, DedanError> {
        self.formal(&self.server.ty.formal_agents, r)?
            .ok_or_else(|| DedanError::Unbound {
                name: r.name.clone(),
                context: self.context.clone(),
            })
    }

    fn server(&self, r: &Ref) -> Result<String, DedanError> {
        if let Some(name) = self.formal(&self.server.ty.formal_servers, r)? {
            return Ok(name);
        }
        if r.name == self.server.ty.name {
            if r.index.is_some() {
                return Err(DedanError::UnexpectedIndex(ref_text(r)));
            }
            return Ok(self.server.name.clone());
        }
        Err(DedanError::Unbound {
            name: r.name.clone(),
            context: self.context.clone(),
        })
    }
}

/// Expands repeaters and binds formal parameters, producing the flat model.
pub fn expand(unit: &DedanUnit) -> Result<SystemModel, DedanError> {
    check_templates(unit)?;
    let resolved = resolve(unit)?;
    let mut b = ModelBuilder::new(unit.system_name.clone());

    for agent in &resolved.agents {
        b.agent(agent);
    }
    let instance_types: HashMap<&str, &ServerTypeDecl> = resolved
        .servers
        .iter()
        .map(|s| (s.name.as_str(), s.ty))
        .collect();
    for s in &resolved.servers {
        b.server(&s.name);
    }
    for s in &resolved.servers {
        for value in flat_names(&s.ty.states) {
            let state = b.state(&s.name, &value);
            b.declare_state(state);
        }
        for service in flat_names(&s.ty.services) {
            for agent in &resolved.agents {
                let m = b.message(agent, &s.name, &service);
                b.declare_message(m);
            }
        }
        let initial = b.state(&s.name, &s.initial_state);
        b.set_initial_state(initial);
    }
    for (agent, server, service) in &resolved.messages {
        let m = b.message(agent, server, service);
        b.set_initial_message(m);
    }

    for s in &resolved.servers {
        for template in &s.ty.actions {
            for env in repeater_environments(&template.repeaters) {
                let inst = Instantiation {
                    server: s,
                    env,
                    context: format!("server `{}`", s.name),
                };
                let action = instantiate(&mut b, &inst, template, &instance_types)?;
                b.add_action(action);
            }
        }
    }
    Ok(b.build()?)
}

fn instantiate(
    b: &mut ModelBuilder,
    inst: &Instantiation<'_, '_>,
    t: &ActionTemplate,
    instance_types: &HashMap<&str, &ServerTypeDecl>,
) -> Result<Action, DedanError> {
    let own = inst.server.ty;
    let mut message = |m: &MessageTemplate| -> Result<crate::imds::Message, DedanError> {
        let agent = inst.agent(&m.agent)?;
        let server = inst.server(&m.server)?;
        let target_type = instance_types.get(server.as_str()).copied();
        let service =
            match target_type.and_then(|t| find_decl(&t.services, &m.service.name).map(|_| t)) {
                Some(t) => symbol(&t.services, &m.service, &inst.env, &inst.context)?,
                None => plain_symbol(&m.service, &inst.env, &inst.context)?,
            };
        Ok(b.message(&agent, &server, &service))
    };
    let in_message = message(&t.in_message)?;
    let out_message = t.out_message.as_ref().map(&mut message).transpose()?;
    let mut state = |s: &StateTemplate| -> Result<crate::imds::State, DedanError> {
        let server = inst.server(&s.server)?;
        let value = symbol(&own.states, &s.value, &inst.env, &inst.context)?;
        Ok(b.state(&server, &value))
    };
    let in_state = state(&t.in_state)?;
    let out_state = state(&t.out_state)?;
    Ok(Action {
        in_message,
        in_state,
        out_message,
        out_state,
    })
}

fn plain_symbol(r: &Ref, env: &Env, context: &str) -> Result<String, DedanError> {
    match &r.index {
        None => Ok(r.name.clone()),
        Some(idx) => Ok(format!("{}[{}]", r.name, eval_index(idx, env, context)?)),
    }
}
