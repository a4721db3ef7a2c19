//! Reactive servers: state enumeration, expression evaluation and the
//! per-caller expansion of actions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::rybu::ast::{BinOp, Expr, ExprKind, ServerDecl};
use crate::rybu::{const_int, ServerInfo, Value};

use super::{agent_name, thread_server_name, LowerError, RangeViolation};

/// Values of every state variable of one server, in declaration order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateAssignment(pub Vec<(String, Value)>);

impl StateAssignment {
    pub fn get(&self, var: &str) -> Option<&Value> {
        self.0.iter().find(|(n, _)| n == var).map(|(_, v)| v)
    }

    /// `var1_v1_var2_v2`; a server without variables has the single label
    /// `none`.
    pub fn label(&self) -> String {
        if self.0.is_empty() {
            return "none".to_string();
        }
        self.0
            .iter()
            .map(|(n, v)| format!("{n}_{}", v.label()))
            .collect::<Vec<_>>()
            .join("_")
    }
}

/// Result of evaluating an expression.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Eval {
    Int(i64),
    Atom(String),
    Bool(bool),
    Vector(Vec<Value>),
}

impl Eval {
    fn into_value(self) -> Option<Value> {
        match self {
            Eval::Int(n) => Some(Value::Int(n)),
            Eval::Atom(a) => Some(Value::Atom(a)),
            Eval::Vector(v) => Some(Value::Vector(v)),
            Eval::Bool(_) => None,
        }
    }
}

impl From<Value> for Eval {
    fn from(v: Value) -> Self {
        match v {
            Value::Int(n) => Eval::Int(n),
            Value::Atom(a) => Eval::Atom(a),
            Value::Vector(v) => Eval::Vector(v),
        }
    }
}

/// Every combination of variable values, first variable varying slowest.
pub fn enumerate_states(
    server: &str,
    info: &ServerInfo,
) -> Result<Vec<StateAssignment>, LowerError> {
    let mut states = vec![StateAssignment(Vec::new())];
    for (name, ty) in &info.vars {
        let values = ty.values();
        states = states
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut next = prefix.0.clone();
                    next.push((name.clone(), v.clone()));
                    StateAssignment(next)
                })
            })
            .collect();
    }
    let mut seen = BTreeSet::new();
    for s in &states {
        let label = s.label();
        if !seen.insert(label.clone()) {
            return Err(LowerError::LabelCollision {
                server: server.to_string(),
                label,
            });
        }
    }
    Ok(states)
}

/// Evaluates an expression against one assignment.
pub fn eval_expr(
    expr: &Expr,
    state: &StateAssignment,
    consts: &BTreeMap<String, i64>,
) -> Result<Eval, LowerError> {
    let bad = |what: &str| LowerError::Eval(format!("{what} in expression at {}", expr.span));
    Ok(match &expr.kind {
        ExprKind::Int(n) => Eval::Int(*n),
        ExprKind::Atom(a) => Eval::Atom(a.clone()),
        ExprKind::Name(n) => match state.get(n) {
            Some(v) => v.clone().into(),
            None => Eval::Int(*consts.get(n).ok_or_else(|| bad("unknown name"))?),
        },
        ExprKind::Index(n, i) => {
            let k = const_int(i, consts).map_err(|e| bad(&e))?;
            match state.get(n) {
                Some(Value::Vector(items)) => usize::try_from(k)
                    .ok()
                    .and_then(|k| items.get(k))
                    .ok_or_else(|| bad("index out of bounds"))?
                    .clone()
                    .into(),
                _ => return Err(bad("indexing a non-vector")),
            }
        }
        ExprKind::Vector(items) => Eval::Vector(
            items
                .iter()
                .map(|i| {
                    eval_expr(i, state, consts)?
                        .into_value()
                        .ok_or_else(|| bad("boolean element"))
                })
                .collect::<Result<_, _>>()?,
        ),
        ExprKind::Neg(inner) => match eval_expr(inner, state, consts)? {
            Eval::Int(n) => Eval::Int(n.checked_neg().ok_or_else(|| bad("overflow"))?),
            _ => return Err(bad("negating a non-integer")),
        },
        ExprKind::Binary(op, l, r) => {
            let (l, r) = (eval_expr(l, state, consts)?, eval_expr(r, state, consts)?);
            match (op, l, r) {
                (BinOp::Eq, l, r) => Eval::Bool(l == r),
                (BinOp::Ne, l, r) => Eval::Bool(l != r),
                (op, Eval::Int(a), Eval::Int(b)) => match op {
                    BinOp::Add => Eval::Int(a.checked_add(b).ok_or_else(|| bad("overflow"))?),
                    BinOp::Sub => Eval::Int(a.checked_sub(b).ok_or_else(|| bad("overflow"))?),
                    BinOp::Lt => Eval::Bool(a < b),
                    BinOp::Gt => Eval::Bool(a > b),
                    BinOp::Le => Eval::Bool(a <= b),
                    BinOp::Ge => Eval::Bool(a >= b),
                    BinOp::Eq | BinOp::Ne => unreachable!(),
                },
                _ => return Err(bad("integer operator on non-integers")),
            }
        }
    })
}

/// An IMDS action in name form, as the lowering emits it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NamedAction {
    pub agent: String,
    pub server: String,
    pub service: String,
    pub in_value: String,
    /// Target server and service of the output message; `None` terminates
    /// the agent.
    pub out_message: Option<(String, String)>,
    pub out_value: String,
}

impl fmt::Display for NamedAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{{{}.{}.{}, {}.{}}} -> {{",
            self.agent, self.server, self.service, self.server, self.in_value
        )?;
        if let Some((server, service)) = &self.out_message {
            write!(f, "{}.{server}.{service}, ", self.agent)?;
        }
        write!(f, "{}.{}}}", self.server, self.out_value)
    }
}

/// A thread that invokes some services of a server instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Caller {
    pub thread: String,
    pub services: BTreeSet<String>,
}

/// Lowered actions of one server instance plus the Rybu actions whose
/// predicate no state satisfies (by index).
#[derive(Clone, Debug, Default)]
pub struct LoweredServer {
    pub states: Vec<StateAssignment>,
    pub actions: Vec<NamedAction>,
    pub unsatisfiable: Vec<usize>,
}

/// Expands the actions of `decl` for instance `instance`: every Rybu action,
/// then every calling thread, then every state satisfying the predicate.
pub fn lower_server(
    instance: &str,
    decl: &ServerDecl,
    info: &ServerInfo,
    consts: &BTreeMap<String, i64>,
    callers: &[Caller],
) -> Result<LoweredServer, LowerError> {
    let states = enumerate_states(instance, info)?;
    let mut out = LoweredServer::default();
    for (idx, action) in decl.actions.iter().enumerate() {
        let mut transitions = Vec::new();
        for state in &states {
            let enabled = match &action.predicate {
                None => true,
                Some(p) => match eval_expr(p, state, consts)? {
                    Eval::Bool(b) => b,
                    _ => {
                        return Err(LowerError::Eval(format!(
                            "predicate at {} is not boolean",
                            p.span
                        )))
                    }
                },
            };
            if enabled {
                transitions.push((
                    state.label(),
                    apply_updates(instance, action, info, state, consts)?,
                ));
            }
        }
        if transitions.is_empty() {
            out.unsatisfiable.push(idx);
        }
        for caller in callers
            .iter()
            .filter(|c| c.services.contains(&action.service))
        {
            for (from, to) in &transitions {
                out.actions.push(NamedAction {
                    agent: agent_name(&caller.thread),
                    server: instance.to_string(),
                    service: action.service.clone(),
                    in_value: from.clone(),
                    out_message: Some((
                        thread_server_name(&caller.thread),
                        action.return_value.clone(),
                    )),
                    out_value: to.clone(),
                });
            }
        }
    }
    out.states = states;
    Ok(out)
}

/// Updates are simultaneous: every right-hand side sees the input state.
fn apply_updates(
    instance: &str,
    action: &crate::rybu::ast::RybuAction,
    info: &ServerInfo,
    state: &StateAssignment,
    consts: &BTreeMap<String, i64>,
) -> Result<String, LowerError> {
    let mut next = state.clone();
    for u in &action.updates {
        let value = eval_expr(&u.value, state, consts)?
            .into_value()
            .ok_or_else(|| LowerError::Eval(format!("boolean assigned at {}", u.span)))?;
        let slot = next
            .0
            .iter_mut()
            .find(|(n, _)| *n == u.target)
            .ok_or_else(|| LowerError::Eval(format!("unknown variable `{}`", u.target)))?;
        let new = match &u.index {
            None => value,
            Some(i) => {
                let k = const_int(i, consts).map_err(LowerError::Eval)? as usize;
                let Value::Vector(mut items) = slot.1.clone() else {
                    return Err(LowerError::Eval(format!("`{}` is not a vector", u.target)));
                };
                *items
                    .get_mut(k)
                    .ok_or_else(|| LowerError::Eval(format!("index {k} out of bounds")))? = value;
                Value::Vector(items)
            }
        };
        slot.1 = new;
    }
    for ((name, value), (_, ty)) in next.0.iter().zip(&info.vars) {
        if !ty.contains(value) {
            return Err(LowerError::OutOfRange(Box::new(RangeViolation {
                server: instance.to_string(),
                service: action.service.clone(),
                state: state.label(),
                var: name.clone(),
                value: value.to_string(),
                ty: ty.to_string(),
            })));
        }
    }
    Ok(next.label())
}
