//! Threads become a program-counter server plus one agent.

use std::collections::BTreeMap;

use crate::rybu::ast::{Stmt, ThreadDecl};

use super::server::NamedAction;
use super::{agent_name, thread_server_name, LowerError};

/// Terminal program-counter value of a thread whose body ends.
pub const STOP: &str = "stop";
/// Initial value and service used when bootstrapping threads.
pub const BOOT_STATE: &str = "ini";
pub const BOOT_SERVICE: &str = "start";

/// One program-counter value: the thread waits for the reply of the call at
/// `path`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PcState {
    pub thread: String,
    /// Indices into nested statement lists; a match arm contributes the arm
    /// index followed by the statement index inside it.
    pub path: Vec<usize>,
    pub instance: String,
    pub service: String,
    pub label: String,
}

/// The IMDS side of one thread.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoweredThread {
    pub server: String,
    pub agent: String,
    pub pcs: Vec<PcState>,
    pub actions: Vec<NamedAction>,
    /// Values of the thread server in declaration order.
    pub values: Vec<String>,
    /// Reply atoms the thread server receives, in order of first use.
    pub services: Vec<String>,
    /// Instances the thread calls, in order of first use.
    pub callees: Vec<String>,
    pub initial_value: String,
    /// Target instance and service of the agent's first message.
    pub initial_message: (String, String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Target {
    Pc(usize),
    Stop,
}

fn calls_in(s: &Stmt) -> usize {
    match s {
        Stmt::Call { .. } => 1,
        Stmt::Match { arms, .. } => {
            1 + arms
                .iter()
                .map(|a| a.body.iter().map(calls_in).sum::<usize>())
                .sum::<usize>()
        }
        Stmt::Loop { body, .. } => body.iter().map(calls_in).sum(),
    }
}

fn has_calls(stmts: &[Stmt]) -> bool {
    stmts.iter().any(|s| calls_in(s) > 0)
}

fn collect(thread: &str, stmts: &[Stmt], path: &mut Vec<usize>, out: &mut Vec<PcState>) {
    for (i, s) in stmts.iter().enumerate() {
        path.push(i);
        match s {
            Stmt::Call {
                instance, service, ..
            }
            | Stmt::Match {
                instance, service, ..
            } => {
                out.push(PcState {
                    thread: thread.to_string(),
                    path: path.clone(),
                    instance: instance.clone(),
                    service: service.clone(),
                    label: format!("s{}_{instance}_{service}", out.len()),
                });
                if let Stmt::Match { arms, .. } = s {
                    for (a, arm) in arms.iter().enumerate() {
                        path.push(a);
                        collect(thread, &arm.body, path, out);
                        path.pop();
                    }
                }
            }
            Stmt::Loop { body, .. } => collect(thread, body, path, out),
        }
        path.pop();
    }
}

struct Emitter<'a> {
    thread: &'a ThreadDecl,
    pcs: &'a [PcState],
    returns: &'a dyn Fn(&str, &str) -> Vec<String>,
    actions: Vec<NamedAction>,
    services: Vec<String>,
}

impl Emitter<'_> {
    /// Target reached when control enters `stmts`, or `cont` if it holds no
    /// call at all.
    fn enter(&self, stmts: &[Stmt], base: usize, cont: Target) -> Target {
        match stmts.first() {
            None => cont,
            Some(Stmt::Loop { body, .. }) if has_calls(body) => self.enter(body, base, cont),
            Some(Stmt::Loop { .. }) => self.enter(&stmts[1..], base, cont),
            Some(_) => Target::Pc(base),
        }
    }

    fn action(&mut self, pc: usize, atom: &str, target: Target) {
        let server = thread_server_name(&self.thread.name);
        if !self.services.iter().any(|s| s == atom) {
            self.services.push(atom.to_string());
        }
        let (out_message, out_value) = match target {
            Target::Pc(q) => (
                Some((self.pcs[q].instance.clone(), self.pcs[q].service.clone())),
                self.pcs[q].label.clone(),
            ),
            Target::Stop => (None, STOP.to_string()),
        };
        self.actions.push(NamedAction {
            agent: agent_name(&self.thread.name),
            server,
            service: atom.to_string(),
            in_value: self.pcs[pc].label.clone(),
            out_message,
            out_value,
        });
    }

    fn emit(&mut self, stmts: &[Stmt], base: usize, cont: Target) -> Result<(), LowerError> {
        let mut idx = base;
        for (j, s) in stmts.iter().enumerate() {
            let size = calls_in(s);
            let next = self.enter(&stmts[j + 1..], idx + size, cont);
            match s {
                Stmt::Call {
                    instance, service, ..
                } => {
                    for atom in (self.returns)(instance, service) {
                        if atom != "ok" {
                            return Err(self.unhandled(instance, service, &atom));
                        }
                        self.action(idx, &atom, next);
                    }
                }
                Stmt::Match {
                    instance,
                    service,
                    arms,
                    ..
                } => {
                    let returns = (self.returns)(instance, service);
                    if let Some(atom) = returns.iter().find(|r| !arms.iter().any(|a| &a.atom == *r))
                    {
                        return Err(self.unhandled(instance, service, atom));
                    }
                    let mut arm_base = idx + 1;
                    for arm in arms {
                        if returns.contains(&arm.atom) {
                            let target = self.enter(&arm.body, arm_base, next);
                            self.action(idx, &arm.atom, target);
                        }
                        self.emit(&arm.body, arm_base, next)?;
                        arm_base += arm.body.iter().map(calls_in).sum::<usize>();
                    }
                }
                Stmt::Loop { body, .. } => {
                    if !has_calls(body) {
                        return Err(LowerError::SilentLoop(self.thread.name.clone()));
                    }
                    let head = self.enter(body, idx, cont);
                    self.emit(body, idx, head)?;
                }
            }
            idx += size;
        }
        Ok(())
    }

    fn unhandled(&self, instance: &str, service: &str, atom: &str) -> LowerError {
        LowerError::UnhandledReturn {
            thread: self.thread.name.clone(),
            instance: instance.to_string(),
            service: service.to_string(),
            atom: atom.to_string(),
        }
    }
}

/// Lowers one thread. `returns(instance, service)` lists the atoms a call
/// may produce. With `bootstrap`, the thread starts in `ini` and waits for
/// a `start` message before its first call.
pub fn lower_thread(
    thread: &ThreadDecl,
    returns: &dyn Fn(&str, &str) -> Vec<String>,
    bootstrap: bool,
) -> Result<LoweredThread, LowerError> {
    let mut pcs = Vec::new();
    collect(&thread.name, &thread.body, &mut Vec::new(), &mut pcs);
    if pcs.is_empty() {
        return Err(LowerError::EmptyThread(thread.name.clone()));
    }
    let mut em = Emitter {
        thread,
        pcs: &pcs,
        returns,
        actions: Vec::new(),
        services: Vec::new(),
    };
    let first = match em.enter(&thread.body, 0, Target::Stop) {
        Target::Pc(q) => q,
        Target::Stop => return Err(LowerError::EmptyThread(thread.name.clone())),
    };
    if bootstrap {
        let server = thread_server_name(&thread.name);
        em.services.push(BOOT_SERVICE.to_string());
        em.actions.push(NamedAction {
            agent: agent_name(&thread.name),
            server,
            service: BOOT_SERVICE.to_string(),
            in_value: BOOT_STATE.to_string(),
            out_message: Some((pcs[first].instance.clone(), pcs[first].service.clone())),
            out_value: pcs[first].label.clone(),
        });
    }
    em.emit(&thread.body, 0, Target::Stop)?;
    let (actions, services) = (em.actions, em.services);

    let mut values = Vec::new();
    if bootstrap {
        values.push(BOOT_STATE.to_string());
    }
    values.extend(pcs.iter().map(|p| p.label.clone()));
    if actions.iter().any(|a| a.out_message.is_none()) {
        values.push(STOP.to_string());
    }
    let mut callees: Vec<String> = Vec::new();
    for p in &pcs {
        if !callees.contains(&p.instance) {
            callees.push(p.instance.clone());
        }
    }
    let (initial_value, initial_message) = if bootstrap {
        (
            BOOT_STATE.to_string(),
            (thread_server_name(&thread.name), BOOT_SERVICE.to_string()),
        )
    } else {
        (
            pcs[first].label.clone(),
            (pcs[first].instance.clone(), pcs[first].service.clone()),
        )
    };
    Ok(LoweredThread {
        server: thread_server_name(&thread.name),
        agent: agent_name(&thread.name),
        pcs,
        actions,
        values,
        services,
        callees,
        initial_value,
        initial_message,
    })
}

/// Services each thread calls on each instance.
pub fn call_sites(threads: &[ThreadDecl]) -> BTreeMap<String, Vec<(String, String)>> {
    fn walk(stmts: &[Stmt], out: &mut Vec<(String, String)>) {
        for s in stmts {
            match s {
                Stmt::Call {
                    instance, service, ..
                } => push(out, instance, service),
                Stmt::Match {
                    instance,
                    service,
                    arms,
                    ..
                } => {
                    push(out, instance, service);
                    for a in arms {
                        walk(&a.body, out);
                    }
                }
                Stmt::Loop { body, .. } => walk(body, out),
            }
        }
    }
    fn push(out: &mut Vec<(String, String)>, instance: &str, service: &str) {
        let pair = (instance.to_string(), service.to_string());
        if !out.contains(&pair) {
            out.push(pair);
        }
    }
    threads
        .iter()
        .map(|t| {
            let mut out = Vec::new();
            walk(&t.body, &mut out);
            (t.name.clone(), out)
        })
        .collect()
}
