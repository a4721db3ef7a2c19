//! Shared test helpers: model loading and a brute-force reference
//! enumerator that works purely on names.
//!
//! The enumerator has its own notion of configuration (maps of names), its
//! own enabling and application rules and a depth-first worklist, so it
//! shares no code with the engine beyond reading the action list.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::PathBuf;

use rybu_core::dedan::{expand, parse_dedan};
use rybu_core::imds::SystemModel;
use rybu_core::lower::{compile_source, LowerOptions};

pub fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

pub fn read_model(name: &str) -> String {
    let path = models_dir().join(name);
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn rybu_model(src: &str, bootstrap: bool) -> SystemModel {
    let options = LowerOptions {
        bootstrap,
        ..LowerOptions::default()
    };
    compile_source(src, &options)
        .unwrap_or_else(|e| panic!("{e}"))
        .model
}

pub fn dedan_model(src: &str) -> SystemModel {
    expand(&parse_dedan(src).unwrap_or_else(|e| panic!("{e}"))).unwrap_or_else(|e| panic!("{e}"))
}

/// Loads a model file by extension.
pub fn load(name: &str) -> SystemModel {
    let src = read_model(name);
    if name.ends_with(".dedan") {
        dedan_model(&src)
    } else {
        rybu_model(&src, false)
    }
}

/// Inline sources that complement the files under `models/`.
pub const SINGLE_SEM_LOOP: &str = "
server sem {
  var state : {up, down};
  { wait | state == :up } -> { state = :down; return :ok; }
  { signal } -> { state = :up; return :ok; }
}
var s = sem() { state = :up };
thread t() { loop { s.wait(); s.signal(); } }
";

pub const STRAIGHT_LINE: &str = "
server counter {
  var n : 0..2;
  { inc | n < 2 } -> { n = n + 1; return :ok; }
}
var c = counter() { n = 0 };
thread a() { c.inc(); c.inc(); }
";

pub const STARVING_PAIR: &str = "
server counter {
  var n : 0..2;
  { inc | n < 2 } -> { n = n + 1; return :ok; }
}
var c = counter() { n = 0 };
thread a() { c.inc(); c.inc(); }
thread b() { c.inc(); }
";

pub const NO_THREADS: &str = "
server sem {
  var state : {up, down};
  { wait | state == :up } -> { state = :down; return :ok; }
}
var s = sem() { state = :up };
";

/// Every model of the suite, by display name.
pub fn suite() -> Vec<(String, SystemModel)> {
    let mut out: Vec<(String, SystemModel)> = [
        "two_sem.rybu",
        "two_sem_ordered.rybu",
        "two_sem_live.rybu",
        "two_sem.dedan",
        "two_sem_ordered.dedan",
        "buffers.rybu",
        "buffers_mutex.rybu",
        "loop_match.rybu",
        "philosophers.rybu",
        "philosophers_ordered.rybu",
    ]
    .iter()
    .map(|n| (n.to_string(), load(n)))
    .collect();
    out.push((
        "two_sem.rybu (bootstrap)".into(),
        rybu_model(&read_model("two_sem.rybu"), true),
    ));
    for (name, src) in [
        ("single_sem_loop", SINGLE_SEM_LOOP),
        ("straight_line", STRAIGHT_LINE),
        ("starving_pair", STARVING_PAIR),
        ("no_threads", NO_THREADS),
    ] {
        out.push((name.into(), rybu_model(src, false)));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Conf {
    pub states: BTreeMap<String, String>,
    pub pending: BTreeMap<String, (String, String)>,
    pub terminated: BTreeSet<String>,
}

struct RefAction {
    agent: String,
    server: String,
    service: String,
    value: String,
    out: Option<(String, String)>,
    out_value: String,
    text: String,
}

/// Result of the reference enumeration.
#[derive(Debug)]
pub struct Oracle {
    pub nodes: BTreeSet<Conf>,
    /// (source, action text, target)
    pub edges: BTreeSet<(Conf, String, Conf)>,
    pub edge_count: usize,
    pub total: BTreeSet<Conf>,
    /// (agent, configuration) of the earliest partially deadlocked nodes
    pub partial: BTreeSet<(String, Conf)>,
}

pub fn initial_conf(model: &SystemModel) -> Conf {
    let named = model.named_configuration(model.initial());
    Conf {
        states: named.states,
        pending: named
            .pending
            .into_iter()
            .map(|(a, m)| (a, (m.server, m.service)))
            .collect(),
        terminated: named.terminated,
    }
}

pub fn conf_of(model: &SystemModel, config: &rybu_core::imds::Configuration) -> Conf {
    let named = model.named_configuration(config);
    Conf {
        states: named.states,
        pending: named
            .pending
            .into_iter()
            .map(|(a, m)| (a, (m.server, m.service)))
            .collect(),
        terminated: named.terminated,
    }
}

fn ref_actions(model: &SystemModel) -> Vec<RefAction> {
    model
        .actions()
        .iter()
        .map(|a| RefAction {
            agent: model.agent_name(a.in_message.agent).to_string(),
            server: model.server_name(a.in_message.server).to_string(),
            service: model.service_name(a.in_message.service).to_string(),
            value: model.value_name(a.in_state.value).to_string(),
            out: a.out_message.map(|m| {
                (
                    model.server_name(m.server).to_string(),
                    model.service_name(m.service).to_string(),
                )
            }),
            out_value: model.value_name(a.out_state.value).to_string(),
            text: model.fmt_action(a),
        })
        .collect()
}

fn fire(conf: &Conf, a: &RefAction) -> Option<Conf> {
    let wanted = (a.server.clone(), a.service.clone());
    if conf.pending.get(&a.agent) != Some(&wanted) || conf.states.get(&a.server) != Some(&a.value) {
        return None;
    }
    let mut next = conf.clone();
    next.states.insert(a.server.clone(), a.out_value.clone());
    match &a.out {
        Some(m) => {
            next.pending.insert(a.agent.clone(), m.clone());
        }
        None => {
            next.pending.remove(&a.agent);
            next.terminated.insert(a.agent.clone());
        }
    }
    Some(next)
}

pub fn enumerate(model: &SystemModel) -> Oracle {
    let actions = ref_actions(model);
    let init = initial_conf(model);
    let mut nodes = BTreeSet::new();
    let mut edges = BTreeSet::new();
    let mut edge_count = 0;
    let mut succ: BTreeMap<Conf, Vec<(String, Conf)>> = BTreeMap::new();
    let mut stack = vec![init.clone()];
    nodes.insert(init.clone());
    while let Some(c) = stack.pop() {
        let mut out = Vec::new();
        for a in &actions {
            if let Some(n) = fire(&c, a) {
                edge_count += 1;
                edges.insert((c.clone(), a.text.clone(), n.clone()));
                out.push((a.agent.clone(), n.clone()));
                if nodes.insert(n.clone()) {
                    stack.push(n);
                }
            }
        }
        succ.insert(c, out);
    }

    let total = nodes
        .iter()
        .filter(|c| succ[*c].is_empty() && !c.pending.is_empty())
        .cloned()
        .collect();

    // For each node, the agents that act somewhere in its forward closure.
    let mut acting: BTreeMap<&Conf, BTreeSet<String>> = BTreeMap::new();
    for n in &nodes {
        let mut seen = BTreeSet::from([n]);
        let mut work = vec![n];
        let mut agents = BTreeSet::new();
        while let Some(c) = work.pop() {
            for (agent, next) in &succ[c] {
                agents.insert(agent.clone());
                if seen.insert(next) {
                    work.push(next);
                }
            }
        }
        acting.insert(n, agents);
    }
    let stuck = |agent: &str, c: &Conf| c.pending.contains_key(agent) && !acting[c].contains(agent);

    let mut partial = BTreeSet::new();
    for n in &nodes {
        for agent in n.pending.keys() {
            if !stuck(agent, n) {
                continue;
            }
            let has_free_pred = succ
                .iter()
                .any(|(p, out)| out.iter().any(|(_, t)| t == n) && !stuck(agent, p));
            if *n == init || has_free_pred {
                partial.insert((agent.clone(), n.clone()));
            }
        }
    }
    Oracle {
        nodes,
        edges,
        edge_count,
        total,
        partial,
    }
}
