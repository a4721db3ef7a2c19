//! Total and partial deadlocks, witness paths and single simulation steps.

use std::collections::VecDeque;
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use crate::imds::{ActionId, AgentId, AgentSlot, Configuration, SystemModel};

use super::{build_lts, Completeness, ExplorationLimits, Lts, LtsError};

/// Nodes without outgoing edges where some agent still has a pending
/// message. Nodes where every agent terminated are proper termination.
pub fn find_total_deadlocks(lts: &Lts) -> Result<Vec<usize>, LtsError> {
    lts.require_complete()?;
    Ok(lts
        .nodes()
        .filter(|(id, config)| lts.out_edges(*id).is_empty() && config.has_pending())
        .map(|(id, _)| id)
        .collect())
}

/// For every node, whether `agent` is pending there and can never act again
/// on any continuation. The set is closed under successors.
pub fn partial_region(lts: &Lts, agent: AgentId) -> Result<Vec<bool>, LtsError> {
    lts.require_complete()?;
    let n = lts.node_count();
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in lts.edges() {
        incoming[e.to].push(e.from);
    }
    // nodes from which some edge of `agent` is reachable
    let mut live = vec![false; n];
    let mut queue = VecDeque::new();
    for e in lts.edges() {
        if lts.action(e.action).agent() == agent && !live[e.from] {
            live[e.from] = true;
            queue.push_back(e.from);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &u in &incoming[v] {
            if !live[u] {
                live[u] = true;
                queue.push_back(u);
            }
        }
    }
    Ok(lts
        .nodes()
        .map(|(id, config)| {
            !live[id] && matches!(config.slot(agent), Some(AgentSlot::Pending { .. }))
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PartialDeadlock {
    pub agent: AgentId,
    pub node: usize,
}

/// Earliest partial deadlocks: for each agent, the nodes of its deadlock
/// region that are initial or have a predecessor outside the region. Every
/// other region node is a descendant of a reported one.
pub fn find_partial_deadlocks(
    lts: &Lts,
    model: &SystemModel,
) -> Result<Vec<PartialDeadlock>, LtsError> {
    lts.require_complete()?;
    let mut out = Vec::new();
    for agent in model.agents() {
        let region = partial_region(lts, agent)?;
        let mut entry = vec![false; lts.node_count()];
        entry[0] = region[0];
        for e in lts.edges() {
            if region[e.to] && !region[e.from] {
                entry[e.to] = true;
            }
        }
        out.extend(
            entry
                .iter()
                .enumerate()
                .filter(|(_, &is)| is)
                .map(|(node, _)| PartialDeadlock { agent, node }),
        );
    }
    Ok(out)
}

/// Shortest path from the initial node as its action sequence.
pub fn extract_counterexample(lts: &Lts, node: usize) -> Result<Vec<ActionId>, LtsError> {
    if node >= lts.node_count() {
        return Err(LtsError::UnknownNode(node));
    }
    let mut path = Vec::new();
    let mut at = node;
    while let Some(e) = lts.parent_edge(at) {
        path.push(e.action);
        at = e.from;
    }
    path.reverse();
    Ok(path)
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum StepError {
    #[error("action {action} is not enabled")]
    NotEnabled {
        action: usize,
        enabled: Vec<ActionId>,
    },
}

/// Applies one enabled action and returns the successor with its enabled
/// set. Rejections carry the currently enabled actions.
pub fn simulate_step(
    model: &SystemModel,
    config: &Configuration,
    chosen: ActionId,
) -> Result<(Configuration, Vec<ActionId>), StepError> {
    let enabled = model.enabled_unchecked(config);
    if !enabled.contains(&chosen) {
        return Err(StepError::NotEnabled {
            action: chosen.index(),
            enabled,
        });
    }
    let next = config
        .apply(&model.actions()[chosen.index()])
        .expect("enabled actions apply");
    let after = model.enabled_unchecked(&next);
    Ok((next, after))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NoDeadlock,
    Deadlock,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TotalDeadlock {
    pub node: usize,
    pub path: Vec<ActionId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PartialWitness {
    pub agent: AgentId,
    pub node: usize,
    pub path: Vec<ActionId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Statistics {
    pub nodes: usize,
    pub edges: usize,
    #[serde(serialize_with = "millis")]
    pub elapsed: Duration,
    pub status: Completeness,
}

fn millis<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_u128(d.as_millis())
}

/// Outcome of a full check. An incomplete exploration is inconclusive and
/// lists no deadlocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DeadlockReport {
    pub verdict: Verdict,
    pub total_deadlocks: Vec<TotalDeadlock>,
    pub partial_deadlocks: Vec<PartialWitness>,
    pub statistics: Statistics,
}

impl DeadlockReport {
    pub fn from_lts(lts: &Lts, model: &SystemModel) -> Self {
        let statistics = Statistics {
            nodes: lts.node_count(),
            edges: lts.edge_count(),
            elapsed: lts.elapsed(),
            status: lts.status(),
        };
        let (Ok(total), Ok(partial)) = (
            find_total_deadlocks(lts),
            find_partial_deadlocks(lts, model),
        ) else {
            return Self {
                verdict: Verdict::Inconclusive,
                total_deadlocks: Vec::new(),
                partial_deadlocks: Vec::new(),
                statistics,
            };
        };
        let path = |n| extract_counterexample(lts, n).expect("nodes of the graph have paths");
        let total_deadlocks: Vec<TotalDeadlock> = total
            .into_iter()
            .map(|node| TotalDeadlock {
                node,
                path: path(node),
            })
            .collect();
        let partial_deadlocks: Vec<PartialWitness> = partial
            .into_iter()
            .map(|p| PartialWitness {
                agent: p.agent,
                node: p.node,
                path: path(p.node),
            })
            .collect();
        let verdict = if total_deadlocks.is_empty() && partial_deadlocks.is_empty() {
            Verdict::NoDeadlock
        } else {
            Verdict::Deadlock
        };
        Self {
            verdict,
            total_deadlocks,
            partial_deadlocks,
            statistics,
        }
    }

    /// The witness to show first: the shortest total deadlock, else the
    /// shortest partial one.
    pub fn primary_witness(&self) -> Option<(usize, &[ActionId])> {
        let total = self
            .total_deadlocks
            .iter()
            .min_by_key(|t| (t.path.len(), t.node));
        let partial = self
            .partial_deadlocks
            .iter()
            .min_by_key(|p| (p.path.len(), p.node));
        match (total, partial) {
            (Some(t), _) => Some((t.node, &t.path)),
            (None, Some(p)) => Some((p.node, &p.path)),
            (None, None) => None,
        }
    }
}

/// Builds the graph and reports every deadlock with its witness.
pub fn check(model: &SystemModel, limits: &ExplorationLimits) -> (Lts, DeadlockReport) {
    let lts = build_lts(model, limits);
    let report = DeadlockReport::from_lts(&lts, model);
    (lts, report)
}
