//! Reachable labelled transition system of an IMDS model and the deadlock
//! analyses over it.
//!
//! The graph is built breadth first from the initial configuration. Each
//! level's successors may be computed in parallel but are merged in frontier
//! order, so node numbering and edge order never depend on scheduling.

mod analysis;
mod iso;

use std::time::{Duration, Instant};

use indexmap::IndexSet;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::imds::{Action, ActionId, Configuration, ImdsError, SystemModel};

pub use analysis::{
    check, extract_counterexample, find_partial_deadlocks, find_total_deadlocks, partial_region,
    simulate_step, DeadlockReport, PartialDeadlock, PartialWitness, Statistics, StepError,
    TotalDeadlock, Verdict,
};
pub use iso::find_isomorphism;

/// Frontier size from which successor computation is spread over threads.
const PARALLEL_FRONTIER: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ExplorationLimits {
    pub max_nodes: usize,
    pub max_depth: Option<usize>,
}

impl Default for ExplorationLimits {
    fn default() -> Self {
        Self {
            max_nodes: 1_000_000,
            max_depth: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Completeness {
    Complete,
    NodeLimit,
    DepthLimit,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LtsError {
    #[error("the state space was not fully explored ({0:?}); raise the limits")]
    Incomplete(Completeness),
    #[error("node {0} is not in the graph")]
    UnknownNode(usize),
    #[error(transparent)]
    Model(#[from] ImdsError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Edge {
    pub from: usize,
    pub action: ActionId,
    pub to: usize,
}

/// The reachable graph. Node 0 is the initial configuration.
#[derive(Clone, Debug)]
pub struct Lts {
    nodes: IndexSet<Configuration>,
    edges: Vec<Edge>,
    /// `edges[out_start[n]..out_start[n + 1]]` leave node `n`.
    out_start: Vec<usize>,
    /// BFS tree: the edge through which each node was discovered.
    parent: Vec<Option<usize>>,
    actions: Vec<Action>,
    status: Completeness,
    elapsed: Duration,
}

impl Lts {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, id: usize) -> Option<&Configuration> {
        self.nodes.get_index(id)
    }

    pub fn node_id(&self, config: &Configuration) -> Option<usize> {
        self.nodes.get_index_of(config)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, &Configuration)> {
        self.nodes.iter().enumerate()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Outgoing edges of `node`, in action id order. Nodes that were never
    /// expanded (because of a limit) have none.
    pub fn out_edges(&self, node: usize) -> &[Edge] {
        match (self.out_start.get(node), self.out_start.get(node + 1)) {
            (Some(&a), Some(&b)) => &self.edges[a..b],
            _ => &[],
        }
    }

    pub fn action(&self, id: ActionId) -> &Action {
        &self.actions[id.index()]
    }

    pub fn status(&self) -> Completeness {
        self.status
    }

    pub fn is_complete(&self) -> bool {
        self.status == Completeness::Complete
    }

    pub fn elapsed(&self) -> Duration {
        self.elapsed
    }

    pub(crate) fn parent_edge(&self, node: usize) -> Option<&Edge> {
        self.parent
            .get(node)
            .copied()
            .flatten()
            .map(|e| &self.edges[e])
    }

    fn require_complete(&self) -> Result<(), LtsError> {
        if self.is_complete() {
            Ok(())
        } else {
            Err(LtsError::Incomplete(self.status))
        }
    }
}

fn successors(model: &SystemModel, config: &Configuration) -> Vec<(ActionId, Configuration)> {
    model
        .enabled_unchecked(config)
        .into_iter()
        .map(|id| {
            let next = config
                .apply(&model.actions()[id.index()])
                .expect("enabled actions apply");
            (id, next)
        })
        .collect()
}

/// Explores every configuration reachable from the initial one.
pub fn build_lts(model: &SystemModel, limits: &ExplorationLimits) -> Lts {
    let started = Instant::now();
    let max_nodes = limits.max_nodes.max(1);
    let mut nodes = IndexSet::new();
    nodes.insert(model.initial().clone());
    let mut edges = Vec::new();
    let mut out_start = vec![0];
    let mut parent = vec![None];
    let mut status = Completeness::Complete;
    let mut frontier = 0..1usize;
    let mut depth = 0usize;

    'levels: while !frontier.is_empty() {
        let level: Vec<usize> = frontier.clone().collect();
        if limits.max_depth.is_some_and(|d| depth >= d) {
            let more = level
                .iter()
                .any(|&n| !model.enabled_unchecked(&nodes[n]).is_empty());
            if more {
                status = Completeness::DepthLimit;
            }
            break;
        }
        let expanded: Vec<Vec<(ActionId, Configuration)>> = if level.len() >= PARALLEL_FRONTIER {
            level
                .par_iter()
                .map(|&n| successors(model, &nodes[n]))
                .collect()
        } else {
            level
                .iter()
                .map(|&n| successors(model, &nodes[n]))
                .collect()
        };
        let level_end = nodes.len();
        for (&from, succ) in level.iter().zip(expanded) {
            for (action, next) in succ {
                let to = match nodes.get_index_of(&next) {
                    Some(to) => to,
                    None => {
                        if nodes.len() >= max_nodes {
                            status = Completeness::NodeLimit;
                            out_start.push(edges.len());
                            break 'levels;
                        }
                        parent.push(Some(edges.len()));
                        nodes.insert_full(next).0
                    }
                };
                edges.push(Edge { from, action, to });
            }
            out_start.push(edges.len());
        }
        frontier = level_end..nodes.len();
        depth += 1;
    }
    Lts {
        nodes,
        edges,
        out_start,
        parent,
        actions: model.actions().to_vec(),
        status,
        elapsed: started.elapsed(),
    }
}
