mod common;

use std::collections::BTreeSet;

use common::*;
use rybu_core::imds::{ActionId, ModelBuilder, SystemModel};
use rybu_core::lts::{
    build_lts, check, extract_counterexample, find_isomorphism, find_partial_deadlocks,
    find_total_deadlocks, partial_region, simulate_step, Completeness, ExplorationLimits, Lts,
    LtsError, Verdict,
};

fn lts(model: &SystemModel) -> Lts {
    let g = build_lts(model, &ExplorationLimits::default());
    assert!(g.is_complete());
    g
}

fn replay(model: &SystemModel, path: &[ActionId]) -> rybu_core::imds::Configuration {
    path.iter().fold(model.initial().clone(), |c, &a| {
        c.apply(model.action(a).unwrap())
            .expect("witness step applies")
    })
}

#[test]
fn engine_matches_reference_enumerator() {
    let suite = suite();
    assert!(suite.len() >= 10);
    for (name, model) in &suite {
        let g = lts(model);
        let oracle = enumerate(model);
        let nodes: BTreeSet<Conf> = g.nodes().map(|(_, c)| conf_of(model, c)).collect();
        assert_eq!(g.node_count(), oracle.nodes.len(), "{name}: node count");
        assert_eq!(nodes, oracle.nodes, "{name}: nodes");
        assert_eq!(g.edge_count(), oracle.edge_count, "{name}: edge count");
        let edges: BTreeSet<(Conf, String, Conf)> = g
            .edges()
            .iter()
            .map(|e| {
                (
                    conf_of(model, g.node(e.from).unwrap()),
                    model.fmt_action(model.action(e.action).unwrap()),
                    conf_of(model, g.node(e.to).unwrap()),
                )
            })
            .collect();
        assert_eq!(edges, oracle.edges, "{name}: edges");
        let total: BTreeSet<Conf> = find_total_deadlocks(&g)
            .unwrap()
            .into_iter()
            .map(|n| conf_of(model, g.node(n).unwrap()))
            .collect();
        assert_eq!(total, oracle.total, "{name}: total deadlocks");
        let partial: BTreeSet<(String, Conf)> = find_partial_deadlocks(&g, model)
            .unwrap()
            .into_iter()
            .map(|p| {
                (
                    model.agent_name(p.agent).to_string(),
                    conf_of(model, g.node(p.node).unwrap()),
                )
            })
            .collect();
        assert_eq!(partial, oracle.partial, "{name}: partial deadlocks");
    }
}

#[test]
fn two_sem_total_deadlock_has_both_sems_down() {
    let model = load("two_sem.rybu");
    let (g, report) = check(&model, &ExplorationLimits::default());
    assert_eq!(report.verdict, Verdict::Deadlock);
    assert!(!report.total_deadlocks.is_empty());
    for t in &report.total_deadlocks {
        let c = g.node(t.node).unwrap();
        let named = model.named_configuration(c);
        assert_eq!(named.states["sem1"], "state_down");
        assert_eq!(named.states["sem2"], "state_down");
        let pending: BTreeSet<String> = named.pending.values().map(|m| m.to_string()).collect();
        assert_eq!(
            pending,
            BTreeSet::from(["sem1.wait".to_string(), "sem2.wait".to_string()])
        );
        assert!(t.path.len() >= 4);
        assert_eq!(&replay(&model, &t.path), c);
    }
}

#[test]
fn ordered_variant_is_deadlock_free() {
    for name in [
        "two_sem_ordered.rybu",
        "two_sem_ordered.dedan",
        "philosophers_ordered.rybu",
    ] {
        let (_, report) = check(&load(name), &ExplorationLimits::default());
        assert_eq!(report.verdict, Verdict::NoDeadlock, "{name}");
    }
}

#[test]
fn hand_written_listing_deadlocks() {
    let model = load("two_sem.dedan");
    let (g, report) = check(&model, &ExplorationLimits::default());
    assert_eq!(report.verdict, Verdict::Deadlock);
    for t in &report.total_deadlocks {
        let named = model.named_configuration(g.node(t.node).unwrap());
        assert_eq!(named.states["sem[1]"], "down");
        assert_eq!(named.states["sem[2]"], "down");
    }
}

#[test]
fn lowered_two_sem_is_isomorphic_to_listing() {
    let lowered = rybu_model(&read_model("two_sem.rybu"), true);
    let listing = load("two_sem.dedan");
    let (a, b) = (lts(&lowered), lts(&listing));
    let rename = |agent: &str| match agent {
        "A[1]" => "A_proc1".to_string(),
        "A[2]" => "A_proc2".to_string(),
        other => other.to_string(),
    };
    let mapping = find_isomorphism(
        &a,
        &b,
        |e| lowered.agent_name(a.action(e.action).agent()).to_string(),
        |e| rename(listing.agent_name(b.action(e.action).agent())),
    );
    let mapping = mapping.expect("isomorphic");
    let ta: BTreeSet<usize> = find_total_deadlocks(&a)
        .unwrap()
        .into_iter()
        .map(|n| mapping[n])
        .collect();
    let tb: BTreeSet<usize> = find_total_deadlocks(&b).unwrap().into_iter().collect();
    assert_eq!(ta, tb);

    // without the bootstrap the lowered graph has fewer nodes
    let plain = lts(&load("two_sem.rybu"));
    assert!(find_isomorphism(&plain, &b, |_| 0, |_| 0).is_none());
}

#[test]
fn isomorphism_respects_labels() {
    let model = load("two_sem_ordered.rybu");
    let g = lts(&model);
    let agent = |e: &rybu_core::lts::Edge| g.action(e.action).agent();
    assert!(find_isomorphism(&g, &g, agent, agent).is_some());
    let other = lts(&load("two_sem.rybu"));
    assert!(find_isomorphism(&g, &other, |_| 0, |_| 0).is_none());
}

#[test]
fn live_third_thread_hides_total_deadlock() {
    let model = load("two_sem_live.rybu");
    let (g, report) = check(&model, &ExplorationLimits::default());
    assert!(report.total_deadlocks.is_empty());
    assert_eq!(report.verdict, Verdict::Deadlock);
    let agents: BTreeSet<&str> = report
        .partial_deadlocks
        .iter()
        .map(|p| model.agent_name(p.agent))
        .collect();
    assert_eq!(agents, BTreeSet::from(["A_proc1", "A_proc2"]));
    for p in &report.partial_deadlocks {
        assert_eq!(&replay(&model, &p.path), g.node(p.node).unwrap());
    }
}

#[test]
fn total_deadlock_agents_are_partially_deadlocked() {
    for (name, model) in suite() {
        let g = lts(&model);
        let regions: Vec<(_, Vec<bool>)> = model
            .agents()
            .map(|a| (a, partial_region(&g, a).unwrap()))
            .collect();
        let partial = find_partial_deadlocks(&g, &model).unwrap();
        for n in find_total_deadlocks(&g).unwrap() {
            for m in g.node(n).unwrap().pending_messages() {
                let (_, region) = regions.iter().find(|(a, _)| *a == m.agent).unwrap();
                assert!(region[n], "{name}: node {n}");
                // covered by a reported entry of the same agent
                let entries: Vec<usize> = partial
                    .iter()
                    .filter(|p| p.agent == m.agent)
                    .map(|p| p.node)
                    .collect();
                assert!(reaches_within(&g, &entries, n, region), "{name}: node {n}");
            }
        }
    }
}

fn reaches_within(g: &Lts, from: &[usize], target: usize, region: &[bool]) -> bool {
    let mut seen = vec![false; g.node_count()];
    let mut work: Vec<usize> = from.to_vec();
    while let Some(n) = work.pop() {
        if n == target {
            return true;
        }
        if std::mem::replace(&mut seen[n], true) {
            continue;
        }
        work.extend(g.out_edges(n).iter().map(|e| e.to).filter(|&t| region[t]));
    }
    false
}

#[test]
fn buffer_system_deadlocks_and_mutex_fixes_it() {
    let model = load("buffers.rybu");
    let (g, report) = check(&model, &ExplorationLimits::default());
    assert_eq!(report.verdict, Verdict::Deadlock);
    let (node, path) = report.primary_witness().unwrap();
    let named = model.named_configuration(g.node(node).unwrap());
    let waits: Vec<String> = named.pending.values().map(|m| m.to_string()).collect();
    assert_eq!(waits.len(), 2);
    assert_eq!(waits[0], waits[1], "both wait on one semaphore: {named}");
    assert!(waits[0].ends_with(".wait"));
    assert_eq!(&replay(&model, path), g.node(node).unwrap());

    let (_, fixed) = check(&load("buffers_mutex.rybu"), &ExplorationLimits::default());
    assert_eq!(fixed.verdict, Verdict::NoDeadlock);
}

#[test]
fn philosophers_deadlock() {
    let model = load("philosophers.rybu");
    let (g, report) = check(&model, &ExplorationLimits::default());
    assert_eq!(report.total_deadlocks.len(), 1);
    let named = model.named_configuration(g.node(report.total_deadlocks[0].node).unwrap());
    assert!(named
        .states
        .iter()
        .filter(|(s, _)| s.starts_with('f'))
        .all(|(_, v)| v == "state_taken"));
}

#[test]
fn no_enabled_action_gives_single_node() {
    let mut b = ModelBuilder::new("idle");
    let s = b.state("srv", "a");
    b.set_initial_state(s);
    let m = b.message("A", "srv", "go");
    b.set_initial_message(m);
    let model = b.build().unwrap();
    let (g, report) = check(&model, &ExplorationLimits::default());
    assert_eq!((g.node_count(), g.edge_count()), (1, 0));
    assert_eq!(find_total_deadlocks(&g).unwrap(), [0]);
    assert_eq!(report.total_deadlocks[0].path, []);
    assert_eq!(extract_counterexample(&g, 0).unwrap(), []);
    assert_eq!(extract_counterexample(&g, 1), Err(LtsError::UnknownNode(1)));
}

#[test]
fn terminated_system_is_not_deadlocked() {
    let model = rybu_model(STRAIGHT_LINE, false);
    let (g, report) = check(&model, &ExplorationLimits::default());
    assert_eq!(report.verdict, Verdict::NoDeadlock);
    let last = g
        .nodes()
        .find(|(n, _)| g.out_edges(*n).is_empty())
        .unwrap()
        .1;
    assert!(!last.has_pending());
}

#[test]
fn starving_agent_is_reported_partially() {
    let model = rybu_model(STARVING_PAIR, false);
    let (_, report) = check(&model, &ExplorationLimits::default());
    assert_eq!(report.verdict, Verdict::Deadlock);
    assert!(!report.total_deadlocks.is_empty());
    assert!(!report.partial_deadlocks.is_empty());
}

#[test]
fn node_limit_is_inconclusive() {
    let model = load("buffers.rybu");
    let limits = ExplorationLimits {
        max_nodes: 10,
        max_depth: None,
    };
    let (g, report) = check(&model, &limits);
    assert_eq!(g.status(), Completeness::NodeLimit);
    assert_eq!(g.node_count(), 10);
    assert_eq!(report.verdict, Verdict::Inconclusive);
    assert!(report.total_deadlocks.is_empty() && report.partial_deadlocks.is_empty());
    assert_eq!(
        find_total_deadlocks(&g),
        Err(LtsError::Incomplete(Completeness::NodeLimit))
    );
    assert!(find_partial_deadlocks(&g, &model).is_err());
}

#[test]
fn depth_limit_is_inconclusive() {
    let model = load("two_sem.rybu");
    let limits = ExplorationLimits {
        max_nodes: 1000,
        max_depth: Some(2),
    };
    let (g, report) = check(&model, &limits);
    assert_eq!(g.status(), Completeness::DepthLimit);
    assert_eq!(report.verdict, Verdict::Inconclusive);

    // a depth bound beyond the graph's height leaves it complete
    let deep = ExplorationLimits {
        max_nodes: 1000,
        max_depth: Some(100),
    };
    assert!(build_lts(&model, &deep).is_complete());
}

#[test]
fn witness_paths_are_shortest() {
    let model = load("two_sem.rybu");
    let g = lts(&model);
    // breadth-first distances by a separate pass
    let mut dist = vec![usize::MAX; g.node_count()];
    dist[0] = 0;
    let mut queue = std::collections::VecDeque::from([0]);
    while let Some(n) = queue.pop_front() {
        for e in g.out_edges(n) {
            if dist[e.to] == usize::MAX {
                dist[e.to] = dist[n] + 1;
                queue.push_back(e.to);
            }
        }
    }
    for (n, c) in g.nodes() {
        let path = extract_counterexample(&g, n).unwrap();
        assert_eq!(path.len(), dist[n]);
        assert_eq!(&replay(&model, &path), c);
    }
}

#[test]
fn simulate_step_follows_the_model() {
    let model = load("two_sem.dedan");
    let init = model.initial().clone();
    let enabled = model.enabled_actions(&init).unwrap();
    assert_eq!(enabled.len(), 2);
    let start = enabled
        .iter()
        .copied()
        .find(|&a| model.agent_name(model.action(a).unwrap().agent()) == "A[1]")
        .unwrap();
    let (next, after) = simulate_step(&model, &init, start).unwrap();
    let named = model.named_configuration(&next);
    assert_eq!(named.pending["A[1]"].to_string(), "sem[1].wait");
    assert_eq!(after, model.enabled_actions(&next).unwrap());

    // the same action is no longer enabled
    let err = simulate_step(&model, &next, start).unwrap_err();
    let rybu_core::lts::StepError::NotEnabled { action, enabled } = err;
    assert_eq!(action, start.index());
    assert_eq!(enabled, after);

    // every legal step lands on a node of the graph
    let g = lts(&model);
    for a in &after {
        let (c, _) = simulate_step(&model, &next, *a).unwrap();
        assert!(g.node_id(&c).is_some());
    }
}

#[test]
fn stepping_into_deadlock_leaves_nothing_enabled() {
    let model = load("two_sem.rybu");
    let (_, report) = check(&model, &ExplorationLimits::default());
    let path = &report.total_deadlocks[0].path;
    let mut config = model.initial().clone();
    let mut enabled = Vec::new();
    for &a in path {
        (config, enabled) = simulate_step(&model, &config, a).unwrap();
    }
    assert!(enabled.is_empty());
}

#[test]
fn exploration_is_deterministic() {
    let model = load("buffers.rybu");
    let (g1, r1) = check(&model, &ExplorationLimits::default());
    let (g2, r2) = check(&model, &ExplorationLimits::default());
    assert_eq!(g1.edges(), g2.edges());
    assert_eq!(r1.total_deadlocks, r2.total_deadlocks);
    assert_eq!(r1.partial_deadlocks, r2.partial_deadlocks);
    let n1: Vec<_> = g1.nodes().map(|(_, c)| c.clone()).collect();
    let n2: Vec<_> = g2.nodes().map(|(_, c)| c.clone()).collect();
    assert_eq!(n1, n2);
}
