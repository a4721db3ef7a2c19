mod common;

use std::collections::BTreeSet;
use std::fs;

use common::*;
use rybu_core::imds::{ModelBuilder, SystemModel};
use rybu_core::lower::{compile_source, LowerOptions};
use rybu_core::lts::{build_lts, check, find_total_deadlocks, ExplorationLimits};
use rybu_core::report::{
    build_trace, parse_trace_actions, render_dot, render_path_dot, render_trace, DotOptions,
    DotView, ReportError, TraceEvent,
};

fn two_sem() -> SystemModel {
    let options = LowerOptions {
        system_name: "two_sem".into(),
        ..LowerOptions::default()
    };
    compile_source(&read_model("two_sem.rybu"), &options)
        .unwrap()
        .model
}

#[test]
fn two_sem_trace_matches_golden_file() {
    let model = two_sem();
    let (_, report) = check(&model, &ExplorationLimits::default());
    let (_, path) = report.primary_witness().unwrap();
    let text = render_trace(&model, path).unwrap();
    let golden_path =
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/two_sem.trace");
    let golden = fs::read_to_string(golden_path).unwrap();
    assert_eq!(text, golden);
    assert!(text.contains("sem1.state_down, sem2.state_down"));
    assert!(text.contains("blocked agents: A_proc1 -> sem2.wait, A_proc2 -> sem1.wait"));
}

#[test]
fn trace_line_count_is_steps_plus_header_and_footer() {
    let model = load("buffers.rybu");
    let (_, report) = check(&model, &ExplorationLimits::default());
    for t in &report.total_deadlocks {
        let text = render_trace(&model, &t.path).unwrap();
        assert_eq!(text.lines().count(), t.path.len() + 5);
    }
}

#[test]
fn empty_path_prints_header_and_initial_configuration() {
    let model = two_sem();
    let text = render_trace(&model, &[]).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "trace of two_sem: 0 steps");
    assert!(lines[1].starts_with("initial {S_proc1.s0_sem1_wait"));
}

#[test]
fn trace_steps_parse_back_and_replay() {
    for (name, model) in suite() {
        let (g, report) = check(&model, &ExplorationLimits::default());
        let witnesses = report
            .total_deadlocks
            .iter()
            .map(|t| (t.node, &t.path))
            .chain(report.partial_deadlocks.iter().map(|p| (p.node, &p.path)));
        for (node, path) in witnesses {
            let text = render_trace(&model, path).unwrap();
            let parsed = parse_trace_actions(&model, &text).unwrap();
            assert_eq!(&parsed, path, "{name}");
            let end = parsed.iter().fold(model.initial().clone(), |c, &a| {
                c.apply(model.action(a).unwrap()).unwrap()
            });
            assert_eq!(g.node_id(&end), Some(node), "{name}");
        }
    }
}

#[test]
fn trace_events_per_step() {
    let model = rybu_model(STRAIGHT_LINE, false);
    let (g, _) = check(&model, &ExplorationLimits::default());
    let end = g
        .nodes()
        .find(|(n, _)| g.out_edges(*n).is_empty())
        .unwrap()
        .0;
    let path = rybu_core::lts::extract_counterexample(&g, end).unwrap();
    let doc = build_trace(&model, &path).unwrap();
    for step in &doc.steps {
        let changes = step
            .events
            .iter()
            .filter(|e| matches!(e, TraceEvent::StateChange { .. }))
            .count();
        let passes = step
            .events
            .iter()
            .filter(|e| matches!(e, TraceEvent::MessagePass { .. }))
            .count();
        assert_eq!(changes, 1);
        assert!(passes <= 1);
    }
    let last = doc.steps.last().unwrap();
    assert_eq!(last.events.len(), 1);
    assert!(doc.render().contains("TERMINATES"));
    assert!(doc.blocked_agents.is_empty());
    assert!(doc.final_configuration.terminated.contains("A_a"));
}

#[test]
fn malformed_traces_are_rejected() {
    let model = two_sem();
    let (_, report) = check(&model, &ExplorationLimits::default());
    let text = render_trace(&model, &report.total_deadlocks[0].path).unwrap();
    // dropping a step breaks the numbering
    let skipped: String = text
        .lines()
        .filter(|l| !l.starts_with("step 2 "))
        .map(|l| format!("{l}\n"))
        .collect();
    assert!(matches!(
        parse_trace_actions(&model, &skipped),
        Err(ReportError::BadTrace { line: 4, .. })
    ));
    let garbled = text.replace("recv sem1.wait", "recv sem1.lock");
    assert!(matches!(
        parse_trace_actions(&model, &garbled),
        Err(ReportError::BadTrace { .. })
    ));
    // steps 1 and 3 swapped: step 3 is an answer that has not been sent yet
    let lines: Vec<&str> = text.lines().collect();
    let body = |l: &str| l.split_once("  ").unwrap().1.to_string();
    let swapped = format!("step 1  {}\n", body(lines[4]));
    assert!(matches!(
        parse_trace_actions(&model, &swapped),
        Err(ReportError::NotEnabled { step: 1, .. })
    ));
}

type Attrs = Vec<(String, String)>;

/// Statements of a DOT graph as read by a small reader for the subset the
/// renderer emits: one `digraph` with node and edge statements.
#[derive(Debug, Default)]
struct Dot {
    nodes: Vec<(String, Attrs)>,
    edges: Vec<(String, String, Attrs)>,
}

fn dot_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            c if c.is_whitespace() => {}
            '{' | '}' | '[' | ']' | '=' | ',' | ';' => out.push(c.to_string()),
            '-' => {
                assert_eq!(chars.next(), Some('>'), "only directed edges");
                out.push("->".into());
            }
            '"' => {
                let mut s = String::from("\"");
                loop {
                    match chars.next().expect("unterminated string") {
                        '\\' => {
                            s.push('\\');
                            s.push(chars.next().expect("escape"));
                        }
                        '"' => {
                            s.push('"');
                            break;
                        }
                        c => s.push(c),
                    }
                }
                out.push(s);
            }
            c if c.is_alphanumeric() || c == '_' => {
                let mut s = c.to_string();
                while let Some(&n) = chars.peek() {
                    if n.is_alphanumeric() || n == '_' || n == '.' {
                        s.push(n);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(s);
            }
            other => panic!("unexpected character {other:?}"),
        }
    }
    out
}

fn read_dot(text: &str) -> Dot {
    let toks = dot_tokens(text);
    assert_eq!(toks[0], "digraph");
    assert_eq!(toks[2], "{");
    assert_eq!(toks.last().unwrap(), "}");
    let mut dot = Dot::default();
    let body = &toks[3..toks.len() - 1];
    for stmt in body.split(|t| t == ";").filter(|s| !s.is_empty()) {
        let (head, attrs) = match stmt.iter().position(|t| t == "[") {
            Some(i) => {
                assert_eq!(stmt.last().unwrap(), "]");
                (&stmt[..i], &stmt[i + 1..stmt.len() - 1])
            }
            None => (stmt, &[][..]),
        };
        let attrs: Vec<(String, String)> = attrs
            .split(|t| t == ",")
            .filter(|a| !a.is_empty())
            .map(|a| {
                assert_eq!(a.len(), 3, "attribute {a:?}");
                assert_eq!(a[1], "=");
                (a[0].clone(), a[2].clone())
            })
            .collect();
        match head {
            [id] if id == "node" => {}
            [id] => dot.nodes.push((id.clone(), attrs)),
            [a, arrow, b] if arrow == "->" => dot.edges.push((a.clone(), b.clone(), attrs)),
            other => panic!("unexpected statement {other:?}"),
        }
    }
    dot
}

#[test]
fn full_graph_has_one_node_per_configuration() {
    for (name, model) in suite() {
        let g = build_lts(&model, &ExplorationLimits::default());
        let text = render_dot(&model, &g, &DotOptions::default()).unwrap();
        let dot = read_dot(&text);
        assert_eq!(dot.nodes.len(), enumerate(&model).nodes.len(), "{name}");
        assert_eq!(dot.edges.len(), g.edge_count(), "{name}");
        let ids: BTreeSet<&String> = dot.nodes.iter().map(|(id, _)| id).collect();
        assert_eq!(ids.len(), dot.nodes.len());
        for (a, b, attrs) in &dot.edges {
            assert!(ids.contains(a) && ids.contains(b));
            assert_eq!(attrs[0].0, "label");
        }
        let red = dot
            .nodes
            .iter()
            .filter(|(_, attrs)| attrs.iter().any(|(k, v)| k == "color" && v == "red"))
            .count();
        assert_eq!(red, find_total_deadlocks(&g).unwrap().len(), "{name}");
    }
}

#[test]
fn edge_labels_name_agent_server_and_service() {
    let model = two_sem();
    let g = build_lts(&model, &ExplorationLimits::default());
    let dot = read_dot(&render_dot(&model, &g, &DotOptions::default()).unwrap());
    let labels: BTreeSet<&str> = dot.edges.iter().map(|(_, _, a)| a[0].1.as_str()).collect();
    assert!(labels.contains("\"A_proc1:sem1.wait\""));
    assert!(labels.contains("\"A_proc2:S_proc2.ok\""));
}

#[test]
fn server_projection_has_its_values() {
    let model = two_sem();
    let g = build_lts(&model, &ExplorationLimits::default());
    let options = DotOptions {
        view: DotView::Server("sem1".into()),
        ..DotOptions::default()
    };
    let dot = read_dot(&render_dot(&model, &g, &options).unwrap());
    let nodes: BTreeSet<&str> = dot.nodes.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(nodes, BTreeSet::from(["\"state_up\"", "\"state_down\""]));
    let sem1 = model.server_id("sem1").unwrap();
    assert_eq!(dot.edges.len(), model.server_view()[&sem1].len());

    let listing = load("two_sem.dedan");
    let g = build_lts(&listing, &ExplorationLimits::default());
    let options = DotOptions {
        view: DotView::Server("sem[1]".into()),
        ..DotOptions::default()
    };
    let dot = read_dot(&render_dot(&listing, &g, &options).unwrap());
    let nodes: BTreeSet<&str> = dot.nodes.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(nodes, BTreeSet::from(["\"up\"", "\"down\""]));
}

#[test]
fn agent_projection_follows_messages() {
    let model = two_sem();
    let g = build_lts(&model, &ExplorationLimits::default());
    let options = DotOptions {
        view: DotView::Agent("A_proc1".into()),
        ..DotOptions::default()
    };
    let dot = read_dot(&render_dot(&model, &g, &options).unwrap());
    assert!(dot.nodes.iter().any(|(n, _)| n == "\"terminated\""));
    let a = model.agent_id("A_proc1").unwrap();
    assert_eq!(dot.edges.len(), model.agent_view()[&a].len());
    let bad = DotOptions {
        view: DotView::Agent("nobody".into()),
        ..DotOptions::default()
    };
    assert_eq!(
        render_dot(&model, &g, &bad),
        Err(ReportError::UnknownAgent("nobody".into()))
    );
}

#[test]
fn cap_refuses_large_graphs() {
    let model = load("buffers.rybu");
    let g = build_lts(&model, &ExplorationLimits::default());
    let options = DotOptions {
        cap: 100,
        view: DotView::Full,
    };
    let err = render_dot(&model, &g, &options).unwrap_err();
    assert_eq!(
        err,
        ReportError::TooLarge {
            nodes: g.node_count(),
            cap: 100
        }
    );
    assert!(err.to_string().contains("projection"));
    // projections are not subject to the cap
    let options = DotOptions {
        cap: 1,
        view: DotView::Server("sBuf1".into()),
    };
    assert!(render_dot(&model, &g, &options).is_ok());
}

#[test]
fn single_node_graph() {
    let mut b = ModelBuilder::new("idle");
    let s = b.state("srv", "a");
    b.set_initial_state(s);
    let m = b.message("A", "srv", "go");
    b.set_initial_message(m);
    let model = b.build().unwrap();
    let g = build_lts(&model, &ExplorationLimits::default());
    let dot = read_dot(&render_dot(&model, &g, &DotOptions::default()).unwrap());
    assert_eq!((dot.nodes.len(), dot.edges.len()), (1, 0));
}

#[test]
fn path_graph_is_a_chain() {
    let model = two_sem();
    let (_, report) = check(&model, &ExplorationLimits::default());
    let path = &report.total_deadlocks[0].path;
    let dot = read_dot(&render_path_dot(&model, path).unwrap());
    assert_eq!(dot.nodes.len(), path.len() + 1);
    assert_eq!(dot.edges.len(), path.len());
    let last = &dot.nodes.last().unwrap().1;
    assert!(last.iter().any(|(k, v)| k == "color" && v == "red"));
}
