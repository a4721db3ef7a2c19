use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::PathBuf;

use rybu_core::dedan::{expand, parse_dedan, print_dedan};
use rybu_core::imds::{validate_model, AgentSlot};
use rybu_core::lower::{
    compile_source, enumerate_states, lower_server, lower_thread, Caller, LowerError, LowerOptions,
    RangeViolation,
};
use rybu_core::rybu::{analyze, parse_source};

fn model(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name);
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn compile(src: &str) -> rybu_core::lower::LoweredProgram {
    compile_source(src, &LowerOptions::default()).unwrap_or_else(|e| panic!("{e}"))
}

fn labels(src: &str, server: &str) -> Vec<String> {
    let p = parse_source(src).unwrap();
    let (a, _) = analyze(&p);
    enumerate_states(server, &a.servers[server])
        .unwrap()
        .iter()
        .map(|s| s.label())
        .collect()
}

#[test]
fn cartesian_state_labels() {
    let src = "server test { var val1: 1..3; var val2: {true, false}; }";
    assert_eq!(
        labels(src, "test"),
        [
            "val1_1_val2_true",
            "val1_1_val2_false",
            "val1_2_val2_true",
            "val1_2_val2_false",
            "val1_3_val2_true",
            "val1_3_val2_false"
        ]
    );
    assert_eq!(labels("server s { var state : {up, down}; }", "s").len(), 2);
    assert_eq!(labels(&model("buffers.rybu"), "Buf").len(), 16);
    let three = "server t { var a: 0..3; var b: 0..3; var c: {w, x, y, z}; }";
    assert_eq!(labels(three, "t").len(), 64);
}

#[test]
fn label_collision_is_an_error() {
    let src = "server t { var a: {u, u_b_v}; var b: {v_b_w, w}; }";
    let p = parse_source(src).unwrap();
    let (a, _) = analyze(&p);
    let err = enumerate_states("t", &a.servers["t"]).unwrap_err();
    assert!(matches!(err, LowerError::LabelCollision { .. }), "{err}");
}

const SEM: &str = "server sem {
  var state : {up, down};
  { wait | state == :up } -> { state = :down; return :ok; }
  { signal } -> { state = :up; return :ok; }
}";

fn lowered_sem(callers: &[(&str, &[&str])]) -> Vec<String> {
    let p = parse_source(SEM).unwrap();
    let (a, _) = analyze(&p);
    let callers: Vec<Caller> = callers
        .iter()
        .map(|(t, s)| Caller {
            thread: t.to_string(),
            services: s.iter().map(|s| s.to_string()).collect(),
        })
        .collect();
    lower_server("sem", &p.servers[0], &a.servers["sem"], &a.consts, &callers)
        .unwrap()
        .actions
        .iter()
        .map(ToString::to_string)
        .collect()
}

#[test]
fn signal_with_two_callers() {
    let actions = lowered_sem(&[("t1", &["signal"]), ("t2", &["signal"])]);
    assert_eq!(
        actions,
        [
            "{A_t1.sem.signal, sem.state_up} -> {A_t1.S_t1.ok, sem.state_up}",
            "{A_t1.sem.signal, sem.state_down} -> {A_t1.S_t1.ok, sem.state_up}",
            "{A_t2.sem.signal, sem.state_up} -> {A_t2.S_t2.ok, sem.state_up}",
            "{A_t2.sem.signal, sem.state_down} -> {A_t2.S_t2.ok, sem.state_up}",
        ]
    );
}

#[test]
fn guarded_wait_with_one_caller() {
    let actions = lowered_sem(&[("t1", &["wait"])]);
    assert_eq!(
        actions,
        ["{A_t1.sem.wait, sem.state_up} -> {A_t1.S_t1.ok, sem.state_down}"]
    );
}

#[test]
fn contradictory_predicate_warns() {
    let src = "server c { var v: 0..2; { x | v < 0 } -> { return :ok; } { y } -> { return :ok; } }
               var c1 = c() { v = 0 };
               thread t() { loop { c1.x(); c1.y(); } }";
    let lowered = compile(src);
    let c1 = lowered.model.server_id("c1").unwrap();
    assert!(lowered
        .model
        .actions()
        .iter()
        .all(|a| a.server() != c1 || lowered.model.service_name(a.in_message.service) == "y"));
    assert!(lowered
        .warnings
        .iter()
        .any(|w| w.message.contains("satisfies the predicate")));
}

#[test]
fn unguarded_overflow_is_a_lowering_error() {
    let src =
        "const N = 3; server c { var value: 0..N; { inc } -> { value = value + 1; return :ok; } }
               var c1 = c() { value = 0 };
               thread t() { c1.inc(); }";
    let err = compile_source(src, &LowerOptions::default()).unwrap_err();
    match err {
        LowerError::OutOfRange(v) => {
            let RangeViolation {
                state, var, value, ..
            } = *v;
            assert_eq!(
                (state.as_str(), var.as_str(), value.as_str()),
                ("value_3", "value", "4")
            );
        }
        other => panic!("{other}"),
    }
}

#[test]
fn simultaneous_updates() {
    let src = "server s { var a: 0..1; var b: 0..1; { swap } -> { a = b; b = a; return :ok; } }
               var s1 = s() { a = 0, b = 1 };
               thread t() { s1.swap(); }";
    let lowered = compile(src);
    let rendered: Vec<String> = lowered
        .model
        .actions()
        .iter()
        .map(|a| lowered.model.fmt_action(a))
        .collect();
    assert!(
        rendered.contains(&"{A_t.s1.swap, s1.a_0_b_1} -> {A_t.S_t.ok, s1.a_1_b_0}".to_string()),
        "{rendered:#?}"
    );
}

#[test]
fn loop_and_match_thread() {
    let lowered = compile(&model("loop_match.rybu"));
    let t = &lowered.threads[0];
    let actions: Vec<String> = t.actions.iter().map(ToString::to_string).collect();
    assert_eq!(
        actions,
        [
            "{A_x.S_x.ok, S_x.s0_s1_y} -> {A_x.s2.z, S_x.s1_s2_z}",
            "{A_x.S_x.ok, S_x.s1_s2_z} -> {A_x.s1.y, S_x.s0_s1_y}",
            "{A_x.S_x.er, S_x.s0_s1_y} -> {A_x.s3.v, S_x.s2_s3_v}",
            "{A_x.S_x.ok, S_x.s2_s3_v} -> {A_x.s1.y, S_x.s0_s1_y}",
        ]
    );
    let init = lowered.model.named_configuration(lowered.model.initial());
    assert_eq!(init.states["S_x"], "s0_s1_y");
    assert_eq!(init.pending["A_x"].to_string(), "s1.y");
    // s2 only offers z to this thread and s3 only v
    assert!(lowered
        .warnings
        .iter()
        .any(|w| w.message == "service `s2.v` is never called"));
}

#[test]
fn straight_line_thread_terminates() {
    let p = parse_source(&model("two_sem.rybu")).unwrap();
    let (a, _) = analyze(&p);
    let returns = |_: &str, _: &str| vec!["ok".to_string()];
    let t = lower_thread(&p.threads[0], &returns, false).unwrap();
    assert_eq!(t.pcs.len(), 4);
    assert_eq!(
        t.values,
        [
            "s0_sem1_wait",
            "s1_sem2_wait",
            "s2_sem1_signal",
            "s3_sem2_signal",
            "stop"
        ]
    );
    assert_eq!(
        t.actions.iter().filter(|x| x.out_message.is_some()).count(),
        3
    );
    assert_eq!(
        t.actions.iter().filter(|x| x.out_message.is_none()).count(),
        1
    );
    assert!(a.servers.contains_key("sem"));
}

#[test]
fn single_call_loop() {
    let src = "server a { { x } -> { return :ok; } } var a1 = a(); thread t() { loop { a1.x(); } }";
    let t = &compile(src).threads[0];
    assert_eq!(t.pcs.len(), 1);
    assert_eq!(t.actions.len(), 1);
    assert_eq!(t.actions[0].in_value, t.actions[0].out_value);
}

#[test]
fn buffers_initial_configuration() {
    let lowered = compile(&model("buffers.rybu"));
    let init = lowered.model.named_configuration(lowered.model.initial());
    assert_eq!(init.states["buf"], "count1_0_count2_0");
    assert_eq!(init.states["sBuf1"], "value_0");
    assert_eq!(init.states["sBuf2"], "value_0");
    assert_eq!(init.states["S_User1"], "s0_buf_shouldPut1");
    assert_eq!(init.states["S_User2"], "s0_buf_shouldPut2");
    assert_eq!(init.pending["A_User1"].to_string(), "buf.shouldPut1");
    assert_eq!(init.pending["A_User2"].to_string(), "buf.shouldPut2");
}

#[test]
fn no_threads_gives_servers_only() {
    let lowered =
        compile("server s { var v: 0..1; { x } -> { return :ok; } } var s1 = s() { v = 1 };");
    assert_eq!(lowered.model.agent_count(), 0);
    assert!(lowered.model.actions().is_empty());
    assert!(validate_model(&lowered.model).is_empty());
}

#[test]
fn empty_program() {
    let err = compile_source("  // nothing\n", &LowerOptions::default()).unwrap_err();
    assert_eq!(err.to_string(), "empty program");
}

#[test]
fn typecheck_errors_block_lowering() {
    let src = "server s { { y } -> { return :ok; } { y } -> { return :er; } } var s1 = s(); thread t() { s1.y(); }";
    let err = compile_source(src, &LowerOptions::default()).unwrap_err();
    assert!(
        err.to_string().contains("unhandled return value :er"),
        "{err}"
    );
}

fn sources() -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models");
    let mut out: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "rybu"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read_to_string(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn generated_dedan_round_trips_and_validates() {
    for (name, src) in sources() {
        for bootstrap in [false, true] {
            let options = LowerOptions {
                bootstrap,
                ..LowerOptions::default()
            };
            let lowered = compile_source(&src, &options).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(validate_model(&lowered.model).is_empty(), "{name}");
            let text = print_dedan(&lowered.dedan).unwrap();
            let parsed = parse_dedan(&text).unwrap_or_else(|e| panic!("{name}: {e}\n{text}"));
            assert_eq!(parsed, lowered.dedan, "{name}");
            let again = expand(&parsed).unwrap();
            assert_eq!(again.named(), lowered.model.named(), "{name}");
        }
    }
}

#[test]
fn caller_closure() {
    for (name, src) in sources() {
        let p = parse_source(&src).unwrap();
        let lowered = compile(&src);
        let m = &lowered.model;
        let mut syntactic = BTreeSet::new();
        for (thread, calls) in rybu_core::lower::call_sites(&p.threads) {
            for (instance, service) in calls {
                syntactic.insert((format!("A_{thread}"), instance, service));
            }
        }
        let used: BTreeSet<(String, String, String)> = m
            .actions()
            .iter()
            .flat_map(|a| std::iter::once(a.in_message).chain(a.out_message))
            .chain(m.initial().pending_messages())
            .map(|msg| {
                (
                    m.agent_name(msg.agent).to_string(),
                    m.server_name(msg.server).to_string(),
                    m.service_name(msg.service).to_string(),
                )
            })
            .filter(|(_, s, _)| !s.starts_with("S_"))
            .collect();
        assert_eq!(used, syntactic, "{name}");
    }
}

#[test]
fn nondeterminism_is_preserved() {
    let lowered = compile(&model("loop_match.rybu"));
    let m = &lowered.model;
    let s1 = m.server_id("s1").unwrap();
    let mut by_input: BTreeMap<_, usize> = BTreeMap::new();
    for a in m.actions().iter().filter(|a| a.server() == s1) {
        *by_input.entry((a.in_message, a.in_state)).or_default() += 1;
    }
    assert!(by_input.values().all(|&n| n == 2), "{by_input:?}");
}

#[test]
fn lowering_is_deterministic() {
    for (name, src) in sources() {
        let a = compile(&src);
        let b = compile(&src);
        assert_eq!(
            print_dedan(&a.dedan).unwrap(),
            print_dedan(&b.dedan).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn bootstrap_threads_start_idle() {
    let options = LowerOptions {
        bootstrap: true,
        ..LowerOptions::default()
    };
    let lowered = compile_source(&model("two_sem.rybu"), &options).unwrap();
    let init = lowered.model.named_configuration(lowered.model.initial());
    assert_eq!(init.states["S_proc1"], "ini");
    assert_eq!(init.pending["A_proc1"].to_string(), "S_proc1.start");
    let m = &lowered.model;
    assert!(m.initial().pending_messages().count() == 2);
    assert!(m
        .initial()
        .pending_messages()
        .all(|msg| matches!(m.initial().slot(msg.agent), Some(AgentSlot::Pending { .. }))));
}
