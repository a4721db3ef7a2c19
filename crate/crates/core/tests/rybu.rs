use std::fs;
use std::path::PathBuf;

use proptest::prelude::*;
use rybu_core::rybu::ast::{
    BinOp, Expr, ExprKind, InstanceDecl, MatchArm, Program, RybuAction, ServerDecl, Stmt,
    ThreadDecl, TypeExpr, Update, VarDecl,
};
use rybu_core::rybu::{
    analyze, detokenize, parse_source, print_program, tokenize, typecheck, Span, Ty,
};

fn model(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name);
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn rybu_models() -> Vec<String> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models");
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".rybu"))
        .collect();
    names.sort();
    names
}

const SEM: &str = "server sem {
  var state : {up, down};
  { wait | state == :up } -> { state = :down; return :ok; }
  { signal } -> { state = :up; return :ok; }
}";

#[test]
fn semaphore_server_shape() {
    let p = parse_source(SEM).unwrap();
    assert_eq!(p.servers.len(), 1);
    let sem = &p.servers[0];
    assert_eq!(sem.vars.len(), 1);
    assert_eq!(sem.actions.len(), 2);
    assert_eq!(sem.services(), ["wait", "signal"]);
    assert!(sem.actions[1].predicate.is_none());
}

#[test]
fn buffer_program_shape() {
    let p = parse_source(&model("buffers.rybu")).unwrap();
    assert_eq!(p.consts.len(), 1);
    assert_eq!(p.servers.len(), 2);
    assert_eq!(p.instances.len(), 3);
    assert_eq!(p.threads.len(), 2);
    assert_eq!(typecheck(&p), vec![]);
    let (analysis, _) = analyze(&p);
    assert_eq!(analysis.consts["N"], 3);
    assert_eq!(
        analysis.servers["Buf"].returns["shouldPut1"],
        ["true", "false"]
    );
}

#[test]
fn match_with_two_arms() {
    let src = "thread x() { match s1.y() { :ok => s2.z(); :er => s3.v(); } }";
    let p = parse_source(src).unwrap();
    let Stmt::Match { arms, .. } = &p.threads[0].body[0] else {
        panic!("expected match");
    };
    assert_eq!(arms.len(), 2);
    assert_eq!(arms[1].atom, "er");
    assert!(matches!(&arms[1].body[0], Stmt::Call { instance, .. } if instance == "s3"));
}

#[test]
fn both_initializer_separators() {
    let a = parse_source("var t = test() {val1 = 1; val2 = :false};").unwrap();
    let b = parse_source("var t = test() { val1 = 1, val2 = :false };").unwrap();
    assert_eq!(a, b);
    assert_eq!(a.instances[0].init.len(), 2);
}

#[test]
fn colon_glued_to_type_name() {
    let p = parse_source("const N = 2; server s { var v:N..4; { x } -> { return :ok; } }").unwrap();
    assert!(matches!(
        &p.servers[0].vars[0].ty,
        TypeExpr::Range(lo, _) if lo.kind == ExprKind::Name("N".into())
    ));
}

#[test]
fn vector_type_and_literal() {
    let src = "server q { var v : (0..3)[4]; { put } -> { v[0] = 3; return :ok; } }
               var a = q() { v = [0, 3, 1, 2] };";
    let p = parse_source(src).unwrap();
    assert_eq!(typecheck(&p), vec![]);
    let (analysis, _) = analyze(&p);
    let ty = &analysis.servers["q"].vars[0].1;
    assert_eq!(ty.cardinality(), 256);
    assert!(matches!(ty, Ty::Vector { len: 4, .. }));
}

#[test]
fn multiplication_is_rejected() {
    let err = parse_source("const N = 2 * 3;").unwrap_err();
    assert!(err.message.contains("`*` is not supported"), "{err}");
}

#[test]
fn chained_comparison_is_rejected() {
    let err = parse_source("server s { { x | 1 < 2 < 3 } -> { return :ok; } }").unwrap_err();
    assert!(err.message.contains("chained"), "{err}");
}

#[test]
fn syntax_error_position_and_hint() {
    let err = parse_source("server s {\n  var x : {a, b}\n}").unwrap_err();
    assert_eq!((err.span.line, err.span.col), (3, 1));
    assert!(err.message.contains("expected `;`"), "{err}");
}

#[test]
fn missing_return_is_a_syntax_error() {
    let err = parse_source("server s { { x } -> { } }").unwrap_err();
    assert!(err.message.contains("no `return`"), "{err}");
}

fn messages(src: &str) -> Vec<String> {
    typecheck(&parse_source(src).unwrap())
        .into_iter()
        .map(|d| d.message)
        .collect()
}

#[test]
fn call_sugar_on_service_with_error_outcome() {
    let src = "server s { { y } -> { return :ok; } { y } -> { return :er; } }
               var s1 = s();
               thread t() { s1.y(); }";
    assert_eq!(messages(src), ["unhandled return value :er"]);
}

#[test]
fn match_arm_checks() {
    let src = "server s { { y } -> { return :ok; } { y } -> { return :er; } }
               var s1 = s();
               thread t() { match s1.y() { :ok => s1.y(); :nope => s1.y(); } }";
    let msgs = messages(src);
    assert!(
        msgs.iter().any(|m| m.contains("never returns :nope")),
        "{msgs:?}"
    );
    assert!(
        msgs.iter().any(|m| m == "unhandled return value :er"),
        "{msgs:?}"
    );
}

#[test]
fn unguarded_increment_passes_typecheck() {
    let src =
        "const N = 3; server c { var value: 0..N; { inc } -> { value = value + 1; return :ok; } }";
    assert_eq!(messages(src), Vec::<String>::new());
}

#[test]
fn type_errors() {
    let cases = [
        (
            "server s { var x : {a}; { y | x } -> { return :ok; } }",
            "predicate must be boolean",
        ),
        (
            "server s { var x : {a}; { y } -> { x = 1; return :ok; } }",
            "cannot assign integer",
        ),
        (
            "server s { var x : 0..1; { y } -> { x = :a; return :ok; } }",
            "cannot assign :a",
        ),
        (
            "server s { var x : {a}; { y | x == :b } -> { return :ok; } }",
            "can never equal",
        ),
        (
            "server s { var x : 0..1; { y } -> { z = 1; return :ok; } }",
            "not a variable",
        ),
        (
            "server s { var x : 0..1; { y | w > 0 } -> { return :ok; } }",
            "unknown name `w`",
        ),
        (
            "server s { var x : 0..1; { y } -> { x = 0; x = 1; return :ok; } }",
            "assigned twice",
        ),
        ("server s { var x : 2..1; }", "empty range"),
        ("server s { var x : {}; }", "no values"),
        ("server s { var x : 0..1; var x : 0..1; }", "declared twice"),
        ("const A = B; const B = 1;", "not a constant"),
        (
            "server s { var x : 0..1; } var i = s() { };",
            "does not initialize `x`",
        ),
        (
            "server s { var x : 0..1; } var i = s() { x = 5 };",
            "outside its type",
        ),
        ("var i = nothing();", "unknown server"),
        ("thread t() { ghost.y(); }", "unknown instance"),
        (
            "server s { { y } -> { return :ok; } } var i = s(); thread t(a) { i.y(); }",
            "parameters",
        ),
        ("thread t() { }", "empty body"),
        (
            "server s { { y } -> { return :ok; } } var i = s(); thread t() { loop { } }",
            "loop body is empty",
        ),
        (
            "server s { { y } -> { return :ok; } } var i = s(); thread t() { i.q(); }",
            "no service `q`",
        ),
        (
            "server s { var v : (0..1)[2]; { y } -> { v[2] = 0; return :ok; } }",
            "out of bounds",
        ),
    ];
    for (src, needle) in cases {
        let msgs = messages(src);
        assert!(
            msgs.iter().any(|m| m.contains(needle)),
            "{src}\nexpected `{needle}` in {msgs:?}"
        );
    }
}

#[test]
fn all_model_sources_typecheck_and_round_trip() {
    let names = rybu_models();
    assert!(names.len() >= 5, "{names:?}");
    for name in names {
        let src = model(&name);
        let p = parse_source(&src).unwrap_or_else(|e| panic!("{name}: {e}"));
        let errors: Vec<_> = typecheck(&p).into_iter().filter(|d| d.is_error()).collect();
        assert!(errors.is_empty(), "{name}: {errors:?}");
        let printed = print_program(&p);
        assert_eq!(parse_source(&printed).unwrap(), p, "{name}:\n{printed}");
        let toks = tokenize(&src).unwrap();
        let kinds =
            |t: &[rybu_core::rybu::Token]| t.iter().map(|t| t.kind.clone()).collect::<Vec<_>>();
        assert_eq!(kinds(&tokenize(&detokenize(&toks)).unwrap()), kinds(&toks));
    }
}

fn arb_ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,5}".prop_filter("keyword", |s| {
        !matches!(
            s.as_str(),
            "server" | "var" | "thread" | "loop" | "match" | "return" | "const"
        )
    })
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-50i64..50).prop_map(Expr::int),
        arb_ident().prop_map(Expr::atom),
        arb_ident().prop_map(Expr::name),
        (arb_ident(), 0i64..4)
            .prop_map(|(n, i)| Expr::new(ExprKind::Index(n, Box::new(Expr::int(i))))),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            inner
                .clone()
                .prop_map(|e| Expr::new(ExprKind::Neg(Box::new(e)))),
            (
                prop::sample::select(vec![
                    BinOp::Add,
                    BinOp::Sub,
                    BinOp::Eq,
                    BinOp::Ne,
                    BinOp::Lt,
                    BinOp::Gt,
                    BinOp::Le,
                    BinOp::Ge
                ]),
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, l, r)| Expr::binary(op, l, r)),
            prop::collection::vec(inner, 0..3).prop_map(|v| Expr::new(ExprKind::Vector(v))),
        ]
    })
}

fn arb_type() -> impl Strategy<Value = TypeExpr> {
    let leaf = prop_oneof![
        (arb_expr(), arb_expr()).prop_map(|(a, b)| TypeExpr::Range(a, b)),
        prop::collection::vec(arb_ident(), 0..4).prop_map(TypeExpr::Enum),
    ];
    leaf.prop_recursive(2, 4, 1, |inner| {
        (inner, arb_expr()).prop_map(|(t, n)| TypeExpr::Vector(Box::new(t), n))
    })
}

fn arb_stmts() -> impl Strategy<Value = Vec<Stmt>> {
    let call = (arb_ident(), arb_ident()).prop_map(|(instance, service)| Stmt::Call {
        instance,
        service,
        span: Span::default(),
    });
    let stmt = call.prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..3).prop_map(|body| Stmt::Loop {
                body,
                span: Span::default()
            }),
            (
                arb_ident(),
                arb_ident(),
                prop::collection::vec((arb_ident(), prop::collection::vec(inner, 0..2)), 0..3)
            )
                .prop_map(|(instance, service, arms)| Stmt::Match {
                    instance,
                    service,
                    arms: arms
                        .into_iter()
                        .map(|(atom, body)| MatchArm {
                            atom,
                            body,
                            span: Span::default()
                        })
                        .collect(),
                    span: Span::default(),
                }),
        ]
    });
    prop::collection::vec(stmt, 0..4)
}

fn arb_program() -> impl Strategy<Value = Program> {
    let action = (
        arb_ident(),
        prop::option::of(arb_expr()),
        prop::collection::vec(
            (arb_ident(), prop::option::of(arb_expr()), arb_expr()),
            0..3,
        ),
        arb_ident(),
    )
        .prop_map(|(service, predicate, updates, return_value)| RybuAction {
            service,
            predicate,
            updates: updates
                .into_iter()
                .map(|(target, index, value)| Update {
                    target,
                    index,
                    value,
                    span: Span::default(),
                })
                .collect(),
            return_value,
            span: Span::default(),
        });
    let server = (
        arb_ident(),
        prop::collection::vec((arb_ident(), arb_type()), 0..3),
        prop::collection::vec(action, 0..3),
    )
        .prop_map(|(name, vars, actions)| ServerDecl {
            name,
            vars: vars
                .into_iter()
                .map(|(name, ty)| VarDecl {
                    name,
                    ty,
                    span: Span::default(),
                })
                .collect(),
            actions,
            span: Span::default(),
        });
    let instance = (
        arb_ident(),
        arb_ident(),
        prop::collection::vec((arb_ident(), arb_expr()), 0..3),
    )
        .prop_map(|(name, server, init)| InstanceDecl {
            name,
            server,
            init,
            span: Span::default(),
        });
    let thread = (
        arb_ident(),
        prop::collection::vec(arb_ident(), 0..2),
        arb_stmts(),
    )
        .prop_map(|(name, params, body)| ThreadDecl {
            name,
            params,
            body,
            span: Span::default(),
        });
    (
        prop::collection::vec((arb_ident(), arb_expr()), 0..2),
        prop::collection::vec(server, 0..3),
        prop::collection::vec(instance, 0..3),
        prop::collection::vec(thread, 0..3),
    )
        .prop_map(|(consts, servers, instances, threads)| Program {
            consts: consts
                .into_iter()
                .map(|(name, value)| rybu_core::rybu::ast::ConstDecl {
                    name,
                    value,
                    span: Span::default(),
                })
                .collect(),
            servers,
            instances,
            threads,
        })
}

proptest! {
    #[test]
    fn printer_parser_round_trip(p in arb_program()) {
        let text = print_program(&p);
        let back = parse_source(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, p);
    }

    #[test]
    fn detokenize_round_trip(p in arb_program()) {
        let toks = tokenize(&print_program(&p)).unwrap();
        let again = tokenize(&detokenize(&toks)).unwrap();
        let kinds = |t: &[rybu_core::rybu::Token]| t.iter().map(|t| t.kind.clone()).collect::<Vec<_>>();
        prop_assert_eq!(kinds(&again), kinds(&toks));
    }
}
