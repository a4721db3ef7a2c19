use std::fmt::Write;

use super::ast::{Expr, ExprKind, Program, Stmt, TypeExpr};

/// Renders a program in canonical layout. Parsing the output yields a tree
/// equal to the input.
pub fn print_program(program: &Program) -> String {
    let mut out = String::new();
    for c in &program.consts {
        let _ = writeln!(out, "const {} = {};", c.name, expr(&c.value));
    }
    for s in &program.servers {
        if !out.is_empty() {
            out.push('\n');
        }
        let _ = writeln!(out, "server {} {{", s.name);
        for v in &s.vars {
            let _ = writeln!(out, "  var {} : {};", v.name, type_expr(&v.ty));
        }
        for a in &s.actions {
            let guard = match &a.predicate {
                Some(p) => format!("{} | {}", a.service, expr(p)),
                None => a.service.clone(),
            };
            let mut body = String::new();
            for u in &a.updates {
                body.push_str(&u.target);
                if let Some(i) = &u.index {
                    let _ = write!(body, "[{}]", expr(i));
                }
                let _ = write!(body, " = {}; ", expr(&u.value));
            }
            let _ = writeln!(
                out,
                "  {{{guard}}} -> {{ {body}return :{}; }}",
                a.return_value
            );
        }
        out.push_str("}\n");
    }
    if !program.instances.is_empty() && !out.is_empty() {
        out.push('\n');
    }
    for i in &program.instances {
        let _ = write!(out, "var {} = {}()", i.name, i.server);
        if !i.init.is_empty() {
            let items: Vec<String> = i
                .init
                .iter()
                .map(|(n, e)| format!("{n} = {}", expr(e)))
                .collect();
            let _ = write!(out, " {{ {} }}", items.join(", "));
        }
        out.push_str(";\n");
    }
    for t in &program.threads {
        if !out.is_empty() {
            out.push('\n');
        }
        let _ = writeln!(out, "thread {}({}) {{", t.name, t.params.join(", "));
        stmts(&mut out, &t.body, 1);
        out.push_str("}\n");
    }
    out
}

fn stmts(out: &mut String, body: &[Stmt], depth: usize) {
    let pad = "  ".repeat(depth);
    for s in body {
        match s {
            Stmt::Call {
                instance, service, ..
            } => {
                let _ = writeln!(out, "{pad}{instance}.{service}();");
            }
            Stmt::Match {
                instance,
                service,
                arms,
                ..
            } => {
                let _ = writeln!(out, "{pad}match {instance}.{service}() {{");
                for arm in arms {
                    let _ = writeln!(out, "{pad}  :{} => {{", arm.atom);
                    stmts(out, &arm.body, depth + 2);
                    let _ = writeln!(out, "{pad}  }}");
                }
                let _ = writeln!(out, "{pad}}}");
            }
            Stmt::Loop { body, .. } => {
                let _ = writeln!(out, "{pad}loop {{");
                stmts(out, body, depth + 1);
                let _ = writeln!(out, "{pad}}}");
            }
        }
    }
}

fn type_expr(ty: &TypeExpr) -> String {
    match ty {
        TypeExpr::Range(lo, hi) => format!("{}..{}", bound(lo), bound(hi)),
        TypeExpr::Enum(atoms) => format!("{{{}}}", atoms.join(", ")),
        TypeExpr::Vector(elem, len) => format!("({})[{}]", type_expr(elem), expr(len)),
    }
}

fn bound(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Binary(op, ..) if op.is_comparison() => format!("({})", expr(e)),
        _ => expr(e),
    }
}

/// Prints an expression with the minimum parentheses the grammar needs.
pub(crate) fn expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Int(n) => n.to_string(),
        ExprKind::Atom(a) => format!(":{a}"),
        ExprKind::Name(n) => n.clone(),
        ExprKind::Index(n, i) => format!("{n}[{}]", expr(i)),
        ExprKind::Vector(items) => {
            let items: Vec<String> = items.iter().map(expr).collect();
            format!("[{}]", items.join(", "))
        }
        ExprKind::Neg(inner) => match inner.kind {
            ExprKind::Int(_) | ExprKind::Binary(..) | ExprKind::Neg(_) => {
                format!("-({})", expr(inner))
            }
            _ => format!("-{}", expr(inner)),
        },
        ExprKind::Binary(op, lhs, rhs) => {
            let (l, r) = if op.is_comparison() {
                (bound(lhs), bound(rhs))
            } else {
                (bound(lhs), operand(rhs))
            };
            format!("{l} {} {r}", op.symbol())
        }
    }
}

fn operand(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Binary(..) => format!("({})", expr(e)),
        _ => expr(e),
    }
}
