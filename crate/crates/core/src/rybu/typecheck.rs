use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::ast::{BinOp, Expr, ExprKind, Program, ServerDecl, Stmt, TypeExpr};
use super::value::{const_int, const_value, Ty};
use super::Span;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    #[serde(serialize_with = "span_text")]
    pub span: Span,
    pub message: String,
}

fn span_text<S: serde::Serializer>(span: &Span, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(span)
}

impl Diagnostic {
    pub fn error(span: Span, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            span,
            message: message.into(),
        }
    }

    pub fn warning(span: Span, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            span,
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{}: {sev}: {}", self.span, self.message)
    }
}

/// Resolved facts about one server declaration.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ServerInfo {
    pub vars: Vec<(String, Ty)>,
    /// Service name to the atoms it may return, in order of appearance.
    pub returns: BTreeMap<String, Vec<String>>,
}

impl ServerInfo {
    pub fn var(&self, name: &str) -> Option<&Ty> {
        self.vars.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

/// Everything later stages need from a checked program.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Analysis {
    pub consts: BTreeMap<String, i64>,
    pub servers: BTreeMap<String, ServerInfo>,
}

/// Checks a program and returns the resolved analysis together with all
/// diagnostics. The analysis is best-effort when errors are present.
pub fn analyze(program: &Program) -> (Analysis, Vec<Diagnostic>) {
    let mut cx = Checker::default();
    cx.consts(program);
    for s in &program.servers {
        if cx.analysis.servers.contains_key(&s.name) {
            cx.error(s.span, format!("server `{}` is declared twice", s.name));
            continue;
        }
        let info = cx.server(s);
        cx.analysis.servers.insert(s.name.clone(), info);
    }
    cx.instances(program);
    cx.threads(program);
    (cx.analysis, cx.diags)
}

/// The diagnostics of [`analyze`]; empty means the program is well-formed.
pub fn typecheck(program: &Program) -> Vec<Diagnostic> {
    analyze(program).1
}

#[derive(Clone, Debug, PartialEq)]
enum ETy {
    Int,
    Bool,
    /// An atom drawn from this set.
    Atoms(Vec<String>),
    Vector(Ty),
    Unknown,
}

fn ety(ty: &Ty) -> ETy {
    match ty {
        Ty::Int { .. } => ETy::Int,
        Ty::Enum { atoms } => ETy::Atoms(atoms.clone()),
        Ty::Vector { .. } => ETy::Vector(ty.clone()),
    }
}

fn describe(t: &ETy) -> String {
    match t {
        ETy::Int => "integer".into(),
        ETy::Bool => "boolean".into(),
        ETy::Atoms(a) if a.len() == 1 => format!(":{}", a[0]),
        ETy::Atoms(a) => format!("one of {{{}}}", a.join(", ")),
        ETy::Vector(ty) => format!("vector {ty}"),
        ETy::Unknown => "unknown".into(),
    }
}

#[derive(Default)]
struct Checker {
    analysis: Analysis,
    diags: Vec<Diagnostic>,
}

impl Checker {
    fn error(&mut self, span: Span, message: impl Into<String>) {
        self.diags.push(Diagnostic::error(span, message));
    }

    fn consts(&mut self, program: &Program) {
        for c in &program.consts {
            if self.analysis.consts.contains_key(&c.name) {
                self.error(c.span, format!("constant `{}` is declared twice", c.name));
                continue;
            }
            match const_int(&c.value, &self.analysis.consts) {
                Ok(v) => {
                    self.analysis.consts.insert(c.name.clone(), v);
                }
                Err(e) => self.error(c.span, format!("constant `{}`: {e}", c.name)),
            }
        }
    }

    fn resolve_type(&mut self, ty: &TypeExpr, span: Span) -> Option<Ty> {
        let consts = &self.analysis.consts;
        match ty {
            TypeExpr::Range(lo, hi) => {
                let bounds = const_int(lo, consts).and_then(|l| Ok((l, const_int(hi, consts)?)));
                match bounds {
                    Ok((lo, hi)) if lo <= hi => Some(Ty::Int { lo, hi }),
                    Ok((lo, hi)) => {
                        self.error(span, format!("empty range {lo}..{hi}"));
                        None
                    }
                    Err(e) => {
                        self.error(span, format!("range bound: {e}"));
                        None
                    }
                }
            }
            TypeExpr::Enum(atoms) => {
                if atoms.is_empty() {
                    self.error(span, "enumeration type has no values");
                    return None;
                }
                let unique: BTreeSet<&String> = atoms.iter().collect();
                if unique.len() != atoms.len() {
                    self.error(span, "enumeration type repeats a value");
                    return None;
                }
                Some(Ty::Enum {
                    atoms: atoms.clone(),
                })
            }
            TypeExpr::Vector(elem, len) => {
                let elem = self.resolve_type(elem, span)?;
                match const_int(len, &self.analysis.consts) {
                    Ok(n) if n >= 1 => Some(Ty::Vector {
                        elem: Box::new(elem),
                        len: n as usize,
                    }),
                    Ok(n) => {
                        self.error(span, format!("vector length must be at least 1, got {n}"));
                        None
                    }
                    Err(e) => {
                        self.error(span, format!("vector length: {e}"));
                        None
                    }
                }
            }
        }
    }

    fn server(&mut self, s: &ServerDecl) -> ServerInfo {
        let mut info = ServerInfo::default();
        for v in &s.vars {
            if info.var(&v.name).is_some() {
                self.error(
                    v.span,
                    format!(
                        "variable `{}` is declared twice in server `{}`",
                        v.name, s.name
                    ),
                );
                continue;
            }
            if self.analysis.consts.contains_key(&v.name) {
                self.error(v.span, format!("variable `{}` shadows a constant", v.name));
            }
            if let Some(ty) = self.resolve_type(&v.ty, v.span) {
                info.vars.push((v.name.clone(), ty));
            }
        }
        for a in &s.actions {
            if let Some(p) = &a.predicate {
                let t = self.expr(p, &info);
                if t != ETy::Bool && t != ETy::Unknown {
                    self.error(
                        p.span,
                        format!("predicate must be boolean, found {}", describe(&t)),
                    );
                }
            }
            let mut targets: Vec<(&str, Option<i64>)> = Vec::new();
            for u in &a.updates {
                let Some(ty) = info.var(&u.target).cloned() else {
                    self.error(
                        u.span,
                        format!("`{}` is not a variable of server `{}`", u.target, s.name),
                    );
                    continue;
                };
                let (target_ty, slot) = match &u.index {
                    None => (ty, None),
                    Some(i) => match self.index(&u.target, &ty, i) {
                        Some((elem, k)) => (elem, Some(k)),
                        None => continue,
                    },
                };
                let clash = targets
                    .iter()
                    .any(|(t, k)| *t == u.target && (k.is_none() || slot.is_none() || *k == slot));
                if clash {
                    self.error(u.span, format!("`{}` is assigned twice", u.target));
                }
                targets.push((&u.target, slot));
                let value = self.expr(&u.value, &info);
                self.expect_assignable(&target_ty, &value, u.value.span, &u.target);
            }
            let entry = info.returns.entry(a.service.clone()).or_default();
            if !entry.contains(&a.return_value) {
                entry.push(a.return_value.clone());
            }
        }
        info
    }

    fn expect_assignable(&mut self, target: &Ty, value: &ETy, span: Span, name: &str) {
        let ok = match (target, value) {
            (_, ETy::Unknown) => true,
            (Ty::Int { .. }, ETy::Int) => true,
            (Ty::Enum { atoms }, ETy::Atoms(vals)) => {
                let stray: Vec<&String> = vals.iter().filter(|v| !atoms.contains(v)).collect();
                if let Some(bad) = stray.first() {
                    self.error(
                        span,
                        format!(":{bad} is not a value of `{name}` ({target})"),
                    );
                }
                true
            }
            (Ty::Vector { .. }, ETy::Vector(t)) => t == target,
            _ => false,
        };
        if !ok {
            self.error(
                span,
                format!(
                    "cannot assign {} to `{name}` of type {target}",
                    describe(value)
                ),
            );
        }
    }

    fn index(&mut self, name: &str, ty: &Ty, index: &Expr) -> Option<(Ty, i64)> {
        let Ty::Vector { elem, len } = ty else {
            self.error(index.span, format!("`{name}` is not a vector"));
            return None;
        };
        match const_int(index, &self.analysis.consts) {
            Ok(k) if k >= 0 && (k as usize) < *len => Some(((**elem).clone(), k)),
            Ok(k) => {
                self.error(
                    index.span,
                    format!("index {k} is out of bounds for `{name}` of length {len}"),
                );
                None
            }
            Err(_) => {
                self.error(index.span, "vector index must be a constant expression");
                None
            }
        }
    }

    fn expr(&mut self, e: &Expr, info: &ServerInfo) -> ETy {
        match &e.kind {
            ExprKind::Int(_) => ETy::Int,
            ExprKind::Atom(a) => ETy::Atoms(vec![a.clone()]),
            ExprKind::Name(n) => {
                if let Some(ty) = info.var(n) {
                    ety(ty)
                } else if self.analysis.consts.contains_key(n) {
                    ETy::Int
                } else {
                    self.error(e.span, format!("unknown name `{n}`"));
                    ETy::Unknown
                }
            }
            ExprKind::Index(n, i) => match info.var(n).cloned() {
                Some(ty) => match self.index(n, &ty, i) {
                    Some((elem, _)) => ety(&elem),
                    None => ETy::Unknown,
                },
                None => {
                    self.error(e.span, format!("unknown variable `{n}`"));
                    ETy::Unknown
                }
            },
            ExprKind::Vector(_) => {
                self.error(e.span, "vector literals are only allowed as initial values");
                ETy::Unknown
            }
            ExprKind::Neg(inner) => {
                let t = self.expr(inner, info);
                self.expect_int(&t, inner.span, "-");
                ETy::Int
            }
            ExprKind::Binary(op, l, r) => {
                let (lt, rt) = (self.expr(l, info), self.expr(r, info));
                match op {
                    BinOp::Add | BinOp::Sub | BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge => {
                        self.expect_int(&lt, l.span, op.symbol());
                        self.expect_int(&rt, r.span, op.symbol());
                        if op.is_comparison() {
                            ETy::Bool
                        } else {
                            ETy::Int
                        }
                    }
                    BinOp::Eq | BinOp::Ne => {
                        match (&lt, &rt) {
                            (ETy::Unknown, _) | (_, ETy::Unknown) => {}
                            (ETy::Int, ETy::Int) => {}
                            (ETy::Atoms(a), ETy::Atoms(b)) => {
                                if !a.iter().any(|x| b.contains(x)) {
                                    self.error(
                                        e.span,
                                        format!(
                                            "{} can never equal {}",
                                            describe(&lt),
                                            describe(&rt)
                                        ),
                                    );
                                }
                            }
                            (ETy::Vector(a), ETy::Vector(b)) if a == b => {}
                            _ => self.error(
                                e.span,
                                format!("cannot compare {} with {}", describe(&lt), describe(&rt)),
                            ),
                        }
                        ETy::Bool
                    }
                }
            }
        }
    }

    fn expect_int(&mut self, t: &ETy, span: Span, op: &str) {
        if !matches!(t, ETy::Int | ETy::Unknown) {
            self.error(
                span,
                format!("operator `{op}` needs integers, found {}", describe(t)),
            );
        }
    }

    fn instances(&mut self, program: &Program) {
        let mut seen = BTreeSet::new();
        for inst in &program.instances {
            if !seen.insert(&inst.name) {
                self.error(
                    inst.span,
                    format!("instance `{}` is declared twice", inst.name),
                );
                continue;
            }
            if self.analysis.consts.contains_key(&inst.name) {
                self.error(
                    inst.span,
                    format!("instance `{}` shadows a constant", inst.name),
                );
            }
            let Some(info) = self.analysis.servers.get(&inst.server).cloned() else {
                self.error(inst.span, format!("unknown server `{}`", inst.server));
                continue;
            };
            let mut given = BTreeSet::new();
            for (var, value) in &inst.init {
                if !given.insert(var) {
                    self.error(value.span, format!("`{var}` is initialized twice"));
                    continue;
                }
                let Some(ty) = info.var(var) else {
                    self.error(
                        value.span,
                        format!("`{var}` is not a variable of server `{}`", inst.server),
                    );
                    continue;
                };
                match const_value(value, &self.analysis.consts) {
                    Ok(v) if ty.contains(&v) => {}
                    Ok(v) => self.error(
                        value.span,
                        format!("initial value {v} of `{var}` is outside its type {ty}"),
                    ),
                    Err(e) => self.error(value.span, format!("initial value of `{var}`: {e}")),
                }
            }
            for (var, _) in &info.vars {
                if !given.contains(var) {
                    self.error(
                        inst.span,
                        format!("instance `{}` does not initialize `{var}`", inst.name),
                    );
                }
            }
        }
    }

    fn threads(&mut self, program: &Program) {
        let mut seen = BTreeSet::new();
        for t in &program.threads {
            if !seen.insert(&t.name) {
                self.error(t.span, format!("thread `{}` is declared twice", t.name));
            }
            if !t.params.is_empty() {
                self.error(
                    t.span,
                    format!("thread `{}`: parameters are not supported", t.name),
                );
            }
            if t.body.is_empty() {
                self.error(t.span, format!("thread `{}` has an empty body", t.name));
            }
            self.stmts(program, &t.body);
        }
    }

    fn returns(
        &mut self,
        program: &Program,
        instance: &str,
        service: &str,
        span: Span,
    ) -> Option<Vec<String>> {
        let Some(inst) = program.instance(instance) else {
            self.error(span, format!("unknown instance `{instance}`"));
            return None;
        };
        let info = self.analysis.servers.get(&inst.server)?;
        match info.returns.get(service) {
            Some(r) => Some(r.clone()),
            None => {
                self.error(
                    span,
                    format!("server `{}` has no service `{service}`", inst.server),
                );
                None
            }
        }
    }

    fn stmts(&mut self, program: &Program, body: &[Stmt]) {
        for s in body {
            match s {
                Stmt::Call {
                    instance,
                    service,
                    span,
                } => {
                    if let Some(rets) = self.returns(program, instance, service, *span) {
                        for r in rets.iter().filter(|r| *r != "ok") {
                            self.error(*span, format!("unhandled return value :{r}"));
                        }
                        if !rets.iter().any(|r| r == "ok") {
                            self.error(
                                *span,
                                format!("`{instance}.{service}` never returns :ok; use match"),
                            );
                        }
                    }
                }
                Stmt::Match {
                    instance,
                    service,
                    arms,
                    span,
                } => {
                    let rets = self.returns(program, instance, service, *span);
                    if arms.is_empty() {
                        self.error(*span, "match has no arms");
                    }
                    let mut atoms = BTreeSet::new();
                    for arm in arms {
                        if !atoms.insert(&arm.atom) {
                            self.error(arm.span, format!("duplicate match arm :{}", arm.atom));
                        }
                        if let Some(rets) = &rets {
                            if !rets.contains(&arm.atom) {
                                self.error(
                                    arm.span,
                                    format!("`{instance}.{service}` never returns :{}", arm.atom),
                                );
                            }
                        }
                        self.stmts(program, &arm.body);
                    }
                    for r in rets.iter().flatten() {
                        if !atoms.contains(r) {
                            self.error(*span, format!("unhandled return value :{r}"));
                        }
                    }
                }
                Stmt::Loop { body, span } => {
                    if body.is_empty() {
                        self.error(*span, "loop body is empty");
                    }
                    self.stmts(program, body);
                }
            }
        }
    }
}
