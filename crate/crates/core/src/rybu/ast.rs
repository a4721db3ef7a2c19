//! Rybu abstract syntax. Every node carries the [`Span`] of its first token;
//! spans never take part in equality, so trees compare structurally.

use super::Span;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub consts: Vec<ConstDecl>,
    pub servers: Vec<ServerDecl>,
    pub instances: Vec<InstanceDecl>,
    pub threads: Vec<ThreadDecl>,
}

impl Program {
    pub fn is_empty(&self) -> bool {
        self.consts.is_empty()
            && self.servers.is_empty()
            && self.instances.is_empty()
            && self.threads.is_empty()
    }

    pub fn server(&self, name: &str) -> Option<&ServerDecl> {
        self.servers.iter().find(|s| s.name == name)
    }

    pub fn instance(&self, name: &str) -> Option<&InstanceDecl> {
        self.instances.iter().find(|i| i.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstDecl {
    pub name: String,
    pub value: Expr,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServerDecl {
    pub name: String,
    pub vars: Vec<VarDecl>,
    pub actions: Vec<RybuAction>,
    pub span: Span,
}

impl ServerDecl {
    /// Service names in order of first appearance.
    pub fn services(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for a in &self.actions {
            if !out.contains(&a.service.as_str()) {
                out.push(&a.service);
            }
        }
        out
    }

    /// Atoms an invocation of `service` may return, in order of appearance.
    pub fn returns_of(&self, service: &str) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for a in self.actions.iter().filter(|a| a.service == service) {
            if !out.contains(&a.return_value.as_str()) {
                out.push(&a.return_value);
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub ty: TypeExpr,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TypeExpr {
    /// `min..max`
    Range(Expr, Expr),
    /// `{a, b}`
    Enum(Vec<String>),
    /// `(elem)[length]`
    Vector(Box<TypeExpr>, Expr),
}

/// `{ service | predicate } -> { updates; return :atom; }`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RybuAction {
    pub service: String,
    pub predicate: Option<Expr>,
    pub updates: Vec<Update>,
    pub return_value: String,
    pub span: Span,
}

/// `var = expr` or `var[index] = expr`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Update {
    pub target: String,
    pub index: Option<Expr>,
    pub value: Expr,
    pub span: Span,
}

/// `var name = Server() { var = value, ... };`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceDecl {
    pub name: String,
    pub server: String,
    pub init: Vec<(String, Expr)>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThreadDecl {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    /// `instance.service();`, shorthand for a match whose only outcome is `:ok`.
    Call {
        instance: String,
        service: String,
        span: Span,
    },
    Match {
        instance: String,
        service: String,
        arms: Vec<MatchArm>,
        span: Span,
    },
    Loop {
        body: Vec<Stmt>,
        span: Span,
    },
}

impl Stmt {
    pub fn span(&self) -> Span {
        match self {
            Stmt::Call { span, .. } | Stmt::Match { span, .. } | Stmt::Loop { span, .. } => *span,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchArm {
    pub atom: String,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
            BinOp::Le => "<=",
            BinOp::Ge => ">=",
        }
    }

    pub fn is_comparison(self) -> bool {
        !matches!(self, BinOp::Add | BinOp::Sub)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExprKind {
    Int(i64),
    Atom(String),
    /// A state variable or a constant.
    Name(String),
    /// `v[i]` with a compile-time constant index.
    Index(String, Box<Expr>),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// `[a, b, c]`, only meaningful as an initializer or update value.
    Vector(Vec<Expr>),
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Self {
            kind,
            span: Span::default(),
        }
    }

    pub fn int(n: i64) -> Self {
        Self::new(ExprKind::Int(n))
    }

    pub fn atom(a: impl Into<String>) -> Self {
        Self::new(ExprKind::Atom(a.into()))
    }

    pub fn name(n: impl Into<String>) -> Self {
        Self::new(ExprKind::Name(n.into()))
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Self::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)))
    }
}
