use super::ast::{
    BinOp, ConstDecl, Expr, ExprKind, InstanceDecl, MatchArm, Program, RybuAction, ServerDecl,
    Stmt, ThreadDecl, TypeExpr, Update, VarDecl,
};
use super::token::{Keyword, Token, TokenKind};
use super::{Span, SyntaxError};

/// Recursive-descent parser over a token stream.
pub fn parse_program(tokens: &[Token]) -> Result<Program, SyntaxError> {
    let mut p = Parser {
        toks: tokens.to_vec(),
        pos: 0,
    };
    let mut program = Program::default();
    while let Some(tok) = p.peek() {
        match tok {
            TokenKind::Keyword(Keyword::Const) => program.consts.push(p.const_decl()?),
            TokenKind::Keyword(Keyword::Server) => program.servers.push(p.server_decl()?),
            TokenKind::Keyword(Keyword::Var) => program.instances.push(p.instance_decl()?),
            TokenKind::Keyword(Keyword::Thread) => program.threads.push(p.thread_decl()?),
            _ => return Err(p.unexpected("`const`, `server`, `var` or `thread`")),
        }
    }
    Ok(program)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&TokenKind> {
        self.toks.get(self.pos).map(|t| &t.kind)
    }

    fn span(&self) -> Span {
        match self.toks.get(self.pos).or(self.toks.last()) {
            Some(t) => t.span,
            None => Span { line: 1, col: 1 },
        }
    }

    fn error(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            span: self.span(),
            message: message.into(),
        }
    }

    fn unexpected(&self, expected: &str) -> SyntaxError {
        match self.peek() {
            Some(t) => self.error(format!("expected {expected}, found `{t}`")),
            None => self.error(format!("expected {expected}, found end of input")),
        }
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek() == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<(), SyntaxError> {
        if self.eat(&kind) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{kind}`")))
        }
    }

    fn keyword(&mut self, k: Keyword) -> Result<Span, SyntaxError> {
        let span = self.span();
        self.expect(TokenKind::Keyword(k))?;
        Ok(span)
    }

    fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek() {
            Some(TokenKind::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn atom(&mut self) -> Result<String, SyntaxError> {
        match self.peek() {
            Some(TokenKind::Atom(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.unexpected("atom such as `:ok`")),
        }
    }

    /// `x:N` lexes as identifier + atom; in a declaration the colon is a
    /// type separator, so split the atom back into `:` and an identifier.
    fn type_colon(&mut self) -> Result<(), SyntaxError> {
        if let Some(TokenKind::Atom(name)) = self.peek() {
            let name = name.clone();
            let tok = &mut self.toks[self.pos];
            tok.kind = TokenKind::Ident(name);
            tok.span.col += 1;
            return Ok(());
        }
        self.expect(TokenKind::Colon)
    }

    fn const_decl(&mut self) -> Result<ConstDecl, SyntaxError> {
        let span = self.keyword(Keyword::Const)?;
        let name = self.ident()?;
        self.expect(TokenKind::Assign)?;
        let value = self.expr()?;
        self.expect(TokenKind::Semi)?;
        Ok(ConstDecl { name, value, span })
    }

    fn server_decl(&mut self) -> Result<ServerDecl, SyntaxError> {
        let span = self.keyword(Keyword::Server)?;
        let name = self.ident()?;
        self.expect(TokenKind::LBrace)?;
        let mut decl = ServerDecl {
            name,
            vars: Vec::new(),
            actions: Vec::new(),
            span,
        };
        loop {
            match self.peek() {
                Some(TokenKind::RBrace) => {
                    self.pos += 1;
                    return Ok(decl);
                }
                Some(TokenKind::Keyword(Keyword::Var)) => decl.vars.push(self.var_decl()?),
                Some(TokenKind::LBrace) => decl.actions.push(self.action()?),
                _ => return Err(self.unexpected("`var`, an action `{ service ... }` or `}`")),
            }
        }
    }

    fn var_decl(&mut self) -> Result<VarDecl, SyntaxError> {
        let span = self.keyword(Keyword::Var)?;
        let name = self.ident()?;
        self.type_colon()?;
        let ty = self.type_expr()?;
        self.expect(TokenKind::Semi)?;
        Ok(VarDecl { name, ty, span })
    }

    fn type_expr(&mut self) -> Result<TypeExpr, SyntaxError> {
        let start = self.pos;
        let grouped = if self.eat(&TokenKind::LParen) {
            match self.type_expr() {
                Ok(inner) if self.eat(&TokenKind::RParen) => Some(inner),
                // `(N)..M` is a range whose bound is parenthesized
                _ => {
                    self.pos = start;
                    None
                }
            }
        } else {
            None
        };
        let mut ty = match (grouped, self.peek()) {
            (Some(inner), _) => inner,
            (None, Some(TokenKind::LBrace)) => {
                self.pos += 1;
                let mut atoms = Vec::new();
                if !self.eat(&TokenKind::RBrace) {
                    loop {
                        atoms.push(self.ident()?);
                        if self.eat(&TokenKind::RBrace) {
                            break;
                        }
                        self.expect(TokenKind::Comma)?;
                    }
                }
                TypeExpr::Enum(atoms)
            }
            (None, _) => {
                let lo = self.additive()?;
                self.expect(TokenKind::DotDot)?;
                let hi = self.additive()?;
                TypeExpr::Range(lo, hi)
            }
        };
        while self.eat(&TokenKind::LBracket) {
            let len = self.expr()?;
            self.expect(TokenKind::RBracket)?;
            ty = TypeExpr::Vector(Box::new(ty), len);
        }
        Ok(ty)
    }

    fn action(&mut self) -> Result<RybuAction, SyntaxError> {
        let span = self.span();
        self.expect(TokenKind::LBrace)?;
        let service = self.ident()?;
        let predicate = if self.eat(&TokenKind::Pipe) {
            Some(self.expr()?)
        } else {
            None
        };
        self.expect(TokenKind::RBrace)?;
        self.expect(TokenKind::Arrow)?;
        self.expect(TokenKind::LBrace)?;
        let mut updates = Vec::new();
        let mut return_value = None;
        while !self.eat(&TokenKind::RBrace) {
            if self.peek() == Some(&TokenKind::Keyword(Keyword::Return)) {
                if return_value.is_some() {
                    return Err(self.error("an action returns exactly one value"));
                }
                self.pos += 1;
                return_value = Some(self.atom()?);
            } else {
                let span = self.span();
                let target = self.ident()?;
                let index = if self.eat(&TokenKind::LBracket) {
                    let i = self.expr()?;
                    self.expect(TokenKind::RBracket)?;
                    Some(i)
                } else {
                    None
                };
                self.expect(TokenKind::Assign)?;
                let value = self.expr()?;
                updates.push(Update {
                    target,
                    index,
                    value,
                    span,
                });
            }
            self.expect(TokenKind::Semi)?;
        }
        let return_value = return_value.ok_or_else(|| SyntaxError {
            span,
            message: format!("action for service `{service}` has no `return`"),
        })?;
        Ok(RybuAction {
            service,
            predicate,
            updates,
            return_value,
            span,
        })
    }

    fn instance_decl(&mut self) -> Result<InstanceDecl, SyntaxError> {
        let span = self.keyword(Keyword::Var)?;
        let name = self.ident()?;
        self.expect(TokenKind::Assign)?;
        let server = self.ident()?;
        self.expect(TokenKind::LParen)?;
        self.expect(TokenKind::RParen)?;
        let mut init = Vec::new();
        if self.eat(&TokenKind::LBrace) {
            while !self.eat(&TokenKind::RBrace) {
                let var = self.ident()?;
                self.expect(TokenKind::Assign)?;
                let value = self.expr()?;
                init.push((var, value));
                if !self.eat(&TokenKind::Comma)
                    && !self.eat(&TokenKind::Semi)
                    && self.peek() != Some(&TokenKind::RBrace)
                {
                    return Err(self.unexpected("`,`, `;` or `}`"));
                }
            }
        }
        self.expect(TokenKind::Semi)?;
        Ok(InstanceDecl {
            name,
            server,
            init,
            span,
        })
    }

    fn thread_decl(&mut self) -> Result<ThreadDecl, SyntaxError> {
        let span = self.keyword(Keyword::Thread)?;
        let name = self.ident()?;
        self.expect(TokenKind::LParen)?;
        let mut params = Vec::new();
        if !self.eat(&TokenKind::RParen) {
            loop {
                params.push(self.ident()?);
                if self.eat(&TokenKind::RParen) {
                    break;
                }
                self.expect(TokenKind::Comma)?;
            }
        }
        let body = self.block()?;
        Ok(ThreadDecl {
            name,
            params,
            body,
            span,
        })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        self.expect(TokenKind::LBrace)?;
        let mut body = Vec::new();
        while !self.eat(&TokenKind::RBrace) {
            if self.peek().is_none() {
                return Err(self.unexpected("`}`"));
            }
            body.push(self.stmt()?);
        }
        Ok(body)
    }

    fn call_target(&mut self) -> Result<(String, String), SyntaxError> {
        let instance = self.ident()?;
        self.expect(TokenKind::Dot)?;
        let service = self.ident()?;
        self.expect(TokenKind::LParen)?;
        if self.peek() != Some(&TokenKind::RParen) {
            return Err(self.error("service calls take no arguments"));
        }
        self.pos += 1;
        Ok((instance, service))
    }

    fn stmt(&mut self) -> Result<Stmt, SyntaxError> {
        let span = self.span();
        match self.peek() {
            Some(TokenKind::Keyword(Keyword::Loop)) => {
                self.pos += 1;
                let body = self.block()?;
                Ok(Stmt::Loop { body, span })
            }
            Some(TokenKind::Keyword(Keyword::Match)) => {
                self.pos += 1;
                let (instance, service) = self.call_target()?;
                self.expect(TokenKind::LBrace)?;
                let mut arms = Vec::new();
                while !self.eat(&TokenKind::RBrace) {
                    let arm_span = self.span();
                    let atom = self.atom()?;
                    self.expect(TokenKind::FatArrow)?;
                    let body = if self.peek() == Some(&TokenKind::LBrace) {
                        self.block()?
                    } else {
                        vec![self.stmt()?]
                    };
                    // optional separator after a braced arm
                    let _ = self.eat(&TokenKind::Comma) || self.eat(&TokenKind::Semi);
                    arms.push(MatchArm {
                        atom,
                        body,
                        span: arm_span,
                    });
                }
                Ok(Stmt::Match {
                    instance,
                    service,
                    arms,
                    span,
                })
            }
            Some(TokenKind::Ident(_)) => {
                let (instance, service) = self.call_target()?;
                self.expect(TokenKind::Semi)?;
                Ok(Stmt::Call {
                    instance,
                    service,
                    span,
                })
            }
            _ => Err(self.unexpected("a statement (`instance.service();`, `match` or `loop`)")),
        }
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Some(TokenKind::EqEq) => BinOp::Eq,
            Some(TokenKind::NotEq) => BinOp::Ne,
            Some(TokenKind::Lt) => BinOp::Lt,
            Some(TokenKind::Gt) => BinOp::Gt,
            Some(TokenKind::Le) => BinOp::Le,
            Some(TokenKind::Ge) => BinOp::Ge,
            _ => return Ok(lhs),
        };
        self.pos += 1;
        let rhs = self.additive()?;
        if matches!(
            self.peek(),
            Some(
                TokenKind::EqEq
                    | TokenKind::NotEq
                    | TokenKind::Lt
                    | TokenKind::Gt
                    | TokenKind::Le
                    | TokenKind::Ge
            )
        ) {
            return Err(self.error("comparisons cannot be chained; use parentheses"));
        }
        let span = lhs.span;
        Ok(Expr {
            kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
            span,
        })
    }

    fn additive(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Plus) => BinOp::Add,
                Some(TokenKind::Minus) => BinOp::Sub,
                Some(TokenKind::Star | TokenKind::Slash) => {
                    let t = self.peek().unwrap().to_string();
                    return Err(self.error(format!(
                        "operator `{t}` is not supported; only `+` and `-` are available"
                    )));
                }
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            let span = lhs.span;
            lhs = Expr {
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        let span = self.span();
        if !self.eat(&TokenKind::Minus) {
            return self.primary();
        }
        if let Some(&TokenKind::Int(n)) = self.peek() {
            self.pos += 1;
            return Ok(Expr {
                kind: ExprKind::Int(-n),
                span,
            });
        }
        let inner = self.unary()?;
        Ok(Expr {
            kind: ExprKind::Neg(Box::new(inner)),
            span,
        })
    }

    fn primary(&mut self) -> Result<Expr, SyntaxError> {
        let span = self.span();
        let kind = match self.peek().cloned() {
            Some(TokenKind::Int(n)) => {
                self.pos += 1;
                ExprKind::Int(n)
            }
            Some(TokenKind::Atom(a)) => {
                self.pos += 1;
                ExprKind::Atom(a)
            }
            Some(TokenKind::Ident(name)) => {
                self.pos += 1;
                if self.eat(&TokenKind::LBracket) {
                    let index = self.expr()?;
                    self.expect(TokenKind::RBracket)?;
                    ExprKind::Index(name, Box::new(index))
                } else {
                    ExprKind::Name(name)
                }
            }
            Some(TokenKind::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(TokenKind::RParen)?;
                return Ok(inner);
            }
            Some(TokenKind::LBracket) => {
                self.pos += 1;
                let mut items = Vec::new();
                if !self.eat(&TokenKind::RBracket) {
                    loop {
                        items.push(self.expr()?);
                        if self.eat(&TokenKind::RBracket) {
                            break;
                        }
                        self.expect(TokenKind::Comma)?;
                    }
                }
                ExprKind::Vector(items)
            }
            _ => return Err(self.unexpected("an expression")),
        };
        Ok(Expr { kind, span })
    }
}
