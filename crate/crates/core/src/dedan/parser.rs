use super::expand::check_unit;
use super::lexer::{lex, Spanned, Tok};
use super::{
    ActionTemplate, DedanError, DedanUnit, Index, InitItem, MessageTemplate, Ref, Repeater,
    ServerInstanceDecl, ServerTypeDecl, StateTemplate, VectorDecl,
};

/// Parses Dedan text and checks the unit: template identifiers are bound,
/// every server instance is initialized exactly once with the right number
/// of actual parameters.
pub fn parse_dedan(text: &str) -> Result<DedanUnit, DedanError> {
    let unit = parse_dedan_unchecked(text)?;
    check_unit(&unit)?;
    Ok(unit)
}

/// Syntax only; no name resolution.
pub fn parse_dedan_unchecked(text: &str) -> Result<DedanUnit, DedanError> {
    let toks = lex(text)?;
    Parser { toks, pos: 0 }.unit()
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

/// A dotted path element list, e.g. `A[j] . sem . wait`.
type Path = Vec<Ref>;

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.toks.get(self.pos + offset).map(|s| &s.tok)
    }

    fn error(&self, message: impl Into<String>) -> DedanError {
        let (line, col) = match self.toks.get(self.pos).or(self.toks.last()) {
            Some(s) => (s.line, s.col),
            None => (1, 1),
        };
        DedanError::Syntax {
            line,
            col,
            message: message.into(),
        }
    }

    fn unexpected(&self, expected: &str) -> DedanError {
        match self.peek() {
            Some(t) => self.error(format!("expected {expected}, found {}", t.describe())),
            None => self.error(format!("expected {expected}, found end of input")),
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), DedanError> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), DedanError> {
        if self.is_keyword(kw) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self) -> Result<String, DedanError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn int(&mut self) -> Result<i64, DedanError> {
        let negative = self.eat(&Tok::Minus);
        match self.peek() {
            Some(Tok::Int(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(if negative { -n } else { n })
            }
            _ => Err(self.unexpected("integer")),
        }
    }

    fn size(&mut self) -> Result<u32, DedanError> {
        let n = self.int()?;
        if n < 1 {
            return Err(self.error(format!("vector size must be positive, found {n}")));
        }
        u32::try_from(n).map_err(|_| self.error(format!("vector size {n} is too large")))
    }

    fn separator(&mut self) -> bool {
        self.eat(&Tok::Comma) || self.eat(&Tok::Semi)
    }

    fn unit(mut self) -> Result<DedanUnit, DedanError> {
        let mut unit = DedanUnit::default();
        self.expect_keyword("system")?;
        unit.system_name = self.ident()?;
        self.expect(Tok::Semi)?;
        loop {
            if self.is_keyword("server") {
                unit.server_types.push(self.server_type()?);
            } else if self.is_keyword("agents") {
                self.pos += 1;
                self.expect(Tok::Colon)?;
                loop {
                    unit.agents.push(self.vector_decl()?);
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                self.expect(Tok::Semi)?;
            } else if self.is_keyword("servers") {
                self.pos += 1;
                self.expect(Tok::Colon)?;
                loop {
                    unit.servers.push(self.server_instance()?);
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                self.expect(Tok::Semi)?;
            } else if self.is_keyword("init") {
                self.pos += 1;
                unit.init = self.init_block()?;
                break;
            } else {
                return Err(self.unexpected("`server`, `agents`, `servers` or `init`"));
            }
        }
        if self.pos < self.toks.len() {
            return Err(self.unexpected("end of input after `init`"));
        }
        Ok(unit)
    }

    fn vector_decl(&mut self) -> Result<VectorDecl, DedanError> {
        let name = self.ident()?;
        let size = if self.eat(&Tok::LBracket) {
            let n = self.size()?;
            self.expect(Tok::RBracket)?;
            Some(n)
        } else {
            None
        };
        Ok(VectorDecl { name, size })
    }

    fn server_instance(&mut self) -> Result<ServerInstanceDecl, DedanError> {
        let VectorDecl { name, size } = self.vector_decl()?;
        let type_name = if self.eat(&Tok::Colon) {
            Some(self.ident()?)
        } else {
            None
        };
        Ok(ServerInstanceDecl {
            name,
            size,
            type_name,
        })
    }

    fn server_type(&mut self) -> Result<ServerTypeDecl, DedanError> {
        self.expect_keyword("server")?;
        self.expect(Tok::Colon)?;
        let mut decl = ServerTypeDecl {
            name: self.ident()?,
            ..ServerTypeDecl::default()
        };
        if self.eat(&Tok::LParen) {
            while !self.eat(&Tok::RParen) {
                let target = if self.is_keyword("agents") {
                    &mut decl.formal_agents
                } else if self.is_keyword("servers") {
                    &mut decl.formal_servers
                } else {
                    return Err(self.unexpected("`agents` or `servers`"));
                };
                self.pos += 1;
                let mut group = Vec::new();
                loop {
                    group.push(self.vector_decl()?);
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                target.extend(group);
                self.eat(&Tok::Semi);
            }
        }
        self.separator();
        self.expect_keyword("services")?;
        decl.services = self.symbol_set()?;
        self.separator();
        self.expect_keyword("states")?;
        decl.states = self.symbol_set()?;
        self.separator();
        self.expect_keyword("actions")?;
        self.expect(Tok::LBrace)?;
        while !self.eat(&Tok::RBrace) {
            decl.actions.push(self.action()?);
            if !self.separator() && self.peek() != Some(&Tok::RBrace) {
                return Err(self.unexpected("`,` or `}`"));
            }
        }
        self.separator();
        Ok(decl)
    }

    fn symbol_set(&mut self) -> Result<Vec<VectorDecl>, DedanError> {
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        if self.eat(&Tok::RBrace) {
            return Ok(out);
        }
        loop {
            out.push(self.vector_decl()?);
            if self.eat(&Tok::RBrace) {
                return Ok(out);
            }
            self.expect(Tok::Comma)?;
        }
    }

    fn repeaters(&mut self) -> Result<Vec<Repeater>, DedanError> {
        let mut out = Vec::new();
        while self.eat(&Tok::Lt) {
            loop {
                let var = self.ident()?;
                self.expect(Tok::Eq)?;
                let low = self.int()?;
                self.expect(Tok::DotDot)?;
                let high = self.int()?;
                if low > high {
                    return Err(
                        self.error(format!("repeater `{var}` has an empty range {low}..{high}"))
                    );
                }
                out.push(Repeater { var, low, high });
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::Gt)?;
        }
        Ok(out)
    }

    fn index(&mut self) -> Result<Index, DedanError> {
        if let Some(Tok::Ident(_)) = self.peek() {
            let var = self.ident()?;
            let sign = if self.eat(&Tok::Plus) {
                1
            } else if self.eat(&Tok::Minus) {
                -1
            } else {
                return Ok(Index::Var(var));
            };
            let n = self.int()?;
            Ok(if n == 0 {
                Index::Var(var)
            } else {
                Index::Offset(var, sign * n)
            })
        } else {
            Ok(Index::Lit(self.int()?))
        }
    }

    fn reference(&mut self) -> Result<Ref, DedanError> {
        let name = self.ident()?;
        let index = if self.eat(&Tok::LBracket) {
            let i = self.index()?;
            self.expect(Tok::RBracket)?;
            Some(i)
        } else {
            None
        };
        Ok(Ref { name, index })
    }

    fn path(&mut self) -> Result<Path, DedanError> {
        let mut out = vec![self.reference()?];
        while self.eat(&Tok::Dot) {
            out.push(self.reference()?);
        }
        Ok(out)
    }

    fn message_from(&self, path: Path) -> Result<MessageTemplate, DedanError> {
        let [agent, server, service]: [Ref; 3] = path
            .try_into()
            .map_err(|_| self.error("expected a message `agent.server.service`"))?;
        Ok(MessageTemplate {
            agent,
            server,
            service,
        })
    }

    fn state_from(&self, path: Path) -> Result<StateTemplate, DedanError> {
        let [server, value]: [Ref; 2] = path
            .try_into()
            .map_err(|_| self.error("expected a state `server.value`"))?;
        Ok(StateTemplate { server, value })
    }

    fn action(&mut self) -> Result<ActionTemplate, DedanError> {
        let repeaters = self.repeaters()?;
        self.expect(Tok::LBrace)?;
        let first = self.path()?;
        let in_message = self.message_from(first)?;
        self.expect(Tok::Comma)?;
        let second = self.path()?;
        let in_state = self.state_from(second)?;
        self.expect(Tok::RBrace)?;
        self.expect(Tok::Arrow)?;
        self.expect(Tok::LBrace)?;
        let first = self.path()?;
        let (out_message, out_state) = if self.eat(&Tok::Comma) {
            let message = self.message_from(first)?;
            let second = self.path()?;
            (Some(message), self.state_from(second)?)
        } else {
            (None, self.state_from(first)?)
        };
        self.expect(Tok::RBrace)?;
        Ok(ActionTemplate {
            repeaters,
            in_message,
            in_state,
            out_message,
            out_state,
        })
    }

    fn init_block(&mut self) -> Result<Vec<InitItem>, DedanError> {
        self.expect(Tok::Arrow)?;
        self.expect(Tok::LBrace)?;
        let mut items = Vec::new();
        while !self.eat(&Tok::RBrace) {
            items.push(self.init_item()?);
            if !self.separator() && self.peek() != Some(&Tok::RBrace) {
                return Err(self.unexpected("`,`, `;` or `}`"));
            }
        }
        self.expect(Tok::Dot)?;
        Ok(items)
    }

    fn init_item(&mut self) -> Result<InitItem, DedanError> {
        let repeaters = self.repeaters()?;
        let head = self.reference()?;
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            let mut actuals = Vec::new();
            if !self.eat(&Tok::RParen) {
                loop {
                    actuals.push(self.reference()?);
                    if self.eat(&Tok::RParen) {
                        break;
                    }
                    self.expect(Tok::Comma)?;
                }
            }
            self.expect(Tok::Dot)?;
            let state = self.reference()?;
            return Ok(InitItem::Server {
                repeaters,
                server: head,
                actuals,
                state,
            });
        }
        self.expect(Tok::Dot)?;
        let second = self.reference()?;
        // three components make a message, two a server state without actuals
        if self.peek() == Some(&Tok::Dot) && matches!(self.peek_at(1), Some(Tok::Ident(_))) {
            self.pos += 1;
            let service = self.reference()?;
            Ok(InitItem::Message {
                repeaters,
                message: MessageTemplate {
                    agent: head,
                    server: second,
                    service,
                },
            })
        } else {
            Ok(InitItem::Server {
                repeaters,
                server: head,
                actuals: Vec::new(),
                state: second,
            })
        }
    }
}
