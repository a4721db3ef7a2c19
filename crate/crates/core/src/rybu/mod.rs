//! The Rybu language: reactive servers with typed state variables and
//! guarded actions, server instances, and imperative threads that call
//! services. Grammar in `docs/rybu-grammar.md`.

pub mod ast;
mod parser;
mod printer;
mod token;
mod typecheck;
mod value;

use std::fmt;
use std::hash::{Hash, Hasher};

use thiserror::Error;

pub use parser::parse_program;
pub use printer::print_program;
pub use token::{detokenize, tokenize, Keyword, Token, TokenKind};
pub use typecheck::{analyze, typecheck, Analysis, Diagnostic, ServerInfo, Severity};
pub use value::{const_int, const_value, Ty, Value};

/// 1-based source position. Any two spans compare equal.
#[derive(Clone, Copy, Debug, Default)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl Hash for Span {
    fn hash<H: Hasher>(&self, _: &mut H) {}
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{span}: {message}")]
pub struct SyntaxError {
    pub span: Span,
    pub message: String,
}

/// Tokenizes and parses Rybu source.
pub fn parse_source(text: &str) -> Result<ast::Program, SyntaxError> {
    parse_program(&tokenize(text)?)
}
