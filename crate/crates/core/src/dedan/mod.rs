//! Dedan input language: server types with formal parameters, repeaters,
//! instance vectors and the `init` phrase.
//!
//! The grammar is documented in `docs/dedan-grammar.md`. A [`DedanUnit`] is
//! the parsed, pre-expansion form; [`expand`] turns it into a flat
//! [`SystemModel`](crate::imds::SystemModel).

mod expand;
mod lexer;
mod parser;
mod printer;

use thiserror::Error;

use crate::imds::ImdsError;

pub use expand::{expand, repeater_environments};
pub use parser::{parse_dedan, parse_dedan_unchecked};
pub use printer::print_dedan;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DedanError {
    #[error("{line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("uninitialized server `{0}`")]
    UninitializedServer(String),
    #[error("{what} `{name}` is initialized more than once")]
    DuplicateInit { what: &'static str, name: String },
    #[error("arity mismatch for `{instance}`: server type `{server_type}` expects {expected} actual parameters, got {found}")]
    Arity {
        instance: String,
        server_type: String,
        expected: usize,
        found: usize,
    },
    #[error("actual parameter `{actual}` of `{instance}` is not {expected}")]
    ActualKind {
        instance: String,
        actual: String,
        expected: &'static str,
    },
    #[error("unbound identifier `{name}` in {context}")]
    Unbound { name: String, context: String },
    #[error("index {index} out of range for `{name}` (declared size {size})")]
    IndexOutOfRange { name: String, index: i64, size: u32 },
    #[error("`{0}` is a vector and needs an index")]
    MissingIndex(String),
    #[error("`{0}` is not a vector and cannot be indexed")]
    UnexpectedIndex(String),
    #[error("unknown server type `{0}`")]
    UnknownServerType(String),
    #[error("duplicate declaration of `{0}`")]
    Duplicate(String),
    #[error(transparent)]
    Model(#[from] ImdsError),
}

/// A whole Dedan source file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DedanUnit {
    pub system_name: String,
    pub server_types: Vec<ServerTypeDecl>,
    pub agents: Vec<VectorDecl>,
    pub servers: Vec<ServerInstanceDecl>,
    pub init: Vec<InitItem>,
}

/// `server: name (agents ...; servers ...), services {...}, states {...}, actions {...};`
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ServerTypeDecl {
    pub name: String,
    pub formal_agents: Vec<VectorDecl>,
    pub formal_servers: Vec<VectorDecl>,
    pub services: Vec<VectorDecl>,
    pub states: Vec<VectorDecl>,
    pub actions: Vec<ActionTemplate>,
}

/// A scalar (`A`) or vector (`A[2]`) declaration. Vector elements are
/// indexed from 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VectorDecl {
    pub name: String,
    pub size: Option<u32>,
}

impl VectorDecl {
    pub fn scalar(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            size: None,
        }
    }

    pub fn vector(name: impl Into<String>, size: u32) -> Self {
        Self {
            name: name.into(),
            size: Some(size),
        }
    }

    /// Flat element names: `A` or `A[1]`, `A[2]`, ...
    pub fn element_names(&self) -> Vec<String> {
        match self.size {
            None => vec![self.name.clone()],
            Some(n) => (1..=n).map(|i| format!("{}[{i}]", self.name)).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.size.map_or(1, |n| n as usize)
    }
}

/// `servers: name[size]:type`. The type defaults to the instance name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServerInstanceDecl {
    pub name: String,
    pub size: Option<u32>,
    pub type_name: Option<String>,
}

impl ServerInstanceDecl {
    pub fn type_name(&self) -> &str {
        self.type_name.as_deref().unwrap_or(&self.name)
    }

    pub fn as_vector(&self) -> VectorDecl {
        VectorDecl {
            name: self.name.clone(),
            size: self.size,
        }
    }
}

/// `<j=1..2>`: the following item is repeated for every value in the range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Repeater {
    pub var: String,
    pub low: i64,
    pub high: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Index {
    Lit(i64),
    Var(String),
    /// `j+1`, `j-1`; the offset is never zero.
    Offset(String, i64),
}

/// An optionally indexed name: `proc`, `proc[1]`, `proc[j]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ref {
    pub name: String,
    pub index: Option<Index>,
}

impl Ref {
    pub fn plain(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            index: None,
        }
    }

    pub fn indexed(name: impl Into<String>, index: Index) -> Self {
        Self {
            name: name.into(),
            index: Some(index),
        }
    }
}

/// `agent.server.service`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MessageTemplate {
    pub agent: Ref,
    pub server: Ref,
    pub service: Ref,
}

/// `server.value`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateTemplate {
    pub server: Ref,
    pub value: Ref,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionTemplate {
    pub repeaters: Vec<Repeater>,
    pub in_message: MessageTemplate,
    pub in_state: StateTemplate,
    pub out_message: Option<MessageTemplate>,
    pub out_state: StateTemplate,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InitItem {
    /// `A[j].proc[j].start`
    Message {
        repeaters: Vec<Repeater>,
        message: MessageTemplate,
    },
    /// `proc[1](A[1],sem[1],sem[2]).ini`
    Server {
        repeaters: Vec<Repeater>,
        server: Ref,
        actuals: Vec<Ref>,
        state: Ref,
    },
}
