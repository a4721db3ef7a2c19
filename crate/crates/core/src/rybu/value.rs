//! Resolved variable types and the values they range over.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::ast::{BinOp, Expr, ExprKind};

/// A variable type after constant evaluation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ty {
    Int { lo: i64, hi: i64 },
    Enum { atoms: Vec<String> },
    Vector { elem: Box<Ty>, len: usize },
}

impl Ty {
    /// Number of values, saturating at `u64::MAX`.
    pub fn cardinality(&self) -> u64 {
        match self {
            Ty::Int { lo, hi } => (hi - lo + 1).max(0) as u64,
            Ty::Enum { atoms } => atoms.len() as u64,
            Ty::Vector { elem, len } => {
                let base = elem.cardinality();
                (0..*len).fold(1u64, |acc, _| acc.saturating_mul(base))
            }
        }
    }

    /// All values in ascending order: integers upward, enum atoms in
    /// declaration order, vectors lexicographically with element 0 most
    /// significant.
    pub fn values(&self) -> Vec<Value> {
        match self {
            Ty::Int { lo, hi } => (*lo..=*hi).map(Value::Int).collect(),
            Ty::Enum { atoms } => atoms.iter().cloned().map(Value::Atom).collect(),
            Ty::Vector { elem, len } => {
                let elems = elem.values();
                let mut out = vec![Vec::new()];
                for _ in 0..*len {
                    out = out
                        .into_iter()
                        .flat_map(|prefix: Vec<Value>| {
                            elems.iter().map(move |e| {
                                let mut v = prefix.clone();
                                v.push(e.clone());
                                v
                            })
                        })
                        .collect();
                }
                out.into_iter().map(Value::Vector).collect()
            }
        }
    }

    pub fn contains(&self, value: &Value) -> bool {
        match (self, value) {
            (Ty::Int { lo, hi }, Value::Int(n)) => lo <= n && n <= hi,
            (Ty::Enum { atoms }, Value::Atom(a)) => atoms.contains(a),
            (Ty::Vector { elem, len }, Value::Vector(items)) => {
                items.len() == *len && items.iter().all(|i| elem.contains(i))
            }
            _ => false,
        }
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Int { lo, hi } => write!(f, "{lo}..{hi}"),
            Ty::Enum { atoms } => write!(f, "{{{}}}", atoms.join(", ")),
            Ty::Vector { elem, len } => write!(f, "({elem})[{len}]"),
        }
    }
}

/// A concrete value of a state variable.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Atom(String),
    Vector(Vec<Value>),
}

impl Value {
    /// Rendering used inside state labels: negative integers become `m<n>`
    /// and vector elements are joined with underscores.
    pub fn label(&self) -> String {
        match self {
            Value::Int(n) if *n < 0 => format!("m{}", n.unsigned_abs()),
            Value::Int(n) => n.to_string(),
            Value::Atom(a) => a.clone(),
            Value::Vector(items) => items.iter().map(Value::label).collect::<Vec<_>>().join("_"),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Atom(a) => write!(f, ":{a}"),
            Value::Vector(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
        }
    }
}

/// Evaluates an expression that may only mention literals and constants.
pub fn const_value(expr: &Expr, consts: &BTreeMap<String, i64>) -> Result<Value, String> {
    match &expr.kind {
        ExprKind::Int(n) => Ok(Value::Int(*n)),
        ExprKind::Atom(a) => Ok(Value::Atom(a.clone())),
        ExprKind::Name(n) => consts
            .get(n)
            .map(|v| Value::Int(*v))
            .ok_or_else(|| format!("`{n}` is not a constant")),
        ExprKind::Vector(items) => items
            .iter()
            .map(|i| const_value(i, consts))
            .collect::<Result<_, _>>()
            .map(Value::Vector),
        _ => const_int(expr, consts).map(Value::Int),
    }
}

/// Evaluates a constant integer expression.
pub fn const_int(expr: &Expr, consts: &BTreeMap<String, i64>) -> Result<i64, String> {
    match &expr.kind {
        ExprKind::Int(n) => Ok(*n),
        ExprKind::Name(n) => consts
            .get(n)
            .copied()
            .ok_or_else(|| format!("`{n}` is not a constant")),
        ExprKind::Neg(e) => const_int(e, consts)?
            .checked_neg()
            .ok_or_else(|| "integer overflow".to_string()),
        ExprKind::Binary(op @ (BinOp::Add | BinOp::Sub), l, r) => {
            let (l, r) = (const_int(l, consts)?, const_int(r, consts)?);
            let v = if *op == BinOp::Add {
                l.checked_add(r)
            } else {
                l.checked_sub(r)
            };
            v.ok_or_else(|| "integer overflow".to_string())
        }
        _ => Err("expected a constant integer expression".to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_values_are_lexicographic() {
        let ty = Ty::Vector {
            elem: Box::new(Ty::Int { lo: 0, hi: 1 }),
            len: 2,
        };
        let labels: Vec<String> = ty.values().iter().map(Value::label).collect();
        assert_eq!(labels, ["0_0", "0_1", "1_0", "1_1"]);
        assert_eq!(ty.cardinality(), 4);
    }

    #[test]
    fn negative_label() {
        assert_eq!(Value::Int(-2).label(), "m2");
    }
}
