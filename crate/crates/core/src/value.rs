//! Runtime values and their static kinds.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::models::Record;

/// Static kind of an expression or feature.
///
/// `Int` promotes to `Float` in mixed arithmetic and comparisons; there are no
/// other implicit conversions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Bool,
    Int,
    Float,
    String,
    Record,
}

impl Kind {
    pub fn is_numeric(self) -> bool {
        matches!(self, Kind::Int | Kind::Float)
    }

    pub fn is_scalar(self) -> bool {
        !matches!(self, Kind::Record)
    }

    /// Whether a value of kind `self` may be stored where `target` is expected.
    pub fn assignable_to(self, target: Kind) -> bool {
        self == target || (self == Kind::Int && target == Kind::Float)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Bool => "bool",
            Kind::Int => "int",
            Kind::Float => "float",
            Kind::String => "string",
            Kind::Record => "record",
        })
    }
}

/// A value flowing through spec evaluation. Records are shared, never mutated.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(Arc<str>),
    Record(Arc<Record>),
}

impl Value {
    pub fn kind(&self) -> Kind {
        match self {
            Value::Bool(_) => Kind::Bool,
            Value::Int(_) => Kind::Int,
            Value::Float(_) => Kind::Float,
            Value::Str(_) => Kind::String,
            Value::Record(_) => Kind::Record,
        }
    }

    pub fn str(s: &str) -> Value {
        Value::Str(Arc::from(s))
    }

    pub fn record(r: Record) -> Value {
        Value::Record(Arc::new(r))
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    /// Numeric view with int-to-float promotion.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_record(&self) -> Option<&Arc<Record>> {
        match self {
            Value::Record(r) => Some(r),
            _ => None,
        }
    }

    /// Equality as the `==` operator sees it: ints and floats compare
    /// numerically, records compare featurewise (provenance ignored).
    pub fn semantic_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Record(a), Value::Record(b)) => a.same_features(b),
            (a, b) if a.kind().is_numeric() && b.kind().is_numeric() => a.as_f64() == b.as_f64(),
            (a, b) => a == b,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Record(r) => write!(f, "{r}"),
        }
    }
}
