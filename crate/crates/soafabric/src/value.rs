//! Runtime values exchanged between clients and nodes.

use serde::{Deserialize, Serialize};

use crate::descriptor::ParamType;

/// A typed runtime value. Each variant corresponds to one [`ParamType`] tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Value {
    Text(String),
    Integer(i64),
    Real(f64),
    Flag(bool),
    /// Day number; calendar encoding is up to the scenario author.
    Date(i64),
}

impl Value {
    pub fn param_type(&self) -> ParamType {
        match self {
            Value::Text(_) => ParamType::Text,
            Value::Integer(_) => ParamType::Integer,
            Value::Real(_) => ParamType::Real,
            Value::Flag(_) => ParamType::Flag,
            Value::Date(_) => ParamType::Date,
        }
    }

    pub fn text(s: impl Into<String>) -> Self {
        Value::Text(s.into())
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Text(s) => write!(f, "{s}"),
            Value::Integer(n) => write!(f, "{n}"),
            Value::Real(x) => write!(f, "{x}"),
            Value::Flag(b) => write!(f, "{b}"),
            Value::Date(d) => write!(f, "{d}"),
        }
    }
}

/// A value with the parameter name it is bound to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: Value,
}

impl NamedValue {
    pub fn new(name: impl Into<String>, value: Value) -> Self {
        NamedValue { name: name.into(), value }
    }
}
