//! Service descriptor model and its wire format.
//!
//! Every node publishes one descriptor document in a small WSDL subset made of
//! exactly five elements:
//!
//! ```text
//! <definitions name="SERVICE_NAME">
//!   <message name="OPNAMERequest">  <part name="ID" type="TYPE"/>* </message>
//!   <message name="OPNAMEResponse"> <part name="ID" type="TYPE"/>+ </message>
//!   <portType name="SERVICE_NAMEPort">
//!     <operation name="OPNAME">
//!       <input message="OPNAMERequest"/>
//!       <output message="OPNAMEResponse"/>
//!     </operation>*
//!   </portType>
//!   <service name="SERVICE_NAME">
//!     <port name="SERVICE_NAMEPort"><address location="node://ID"/></port>
//!   </service>
//! </definitions>
//! ```
//!
//! `TYPE` is one of `text`, `integer`, `real`, `flag`, `date`. The parser is
//! strict: unknown elements, unknown type tokens, and dangling message
//! references are rejected rather than skipped. [`serialize_descriptor`]
//! emits a canonical form (messages sorted by name, operations in declaration
//! order, two-space indentation, LF line endings) so equal descriptors always
//! serialize to identical bytes.

mod parse;

pub use parse::parse_descriptor;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The closed set of parameter type tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamType {
    Text,
    Integer,
    Real,
    Flag,
    Date,
}

impl ParamType {
    pub const ALL: [ParamType; 5] = [
        ParamType::Text,
        ParamType::Integer,
        ParamType::Real,
        ParamType::Flag,
        ParamType::Date,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ParamType::Text => "text",
            ParamType::Integer => "integer",
            ParamType::Real => "real",
            ParamType::Flag => "flag",
            ParamType::Date => "date",
        }
    }

    /// Parses a type token. Returns `None` for anything outside the closed set.
    pub fn from_token(token: &str) -> Option<ParamType> {
        ParamType::ALL.iter().copied().find(|t| t.as_str() == token)
    }
}

impl std::fmt::Display for ParamType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A named, typed parameter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub ptype: ParamType,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, ptype: ParamType) -> Self {
        ParamSpec { name: name.into(), ptype }
    }
}

/// One advertised operation: its name and ordered input/output parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationSignature {
    pub name: String,
    pub inputs: Vec<ParamSpec>,
    pub outputs: Vec<ParamSpec>,
}

impl OperationSignature {
    pub fn new(name: impl Into<String>, inputs: Vec<ParamSpec>, outputs: Vec<ParamSpec>) -> Self {
        OperationSignature { name: name.into(), inputs, outputs }
    }
}

/// A provider's advertised operations, as published in its descriptor document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceDescriptor {
    pub service_name: String,
    /// Node address of the owning provider, of the form `node://<id>`.
    pub endpoint: String,
    pub operations: Vec<OperationSignature>,
}

impl ServiceDescriptor {
    pub fn new(
        service_name: impl Into<String>,
        endpoint: impl Into<String>,
        operations: Vec<OperationSignature>,
    ) -> Self {
        ServiceDescriptor {
            service_name: service_name.into(),
            endpoint: endpoint.into(),
            operations,
        }
    }

    pub fn operation(&self, name: &str) -> Option<&OperationSignature> {
        self.operations.iter().find(|op| op.name == name)
    }

    /// Extracts the node id from the endpoint, if the endpoint is well-formed.
    pub fn endpoint_node_id(&self) -> Option<&str> {
        let id = self.endpoint.strip_prefix("node://")?;
        is_node_id(id).then_some(id)
    }
}

/// Builds a `node://<id>` endpoint string.
pub fn node_endpoint(id: &str) -> String {
    format!("node://{id}")
}

/// True for identifiers: `[A-Za-z][A-Za-z0-9_]*`.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// True for node ids: `[a-z][a-z0-9]*`.
pub fn is_node_id(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit())
}

/// Stable violation codes reported by [`validate_descriptor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationCode {
    DupOp,
    EmptyOutput,
    BadEndpoint,
    DupParam,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::DupOp => "DUP_OP",
            ViolationCode::EmptyOutput => "EMPTY_OUTPUT",
            ViolationCode::BadEndpoint => "BAD_ENDPOINT",
            ViolationCode::DupParam => "DUP_PARAM",
        }
    }
}

impl std::fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One invariant violation found by [`validate_descriptor`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub code: ViolationCode,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.detail)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DescriptorError {
    #[error("syntax error at line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("schema error at line {line} in <{element}>: {msg}")]
    Schema { line: usize, element: String, msg: String },
    #[error("invariant violation: {0}")]
    Invariant(String),
}

/// Reports every invariant violation in `d`. An empty list means valid.
pub fn validate_descriptor(d: &ServiceDescriptor) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut seen = std::collections::BTreeSet::new();
    for op in &d.operations {
        if !seen.insert(op.name.as_str()) {
            out.push(Violation {
                code: ViolationCode::DupOp,
                detail: format!("operation `{}` declared more than once", op.name),
            });
        }
        if op.outputs.is_empty() {
            out.push(Violation {
                code: ViolationCode::EmptyOutput,
                detail: format!("operation `{}` has no outputs", op.name),
            });
        }
        for (list, label) in [(&op.inputs, "input"), (&op.outputs, "output")] {
            let mut names = std::collections::BTreeSet::new();
            for p in list.iter() {
                if !names.insert(p.name.as_str()) {
                    out.push(Violation {
                        code: ViolationCode::DupParam,
                        detail: format!(
                            "operation `{}` repeats {label} parameter `{}`",
                            op.name, p.name
                        ),
                    });
                }
            }
        }
    }

    if d.endpoint_node_id().is_none() {
        out.push(Violation {
            code: ViolationCode::BadEndpoint,
            detail: format!("endpoint `{}` is not of the form node://<id>", d.endpoint),
        });
    }

    out
}

fn check_serializable(d: &ServiceDescriptor) -> Result<(), DescriptorError> {
    if let Some(v) = validate_descriptor(d).into_iter().next() {
        return Err(DescriptorError::Invariant(v.to_string()));
    }
    if !is_identifier(&d.service_name) {
        return Err(DescriptorError::Invariant(format!(
            "service name `{}` is not an identifier",
            d.service_name
        )));
    }
    for op in &d.operations {
        if !is_identifier(&op.name) {
            return Err(DescriptorError::Invariant(format!(
                "operation name `{}` is not an identifier",
                op.name
            )));
        }
        for p in op.inputs.iter().chain(op.outputs.iter()) {
            if !is_identifier(&p.name) {
                return Err(DescriptorError::Invariant(format!(
                    "parameter name `{}` is not an identifier",
                    p.name
                )));
            }
        }
    }
    Ok(())
}

/// Serializes `d` to canonical form.
///
/// Canonical form fixes everything the grammar leaves open: messages appear
/// sorted by name, operations keep declaration order, indentation is two
/// spaces per level, attributes are written name-then-type, lines end with LF
/// and the document ends with a trailing LF. Parsing the result yields a
/// descriptor structurally equal to `d`.
pub fn serialize_descriptor(d: &ServiceDescriptor) -> Result<String, DescriptorError> {
    check_serializable(d)?;

    let mut messages: Vec<(String, &[ParamSpec], bool)> = Vec::new();
    for op in &d.operations {
        messages.push((format!("{}Request", op.name), &op.inputs, false));
        messages.push((format!("{}Response", op.name), &op.outputs, true));
    }
    messages.sort_by(|a, b| a.0.cmp(&b.0));

    let port_type = format!("{}Port", d.service_name);
    let mut out = String::new();
    out.push_str(&format!("<definitions name=\"{}\">\n", d.service_name));

    for (name, parts, _) in &messages {
        if parts.is_empty() {
            out.push_str(&format!("  <message name=\"{name}\"/>\n"));
        } else {
            out.push_str(&format!("  <message name=\"{name}\">\n"));
            for p in parts.iter() {
                out.push_str(&format!(
                    "    <part name=\"{}\" type=\"{}\"/>\n",
                    p.name, p.ptype
                ));
            }
            out.push_str("  </message>\n");
        }
    }

    if d.operations.is_empty() {
        out.push_str(&format!("  <portType name=\"{port_type}\"/>\n"));
    } else {
        out.push_str(&format!("  <portType name=\"{port_type}\">\n"));
        for op in &d.operations {
            out.push_str(&format!("    <operation name=\"{}\">\n", op.name));
            out.push_str(&format!("      <input message=\"{}Request\"/>\n", op.name));
            out.push_str(&format!("      <output message=\"{}Response\"/>\n", op.name));
            out.push_str("    </operation>\n");
        }
        out.push_str("  </portType>\n");
    }

    out.push_str(&format!("  <service name=\"{}\">\n", d.service_name));
    out.push_str(&format!("    <port name=\"{port_type}\">\n"));
    out.push_str(&format!("      <address location=\"{}\"/>\n", d.endpoint));
    out.push_str("    </port>\n");
    out.push_str("  </service>\n");
    out.push_str("</definitions>\n");
    Ok(out)
}
