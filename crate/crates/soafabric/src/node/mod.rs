//! Server-side runtime.
//!
//! A [`Node`] holds a registry of operation implementations, publishes the
//! registry as a descriptor document, executes invocations, and coordinates
//! composite tasks by visiting peers ([`plan`]). New operations arrive at a
//! running node as [`FeatureModule`]s: the registry is swapped atomically, so
//! a request sees either the pre- or the post-injection registry, never a
//! mixture, and requests already in flight finish against the snapshot they
//! started with.

mod behavior;
mod plan;

pub use behavior::{load_catalog, Behavior, CatalogRow};
pub use plan::{
    execute_plan, plan_composition, CompositionFault, CompositionPlan, PlanError, SubInvocation,
};

use std::sync::atomic::AtomicU64;
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptor::{
    is_identifier, is_node_id, node_endpoint, serialize_descriptor, OperationSignature, ParamSpec,
    ServiceDescriptor,
};
use crate::transport::{Envelope, EnvelopeBody, Fault, FaultCode, HandlerReply, RequestHandler};
use crate::value::{NamedValue, Value};

/// Identifier of a node in the network: `[a-z][a-z0-9]*`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Result<Self, NodeError> {
        let id = id.into();
        if is_node_id(&id) {
            Ok(NodeId(id))
        } else {
            Err(NodeError::BadNodeId(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// One registered operation: its advertised signature plus the builtin
/// behavior that backs it.
#[derive(Debug, Clone)]
pub struct OperationImpl {
    pub signature: OperationSignature,
    pub behavior: Behavior,
}

impl OperationImpl {
    fn check(&self) -> Result<(), NodeError> {
        let sig = &self.signature;
        let bad = |msg: String| NodeError::BadOperation { op: sig.name.clone(), msg };
        if !is_identifier(&sig.name) {
            return Err(bad("name is not an identifier".into()));
        }
        if sig.outputs.is_empty() {
            return Err(bad("operation declares no outputs".into()));
        }
        for (list, label) in [(&sig.inputs, "input"), (&sig.outputs, "output")] {
            let mut seen = std::collections::BTreeSet::new();
            for p in list.iter() {
                if !is_identifier(&p.name) {
                    return Err(bad(format!("{label} `{}` is not an identifier", p.name)));
                }
                if !seen.insert(p.name.as_str()) {
                    return Err(bad(format!("duplicate {label} `{}`", p.name)));
                }
            }
        }
        self.behavior
            .validate_against(sig)
            .map_err(bad)
    }
}

/// A unit of new operations injectable into a running node.
#[derive(Debug, Clone)]
pub struct FeatureModule {
    pub module_name: String,
    pub adds: Vec<OperationImpl>,
}

#[derive(Debug, Error)]
pub enum NodeError {
    #[error("`{0}` is not a valid node id")]
    BadNodeId(String),
    #[error("operation `{op}`: {msg}")]
    BadOperation { op: String, msg: String },
    #[error("catalog `{path}`: {msg}")]
    BadCatalog { path: String, msg: String },
}

#[derive(Debug, Error)]
pub enum InjectError {
    #[error("operation `{0}` is already registered")]
    Collision(String),
    #[error("feature module rejected: {0}")]
    Validation(String),
}

#[derive(Debug, Default)]
struct Registry {
    ops: Vec<OperationImpl>,
}

impl Registry {
    fn find(&self, op: &str) -> Option<&OperationImpl> {
        self.ops.iter().find(|o| o.signature.name == op)
    }

    fn signatures(&self) -> Vec<OperationSignature> {
        self.ops.iter().map(|o| o.signature.clone()).collect()
    }
}

/// Entry kinds in the node trace log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeTraceKind {
    Accept,
    Invoke,
    Inject,
    Fault,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeTraceEntry {
    pub tick: u64,
    pub node: String,
    pub kind: NodeTraceKind,
    pub op: String,
    pub detail: String,
}

/// Shared sink for node-side trace entries, stamped with the network tick.
pub struct NodeTrace {
    clock: Arc<AtomicU64>,
    entries: Mutex<Vec<NodeTraceEntry>>,
}

impl NodeTrace {
    pub fn new(clock: Arc<AtomicU64>) -> Self {
        NodeTrace { clock, entries: Mutex::new(Vec::new()) }
    }

    /// A trace with its own clock stuck at zero, for nodes used off-network.
    pub fn detached() -> Self {
        NodeTrace::new(Arc::new(AtomicU64::new(0)))
    }

    fn push(&self, node: &str, kind: NodeTraceKind, op: &str, detail: impl Into<String>) {
        let entry = NodeTraceEntry {
            tick: self.clock.load(std::sync::atomic::Ordering::SeqCst),
            node: node.to_string(),
            kind,
            op: op.to_string(),
            detail: detail.into(),
        };
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).push(entry);
    }

    pub fn snapshot(&self) -> Vec<NodeTraceEntry> {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

/// A service-providing node.
pub struct Node {
    id: NodeId,
    service_name: String,
    registry: RwLock<Arc<Registry>>,
    trace: Arc<NodeTrace>,
}

impl Node {
    pub fn new(
        id: NodeId,
        service_name: impl Into<String>,
        ops: Vec<OperationImpl>,
        trace: Arc<NodeTrace>,
    ) -> Result<Self, NodeError> {
        let service_name = service_name.into();
        if !is_identifier(&service_name) {
            return Err(NodeError::BadOperation {
                op: service_name.clone(),
                msg: "service name is not an identifier".into(),
            });
        }
        let mut seen = std::collections::BTreeSet::new();
        for op in &ops {
            op.check()?;
            if !seen.insert(op.signature.name.clone()) {
                return Err(NodeError::BadOperation {
                    op: op.signature.name.clone(),
                    msg: "declared more than once".into(),
                });
            }
        }
        Ok(Node {
            id,
            service_name,
            registry: RwLock::new(Arc::new(Registry { ops })),
            trace,
        })
    }

    pub fn id(&self) -> &NodeId {
        &self.id
    }

    pub fn service_name(&self) -> &str {
        &self.service_name
    }

    fn snapshot(&self) -> Arc<Registry> {
        self.registry.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// The node's current descriptor, reflecting every injection completed so
    /// far.
    pub fn descriptor(&self) -> ServiceDescriptor {
        let registry = self.snapshot();
        ServiceDescriptor {
            service_name: self.service_name.clone(),
            endpoint: node_endpoint(self.id.as_str()),
            operations: registry.signatures(),
        }
    }

    /// Canonical serialization of [`Node::descriptor`]; what a GET returns.
    pub fn descriptor_text(&self) -> String {
        serialize_descriptor(&self.descriptor()).expect("registry upholds descriptor invariants")
    }

    pub fn operation_inputs(&self, op: &str) -> Option<Vec<ParamSpec>> {
        self.snapshot().find(op).map(|o| o.signature.inputs.clone())
    }

    /// Executes a local operation against the current registry snapshot.
    pub fn handle_invoke(&self, op: &str, args: &[NamedValue]) -> Result<Vec<NamedValue>, Fault> {
        let registry = self.snapshot();
        self.trace.push(self.id.as_str(), NodeTraceKind::Invoke, op, format_args_brief(args));
        let result = run_op(&registry, op, args);
        if let Err(fault) = &result {
            self.trace.push(self.id.as_str(), NodeTraceKind::Fault, op, fault.to_string());
        }
        result
    }

    /// Visitor entry point: equivalent to [`Node::handle_invoke`] on the same
    /// operation and arguments, but leaves an explicit `accept` trace entry so
    /// the dispatch double-step is visible.
    pub fn accept(&self, visit: &SubInvocation) -> Result<Vec<NamedValue>, Fault> {
        if visit.target != self.id {
            let fault = Fault::new(
                FaultCode::Internal,
                format!("visit addressed to `{}` arrived at `{}`", visit.target, self.id),
            );
            self.trace.push(self.id.as_str(), NodeTraceKind::Fault, &visit.op, fault.to_string());
            return Err(fault);
        }
        self.trace.push(self.id.as_str(), NodeTraceKind::Accept, &visit.op, format!("from visitor, {} args", visit.args.len()));
        self.handle_invoke(&visit.op, &visit.args)
    }

    /// Atomically extends the registry with the module's operations.
    ///
    /// On any validation failure nothing is applied and the published registry
    /// is unchanged. The injection itself is a single snapshot swap.
    pub fn inject_feature(&self, module: &FeatureModule) -> Result<ServiceDescriptor, InjectError> {
        let mut guard = self.registry.write().unwrap_or_else(|e| e.into_inner());
        let current = guard.clone();

        let mut incoming = std::collections::BTreeSet::new();
        for op in &module.adds {
            op.check().map_err(|e| InjectError::Validation(e.to_string()))?;
            if !incoming.insert(op.signature.name.clone()) {
                return Err(InjectError::Validation(format!(
                    "module `{}` adds `{}` twice",
                    module.module_name, op.signature.name
                )));
            }
            if current.find(&op.signature.name).is_some() {
                return Err(InjectError::Collision(op.signature.name.clone()));
            }
        }

        let mut ops = current.ops.clone();
        ops.extend(module.adds.iter().cloned());
        *guard = Arc::new(Registry { ops });
        drop(guard);

        self.trace.push(
            self.id.as_str(),
            NodeTraceKind::Inject,
            &module.module_name,
            format!(
                "added [{}]",
                module.adds.iter().map(|o| o.signature.name.as_str()).collect::<Vec<_>>().join(", ")
            ),
        );
        Ok(self.descriptor())
    }
}

fn run_op(registry: &Registry, op: &str, args: &[NamedValue]) -> Result<Vec<NamedValue>, Fault> {
    let Some(operation) = registry.find(op) else {
        return Err(Fault::new(
            FaultCode::UnknownOperation,
            format!("operation `{op}` is not registered"),
        ));
    };
    type_check(&operation.signature, args)?;
    Ok(operation.behavior.run(&operation.signature, args))
}

fn type_check(sig: &OperationSignature, args: &[NamedValue]) -> Result<(), Fault> {
    let mismatch = |msg: String| Fault::new(FaultCode::TypeMismatch, msg);
    for (i, arg) in args.iter().enumerate() {
        if args[..i].iter().any(|a| a.name == arg.name) {
            return Err(mismatch(format!("arg `{}` supplied more than once", arg.name)));
        }
    }
    for input in &sig.inputs {
        match args.iter().find(|a| a.name == input.name) {
            None => {
                return Err(mismatch(format!(
                    "arg `{}`: expected {}, got nothing",
                    input.name, input.ptype
                )))
            }
            Some(arg) if arg.value.param_type() != input.ptype => {
                return Err(mismatch(format!(
                    "arg `{}`: expected {}, got {}",
                    input.name,
                    input.ptype,
                    arg.value.param_type()
                )))
            }
            Some(_) => {}
        }
    }
    for arg in args {
        if !sig.inputs.iter().any(|p| p.name == arg.name) {
            return Err(mismatch(format!(
                "arg `{}`: not declared by `{}`",
                arg.name, sig.name
            )));
        }
    }
    Ok(())
}

fn format_args_brief(args: &[NamedValue]) -> String {
    args.iter()
        .map(|a| format!("{}={}", a.name, a.value))
        .collect::<Vec<_>>()
        .join(", ")
}

impl RequestHandler for Node {
    fn handle(&self, env: &Envelope) -> HandlerReply {
        match &env.body {
            EnvelopeBody::GetDescriptor => HandlerReply::Results(vec![NamedValue::new(
                "wsdl",
                Value::Text(self.descriptor_text()),
            )]),
            EnvelopeBody::InvokeRequest { op, args } => {
                let visit = SubInvocation {
                    target: self.id.clone(),
                    op: op.clone(),
                    args: args.clone(),
                    input_spec: Vec::new(),
                };
                match self.accept(&visit) {
                    Ok(results) => HandlerReply::Results(results),
                    Err(fault) => HandlerReply::Fault(fault),
                }
            }
            other => HandlerReply::Fault(Fault::new(
                FaultCode::Internal,
                format!("node cannot handle {} envelopes", other.kind()),
            )),
        }
    }
}
