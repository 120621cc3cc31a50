//! Scenario files.
//!
//! A scenario is one JSON document describing a whole run: the topology
//! (nodes and their operations), timed feature injections and reachability
//! flips, the task script, and the network configuration. Catalog fixtures
//! are referenced by path relative to the scenario file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptor::{
    is_identifier, is_node_id, node_endpoint, OperationSignature, ParamSpec, ServiceDescriptor,
};
use crate::matchmaker::TaskSpec;
use crate::node::{load_catalog, Behavior, OperationImpl};
use crate::transport::NetConfig;
use crate::value::NamedValue;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub topology: Vec<NodeDef>,
    #[serde(default)]
    pub features: Vec<FeatureDef>,
    #[serde(default)]
    pub faults: Vec<FaultDef>,
    pub tasks: Vec<TaskDef>,
    #[serde(default)]
    pub net: NetConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeDef {
    pub id: String,
    /// Service name published in the descriptor; defaults to the node id.
    #[serde(default)]
    pub service: Option<String>,
    pub operations: Vec<OpDef>,
}

impl NodeDef {
    pub fn service_name(&self) -> &str {
        self.service.as_deref().unwrap_or(&self.id)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpDef {
    pub name: String,
    #[serde(default)]
    pub inputs: Vec<ParamSpec>,
    pub outputs: Vec<ParamSpec>,
    pub behavior: BehaviorDef,
}

impl OpDef {
    pub fn signature(&self) -> OperationSignature {
        OperationSignature::new(self.name.clone(), self.inputs.clone(), self.outputs.clone())
    }

    /// Builds the runnable implementation, loading catalog fixtures relative
    /// to `base`.
    pub fn build_impl(&self, base: &Path) -> Result<OperationImpl, ConfigError> {
        let behavior = match &self.behavior {
            BehaviorDef::Table { catalog } => {
                let path = if catalog.is_absolute() { catalog.clone() } else { base.join(catalog) };
                let rows = load_catalog(&path).map_err(|e| ConfigError {
                    context: format!("operation `{}`", self.name),
                    message: e.to_string(),
                })?;
                Behavior::Table { rows }
            }
            BehaviorDef::Const { values } => Behavior::Const { values: values.clone() },
            BehaviorDef::Combine => Behavior::Combine,
        };
        Ok(OperationImpl { signature: self.signature(), behavior })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BehaviorDef {
    Table { catalog: PathBuf },
    Const { values: Vec<NamedValue> },
    Combine,
}

/// Inject `adds` into `node` as feature module `module` once the network
/// clock reaches `at_tick`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureDef {
    pub at_tick: u64,
    pub node: String,
    pub module: String,
    pub adds: Vec<OpDef>,
}

/// Flip `node`'s reachability once the network clock reaches `at_tick`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FaultDef {
    pub at_tick: u64,
    pub node: String,
    pub unreachable: bool,
}

/// One scripted client request. Either a matchmaking task (`required_ops`
/// nonempty) or, with `invoke` set, a raw invocation that bypasses
/// matchmaking and addresses one node directly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskDef {
    pub task_id: String,
    #[serde(default)]
    pub issue_tick: u64,
    #[serde(default)]
    pub required_ops: Vec<String>,
    #[serde(default)]
    pub provided_inputs: Vec<ParamSpec>,
    #[serde(default)]
    pub expected_outputs: Vec<ParamSpec>,
    /// Argument values for the provided inputs, bound at invoke time.
    #[serde(default)]
    pub args: Vec<NamedValue>,
    #[serde(default)]
    pub invoke: Option<RawInvokeDef>,
}

impl TaskDef {
    pub fn is_raw_invoke(&self) -> bool {
        self.invoke.is_some()
    }

    pub fn to_task_spec(&self) -> TaskSpec {
        TaskSpec {
            task_id: self.task_id.clone(),
            required_ops: self.required_ops.clone(),
            provided_inputs: self.provided_inputs.clone(),
            expected_outputs: self.expected_outputs.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawInvokeDef {
    pub node: String,
    pub op: String,
    #[serde(default)]
    pub args: Vec<NamedValue>,
}

#[derive(Debug, Error)]
#[error("scenario error ({context}): {message}")]
pub struct ConfigError {
    pub context: String,
    pub message: String,
}

fn err(context: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError { context: context.into(), message: message.into() }
}

/// Loads and validates a scenario. Returns the scenario and its base
/// directory, against which catalog paths resolve.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<(Scenario, PathBuf), ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| err(path.display().to_string(), e.to_string()))?;
    let scenario: Scenario = serde_json::from_str(&text)
        .map_err(|e| err(path.display().to_string(), format!("parse: {e}")))?;
    validate_scenario(&scenario)?;
    let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    Ok((scenario, base))
}

/// Structural validation: distinct ids, existing directive targets, exactly
/// one mode per task, well-formed identifiers. Behavior/catalog problems are
/// caught later when the runtime is built.
pub fn validate_scenario(s: &Scenario) -> Result<(), ConfigError> {
    let mut node_ids = BTreeSet::new();
    for node in &s.topology {
        if !is_node_id(&node.id) {
            return Err(err(format!("node `{}`", node.id), "not a valid node id"));
        }
        if !node_ids.insert(node.id.as_str()) {
            return Err(err(format!("node `{}`", node.id), "duplicate node id"));
        }
        if !is_identifier(node.service_name()) {
            return Err(err(
                format!("node `{}`", node.id),
                format!("service name `{}` is not an identifier", node.service_name()),
            ));
        }
        let mut op_names = BTreeSet::new();
        for op in &node.operations {
            if !is_identifier(&op.name) {
                return Err(err(
                    format!("node `{}`", node.id),
                    format!("operation name `{}` is not an identifier", op.name),
                ));
            }
            if !op_names.insert(op.name.as_str()) {
                return Err(err(
                    format!("node `{}`", node.id),
                    format!("duplicate operation `{}`", op.name),
                ));
            }
        }
    }

    for feature in &s.features {
        if !node_ids.contains(feature.node.as_str()) {
            return Err(err(
                format!("feature `{}`", feature.module),
                format!("target node `{}` does not exist", feature.node),
            ));
        }
    }
    for fault in &s.faults {
        if !node_ids.contains(fault.node.as_str()) {
            return Err(err("faults", format!("target node `{}` does not exist", fault.node)));
        }
    }

    let mut task_ids = BTreeSet::new();
    for task in &s.tasks {
        let ctx = format!("task `{}`", task.task_id);
        if !is_identifier(&task.task_id) {
            return Err(err(&ctx, "task_id is not an identifier"));
        }
        if !task_ids.insert(task.task_id.as_str()) {
            return Err(err(&ctx, "duplicate task id"));
        }
        match (&task.invoke, task.required_ops.is_empty()) {
            (Some(_), false) => {
                return Err(err(&ctx, "a task is either matchmaking or raw invoke, not both"))
            }
            (None, true) => return Err(err(&ctx, "task requires no operations")),
            (Some(_), true) => {}
            (None, false) => {
                task.to_task_spec().validate().map_err(|e| err(&ctx, e.to_string()))?;
            }
        }
    }
    Ok(())
}

/// Reconstructs every node's descriptor as of `tick`: the base topology plus
/// all feature injections scheduled at or before `tick`. Used by replay;
/// behaviors are irrelevant to matchmaking, so catalogs are not loaded.
pub fn descriptors_at(s: &Scenario, tick: u64) -> Vec<ServiceDescriptor> {
    s.topology
        .iter()
        .map(|node| {
            let mut ops: Vec<OperationSignature> =
                node.operations.iter().map(|o| o.signature()).collect();
            for feature in &s.features {
                if feature.node == node.id && feature.at_tick <= tick {
                    ops.extend(feature.adds.iter().map(|o| o.signature()));
                }
            }
            ServiceDescriptor::new(node.service_name(), node_endpoint(&node.id), ops)
        })
        .collect()
}
