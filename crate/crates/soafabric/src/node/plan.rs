//! Composition across peers.
//!
//! When no single provider covers a task, the coordinator assigns each
//! required operation either to itself or to the lexicographically smallest
//! peer that advertises it, then executes the plan: remote steps first (one
//! invoke envelope each, dispatched through the peer's visitor entry point),
//! local steps after. Outputs of earlier steps become bindable inputs for
//! later ones by name, with the most recent value winning, and the aggregated
//! result is keyed `<op>.<output>` so ops sharing output names never collide.
//!
//! Composition is one level deep by construction: peers only ever execute
//! their own operations and never re-delegate.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::descriptor::{ParamSpec, ParamType, ServiceDescriptor};
use crate::matchmaker::TaskSpec;
use crate::transport::{EnvelopeBody, Fault, FaultCode, Net, TransportError};
use crate::value::{NamedValue, Value};

use super::{Node, NodeId};

/// Visitor dispatch to a peer: the target node, the operation, and the
/// arguments. Plans carry these with empty `args`; [`execute_plan`] binds the
/// arguments from available values just before dispatch using `input_spec`,
/// the target operation's input signature captured at plan time.
#[derive(Debug, Clone, PartialEq)]
pub struct SubInvocation {
    pub target: NodeId,
    pub op: String,
    pub args: Vec<NamedValue>,
    pub input_spec: Vec<ParamSpec>,
}

/// Assignment of a task's required operations to coordinator-local and peer
/// execution.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionPlan {
    pub task_id: String,
    pub coordinator: NodeId,
    /// Operations run on the coordinator, in required-op order.
    pub local_steps: Vec<String>,
    /// Peer visits, in required-op order.
    pub remote_steps: Vec<SubInvocation>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("operation `{0}` resolves to no node")]
    Unresolvable(String),
}

/// A composition step failed; carries the step and the underlying fault.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("composition step `{op}` faulted: {cause}")]
pub struct CompositionFault {
    pub op: String,
    pub cause: Fault,
}

/// Assigns every required operation of `task` to the coordinator or a peer.
///
/// Operations are planned in `task.required_ops` order. An op the coordinator
/// hosts becomes a local step. Otherwise it goes to the lexicographically
/// smallest peer (by node id) advertising it whose input types are satisfiable
/// from the task's provided inputs plus the outputs of earlier remote steps —
/// remote steps execute before local ones, so only those outputs are bindable.
pub fn plan_composition(
    task: &TaskSpec,
    coordinator: &NodeId,
    coordinator_ops: &[crate::descriptor::OperationSignature],
    peers: &[ServiceDescriptor],
) -> Result<CompositionPlan, PlanError> {
    let mut sorted_peers: Vec<(&str, &ServiceDescriptor)> = peers
        .iter()
        .filter_map(|d| d.endpoint_node_id().map(|id| (id, d)))
        .filter(|(id, _)| *id != coordinator.as_str())
        .collect();
    sorted_peers.sort_by(|a, b| a.0.cmp(b.0));

    let mut bindable: BTreeMap<&str, ParamType> = task
        .provided_inputs
        .iter()
        .map(|p| (p.name.as_str(), p.ptype))
        .collect();

    let mut local_steps = Vec::new();
    let mut remote_steps = Vec::new();
    for required in &task.required_ops {
        if coordinator_ops.iter().any(|sig| &sig.name == required) {
            local_steps.push(required.clone());
            continue;
        }
        let assigned = sorted_peers.iter().find_map(|(id, d)| {
            let sig = d.operation(required)?;
            let satisfiable = sig
                .inputs
                .iter()
                .all(|input| bindable.get(input.name.as_str()) == Some(&input.ptype));
            satisfiable.then_some((*id, sig))
        });
        match assigned {
            Some((id, sig)) => {
                for out in &sig.outputs {
                    bindable.insert(out.name.as_str(), out.ptype);
                }
                remote_steps.push(SubInvocation {
                    target: NodeId::new(id).expect("endpoint ids are validated node ids"),
                    op: required.clone(),
                    args: Vec::new(),
                    input_spec: sig.inputs.clone(),
                });
            }
            None => return Err(PlanError::Unresolvable(required.clone())),
        }
    }

    Ok(CompositionPlan {
        task_id: task.task_id.clone(),
        coordinator: coordinator.clone(),
        local_steps,
        remote_steps,
    })
}

impl Node {
    /// Plans a composite task with this node as coordinator, against its
    /// current registry snapshot.
    pub fn plan_composition(
        &self,
        task: &TaskSpec,
        peers: &[ServiceDescriptor],
    ) -> Result<CompositionPlan, PlanError> {
        plan_composition(task, self.id(), &self.descriptor().operations, peers)
    }
}

fn bind_args(spec: &[ParamSpec], bindings: &BTreeMap<String, Value>) -> Vec<NamedValue> {
    spec.iter()
        .filter_map(|p| bindings.get(&p.name).map(|v| NamedValue::new(p.name.clone(), v.clone())))
        .collect()
}

fn record_outputs(
    op: &str,
    outputs: Vec<NamedValue>,
    results: &mut BTreeMap<String, Value>,
    bindings: &mut BTreeMap<String, Value>,
) {
    for out in outputs {
        results.insert(format!("{op}.{}", out.name), out.value.clone());
        bindings.insert(out.name, out.value);
    }
}

/// Executes a plan from the coordinator: remote steps in plan order via
/// invoke envelopes (exactly one per remote step), then local steps directly.
/// The first fault aborts the composition; there are no retries.
pub fn execute_plan(
    plan: &CompositionPlan,
    coordinator: &Node,
    args: &[NamedValue],
    net: &Net,
) -> Result<BTreeMap<String, Value>, CompositionFault> {
    let mut bindings: BTreeMap<String, Value> =
        args.iter().map(|a| (a.name.clone(), a.value.clone())).collect();
    let mut results = BTreeMap::new();

    for step in &plan.remote_steps {
        let step_args = bind_args(&step.input_spec, &bindings);
        let reply = net
            .invoke(plan.coordinator.as_str(), step.target.as_str(), &step.op, step_args)
            .wait();
        match reply {
            Ok(env) => match env.body {
                EnvelopeBody::InvokeResponse { results: outputs } => {
                    record_outputs(&step.op, outputs, &mut results, &mut bindings);
                }
                EnvelopeBody::Fault(cause) => {
                    return Err(CompositionFault { op: step.op.clone(), cause })
                }
                other => {
                    return Err(CompositionFault {
                        op: step.op.clone(),
                        cause: Fault::new(
                            FaultCode::Internal,
                            format!("unexpected reply kind {}", other.kind()),
                        ),
                    })
                }
            },
            Err(TransportError::PeerUnreachable { target }) => {
                return Err(CompositionFault {
                    op: step.op.clone(),
                    cause: Fault::new(
                        FaultCode::PeerUnreachable,
                        format!("peer `{target}` is unreachable"),
                    ),
                })
            }
            Err(other) => {
                return Err(CompositionFault {
                    op: step.op.clone(),
                    cause: Fault::new(FaultCode::Internal, other.to_string()),
                })
            }
        }
    }

    for op in &plan.local_steps {
        let spec = coordinator.operation_inputs(op).unwrap_or_default();
        let step_args = bind_args(&spec, &bindings);
        match coordinator.handle_invoke(op, &step_args) {
            Ok(outputs) => record_outputs(op, outputs, &mut results, &mut bindings),
            Err(cause) => return Err(CompositionFault { op: op.clone(), cause }),
        }
    }

    Ok(results)
}
