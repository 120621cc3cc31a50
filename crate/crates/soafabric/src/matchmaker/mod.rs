//! Client-side decision stack.
//!
//! A client broadcasts for descriptors, scores each one against its task with
//! a fixed rule set, and selects either a single provider (`Direct`), a
//! coordinator for peer composition (`Composite`), or reports `NoMatch`.
//! Every decision is stamped as a trigger event and appended to a JSON-lines
//! repository for later audit and replay.
//!
//! The two matching rules:
//!
//! 1. a required operation is *covered* by a descriptor iff the descriptor
//!    advertises an operation with exactly that name;
//! 2. a covered operation is *satisfied* iff every input parameter of the
//!    advertised operation appears in the task's provided inputs with an
//!    identical name and type.
//!
//! Outputs are carried on the task but never scored. Identifier comparison is
//! case-sensitive exact match, and ties always break lexicographically
//! ascending on the descriptor's service name, so a decision is the same for
//! every permutation of the gathered descriptors.

mod repository;

pub use repository::{
    load_events, Cause, ClientApi, OpenEvent, Trigger, TriggerEvent, TriggerRepository,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptor::{DescriptorError, ParamSpec, ServiceDescriptor};
use crate::transport::{Net, TransportError};

/// A client's typed request, possibly requiring several operations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    /// Operation names the task needs, in execution order. Nonempty, distinct.
    pub required_ops: Vec<String>,
    /// Arguments the client can supply; values are attached at invoke time.
    pub provided_inputs: Vec<ParamSpec>,
    /// Carried for callers; not scored by the matching rules.
    pub expected_outputs: Vec<ParamSpec>,
}

impl TaskSpec {
    pub fn new(task_id: impl Into<String>, required_ops: Vec<String>) -> Self {
        TaskSpec {
            task_id: task_id.into(),
            required_ops,
            provided_inputs: Vec::new(),
            expected_outputs: Vec::new(),
        }
    }

    pub fn with_inputs(mut self, inputs: Vec<ParamSpec>) -> Self {
        self.provided_inputs = inputs;
        self
    }

    /// Checks the task's own invariants.
    pub fn validate(&self) -> Result<(), MatchError> {
        if self.required_ops.is_empty() {
            return Err(MatchError::InvalidTask(format!(
                "task `{}` requires no operations",
                self.task_id
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for op in &self.required_ops {
            if !seen.insert(op.as_str()) {
                return Err(MatchError::InvalidTask(format!(
                    "task `{}` repeats required op `{op}`",
                    self.task_id
                )));
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for p in &self.provided_inputs {
            if !names.insert(p.name.as_str()) {
                return Err(MatchError::InvalidTask(format!(
                    "task `{}` repeats provided input `{}`",
                    self.task_id, p.name
                )));
            }
        }
        Ok(())
    }
}

/// Coverage of one required operation by one descriptor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCoverage {
    pub op: String,
    pub input_ok: bool,
}

/// Exact coverage ratio: `satisfied` required ops out of `required`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub satisfied: usize,
    pub required: usize,
}

impl Coverage {
    pub fn is_full(self) -> bool {
        self.satisfied == self.required
    }
}

/// Rule-evaluation result for one descriptor against one task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchScore {
    pub descriptor_name: String,
    /// Required ops the descriptor covers, in required-op order.
    pub covered: Vec<OpCoverage>,
    pub coverage: Coverage,
}

impl MatchScore {
    /// Ops that are covered with their inputs satisfied.
    pub fn satisfied_ops(&self) -> impl Iterator<Item = &str> {
        self.covered.iter().filter(|c| c.input_ok).map(|c| c.op.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecisionKind {
    Direct,
    Composite,
    NoMatch,
}

impl std::fmt::Display for DecisionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DecisionKind::Direct => "Direct",
            DecisionKind::Composite => "Composite",
            DecisionKind::NoMatch => "NoMatch",
        })
    }
}

/// Matchmaker output. `provider` is set for `Direct`, `coordinator` for
/// `Composite`; scores are kept (sorted by descriptor name) for audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub kind: DecisionKind,
    pub provider: Option<String>,
    pub coordinator: Option<String>,
    pub scores: Vec<MatchScore>,
}

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("no providers responded")]
    NoProviders,
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("node `{node}` sent a malformed descriptor: {source}")]
    BadDescriptor {
        node: String,
        #[source]
        source: DescriptorError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("corrupt event log at line {line}: {msg}")]
    CorruptLog { line: usize, msg: String },
    #[error("event {0} recorded out of order")]
    OutOfOrderEvent(u64),
}

/// Applies the fixed rules to one descriptor.
pub fn evaluate_rules(task: &TaskSpec, d: &ServiceDescriptor) -> MatchScore {
    let mut covered = Vec::new();
    let mut satisfied = 0usize;
    for required in &task.required_ops {
        let Some(op) = d.operation(required) else { continue };
        let input_ok = op.inputs.iter().all(|input| {
            task.provided_inputs
                .iter()
                .any(|p| p.name == input.name && p.ptype == input.ptype)
        });
        if input_ok {
            satisfied += 1;
        }
        covered.push(OpCoverage { op: required.clone(), input_ok });
    }
    MatchScore {
        descriptor_name: d.service_name.clone(),
        covered,
        coverage: Coverage { satisfied, required: task.required_ops.len() },
    }
}

/// Selects a provider for `task` from the gathered descriptors.
///
/// If some descriptor satisfies every required op, the decision is `Direct`
/// with the lexicographically smallest such provider. Otherwise, if the
/// descriptors jointly satisfy every required op, the decision is `Composite`
/// with the highest-coverage descriptor as coordinator (ties break
/// lexicographically ascending). Otherwise `NoMatch`. The result is identical
/// under any permutation of `descriptors`.
pub fn decide(task: &TaskSpec, descriptors: &[ServiceDescriptor]) -> Decision {
    let mut scores: Vec<MatchScore> =
        descriptors.iter().map(|d| evaluate_rules(task, d)).collect();
    scores.sort_by(|a, b| a.descriptor_name.cmp(&b.descriptor_name));

    if let Some(full) = scores.iter().find(|s| s.coverage.is_full()) {
        let provider = full.descriptor_name.clone();
        return Decision {
            kind: DecisionKind::Direct,
            provider: Some(provider),
            coordinator: None,
            scores,
        };
    }

    let satisfied_union: std::collections::BTreeSet<&str> =
        scores.iter().flat_map(|s| s.satisfied_ops()).collect();
    let jointly_covered = task
        .required_ops
        .iter()
        .all(|op| satisfied_union.contains(op.as_str()));

    if jointly_covered {
        // scores are name-sorted, so the first maximum is the tie-break winner
        let best = scores
            .iter()
            .max_by(|a, b| {
                a.coverage
                    .satisfied
                    .cmp(&b.coverage.satisfied)
                    .then_with(|| b.descriptor_name.cmp(&a.descriptor_name))
            })
            .expect("nonempty scores");
        let coordinator = best.descriptor_name.clone();
        Decision {
            kind: DecisionKind::Composite,
            provider: None,
            coordinator: Some(coordinator),
            scores,
        }
    } else {
        Decision { kind: DecisionKind::NoMatch, provider: None, coordinator: None, scores }
    }
}

/// Broadcasts for descriptors and parses each reply.
///
/// Returns one descriptor per reachable node, ordered by node id ascending.
/// Unreachable nodes are skipped; their fault envelopes remain in the network
/// trace as the skip record. Fails with [`MatchError::NoProviders`] when no
/// node responds.
pub fn gather_descriptors(net: &Net, client: &str) -> Result<Vec<ServiceDescriptor>, MatchError> {
    let mut out = Vec::new();
    for (node, result) in net.broadcast_get_descriptors(client) {
        match result {
            Ok(text) => {
                let d = crate::descriptor::parse_descriptor(&text)
                    .map_err(|source| MatchError::BadDescriptor { node: node.clone(), source })?;
                out.push(d);
            }
            Err(TransportError::PeerUnreachable { .. }) => {}
            Err(other) => {
                return Err(MatchError::BadDescriptor {
                    node,
                    source: DescriptorError::Invariant(other.to_string()),
                })
            }
        }
    }
    if out.is_empty() {
        return Err(MatchError::NoProviders);
    }
    Ok(out)
}
