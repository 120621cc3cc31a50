//! Service discovery, rule-based matchmaking, and composition of operations
//! hosted on peer nodes, over a deterministic in-process network.
//!
//! The crate models a small service-oriented fabric end to end:
//!
//! * nodes publish their operations as descriptor documents ([`descriptor`]),
//! * clients broadcast for descriptors and pick a provider with a fixed rule
//!   set, logging every decision to an append-only event log ([`matchmaker`]),
//! * a chosen coordinator fulfils multi-operation tasks by visiting peer
//!   nodes that hold the missing operations ([`node`]),
//! * new operations can be injected into a running node as feature modules
//!   without a restart ([`node::FeatureModule`]),
//! * all traffic flows through a discrete-tick simulated network with
//!   configurable latency and reachability faults ([`transport`]),
//! * whole topologies and task scripts are described by scenario files and
//!   driven by the runner, which emits replayable artifacts ([`scenario`],
//!   [`runner`]).
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --example bookstore            # three nodes fulfil one composite task
//! cargo run --example composition          # dataflow between composition steps
//! cargo run --example discovery            # broadcast + match scores + direct decision
//! cargo run --example descriptor_roundtrip # parse, validate, canonical serialization
//! cargo run --example feature_injection    # NoMatch flips to Direct after injection
//! cargo run --example event_log_replay     # decision log, reload, tamper detection
//! cargo run --example fault_paths          # unreachable peer, unknown op, type mismatch
//! cargo run --example simulated_network    # latency config and the envelope trace
//! ```
//!
//! The `soafabric` binary wraps the same machinery behind `run` and `replay`
//! subcommands; see the repository README.

pub mod descriptor;
pub mod matchmaker;
pub mod node;
pub mod runner;
pub mod scenario;
pub mod transport;
pub mod value;

pub use descriptor::{
    parse_descriptor, serialize_descriptor, validate_descriptor, OperationSignature, ParamSpec,
    ParamType, ServiceDescriptor,
};
pub use matchmaker::{decide, evaluate_rules, Decision, DecisionKind, TaskSpec};
pub use node::{FeatureModule, Node, NodeId};
pub use transport::{Envelope, Net, NetConfig};
pub use value::{NamedValue, Value};
