//! Shared helpers for the integration suites: a tiny deterministic RNG, an
//! independent brute-force matchmaking oracle, and seeded generators for
//! random catalogs, tasks, and executable topologies.
//!
//! Everything here deliberately avoids the library's own rule/scoring code so
//! it can serve as an oracle for it.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use soafabric::descriptor::{OperationSignature, ParamSpec, ParamType, ServiceDescriptor};
use soafabric::matchmaker::TaskSpec;
use soafabric::node::{Behavior, Node, NodeId, NodeTrace, OperationImpl};
use soafabric::value::{NamedValue, Value};

/// SplitMix64; deterministic across runs and platforms.
pub struct Rng(pub u64);

impl Rng {
    pub fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next() % n as u64) as usize
    }

    pub fn chance(&mut self, percent: u64) -> bool {
        self.next() % 100 < percent
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            items.swap(i, self.below(i + 1));
        }
    }
}

/// What the oracle reports for comparison with `decide`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleDecision {
    pub kind: &'static str,
    pub provider: Option<String>,
    pub coordinator: Option<String>,
}

/// Brute-force matchmaking: enumerates every descriptor, re-deriving coverage
/// with plain nested loops, and applies the lexicographic tie-break.
pub fn oracle_decide(task: &TaskSpec, descriptors: &[ServiceDescriptor]) -> OracleDecision {
    let mut names: Vec<&ServiceDescriptor> = descriptors.iter().collect();
    names.sort_by(|a, b| a.service_name.cmp(&b.service_name));

    let satisfied = |d: &ServiceDescriptor, op_name: &str| -> bool {
        for op in &d.operations {
            if op.name == op_name {
                let mut all_inputs_ok = true;
                for input in &op.inputs {
                    let mut found = false;
                    for provided in &task.provided_inputs {
                        if provided.name == input.name && provided.ptype == input.ptype {
                            found = true;
                        }
                    }
                    if !found {
                        all_inputs_ok = false;
                    }
                }
                return all_inputs_ok;
            }
        }
        false
    };

    // direct: first (name-sorted) descriptor satisfying every required op
    for d in &names {
        if task.required_ops.iter().all(|op| satisfied(d, op)) {
            return OracleDecision {
                kind: "Direct",
                provider: Some(d.service_name.clone()),
                coordinator: None,
            };
        }
    }

    // composite: every required op satisfied by someone
    let jointly = task
        .required_ops
        .iter()
        .all(|op| names.iter().any(|d| satisfied(d, op)));
    if jointly {
        let mut best: Option<(&ServiceDescriptor, usize)> = None;
        for d in &names {
            let count = task.required_ops.iter().filter(|op| satisfied(d, op)).count();
            match best {
                Some((_, best_count)) if count <= best_count => {}
                _ => best = Some((d, count)),
            }
        }
        OracleDecision {
            kind: "Composite",
            provider: None,
            coordinator: best.map(|(d, _)| d.service_name.clone()),
        }
    } else {
        OracleDecision { kind: "NoMatch", provider: None, coordinator: None }
    }
}

const OP_POOL: [&str; 8] = ["OpA", "OpB", "OpC", "OpD", "OpE", "OpF", "OpG", "OpH"];
const PARAM_POOL: [(&str, ParamType); 5] = [
    ("title", ParamType::Text),
    ("qty", ParamType::Integer),
    ("rate", ParamType::Real),
    ("rush", ParamType::Flag),
    ("when", ParamType::Date),
];

fn random_type(rng: &mut Rng) -> ParamType {
    ParamType::ALL[rng.below(ParamType::ALL.len())]
}

/// Random (catalog, task) pair for oracle comparison: up to 6 descriptors,
/// up to 5 required ops, with deliberately mismatched input types mixed in.
pub fn random_catalog_and_task(rng: &mut Rng) -> (Vec<ServiceDescriptor>, TaskSpec) {
    let descriptor_count = 1 + rng.below(6);
    let mut descriptors = Vec::new();
    for i in 0..descriptor_count {
        let op_count = rng.below(4);
        let mut ops = Vec::new();
        let mut used = std::collections::BTreeSet::new();
        for _ in 0..op_count {
            let name = OP_POOL[rng.below(OP_POOL.len())];
            if !used.insert(name) {
                continue;
            }
            let mut inputs = Vec::new();
            for &(pname, ptype) in PARAM_POOL.iter() {
                if rng.chance(40) {
                    // occasionally advertise a wrong type so input_ok fails
                    let ptype = if rng.chance(15) { random_type(rng) } else { ptype };
                    inputs.push(ParamSpec::new(pname, ptype));
                }
            }
            ops.push(OperationSignature::new(
                name,
                inputs,
                vec![ParamSpec::new("out", random_type(rng))],
            ));
        }
        descriptors.push(ServiceDescriptor::new(
            format!("svc{i}"),
            format!("node://node{i}"),
            ops,
        ));
    }

    // mostly request ops someone advertises, so Direct/Composite cases appear;
    // the rest come from the whole pool and can force NoMatch
    let mut advertised: Vec<String> = descriptors
        .iter()
        .flat_map(|d| d.operations.iter().map(|o| o.name.clone()))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    rng.shuffle(&mut advertised);
    let required_count = 1 + rng.below(5);
    let mut required = Vec::new();
    while required.len() < required_count {
        let pick = if !advertised.is_empty() && rng.chance(80) {
            advertised[rng.below(advertised.len())].clone()
        } else {
            OP_POOL[rng.below(OP_POOL.len())].to_string()
        };
        if !required.contains(&pick) {
            required.push(pick);
        } else if required.len() >= advertised.len().max(1) {
            break;
        }
    }

    let mut provided = Vec::new();
    for &(pname, ptype) in PARAM_POOL.iter() {
        if rng.chance(85) {
            provided.push(ParamSpec::new(pname, ptype));
        }
    }

    let task = TaskSpec::new("t", required).with_inputs(provided);
    (descriptors, task)
}

/// An executable random topology: every operation hosted by exactly one node,
/// all inputs satisfiable from the provided pool, so matchmaking always finds
/// a Direct or Composite answer and the plan always executes.
pub struct RandomTopology {
    pub nodes: Vec<Arc<Node>>,
    pub task: TaskSpec,
    pub args: Vec<NamedValue>,
}

fn pool_value(ptype: ParamType, rng: &mut Rng) -> Value {
    match ptype {
        ParamType::Text => Value::text(["Compilers", "Anatomy", "Poetry"][rng.below(3)]),
        ParamType::Integer => Value::Integer(rng.below(100) as i64),
        ParamType::Real => Value::Real(rng.below(1000) as f64 / 4.0),
        ParamType::Flag => Value::Flag(rng.chance(50)),
        ParamType::Date => Value::Date(rng.below(365) as i64),
    }
}

pub fn random_topology(rng: &mut Rng) -> RandomTopology {
    // bindable pool: client-provided params plus two names that ops also
    // produce as outputs, so later steps shadow earlier values
    let mut bindable: Vec<(String, ParamType)> = PARAM_POOL
        .iter()
        .map(|&(n, t)| (n.to_string(), t))
        .collect();
    bindable.push(("price".to_string(), ParamType::Real));
    bindable.push(("hit".to_string(), ParamType::Flag));

    let node_count = 2 + rng.below(3); // 2..=4
    let op_count = 1 + rng.below(6); // 1..=6
    let trace = Arc::new(NodeTrace::detached());

    let mut per_node_ops: Vec<Vec<OperationImpl>> = vec![Vec::new(); node_count];
    let mut all_ops = Vec::new();
    for i in 0..op_count {
        let op_name = format!("Op{i}");
        let mut inputs = Vec::new();
        let mut picked = std::collections::BTreeSet::new();
        for _ in 0..rng.below(3) {
            let (name, ptype) = &bindable[rng.below(bindable.len())];
            if picked.insert(name.clone()) {
                inputs.push(ParamSpec::new(name.clone(), *ptype));
            }
        }
        let mut outputs = vec![ParamSpec::new(format!("r{i}"), random_type(rng))];
        if rng.chance(40) {
            // overlap with the bindable pool to exercise shadowing
            let shared = if rng.chance(50) {
                ParamSpec::new("price", ParamType::Real)
            } else {
                ParamSpec::new("hit", ParamType::Flag)
            };
            outputs.push(shared);
        }
        let signature = OperationSignature::new(op_name.clone(), inputs, outputs.clone());
        let behavior = if rng.chance(50) {
            Behavior::Const {
                values: outputs
                    .iter()
                    .map(|o| NamedValue::new(o.name.clone(), pool_value(o.ptype, rng)))
                    .collect(),
            }
        } else {
            Behavior::Combine
        };
        per_node_ops[rng.below(node_count)].push(OperationImpl { signature, behavior });
        all_ops.push(op_name);
    }

    let nodes: Vec<Arc<Node>> = per_node_ops
        .into_iter()
        .enumerate()
        .map(|(i, ops)| {
            let id = format!("server{}", i + 1);
            Arc::new(
                Node::new(NodeId::new(&id).unwrap(), id.clone(), ops, trace.clone()).unwrap(),
            )
        })
        .collect();

    let required_count = 1 + rng.below(all_ops.len());
    rng.shuffle(&mut all_ops);
    let required: Vec<String> = all_ops[..required_count].to_vec();

    let provided: Vec<ParamSpec> = bindable
        .iter()
        .map(|(n, t)| ParamSpec::new(n.clone(), *t))
        .collect();
    let args: Vec<NamedValue> = provided
        .iter()
        .map(|p| NamedValue::new(p.name.clone(), pool_value(p.ptype, rng)))
        .collect();

    let task = TaskSpec::new("t", required).with_inputs(provided);
    RandomTopology { nodes, task, args }
}

const IDENT_FIRST: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
const IDENT_REST: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_";

pub fn random_identifier(rng: &mut Rng, max_extra: usize) -> String {
    let mut s = String::new();
    s.push(IDENT_FIRST[rng.below(IDENT_FIRST.len())] as char);
    for _ in 0..rng.below(max_extra + 1) {
        s.push(IDENT_REST[rng.below(IDENT_REST.len())] as char);
    }
    s
}

fn random_param_list(rng: &mut Rng, min: usize, max: usize) -> Vec<ParamSpec> {
    let count = min + rng.below(max - min + 1);
    let mut names = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    while out.len() < count {
        let name = random_identifier(rng, 6);
        if names.insert(name.clone()) {
            out.push(ParamSpec::new(name, random_type(rng)));
        }
    }
    out
}

/// Random valid descriptor within grammar bounds, for round-trip checking.
pub fn random_descriptor(rng: &mut Rng) -> ServiceDescriptor {
    let mut node_id = String::new();
    node_id.push((b'a' + rng.below(26) as u8) as char);
    for _ in 0..rng.below(6) {
        node_id.push(b"abcdefghijklmnopqrstuvwxyz0123456789"[rng.below(36)] as char);
    }
    let op_count = rng.below(5);
    let mut names = std::collections::BTreeSet::new();
    let mut operations = Vec::new();
    while operations.len() < op_count {
        let name = random_identifier(rng, 8);
        if !names.insert(name.clone()) {
            continue;
        }
        operations.push(OperationSignature::new(
            name,
            random_param_list(rng, 0, 3),
            random_param_list(rng, 1, 3),
        ));
    }
    ServiceDescriptor::new(random_identifier(rng, 8), format!("node://{node_id}"), operations)
}

/// Reference executor: runs each step directly on its hosting node, in the
/// same order a composite plan executes (remote steps, then local steps),
/// with the same by-name binding and shadowing rules. Independent of
/// `execute_plan`'s transport path.
pub fn direct_reference_execution(
    steps: &[(Arc<Node>, String)],
    args: &[NamedValue],
) -> BTreeMap<String, Value> {
    let mut bindings: BTreeMap<String, Value> =
        args.iter().map(|a| (a.name.clone(), a.value.clone())).collect();
    let mut result = BTreeMap::new();
    for (node, op) in steps {
        let spec = node.operation_inputs(op).expect("step ops are hosted");
        let call_args: Vec<NamedValue> = spec
            .iter()
            .filter_map(|p| bindings.get(&p.name).map(|v| NamedValue::new(p.name.clone(), v.clone())))
            .collect();
        let outputs = node.handle_invoke(op, &call_args).expect("reference execution is fault-free");
        for out in outputs {
            result.insert(format!("{op}.{}", out.name), out.value.clone());
            bindings.insert(out.name, out.value);
        }
    }
    result
}
