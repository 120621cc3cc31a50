//! Broadcast discovery and provider selection.
//!
//! A client asks every node for its descriptor document, scores each one
//! against the task, and picks the single provider that satisfies it.
//!
//! ```bash
//! cargo run --example discovery
//! ```

use std::sync::Arc;

use soafabric::descriptor::{OperationSignature, ParamSpec, ParamType};
use soafabric::matchmaker::{decide, evaluate_rules, gather_descriptors};
use soafabric::node::{Behavior, Node, NodeId, NodeTrace, OperationImpl};
use soafabric::transport::{Net, NetConfig, RequestHandler};
use soafabric::{DecisionKind, TaskSpec};

fn op(name: &str, inputs: &[(&str, ParamType)]) -> OperationImpl {
    OperationImpl {
        signature: OperationSignature::new(
            name,
            inputs.iter().map(|(n, t)| ParamSpec::new(*n, *t)).collect(),
            vec![ParamSpec::new("echo", ParamType::Text)],
        ),
        behavior: Behavior::Combine,
    }
}

fn main() {
    let net = Net::new(NetConfig::default());
    let trace = Arc::new(NodeTrace::new(net.clock_handle()));

    let fleet: Vec<(&str, Vec<OperationImpl>)> = vec![
        ("catalog1", vec![op("ListBooks", &[]), op("SearchBooks", &[("title", ParamType::Text)])]),
        ("catalog2", vec![op("SearchBooks", &[("title", ParamType::Integer)])]), // wrong input type
        ("pricing1", vec![op("QuotePrice", &[("title", ParamType::Text)])]),
    ];
    for (id, ops) in fleet {
        let node = Arc::new(
            Node::new(NodeId::new(id).unwrap(), id, ops, trace.clone()).unwrap(),
        );
        let handler: Arc<dyn RequestHandler> = node;
        net.register_node(id, handler).unwrap();
    }

    let task = TaskSpec::new("find_compilers", vec!["SearchBooks".into()])
        .with_inputs(vec![ParamSpec::new("title", ParamType::Text)]);

    let descriptors = gather_descriptors(&net, "client1").unwrap();
    println!("descriptors, in node-id order:");
    for d in &descriptors {
        println!("  {} at {} with {} operation(s)", d.service_name, d.endpoint, d.operations.len());
    }

    println!("\nscores for task {:?}:", task.required_ops);
    for d in &descriptors {
        let score = evaluate_rules(&task, d);
        let detail: Vec<String> = score
            .covered
            .iter()
            .map(|c| format!("{} (inputs {})", c.op, if c.input_ok { "ok" } else { "mismatch" }))
            .collect();
        println!(
            "  {}: {}/{} [{}]",
            score.descriptor_name,
            score.coverage.satisfied,
            score.coverage.required,
            detail.join(", ")
        );
    }

    let decision = decide(&task, &descriptors);
    match decision.kind {
        DecisionKind::Direct => println!("\nselected provider: {}", decision.provider.unwrap()),
        other => println!("\nunexpected decision {other:?}"),
    }
    // catalog2 advertises SearchBooks(title: integer); the client provides
    // text, so only catalog1 satisfies the rule set
}
