//! Dataflow through a composition: outputs of earlier steps bind to the
//! inputs of later ones by name, most recent value winning, so a pricing
//! chain can run across three nodes that never heard of each other.
//!
//! ```bash
//! cargo run --example composition
//! ```

use std::sync::Arc;

use soafabric::descriptor::{OperationSignature, ParamSpec, ParamType};
use soafabric::matchmaker::{decide, gather_descriptors};
use soafabric::node::{execute_plan, Behavior, Node, NodeId, NodeTrace, OperationImpl};
use soafabric::transport::{Net, NetConfig, RequestHandler};
use soafabric::value::{NamedValue, Value};
use soafabric::{DecisionKind, TaskSpec};

fn main() {
    let net = Net::new(NetConfig::default());
    let trace = Arc::new(NodeTrace::new(net.clock_handle()));

    // pricing1 quotes a base price for a title
    let quote = OperationImpl {
        signature: OperationSignature::new(
            "QuotePrice",
            vec![ParamSpec::new("title", ParamType::Text)],
            vec![ParamSpec::new("price", ParamType::Real)],
        ),
        behavior: Behavior::Const {
            values: vec![NamedValue::new("price", Value::Real(400.0))],
        },
    };
    // taxes1 turns a price into a total: Combine sums the real inputs
    let tax = OperationImpl {
        signature: OperationSignature::new(
            "AddTax",
            vec![
                ParamSpec::new("price", ParamType::Real),
                ParamSpec::new("surcharge", ParamType::Real),
            ],
            vec![ParamSpec::new("total", ParamType::Real)],
        ),
        behavior: Behavior::Combine,
    };
    // billing1 formats the receipt locally; it is the only multi-role node
    let receipt = OperationImpl {
        signature: OperationSignature::new(
            "Receipt",
            vec![ParamSpec::new("title", ParamType::Text)],
            vec![ParamSpec::new("note", ParamType::Text)],
        ),
        behavior: Behavior::Combine,
    };

    let defs: Vec<(&str, Vec<OperationImpl>)> = vec![
        ("billing1", vec![receipt]),
        ("pricing1", vec![quote]),
        ("taxes1", vec![tax]),
    ];
    let mut nodes = Vec::new();
    for (id, ops) in defs {
        let node = Arc::new(
            Node::new(NodeId::new(id).unwrap(), id, ops, trace.clone()).unwrap(),
        );
        let handler: Arc<dyn RequestHandler> = node.clone();
        net.register_node(id, handler).unwrap();
        nodes.push(node);
    }

    // the client provides title and surcharge; `price` is declared too, so
    // matchmaking accepts AddTax, but at execution time QuotePrice's output
    // shadows the provided placeholder
    let task = TaskSpec::new(
        "order9",
        vec!["QuotePrice".into(), "AddTax".into(), "Receipt".into()],
    )
    .with_inputs(vec![
        ParamSpec::new("title", ParamType::Text),
        ParamSpec::new("surcharge", ParamType::Real),
        ParamSpec::new("price", ParamType::Real),
    ]);

    let descriptors = gather_descriptors(&net, "client1").unwrap();
    let decision = decide(&task, &descriptors);
    assert_eq!(decision.kind, DecisionKind::Composite);
    let coordinator_name = decision.coordinator.unwrap();
    println!("coordinator: {coordinator_name}");

    let coordinator = nodes.iter().find(|n| n.service_name() == coordinator_name).unwrap();
    let plan = coordinator.plan_composition(&task, &descriptors).unwrap();
    for step in &plan.remote_steps {
        println!("  remote: {} on {}", step.op, step.target);
    }
    for op in &plan.local_steps {
        println!("  local:  {op} on {coordinator_name}");
    }

    let args = vec![
        NamedValue::new("title", Value::text("Compilers")),
        NamedValue::new("surcharge", Value::Real(25.0)),
        NamedValue::new("price", Value::Real(0.0)), // placeholder, shadowed by QuotePrice
    ];
    let result = execute_plan(&plan, coordinator, &args, &net).unwrap();
    println!("\nresult:");
    for (key, value) in &result {
        println!("  {key} = {value}");
    }
    // AddTax saw price=400 (from QuotePrice) + surcharge=25
    assert_eq!(result["AddTax.total"], Value::Real(425.0));
}
