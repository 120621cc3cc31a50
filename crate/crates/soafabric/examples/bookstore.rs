//! The bookstore, end to end: three nodes, one composite task.
//!
//! server2 searches engineering books, server3 searches medical books, and
//! server1 owns the delivery/price aggregate. No single provider covers the
//! whole order, so the matchmaker picks server1 as coordinator and server1
//! visits its peers for the two searches.
//!
//! ```bash
//! cargo run --example bookstore
//! ```

use std::sync::Arc;

use soafabric::descriptor::{OperationSignature, ParamSpec, ParamType};
use soafabric::matchmaker::{decide, evaluate_rules};
use soafabric::node::{
    execute_plan, Behavior, CatalogRow, Node, NodeId, NodeTrace, OperationImpl,
};
use soafabric::transport::{Net, NetConfig, RequestHandler};
use soafabric::value::{NamedValue, Value};
use soafabric::TaskSpec;

fn search_signature(name: &str) -> OperationSignature {
    OperationSignature::new(
        name,
        vec![ParamSpec::new("title", ParamType::Text)],
        vec![
            ParamSpec::new("value", ParamType::Flag),
            ParamSpec::new("date", ParamType::Integer),
            ParamSpec::new("price", ParamType::Real),
        ],
    )
}

fn main() {
    let net = Net::new(NetConfig::default());
    let trace = Arc::new(NodeTrace::new(net.clock_handle()));

    let eng_books = vec![
        CatalogRow { name: "Compilers".into(), delivery_days: 20, price: 450.0, in_stock: true },
        CatalogRow { name: "Operating Systems".into(), delivery_days: 12, price: 380.0, in_stock: true },
    ];
    let med_books = vec![
        CatalogRow { name: "Anatomy".into(), delivery_days: 7, price: 520.0, in_stock: true },
    ];

    let server1 = Arc::new(
        Node::new(
            NodeId::new("server1").unwrap(),
            "server1",
            vec![OperationImpl {
                signature: OperationSignature::new(
                    "getTheDeliveryAndPriceDetails",
                    vec![ParamSpec::new("title", ParamType::Text)],
                    vec![
                        ParamSpec::new("summary", ParamType::Text),
                        ParamSpec::new("confirmed", ParamType::Flag),
                    ],
                ),
                behavior: Behavior::Combine,
            }],
            trace.clone(),
        )
        .unwrap(),
    );
    let server2 = Arc::new(
        Node::new(
            NodeId::new("server2").unwrap(),
            "server2",
            vec![OperationImpl {
                signature: search_signature("EngBooksSearch"),
                behavior: Behavior::Table { rows: eng_books },
            }],
            trace.clone(),
        )
        .unwrap(),
    );
    let server3 = Arc::new(
        Node::new(
            NodeId::new("server3").unwrap(),
            "server3",
            vec![OperationImpl {
                signature: search_signature("MedicalBooksSearch"),
                behavior: Behavior::Table { rows: med_books },
            }],
            trace.clone(),
        )
        .unwrap(),
    );
    for node in [&server1, &server2, &server3] {
        let handler: Arc<dyn RequestHandler> = node.clone();
        net.register_node(node.id().as_str(), handler).unwrap();
    }

    let task = TaskSpec::new(
        "order1",
        vec![
            "EngBooksSearch".into(),
            "MedicalBooksSearch".into(),
            "getTheDeliveryAndPriceDetails".into(),
        ],
    )
    .with_inputs(vec![ParamSpec::new("title", ParamType::Text)]);

    let descriptors = soafabric::matchmaker::gather_descriptors(&net, "client1").unwrap();
    println!("gathered {} descriptors", descriptors.len());
    for d in &descriptors {
        let score = evaluate_rules(&task, d);
        println!(
            "  {} covers {}/{} required ops",
            d.service_name, score.coverage.satisfied, score.coverage.required
        );
    }

    let decision = decide(&task, &descriptors);
    println!("decision: {:?} coordinator={:?}", decision.kind, decision.coordinator);

    let coordinator = decision.coordinator.as_deref().unwrap();
    assert_eq!(coordinator, "server1");
    let plan = server1.plan_composition(&task, &descriptors).unwrap();
    println!("plan: {} local step(s), {} remote step(s)", plan.local_steps.len(), plan.remote_steps.len());
    for step in &plan.remote_steps {
        println!("  visit {} for {}", step.target, step.op);
    }

    let args = vec![NamedValue::new("title", Value::text("Compilers"))];
    let result = execute_plan(&plan, &server1, &args, &net).unwrap();
    println!("aggregated result:");
    for (key, value) in &result {
        println!("  {key} = {value}");
    }

    let invokes = net
        .trace_snapshot()
        .iter()
        .filter(|e| e.kind == "InvokeRequest")
        .count();
    println!("invoke envelopes on the wire: {invokes}");

    println!("\nnode trace (visitor double-step visible):");
    for entry in trace.snapshot() {
        println!("  tick {:>2} {:<8} {:<7} {}", entry.tick, entry.node, format!("{:?}", entry.kind).to_lowercase(), entry.op);
    }
}
