//! Runtime feature injection: a task nobody can serve becomes servable after
//! a feature module adds the missing operation to a live node — no restart.
//!
//! ```bash
//! cargo run --example feature_injection
//! ```

use std::sync::Arc;

use soafabric::descriptor::{OperationSignature, ParamSpec, ParamType};
use soafabric::matchmaker::decide;
use soafabric::node::{Behavior, FeatureModule, Node, NodeId, NodeTrace, OperationImpl};
use soafabric::{DecisionKind, TaskSpec};

fn search(name: &str) -> OperationImpl {
    OperationImpl {
        signature: OperationSignature::new(
            name,
            vec![ParamSpec::new("title", ParamType::Text)],
            vec![ParamSpec::new("echo", ParamType::Text)],
        ),
        behavior: Behavior::Combine,
    }
}

fn main() {
    let node = Node::new(
        NodeId::new("server2").unwrap(),
        "server2",
        vec![search("EngBooksSearch")],
        Arc::new(NodeTrace::detached()),
    )
    .unwrap();

    let task = TaskSpec::new("want_chemistry", vec!["ChemBooksSearch".into()])
        .with_inputs(vec![ParamSpec::new("title", ParamType::Text)]);

    let before = decide(&task, &[node.descriptor()]);
    println!("before injection: {:?}", before.kind);
    assert_eq!(before.kind, DecisionKind::NoMatch);

    println!("\npublished descriptor before:\n{}", node.descriptor_text());

    let updated = node
        .inject_feature(&FeatureModule {
            module_name: "chem_books".into(),
            adds: vec![search("ChemBooksSearch")],
        })
        .unwrap();
    println!("injected `chem_books`; registry now has {} operations", updated.operations.len());

    let after = decide(&task, &[node.descriptor()]);
    println!("after injection: {:?} via {:?}", after.kind, after.provider);
    assert_eq!(after.kind, DecisionKind::Direct);

    // a colliding module is rejected atomically: nothing changes
    let err = node
        .inject_feature(&FeatureModule {
            module_name: "dup".into(),
            adds: vec![search("EngBooksSearch")],
        })
        .unwrap_err();
    println!("\ncolliding module rejected: {err}");

    println!("\npublished descriptor after:\n{}", node.descriptor_text());
}
