//! Every fault path the fabric defines: unreachable peer, unknown operation,
//! argument type mismatch, and a misaddressed visitor.
//!
//! ```bash
//! cargo run --example fault_paths
//! ```

use std::sync::Arc;

use soafabric::descriptor::{OperationSignature, ParamSpec, ParamType};
use soafabric::node::{Behavior, Node, NodeId, NodeTrace, OperationImpl, SubInvocation};
use soafabric::transport::{EnvelopeBody, Net, NetConfig, RequestHandler};
use soafabric::value::{NamedValue, Value};

fn main() {
    let net = Net::new(NetConfig::default());
    let trace = Arc::new(NodeTrace::new(net.clock_handle()));
    let node = Arc::new(
        Node::new(
            NodeId::new("server1").unwrap(),
            "server1",
            vec![OperationImpl {
                signature: OperationSignature::new(
                    "Lookup",
                    vec![ParamSpec::new("title", ParamType::Text)],
                    vec![ParamSpec::new("echo", ParamType::Text)],
                ),
                behavior: Behavior::Combine,
            }],
            trace,
        )
        .unwrap(),
    );
    let handler: Arc<dyn RequestHandler> = node.clone();
    net.register_node("server1", handler).unwrap();

    // unknown operation
    let reply = net
        .send("client1", "server1", EnvelopeBody::InvokeRequest { op: "Ghost".into(), args: vec![] })
        .unwrap();
    if let EnvelopeBody::Fault(f) = reply.body {
        println!("unknown operation   -> {f}");
    }

    // type mismatch, with expected/actual context
    let reply = net
        .send(
            "client1",
            "server1",
            EnvelopeBody::InvokeRequest {
                op: "Lookup".into(),
                args: vec![NamedValue::new("title", Value::Integer(42))],
            },
        )
        .unwrap();
    if let EnvelopeBody::Fault(f) = reply.body {
        println!("type mismatch       -> {f}");
    }

    // misaddressed visitor dispatch
    let fault = node
        .accept(&SubInvocation {
            target: NodeId::new("server9").unwrap(),
            op: "Lookup".into(),
            args: vec![],
            input_spec: vec![],
        })
        .unwrap_err();
    println!("misaddressed visit  -> {fault}");

    // unreachable peer: the transport answers with a fault envelope
    net.set_unreachable("server1", true);
    let err = net
        .send("client1", "server1", EnvelopeBody::GetDescriptor)
        .unwrap_err();
    println!("unreachable peer    -> {err}");

    println!("\ntrace tail (request/fault pairing, one request_id each):");
    for entry in net.trace_snapshot().iter().rev().take(2).rev() {
        println!(
            "  tick {} rid {} {} {} -> {}",
            entry.tick, entry.request_id, entry.kind, entry.sender, entry.target
        );
    }
}
