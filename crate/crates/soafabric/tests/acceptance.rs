//! Acceptance suite. Each test implements one criterion at its stated
//! tolerance and prints a single PASS/FAIL line; run with
//! `cargo test -p soafabric --test acceptance -- --nocapture`.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{
    direct_reference_execution, oracle_decide, random_catalog_and_task, random_descriptor,
    random_topology, Rng,
};
use soafabric::descriptor::{parse_descriptor, serialize_descriptor, ParamSpec, ParamType};
use soafabric::matchmaker::{decide, load_events, TaskSpec};
use soafabric::node::{
    execute_plan, plan_composition, Behavior, FeatureModule, Node, NodeId, NodeTrace,
    OperationImpl, SubInvocation,
};
use soafabric::runner::{run_scenario, RunOptions};
use soafabric::scenario::descriptors_at;
use soafabric::transport::{Net, NetConfig, RequestHandler};
use soafabric::value::{NamedValue, Value};
use soafabric::DecisionKind;

fn criterion(number: u32, name: &str, budget: Option<Duration>, body: impl FnOnce() -> String) {
    let start = Instant::now();
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(body));
    let elapsed = start.elapsed();
    match outcome {
        Ok(detail) => {
            println!("[PASS] criterion {number} ({name}): {detail} in {elapsed:.2?}");
            if let Some(limit) = budget {
                assert!(
                    elapsed < limit,
                    "criterion {number} exceeded its {limit:?} budget: {elapsed:?}"
                );
            }
        }
        Err(cause) => {
            println!("[FAIL] criterion {number} ({name}) after {elapsed:.2?}");
            std::panic::resume_unwind(cause);
        }
    }
}

fn bundled_scenario() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/bookstore.scenario")
}

#[test]
fn criterion_1_descriptor_round_trip() {
    criterion(1, "descriptor round-trip", Some(Duration::from_secs(5)), || {
        let mut rng = Rng(0x5EED_0001);
        for case in 0..200 {
            let d = random_descriptor(&mut rng);
            let text = serialize_descriptor(&d)
                .unwrap_or_else(|e| panic!("case {case}: serialize failed: {e}"));
            let parsed = parse_descriptor(&text)
                .unwrap_or_else(|e| panic!("case {case}: parse failed: {e}\n{text}"));
            assert_eq!(parsed, d, "case {case}: round trip changed the descriptor");
            let again = serialize_descriptor(&parsed).unwrap();
            assert_eq!(again, text, "case {case}: canonical form is not idempotent");
        }
        "200 random descriptors round-tripped, canonical form idempotent".to_string()
    });
}

#[test]
fn criterion_2_matchmaker_oracle_equivalence() {
    criterion(2, "matchmaker oracle equivalence", Some(Duration::from_secs(10)), || {
        let mut rng = Rng(0x5EED_0002);
        let mut kinds = BTreeMap::new();
        for case in 0..300 {
            let (descriptors, task) = random_catalog_and_task(&mut rng);
            let decision = decide(&task, &descriptors);
            let oracle = oracle_decide(&task, &descriptors);
            assert_eq!(decision.kind.to_string(), oracle.kind, "case {case}: kind differs");
            assert_eq!(decision.provider, oracle.provider, "case {case}: provider differs");
            assert_eq!(decision.coordinator, oracle.coordinator, "case {case}: coordinator differs");
            *kinds.entry(oracle.kind).or_insert(0u32) += 1;

            let mut shuffled = descriptors;
            for round in 0..50 {
                rng.shuffle(&mut shuffled);
                assert_eq!(
                    decide(&task, &shuffled),
                    decision,
                    "case {case}: decision changed under permutation {round}"
                );
            }
        }
        for kind in ["Direct", "Composite", "NoMatch"] {
            assert!(kinds.get(kind).copied().unwrap_or(0) > 0, "generator never produced {kind}");
        }
        format!("300 cases match the brute-force oracle (mix: {kinds:?}), 50 shuffles each")
    });
}

#[test]
fn criterion_3_bookstore_end_to_end() {
    criterion(3, "bookstore end-to-end", Some(Duration::from_secs(1)), || {
        // decision and plan, from the scenario's own descriptors
        let (scenario, _) = soafabric::scenario::load_scenario(bundled_scenario()).unwrap();
        let descriptors = descriptors_at(&scenario, 0);
        let task = scenario.tasks[0].to_task_spec();
        let decision = decide(&task, &descriptors);
        assert_eq!(decision.kind, DecisionKind::Composite);
        assert_eq!(decision.coordinator.as_deref(), Some("server1"));
        let coordinator = descriptors.iter().find(|d| d.service_name == "server1").unwrap();
        let plan = plan_composition(
            &task,
            &NodeId::new("server1").unwrap(),
            &coordinator.operations,
            &descriptors,
        )
        .unwrap();
        assert_eq!(plan.remote_steps.len(), 2);
        assert_eq!(plan.local_steps, vec!["getTheDeliveryAndPriceDetails".to_string()]);

        // full run: envelope accounting and the aggregated result
        let out = tempfile::tempdir().unwrap();
        let report = run_scenario(bundled_scenario(), &RunOptions::new(out.path())).unwrap();
        assert_eq!(report.exit_code, 0);
        let trace = std::fs::read_to_string(out.path().join("trace.jsonl")).unwrap();
        let invokes = trace
            .lines()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
            .filter(|e| e["kind"] == "InvokeRequest")
            .count();
        assert_eq!(invokes, 2, "exactly two invoke envelopes cross the network");
        let result = &report.metrics.tasks[0].result;
        for key in [
            "EngBooksSearch.value",
            "EngBooksSearch.date",
            "EngBooksSearch.price",
            "MedicalBooksSearch.value",
            "MedicalBooksSearch.date",
            "MedicalBooksSearch.price",
            "getTheDeliveryAndPriceDetails.summary",
            "getTheDeliveryAndPriceDetails.confirmed",
        ] {
            assert!(result.contains_key(key), "missing namespaced output {key}");
        }
        assert_eq!(result["EngBooksSearch.value"], Value::Flag(true));
        assert_eq!(result["EngBooksSearch.date"], Value::Integer(20));
        assert_eq!(result["EngBooksSearch.price"], Value::Real(450.0));
        "Composite via server1, 2 remote steps, 2 invoke envelopes, all outputs namespaced"
            .to_string()
    });
}

#[test]
fn criterion_4_composition_direct_equivalence() {
    criterion(4, "composition/direct equivalence", Some(Duration::from_secs(30)), || {
        let mut rng = Rng(0x5EED_0004);
        let mut composites = 0;
        let mut directs = 0;
        for case in 0..100 {
            let topo = random_topology(&mut rng);
            let net = Net::new(NetConfig::default());
            for node in &topo.nodes {
                let handler: Arc<dyn RequestHandler> = node.clone();
                net.register_node(node.id().as_str(), handler).unwrap();
            }
            let descriptors: Vec<_> = topo.nodes.iter().map(|n| n.descriptor()).collect();
            let decision = decide(&topo.task, &descriptors);
            let coordinator_name = match decision.kind {
                DecisionKind::Direct => {
                    directs += 1;
                    decision.provider.clone().unwrap()
                }
                DecisionKind::Composite => {
                    composites += 1;
                    decision.coordinator.clone().unwrap()
                }
                DecisionKind::NoMatch => panic!("case {case}: generator produced NoMatch"),
            };
            let coordinator = topo
                .nodes
                .iter()
                .find(|n| n.service_name() == coordinator_name)
                .unwrap();
            let plan = plan_composition(
                &topo.task,
                coordinator.id(),
                &coordinator.descriptor().operations,
                &descriptors,
            )
            .unwrap_or_else(|e| panic!("case {case}: plan failed: {e}"));

            // plan minimality: remote steps never duplicate coordinator-local ops
            for step in &plan.remote_steps {
                assert!(
                    coordinator.descriptor().operation(&step.op).is_none(),
                    "case {case}: remote step {} is hosted by the coordinator",
                    step.op
                );
            }

            let invokes_before = count_invoke_requests(&net);
            let composed = execute_plan(&plan, coordinator, &topo.args, &net)
                .unwrap_or_else(|e| panic!("case {case}: execution failed: {e}"));
            let invokes_after = count_invoke_requests(&net);
            assert_eq!(
                invokes_after - invokes_before,
                plan.remote_steps.len(),
                "case {case}: envelope count differs from remote step count"
            );

            // independent reference: each step on its host, same order, no transport
            let node_by_id = |id: &str| {
                topo.nodes.iter().find(|n| n.id().as_str() == id).cloned().unwrap()
            };
            let mut steps: Vec<(Arc<Node>, String)> = plan
                .remote_steps
                .iter()
                .map(|s| (node_by_id(s.target.as_str()), s.op.clone()))
                .collect();
            steps.extend(plan.local_steps.iter().map(|op| (node_by_id(coordinator.id().as_str()), op.clone())));
            let reference = direct_reference_execution(&steps, &topo.args);
            assert_eq!(composed, reference, "case {case}: composed and direct results differ");
        }
        assert!(composites >= 20, "only {composites} composite cases; generator too weak");
        format!("100 topologies equivalent field-for-field ({composites} composite, {directs} direct)")
    });
}

fn count_invoke_requests(net: &Net) -> usize {
    net.trace_snapshot().iter().filter(|e| e.kind == "InvokeRequest").count()
}

fn search_op(name: &str) -> OperationImpl {
    OperationImpl {
        signature: soafabric::descriptor::OperationSignature::new(
            name,
            vec![ParamSpec::new("title", ParamType::Text)],
            vec![ParamSpec::new("echo", ParamType::Text)],
        ),
        behavior: Behavior::Combine,
    }
}

#[test]
fn criterion_5_injection_visibility_and_atomicity() {
    criterion(5, "injection visibility and atomicity", None, || {
        let node = Arc::new(
            Node::new(
                NodeId::new("server2").unwrap(),
                "server2",
                vec![search_op("EngBooksSearch")],
                Arc::new(NodeTrace::detached()),
            )
            .unwrap(),
        );
        let task = TaskSpec::new("t1", vec!["ChemBooksSearch".into()])
            .with_inputs(vec![ParamSpec::new("title", ParamType::Text)]);

        // before injection: NoMatch
        let before = decide(&task, &[node.descriptor()]);
        assert_eq!(before.kind, DecisionKind::NoMatch);

        let doc_before = node.descriptor_text();
        let mut doc_after = None;

        // 20 concurrent invokers while the feature lands mid-flight
        let stop = Arc::new(AtomicBool::new(false));
        std::thread::scope(|scope| {
            for _ in 0..20 {
                let node = node.clone();
                let stop = stop.clone();
                let doc_before = doc_before.clone();
                scope.spawn(move || {
                    let args = vec![NamedValue::new("title", Value::text("Compilers"))];
                    while !stop.load(Ordering::Relaxed) {
                        let out = node.handle_invoke("EngBooksSearch", &args).unwrap();
                        assert_eq!(out, vec![NamedValue::new("echo", Value::text("Compilers"))]);
                        let doc = node.descriptor_text();
                        assert!(
                            doc == doc_before || doc.contains("ChemBooksSearch"),
                            "descriptor is neither the pre- nor the post-injection snapshot"
                        );
                    }
                });
            }
            std::thread::sleep(Duration::from_millis(20));
            let updated = node
                .inject_feature(&FeatureModule {
                    module_name: "chem_books".into(),
                    adds: vec![search_op("ChemBooksSearch")],
                })
                .unwrap();
            assert_eq!(updated.operations.len(), 2);
            doc_after = Some(node.descriptor_text());

            // colliding injection under load: error, registry bit-identical
            let err = node
                .inject_feature(&FeatureModule {
                    module_name: "dup".into(),
                    adds: vec![search_op("EngBooksSearch")],
                })
                .unwrap_err();
            assert!(err.to_string().contains("EngBooksSearch"));
            assert_eq!(node.descriptor_text(), doc_after.clone().unwrap());

            std::thread::sleep(Duration::from_millis(20));
            stop.store(true, Ordering::Relaxed);
        });

        // after injection, with zero restarts: the same task is now Direct
        let after = decide(&task, &[node.descriptor()]);
        assert_eq!(after.kind, DecisionKind::Direct);
        assert_eq!(after.provider.as_deref(), Some("server2"));

        // and a visit to the new operation answers
        let visit = SubInvocation {
            target: NodeId::new("server2").unwrap(),
            op: "ChemBooksSearch".into(),
            args: vec![NamedValue::new("title", Value::text("Polymers"))],
            input_spec: vec![],
        };
        assert!(node.accept(&visit).is_ok());
        "NoMatch flipped to Direct after injection; snapshots atomic under 20 invokers; collision left registry bit-identical".to_string()
    });
}

#[test]
fn criterion_6_determinism() {
    criterion(6, "determinism", None, || {
        let dir = tempfile::tempdir().unwrap();
        let out1 = dir.path().join("run1");
        let out2 = dir.path().join("run2");
        let mut opts1 = RunOptions::new(&out1);
        opts1.seed = Some(42);
        let mut opts2 = RunOptions::new(&out2);
        opts2.seed = Some(42);
        run_scenario(bundled_scenario(), &opts1).unwrap();
        run_scenario(bundled_scenario(), &opts2).unwrap();
        for artifact in ["events.jsonl", "trace.jsonl", "node_trace.jsonl", "metrics.json"] {
            let a = std::fs::read(out1.join(artifact)).unwrap();
            let b = std::fs::read(out2.join(artifact)).unwrap();
            assert_eq!(a, b, "{artifact} differs between identical runs");
        }
        "two identical runs produced byte-identical events.jsonl and trace.jsonl (and the other artifacts)".to_string()
    });
}

fn soak_scenario() -> serde_json::Value {
    let op = |name: &str| {
        serde_json::json!({
            "name": name,
            "inputs": [{"name": "title", "ptype": "text"}],
            "outputs": [{"name": "echo", "ptype": "text"}],
            "behavior": {"kind": "combine"}
        })
    };
    let mut tasks = Vec::new();
    for i in 0..100 {
        let required: Vec<&str> = match i % 4 {
            0 => vec!["SearchA"],
            1 => vec!["SearchB"],
            2 => vec!["SearchA", "SearchB"],
            _ => vec!["SearchA", "SearchC"],
        };
        tasks.push(serde_json::json!({
            "task_id": format!("t{i}"),
            "issue_tick": 0,
            "required_ops": required,
            "provided_inputs": [{"name": "title", "ptype": "text"}],
            "args": [{"name": "title", "value": {"text": "Compilers"}}]
        }));
    }
    serde_json::json!({
        "topology": [
            {"id": "server1", "operations": [op("SearchA")]},
            {"id": "server2", "operations": [op("SearchB"), op("SearchC")]},
            {"id": "server3", "operations": [op("SearchA"), op("SearchB")]}
        ],
        "tasks": tasks
    })
}

#[test]
fn criterion_7_concurrency_soak() {
    criterion(7, "concurrency soak", None, || {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("soak.scenario");
        std::fs::write(&path, serde_json::to_string(&soak_scenario()).unwrap()).unwrap();
        let out = dir.path().join("out");
        let mut opts = RunOptions::new(&out);
        opts.clients = 100;
        let report = run_scenario(&path, &opts).unwrap();
        assert_eq!(report.exit_code, 0);
        assert_eq!(report.metrics.totals.tasks_run, 100);
        assert_eq!(report.metrics.totals.faults, 0);

        // well-formed, strictly monotone event log
        let events = load_events(out.join("events.jsonl")).unwrap();
        assert_eq!(events.len(), 100);
        let ids: Vec<u64> = events.iter().map(|e| e.event_id).collect();
        assert_eq!(ids, (1..=100).collect::<Vec<u64>>());

        // spot-check 10 sampled decisions against the independent oracle
        let (scenario, _) = soafabric::scenario::load_scenario(&path).unwrap();
        let mut rng = Rng(0x5EED_0007);
        for _ in 0..10 {
            let event = &events[rng.below(events.len())];
            let descriptors = descriptors_at(&scenario, event.logical_time);
            let oracle = oracle_decide(&event.task, &descriptors);
            assert_eq!(event.decision.kind.to_string(), oracle.kind);
            assert_eq!(event.decision.provider, oracle.provider);
            assert_eq!(event.decision.coordinator, oracle.coordinator);
        }
        "100 concurrent clients produced a strictly monotone log; 10 sampled decisions match the oracle".to_string()
    });
}

#[test]
fn criterion_8_fault_paths() {
    criterion(8, "fault paths", None, || {
        let dir = tempfile::tempdir().unwrap();
        let op = |name: &str| {
            serde_json::json!({
                "name": name,
                "inputs": [{"name": "title", "ptype": "text"}],
                "outputs": [{"name": "echo", "ptype": "text"}],
                "behavior": {"kind": "combine"}
            })
        };

        // unreachable peer: server3 drops off after the descriptors are
        // gathered (tick 2) but before the second remote invoke reaches it
        let unreachable = serde_json::json!({
            "topology": [
                {"id": "server1", "operations": [op("Aggregate")]},
                {"id": "server2", "operations": [op("SearchA")]},
                {"id": "server3", "operations": [op("SearchB")]}
            ],
            "faults": [{"at_tick": 4, "node": "server3", "unreachable": true}],
            "tasks": [{
                "task_id": "t1",
                "issue_tick": 0,
                "required_ops": ["SearchA", "SearchB", "Aggregate"],
                "provided_inputs": [{"name": "title", "ptype": "text"}],
                "args": [{"name": "title", "value": {"text": "Compilers"}}]
            }]
        });
        let path = dir.path().join("unreachable.scenario");
        std::fs::write(&path, serde_json::to_string(&unreachable).unwrap()).unwrap();
        let out = dir.path().join("out_unreachable");
        let report = run_scenario(&path, &RunOptions::new(&out)).unwrap();
        assert_eq!(report.exit_code, 1, "fault runs exit nonzero");
        let fault = report.metrics.tasks[0].fault.as_deref().unwrap();
        assert!(fault.contains("PeerUnreachable"), "unexpected fault: {fault}");
        let trace = std::fs::read_to_string(out.join("trace.jsonl")).unwrap();
        assert!(
            trace
                .lines()
                .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
                .any(|e| e["kind"] == "Fault" && e["body"]["code"] == "PeerUnreachable"),
            "trace lacks the PeerUnreachable fault envelope"
        );

        // unknown operation, via a raw invoke task
        let unknown = serde_json::json!({
            "topology": [{"id": "server1", "operations": [op("Ping")]}],
            "tasks": [{"task_id": "t1", "invoke": {"node": "server1", "op": "Ghost", "args": []}}]
        });
        let path = dir.path().join("unknown.scenario");
        std::fs::write(&path, serde_json::to_string(&unknown).unwrap()).unwrap();
        let report = run_scenario(&path, &RunOptions::new(dir.path().join("out_unknown"))).unwrap();
        assert_eq!(report.exit_code, 1);
        let fault = report.metrics.tasks[0].fault.as_deref().unwrap();
        assert!(fault.contains("UnknownOperation"), "unexpected fault: {fault}");

        // type mismatch: matchmaking succeeds on declared types, the invoke
        // then carries an integer where text was declared
        let mismatch = serde_json::json!({
            "topology": [{"id": "server1", "operations": [op("Lookup")]}],
            "tasks": [{
                "task_id": "t1",
                "required_ops": ["Lookup"],
                "provided_inputs": [{"name": "title", "ptype": "text"}],
                "args": [{"name": "title", "value": {"integer": 42}}]
            }]
        });
        let path = dir.path().join("mismatch.scenario");
        std::fs::write(&path, serde_json::to_string(&mismatch).unwrap()).unwrap();
        let report = run_scenario(&path, &RunOptions::new(dir.path().join("out_mismatch"))).unwrap();
        assert_eq!(report.exit_code, 1);
        let fault = report.metrics.tasks[0].fault.as_deref().unwrap();
        assert!(fault.contains("TypeMismatch"), "unexpected fault: {fault}");
        assert!(fault.contains("title") && fault.contains("expected text") && fault.contains("got integer"));

        "PeerUnreachable, UnknownOperation, and TypeMismatch each surfaced with the exact code and a nonzero exit".to_string()
    });
}
