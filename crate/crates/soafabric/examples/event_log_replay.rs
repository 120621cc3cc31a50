//! The trigger repository: every decision is logged as one JSON line with
//! its cause, situation, and result; the log can be reloaded and every
//! decision re-derived to detect tampering or topology drift.
//!
//! ```bash
//! cargo run --example event_log_replay
//! ```

use soafabric::descriptor::{OperationSignature, ParamSpec, ParamType, ServiceDescriptor};
use soafabric::matchmaker::{
    decide, load_events, Cause, ClientApi, TriggerRepository,
};
use soafabric::TaskSpec;

fn catalog() -> Vec<ServiceDescriptor> {
    let search = |svc: &str, op: &str| {
        ServiceDescriptor::new(
            svc,
            format!("node://{svc}"),
            vec![OperationSignature::new(
                op,
                vec![ParamSpec::new("title", ParamType::Text)],
                vec![ParamSpec::new("hit", ParamType::Flag)],
            )],
        )
    };
    vec![search("server1", "EngBooksSearch"), search("server2", "MedicalBooksSearch")]
}

fn main() {
    let dir = std::env::temp_dir().join("soafabric_event_log_example");
    std::fs::create_dir_all(&dir).unwrap();
    let log_path = dir.join("events.jsonl");

    let api = ClientApi::new(TriggerRepository::create(&log_path).unwrap());
    let descriptors = catalog();

    for (i, ops) in [
        vec!["EngBooksSearch"],
        vec!["MedicalBooksSearch"],
        vec!["EngBooksSearch", "MedicalBooksSearch"],
    ]
    .into_iter()
    .enumerate()
    {
        let task = TaskSpec::new(
            format!("t{i}"),
            ops.into_iter().map(String::from).collect(),
        )
        .with_inputs(vec![ParamSpec::new("title", ParamType::Text)]);
        let event = api
            .decide_recorded(&task, &descriptors, Cause::ClientRequest, i as u64)
            .unwrap();
        println!(
            "event {}: task {} -> {:?}",
            event.event_id, event.task.task_id, event.decision.kind
        );
    }

    println!("\nlog lines:");
    for line in std::fs::read_to_string(&log_path).unwrap().lines() {
        println!("  {line}");
    }

    // reload and re-derive every decision
    let events = load_events(&log_path).unwrap();
    println!("\nloaded {} events; re-deriving each decision:", events.len());
    let mut clean = true;
    for event in &events {
        let again = decide(&event.task, &descriptors);
        let verdict = if again == event.decision { "ok" } else { "DIVERGED" };
        if again != event.decision {
            clean = false;
        }
        println!("  event {}: {}", event.event_id, verdict);
    }
    assert!(clean);

    // tamper with the log and watch monotonicity checking catch it
    let mut lines: Vec<String> =
        std::fs::read_to_string(&log_path).unwrap().lines().map(String::from).collect();
    lines.swap(1, 2);
    std::fs::write(&log_path, lines.join("\n") + "\n").unwrap();
    match load_events(&log_path) {
        Err(e) => println!("\ntampered log rejected: {e}"),
        Ok(_) => unreachable!(),
    }
}
