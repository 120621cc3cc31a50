//! Scenario runner and log replay.
//!
//! [`run_scenario`] wires the transport, the nodes, and the decision stack,
//! executes the task script (optionally with several concurrent logical
//! clients), and writes four artifacts into the output directory:
//!
//! * `events.jsonl` — one trigger event per matchmaking task,
//! * `trace.jsonl` — every envelope, in delivery order,
//! * `node_trace.jsonl` — node-side accept/invoke/inject/fault entries,
//! * `metrics.json` — per-task decisions, envelope counts and latencies.
//!
//! Exit codes: 0 when no task faulted and nothing was NoMatch, 2 when any
//! decision was NoMatch, 1 when some task faulted, 3 for scenario or input
//! errors (reported as [`RunnerError`] by the library, mapped by the CLI).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::Serialize;
use thiserror::Error;

use crate::matchmaker::{
    decide, gather_descriptors, Cause, ClientApi, MatchError, Trigger, TriggerEvent,
    TriggerRepository,
};
use crate::node::{
    execute_plan, FeatureModule, Node, NodeError, NodeId, NodeTrace,
};
use crate::scenario::{descriptors_at, load_scenario, ConfigError, Scenario, TaskDef};
use crate::transport::{EnvelopeBody, Net, NetConfig, RequestHandler, TransportError};
use crate::value::{NamedValue, Value};
use crate::DecisionKind;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Node(#[from] NodeError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Flags accepted by `run`; each field mirrors one CLI flag.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Overrides the scenario's `net.seed`.
    pub seed: Option<u64>,
    /// Number of concurrent logical clients; 1 runs strictly sequentially.
    pub clients: usize,
    /// Nodes marked unreachable from tick 0, in addition to the scenario's.
    pub fail_nodes: Vec<String>,
    /// Overrides the scenario's `net.default_latency`.
    pub latency: Option<u64>,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        RunOptions {
            out_dir: out_dir.into(),
            seed: None,
            clients: 1,
            fail_nodes: Vec::new(),
            latency: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskMetrics {
    pub task_id: String,
    pub decision: String,
    pub envelopes: u64,
    pub latency_ticks: u64,
    pub fault: Option<String>,
    pub result: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Totals {
    pub tasks_run: u64,
    pub direct: u64,
    pub composite: u64,
    pub no_match: u64,
    pub faults: u64,
    pub injections_applied: u64,
    pub trace_envelopes: u64,
    pub broadcast_envelopes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMetrics {
    pub tasks: Vec<TaskMetrics>,
    pub totals: Totals,
}

#[derive(Debug)]
pub struct RunReport {
    pub exit_code: i32,
    pub metrics: RunMetrics,
    pub events_path: PathBuf,
    pub trace_path: PathBuf,
    pub node_trace_path: PathBuf,
    pub metrics_path: PathBuf,
}

struct Runtime {
    net: Net,
    nodes: BTreeMap<String, Arc<Node>>,
    node_trace: Arc<NodeTrace>,
    injections_applied: Arc<AtomicU64>,
    last_directive_tick: u64,
}

fn build_runtime(scenario: &Scenario, base: &Path, cfg: NetConfig) -> Result<Runtime, RunnerError> {
    let net = Net::new(cfg);
    let node_trace = Arc::new(NodeTrace::new(net.clock_handle()));
    let mut nodes = BTreeMap::new();
    for def in &scenario.topology {
        let ops = def
            .operations
            .iter()
            .map(|o| o.build_impl(base))
            .collect::<Result<Vec<_>, _>>()?;
        let node = Arc::new(Node::new(
            NodeId::new(&def.id)?,
            def.service_name(),
            ops,
            node_trace.clone(),
        )?);
        let handler: Arc<dyn RequestHandler> = node.clone();
        net.register_node(&def.id, handler)?;
        nodes.insert(def.id.clone(), node);
    }

    let mut last_directive_tick = 0;
    for fault in &scenario.faults {
        net.schedule_unreachable(fault.at_tick, &fault.node, fault.unreachable);
        last_directive_tick = last_directive_tick.max(fault.at_tick);
    }
    let injections_applied = Arc::new(AtomicU64::new(0));
    for feature in &scenario.features {
        let adds = feature
            .adds
            .iter()
            .map(|o| o.build_impl(base))
            .collect::<Result<Vec<_>, _>>()?;
        let module = FeatureModule { module_name: feature.module.clone(), adds };
        let node = nodes
            .get(&feature.node)
            .expect("validated feature target")
            .clone();
        let counter = injections_applied.clone();
        net.schedule_action(feature.at_tick, move || {
            if node.inject_feature(&module).is_ok() {
                counter.fetch_add(1, Ordering::SeqCst);
            }
        });
        last_directive_tick = last_directive_tick.max(feature.at_tick);
    }

    Ok(Runtime { net, nodes, node_trace, injections_applied, last_directive_tick })
}

fn bind_from(spec: &[crate::descriptor::ParamSpec], bindings: &BTreeMap<String, Value>) -> Vec<NamedValue> {
    spec.iter()
        .filter_map(|p| bindings.get(&p.name).map(|v| NamedValue::new(p.name.clone(), v.clone())))
        .collect()
}

fn record_namespaced(
    op: &str,
    outputs: Vec<NamedValue>,
    result: &mut BTreeMap<String, Value>,
    bindings: &mut BTreeMap<String, Value>,
) {
    for out in outputs {
        result.insert(format!("{op}.{}", out.name), out.value.clone());
        bindings.insert(out.name, out.value);
    }
}

fn run_task(rt: &Runtime, api: &ClientApi, def: &TaskDef) -> Result<TaskMetrics, RunnerError> {
    let start_tick = rt.net.now();
    let mut metrics = TaskMetrics {
        task_id: def.task_id.clone(),
        decision: String::new(),
        envelopes: 0,
        latency_ticks: 0,
        fault: None,
        result: BTreeMap::new(),
    };

    if let Some(raw) = &def.invoke {
        metrics.decision = "Invoke".to_string();
        metrics.envelopes = 2;
        let reply = rt.net.invoke(&def.task_id, &raw.node, &raw.op, raw.args.clone()).wait();
        match reply {
            Ok(env) => match env.body {
                EnvelopeBody::InvokeResponse { results } => {
                    let mut bindings = BTreeMap::new();
                    record_namespaced(&raw.op, results, &mut metrics.result, &mut bindings);
                }
                EnvelopeBody::Fault(f) => metrics.fault = Some(f.to_string()),
                other => metrics.fault = Some(format!("unexpected reply kind {}", other.kind())),
            },
            Err(e) => metrics.fault = Some(e.to_string()),
        }
        metrics.latency_ticks = rt.net.now() - start_tick;
        return Ok(metrics);
    }

    let task = def.to_task_spec();
    let descriptors = match gather_descriptors(&rt.net, &def.task_id) {
        Ok(d) => d,
        Err(MatchError::NoProviders) => {
            metrics.decision = "NoProviders".to_string();
            metrics.fault = Some(MatchError::NoProviders.to_string());
            metrics.latency_ticks = rt.net.now() - start_tick;
            return Ok(metrics);
        }
        Err(e) => return Err(e.into()),
    };

    let event = api.decide_recorded(&task, &descriptors, Cause::ClientRequest, rt.net.now())?;
    metrics.decision = event.decision.kind.to_string();

    match event.decision.kind {
        DecisionKind::NoMatch => {}
        DecisionKind::Direct => {
            let provider_name = event.decision.provider.as_deref().expect("direct has provider");
            let provider = descriptors
                .iter()
                .find(|d| d.service_name == provider_name)
                .expect("provider was scored");
            let target = provider.endpoint_node_id().expect("gathered descriptors are valid");
            let mut bindings: BTreeMap<String, Value> =
                def.args.iter().map(|a| (a.name.clone(), a.value.clone())).collect();
            for op in &task.required_ops {
                let spec = provider.operation(op).expect("direct covers all ops").inputs.clone();
                let args = bind_from(&spec, &bindings);
                metrics.envelopes += 2;
                let reply = rt.net.invoke(&def.task_id, target, op, args).wait();
                match reply {
                    Ok(env) => match env.body {
                        EnvelopeBody::InvokeResponse { results } => {
                            record_namespaced(op, results, &mut metrics.result, &mut bindings);
                        }
                        EnvelopeBody::Fault(f) => {
                            metrics.fault = Some(f.to_string());
                            break;
                        }
                        other => {
                            metrics.fault = Some(format!("unexpected reply kind {}", other.kind()));
                            break;
                        }
                    },
                    Err(e) => {
                        metrics.fault = Some(e.to_string());
                        break;
                    }
                }
            }
        }
        DecisionKind::Composite => {
            let coordinator_name =
                event.decision.coordinator.as_deref().expect("composite has coordinator");
            let coordinator_descriptor = descriptors
                .iter()
                .find(|d| d.service_name == coordinator_name)
                .expect("coordinator was scored");
            let coordinator_id = coordinator_descriptor
                .endpoint_node_id()
                .expect("gathered descriptors are valid")
                .to_string();
            let coordinator_node =
                rt.nodes.get(&coordinator_id).expect("coordinator is a registered node");
            let plan = crate::node::plan_composition(
                &task,
                coordinator_node.id(),
                &coordinator_descriptor.operations,
                &descriptors,
            );
            match plan {
                Err(e) => metrics.fault = Some(e.to_string()),
                Ok(plan) => {
                    match execute_plan(&plan, coordinator_node, &def.args, &rt.net) {
                        Ok(result) => {
                            metrics.envelopes = 2 * plan.remote_steps.len() as u64;
                            metrics.result = result;
                        }
                        Err(fault) => {
                            // count the envelopes actually sent before the fault
                            let attempted = plan
                                .remote_steps
                                .iter()
                                .position(|s| s.op == fault.op)
                                .map(|idx| idx + 1)
                                .unwrap_or(plan.remote_steps.len());
                            metrics.envelopes = 2 * attempted as u64;
                            metrics.fault = Some(fault.to_string());
                        }
                    }
                }
            }
        }
    }

    metrics.latency_ticks = rt.net.now() - start_tick;
    Ok(metrics)
}

fn run_tasks(
    rt: &Runtime,
    api: &ClientApi,
    scenario: &Scenario,
    clients: usize,
) -> Result<Vec<TaskMetrics>, RunnerError> {
    let mut order: Vec<usize> = (0..scenario.tasks.len()).collect();
    order.sort_by_key(|&i| (scenario.tasks[i].issue_tick, i));

    let mut outcomes: Vec<Option<TaskMetrics>> = vec![None; scenario.tasks.len()];
    let mut cursor = 0;
    while cursor < order.len() {
        let tick = scenario.tasks[order[cursor]].issue_tick;
        let mut batch = Vec::new();
        while cursor < order.len() && scenario.tasks[order[cursor]].issue_tick == tick {
            batch.push(order[cursor]);
            cursor += 1;
        }
        rt.net.advance_to(tick);

        if clients <= 1 || batch.len() == 1 {
            for idx in batch {
                outcomes[idx] = Some(run_task(rt, api, &scenario.tasks[idx])?);
            }
        } else {
            let queue = Mutex::new(batch.into_iter().collect::<std::collections::VecDeque<_>>());
            let results: Mutex<Vec<(usize, Result<TaskMetrics, RunnerError>)>> =
                Mutex::new(Vec::new());
            let workers = clients.min(queue.lock().unwrap().len());
            std::thread::scope(|scope| {
                for _ in 0..workers {
                    scope.spawn(|| loop {
                        let idx = match queue.lock().unwrap_or_else(|e| e.into_inner()).pop_front() {
                            Some(idx) => idx,
                            None => break,
                        };
                        let outcome = run_task(rt, api, &scenario.tasks[idx]);
                        results.lock().unwrap_or_else(|e| e.into_inner()).push((idx, outcome));
                    });
                }
            });
            for (idx, outcome) in results.into_inner().unwrap_or_else(|e| e.into_inner()) {
                outcomes[idx] = Some(outcome?);
            }
        }
    }
    Ok(outcomes.into_iter().map(|o| o.expect("every task ran")).collect())
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), std::io::Error> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut file, item)?;
        file.write_all(b"\n")?;
    }
    file.flush()
}

/// Executes the scenario at `scenario_path` and writes all artifacts into
/// `opts.out_dir`.
pub fn run_scenario(scenario_path: impl AsRef<Path>, opts: &RunOptions) -> Result<RunReport, RunnerError> {
    let (scenario, base) = load_scenario(scenario_path)?;

    let mut cfg = scenario.net.clone();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(latency) = opts.latency {
        cfg.default_latency = latency;
    }
    for node in &opts.fail_nodes {
        cfg.unreachable.insert(node.clone());
    }

    std::fs::create_dir_all(&opts.out_dir)?;
    let events_path = opts.out_dir.join("events.jsonl");
    let trace_path = opts.out_dir.join("trace.jsonl");
    let node_trace_path = opts.out_dir.join("node_trace.jsonl");
    let metrics_path = opts.out_dir.join("metrics.json");

    let rt = build_runtime(&scenario, &base, cfg)?;
    let api = ClientApi::new(TriggerRepository::create(&events_path)?);

    let tasks = run_tasks(&rt, &api, &scenario, opts.clients.max(1))?;

    // flush directives scheduled past the last task
    rt.net.advance_to(rt.last_directive_tick);

    let gathers = tasks.iter().filter(|t| t.decision != "Invoke").count() as u64;
    let node_count = scenario.topology.len() as u64;
    let totals = Totals {
        tasks_run: tasks.len() as u64,
        direct: tasks.iter().filter(|t| t.decision == "Direct").count() as u64,
        composite: tasks.iter().filter(|t| t.decision == "Composite").count() as u64,
        no_match: tasks.iter().filter(|t| t.decision == "NoMatch").count() as u64,
        faults: tasks.iter().filter(|t| t.fault.is_some()).count() as u64,
        injections_applied: rt.injections_applied.load(Ordering::SeqCst),
        trace_envelopes: rt.net.trace_len() as u64,
        broadcast_envelopes: 2 * node_count * gathers,
    };
    let exit_code = if totals.no_match > 0 {
        2
    } else if totals.faults > 0 {
        1
    } else {
        0
    };

    write_jsonl(&trace_path, &rt.net.trace_snapshot())?;
    write_jsonl(&node_trace_path, &rt.node_trace.snapshot())?;
    let metrics = RunMetrics { tasks, totals };
    let metrics_json = serde_json::to_string_pretty(&metrics).map_err(std::io::Error::from)?;
    std::fs::write(&metrics_path, metrics_json.as_bytes())?;

    Ok(RunReport { exit_code, metrics, events_path, trace_path, node_trace_path, metrics_path })
}

/// One disagreement between a logged decision and its recomputation.
#[derive(Debug, Clone, Serialize)]
pub struct Divergence {
    pub event_id: u64,
    pub task_id: String,
    pub logged: String,
    pub recomputed: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplayReport {
    pub events_checked: usize,
    pub divergences: Vec<Divergence>,
}

impl ReplayReport {
    pub fn is_clean(&self) -> bool {
        self.divergences.is_empty()
    }
}

fn decision_summary(kind: DecisionKind, provider: &Option<String>, coordinator: &Option<String>) -> String {
    match kind {
        DecisionKind::Direct => format!("Direct({})", provider.as_deref().unwrap_or("?")),
        DecisionKind::Composite => format!("Composite({})", coordinator.as_deref().unwrap_or("?")),
        DecisionKind::NoMatch => "NoMatch".to_string(),
    }
}

/// Re-derives every logged decision from the scenario's descriptors as of the
/// logged tick (feature injections at or before that tick count as applied)
/// and reports any divergence. An untampered log of an unchanged scenario
/// replays clean.
pub fn replay(
    log_path: impl AsRef<Path>,
    scenario_path: impl AsRef<Path>,
) -> Result<ReplayReport, RunnerError> {
    let (scenario, _base) = load_scenario(scenario_path)?;
    let events = crate::matchmaker::load_events(log_path)?;
    let trigger = Trigger::new();
    let mut divergences = Vec::new();
    for event in &events {
        let descriptors: Vec<_> = descriptors_at(&scenario, event.logical_time)
            .into_iter()
            .filter(|d| event.considered.contains(&d.service_name))
            .collect();
        let replayed: TriggerEvent = trigger
            .raise(&event.task, &descriptors, Cause::Replay, event.logical_time)
            .complete(decide(&event.task, &descriptors));
        let logged = decision_summary(
            event.decision.kind,
            &event.decision.provider,
            &event.decision.coordinator,
        );
        let recomputed = decision_summary(
            replayed.decision.kind,
            &replayed.decision.provider,
            &replayed.decision.coordinator,
        );
        if logged != recomputed {
            divergences.push(Divergence {
                event_id: event.event_id,
                task_id: event.task.task_id.clone(),
                logged,
                recomputed,
            });
        }
    }
    Ok(ReplayReport { events_checked: events.len(), divergences })
}
