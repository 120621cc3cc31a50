//! Thin CLI over the library: `run` executes a scenario, `replay` audits an
//! event log against its scenario.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use soafabric::runner::{replay, run_scenario, RunOptions};

#[derive(Parser)]
#[command(name = "soafabric", version, about = "Scenario runner for the service fabric")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write events, trace, and metrics artifacts.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory for events.jsonl, trace.jsonl, node_trace.jsonl,
        /// metrics.json.
        #[arg(long)]
        out: PathBuf,
        /// Network seed; overrides the scenario's net.seed.
        #[arg(long)]
        seed: u64,
        /// Concurrent logical clients (default: sequential).
        #[arg(long, default_value_t = 1)]
        clients: usize,
        /// Mark a node unreachable from tick 0; repeatable.
        #[arg(long = "fail-node")]
        fail_node: Vec<String>,
        /// Default per-hop latency in ticks; overrides the scenario's.
        #[arg(long)]
        latency: Option<u64>,
    },
    /// Re-derive every logged decision and report divergences.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { scenario, out, seed, clients, fail_node, latency } => {
            let opts = RunOptions {
                out_dir: out,
                seed: Some(seed),
                clients,
                fail_nodes: fail_node,
                latency,
            };
            match run_scenario(&scenario, &opts) {
                Ok(report) => {
                    let t = &report.metrics.totals;
                    println!(
                        "{} tasks: {} direct, {} composite, {} no-match, {} faults; {} injections; {} envelopes traced",
                        t.tasks_run, t.direct, t.composite, t.no_match, t.faults,
                        t.injections_applied, t.trace_envelopes
                    );
                    for task in &report.metrics.tasks {
                        let status = task.fault.as_deref().unwrap_or("ok");
                        println!(
                            "  {}: {} ({} envelopes, {} ticks) {}",
                            task.task_id, task.decision, task.envelopes, task.latency_ticks, status
                        );
                    }
                    println!("artifacts in {}", report.metrics_path.parent().unwrap().display());
                    ExitCode::from(report.exit_code as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(3)
                }
            }
        }
        Command::Replay { log, scenario } => match replay(&log, &scenario) {
            Ok(report) => {
                if report.is_clean() {
                    println!("replay clean: {} events verified", report.events_checked);
                    ExitCode::SUCCESS
                } else {
                    println!(
                        "replay found {} divergence(s) in {} events:",
                        report.divergences.len(),
                        report.events_checked
                    );
                    for d in &report.divergences {
                        println!(
                            "  event {} (task {}): logged {} but recomputed {}",
                            d.event_id, d.task_id, d.logged, d.recomputed
                        );
                    }
                    ExitCode::from(1)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(3)
            }
        },
    }
}
