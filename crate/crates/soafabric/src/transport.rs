//! Deterministic in-process network.
//!
//! Descriptor fetches (GET-like) and invocations (POST-like) travel as
//! [`Envelope`]s through a discrete-event core: time is a tick counter, every
//! link has a configurable latency, and nodes can be marked unreachable to
//! inject faults. Deliveries are processed in `(tick, request_id)` order and
//! appended to a global trace, so the same configuration and call sequence
//! always produces the same trace, byte for byte.
//!
//! Handlers registered for a node run logically concurrently: the core
//! interleaves them at envelope granularity. Handlers must not call back into
//! the network; composition keeps to one level, so they never need to.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::NamedValue;

/// Stable fault codes carried by [`EnvelopeBody::Fault`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaultCode {
    PeerUnreachable,
    UnknownOperation,
    TypeMismatch,
    Internal,
}

impl FaultCode {
    pub fn as_str(self) -> &'static str {
        match self {
            FaultCode::PeerUnreachable => "PeerUnreachable",
            FaultCode::UnknownOperation => "UnknownOperation",
            FaultCode::TypeMismatch => "TypeMismatch",
            FaultCode::Internal => "Internal",
        }
    }
}

impl std::fmt::Display for FaultCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A fault outcome: code plus human-readable context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fault {
    pub code: FaultCode,
    pub message: String,
}

impl Fault {
    pub fn new(code: FaultCode, message: impl Into<String>) -> Self {
        Fault { code, message: message.into() }
    }
}

impl std::fmt::Display for Fault {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

/// Kind-specific payload of an envelope.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvelopeBody {
    GetDescriptor,
    InvokeRequest { op: String, args: Vec<NamedValue> },
    InvokeResponse { results: Vec<NamedValue> },
    Fault(Fault),
}

impl EnvelopeBody {
    pub fn kind(&self) -> &'static str {
        match self {
            EnvelopeBody::GetDescriptor => "GetDescriptor",
            EnvelopeBody::InvokeRequest { .. } => "InvokeRequest",
            EnvelopeBody::InvokeResponse { .. } => "InvokeResponse",
            EnvelopeBody::Fault(_) => "Fault",
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            EnvelopeBody::GetDescriptor => serde_json::json!({}),
            EnvelopeBody::InvokeRequest { op, args } => serde_json::json!({"op": op, "args": args}),
            EnvelopeBody::InvokeResponse { results } => serde_json::json!({"results": results}),
            EnvelopeBody::Fault(f) => serde_json::json!({"code": f.code, "message": f.message}),
        }
    }
}

/// One wire message. `sender` is a node id or a client id; responses and
/// faults carry the `request_id` of the request they answer.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub request_id: u64,
    pub sender: String,
    pub target: String,
    pub body: EnvelopeBody,
}

/// One line of the network trace: an envelope stamped with its delivery tick.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceEntry {
    pub tick: u64,
    pub request_id: u64,
    pub kind: String,
    pub sender: String,
    pub target: String,
    pub body: serde_json::Value,
}

/// Per-link latency override; both directions must be listed to override both.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkLatency {
    pub from: String,
    pub to: String,
    pub ticks: u64,
}

/// Network configuration. With `jitter_ticks = 0` (the default) the `seed`
/// has no observable effect; a positive jitter adds a seeded pseudo-random
/// 0..=jitter latency to every hop.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NetConfig {
    pub default_latency: u64,
    pub links: Vec<LinkLatency>,
    pub unreachable: BTreeSet<String>,
    pub seed: u64,
    pub jitter_ticks: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            default_latency: 1,
            links: Vec::new(),
            unreachable: BTreeSet::new(),
            seed: 0,
            jitter_ticks: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("node `{0}` is already registered")]
    DuplicateNode(String),
    #[error("peer `{target}` is unreachable")]
    PeerUnreachable { target: String },
    #[error("malformed reply from `{target}`: {detail}")]
    BadReply { target: String, detail: String },
    #[error("no pending reply for request {0}")]
    NoPendingReply(u64),
}

/// Node-side hook invoked for every delivered request envelope.
///
/// Implementations must not call back into the [`Net`] that delivered the
/// request.
pub trait RequestHandler: Send + Sync {
    fn handle(&self, env: &Envelope) -> HandlerReply;
}

/// What a handler produces for one request.
pub enum HandlerReply {
    Results(Vec<NamedValue>),
    Fault(Fault),
}

enum QueuedPayload {
    Request(Envelope),
    Reply { env: Envelope, transport_fault: bool },
    SetUnreachable { node: String, unreachable: bool },
    Run(Box<dyn FnOnce() + Send>),
}

struct Queued {
    tick: u64,
    /// Directives (0) sort ahead of envelope deliveries (1) at the same tick.
    class: u8,
    request_id: u64,
    seq: u64,
    payload: QueuedPayload,
}

impl Queued {
    fn key(&self) -> (u64, u8, u64, u64) {
        (self.tick, self.class, self.request_id, self.seq)
    }
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // reversed: BinaryHeap pops the smallest key first
        other.key().cmp(&self.key())
    }
}

struct ReplySlot {
    env: Envelope,
    transport_fault: bool,
}

struct Core {
    clock: u64,
    cfg: NetConfig,
    link_map: HashMap<(String, String), u64>,
    rng_state: u64,
    queue: BinaryHeap<Queued>,
    nodes: BTreeMap<String, Arc<dyn RequestHandler>>,
    replies: HashMap<u64, ReplySlot>,
    trace: Vec<TraceEntry>,
}

impl Core {
    fn latency(&mut self, from: &str, to: &str) -> u64 {
        let base = self
            .link_map
            .get(&(from.to_string(), to.to_string()))
            .copied()
            .unwrap_or(self.cfg.default_latency);
        if self.cfg.jitter_ticks > 0 {
            base + splitmix64(&mut self.rng_state) % (self.cfg.jitter_ticks + 1)
        } else {
            base
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Inner {
    state: Mutex<Core>,
    clock_mirror: Arc<AtomicU64>,
    next_request_id: AtomicU64,
    next_seq: AtomicU64,
}

/// Cloneable handle to the simulated network.
#[derive(Clone)]
pub struct Net {
    inner: Arc<Inner>,
}

/// An in-flight request; [`Pending::wait`] drives the event loop until the
/// matching response or fault is delivered.
pub struct Pending {
    net: Net,
    request_id: u64,
}

impl Net {
    pub fn new(cfg: NetConfig) -> Self {
        let link_map = cfg
            .links
            .iter()
            .map(|l| ((l.from.clone(), l.to.clone()), l.ticks))
            .collect();
        let rng_state = cfg.seed ^ 0x5851_F42D_4C95_7F2D;
        Net {
            inner: Arc::new(Inner {
                state: Mutex::new(Core {
                    clock: 0,
                    cfg,
                    link_map,
                    rng_state,
                    queue: BinaryHeap::new(),
                    nodes: BTreeMap::new(),
                    replies: HashMap::new(),
                    trace: Vec::new(),
                }),
                clock_mirror: Arc::new(AtomicU64::new(0)),
                next_request_id: AtomicU64::new(1),
                next_seq: AtomicU64::new(1),
            }),
        }
    }

    /// Shared tick counter, updated every time the simulated clock advances.
    pub fn clock_handle(&self) -> Arc<AtomicU64> {
        self.inner.clock_mirror.clone()
    }

    pub fn now(&self) -> u64 {
        self.inner.clock_mirror.load(Ordering::SeqCst)
    }

    pub fn register_node(
        &self,
        id: &str,
        handler: Arc<dyn RequestHandler>,
    ) -> Result<(), TransportError> {
        let mut core = self.lock();
        if core.nodes.contains_key(id) {
            return Err(TransportError::DuplicateNode(id.to_string()));
        }
        core.nodes.insert(id.to_string(), handler);
        Ok(())
    }

    /// Registered node ids, ascending.
    pub fn node_ids(&self) -> Vec<String> {
        self.lock().nodes.keys().cloned().collect()
    }

    /// Immediately marks a node unreachable (or reachable again).
    pub fn set_unreachable(&self, id: &str, unreachable: bool) {
        let mut core = self.lock();
        if unreachable {
            core.cfg.unreachable.insert(id.to_string());
        } else {
            core.cfg.unreachable.remove(id);
        }
    }

    /// Schedules a reachability flip to take effect at `tick`.
    pub fn schedule_unreachable(&self, tick: u64, id: &str, unreachable: bool) {
        self.push_directive(
            tick,
            QueuedPayload::SetUnreachable { node: id.to_string(), unreachable },
        );
    }

    /// Schedules an arbitrary action (e.g. a feature injection) at `tick`.
    /// The action runs between envelope deliveries, never inside one.
    pub fn schedule_action(&self, tick: u64, action: impl FnOnce() + Send + 'static) {
        self.push_directive(tick, QueuedPayload::Run(Box::new(action)));
    }

    fn push_directive(&self, tick: u64, payload: QueuedPayload) {
        let seq = self.inner.next_seq.fetch_add(1, Ordering::SeqCst);
        let mut core = self.lock();
        core.queue.push(Queued { tick, class: 0, request_id: 0, seq, payload });
    }

    /// Advances the clock to at least `tick`, running any directives due on
    /// the way.
    pub fn advance_to(&self, tick: u64) {
        let mut core = self.lock();
        while core.queue.peek().is_some_and(|q| q.tick <= tick) {
            let item = core.queue.pop().unwrap();
            self.process(&mut core, item);
        }
        if core.clock < tick {
            core.clock = tick;
            self.inner.clock_mirror.store(tick, Ordering::SeqCst);
        }
    }

    /// Submits a request envelope without blocking; the returned [`Pending`]
    /// yields the response. Several submissions can be in flight at once, all
    /// departing at the current tick.
    pub fn submit(&self, sender: &str, target: &str, body: EnvelopeBody) -> Pending {
        let request_id = self.inner.next_request_id.fetch_add(1, Ordering::SeqCst);
        let seq = self.inner.next_seq.fetch_add(1, Ordering::SeqCst);
        let env = Envelope {
            request_id,
            sender: sender.to_string(),
            target: target.to_string(),
            body,
        };
        let mut core = self.lock();
        let lat = core.latency(sender, target);
        let tick = core.clock + lat;
        core.queue.push(Queued { tick, class: 1, request_id, seq, payload: QueuedPayload::Request(env) });
        Pending { net: self.clone(), request_id }
    }

    /// Sends a request and blocks until its response arrives.
    pub fn send(&self, sender: &str, target: &str, body: EnvelopeBody) -> Result<Envelope, TransportError> {
        self.submit(sender, target, body).wait()
    }

    pub fn get_descriptor(&self, sender: &str, target: &str) -> Pending {
        self.submit(sender, target, EnvelopeBody::GetDescriptor)
    }

    pub fn invoke(&self, sender: &str, target: &str, op: &str, args: Vec<NamedValue>) -> Pending {
        self.submit(sender, target, EnvelopeBody::InvokeRequest { op: op.to_string(), args })
    }

    /// Fetches every registered node's descriptor document. One request per
    /// node, all departing at the current tick; results come back keyed and
    /// ordered by node id regardless of response order. Per-node failures are
    /// reported in place, not raised.
    pub fn broadcast_get_descriptors(
        &self,
        sender: &str,
    ) -> Vec<(String, Result<String, TransportError>)> {
        let ids = self.node_ids();
        let pending: Vec<(String, Pending)> = ids
            .into_iter()
            .map(|id| {
                let p = self.get_descriptor(sender, &id);
                (id, p)
            })
            .collect();
        pending
            .into_iter()
            .map(|(id, p)| {
                let res = p.wait().and_then(|env| extract_wsdl(&id, env));
                (id, res)
            })
            .collect()
    }

    /// Copy of the trace so far, in delivery order.
    pub fn trace_snapshot(&self) -> Vec<TraceEntry> {
        self.lock().trace.clone()
    }

    pub fn trace_len(&self) -> usize {
        self.lock().trace.len()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Core> {
        self.inner.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn advance_clock(&self, core: &mut Core, tick: u64) {
        if tick > core.clock {
            core.clock = tick;
            self.inner.clock_mirror.store(tick, Ordering::SeqCst);
        }
    }

    fn trace_envelope(&self, core: &mut Core, tick: u64, env: &Envelope) {
        core.trace.push(TraceEntry {
            tick,
            request_id: env.request_id,
            kind: env.body.kind().to_string(),
            sender: env.sender.clone(),
            target: env.target.clone(),
            body: env.body.to_json(),
        });
    }

    fn process(&self, core: &mut Core, item: Queued) {
        self.advance_clock(core, item.tick);
        match item.payload {
            QueuedPayload::SetUnreachable { node, unreachable } => {
                if unreachable {
                    core.cfg.unreachable.insert(node);
                } else {
                    core.cfg.unreachable.remove(&node);
                }
            }
            QueuedPayload::Run(action) => action(),
            QueuedPayload::Request(env) => {
                self.trace_envelope(core, item.tick, &env);
                let target = env.target.clone();
                let handler = if core.cfg.unreachable.contains(&target) {
                    None
                } else {
                    core.nodes.get(&target).cloned()
                };
                let (reply_env, transport_fault) = match handler {
                    Some(h) => {
                        let body = match h.handle(&env) {
                            HandlerReply::Results(results) => EnvelopeBody::InvokeResponse { results },
                            HandlerReply::Fault(f) => EnvelopeBody::Fault(f),
                        };
                        (
                            Envelope {
                                request_id: env.request_id,
                                sender: target.clone(),
                                target: env.sender.clone(),
                                body,
                            },
                            false,
                        )
                    }
                    None => (
                        Envelope {
                            request_id: env.request_id,
                            sender: target.clone(),
                            target: env.sender.clone(),
                            body: EnvelopeBody::Fault(Fault::new(
                                FaultCode::PeerUnreachable,
                                format!("node `{target}` is unreachable"),
                            )),
                        },
                        true,
                    ),
                };
                let lat = core.latency(&reply_env.sender, &reply_env.target);
                let seq = self.inner.next_seq.fetch_add(1, Ordering::SeqCst);
                core.queue.push(Queued {
                    tick: item.tick + lat,
                    class: 1,
                    request_id: item.request_id,
                    seq,
                    payload: QueuedPayload::Reply { env: reply_env, transport_fault },
                });
            }
            QueuedPayload::Reply { env, transport_fault } => {
                self.trace_envelope(core, item.tick, &env);
                core.replies.insert(env.request_id, ReplySlot { env, transport_fault });
            }
        }
    }
}

impl Pending {
    /// Drives deliveries until this request's reply lands, then returns it.
    /// A network-generated fault surfaces as [`TransportError::PeerUnreachable`];
    /// a fault produced by the node handler is an `Ok` envelope of kind `Fault`.
    pub fn wait(self) -> Result<Envelope, TransportError> {
        loop {
            let mut core = self.net.lock();
            if let Some(slot) = core.replies.remove(&self.request_id) {
                return if slot.transport_fault {
                    Err(TransportError::PeerUnreachable { target: slot.env.sender })
                } else {
                    Ok(slot.env)
                };
            }
            match core.queue.pop() {
                Some(item) => self.net.process(&mut core, item),
                None => return Err(TransportError::NoPendingReply(self.request_id)),
            }
        }
    }
}

fn extract_wsdl(target: &str, env: Envelope) -> Result<String, TransportError> {
    match env.body {
        EnvelopeBody::InvokeResponse { results } => results
            .into_iter()
            .find(|nv| nv.name == "wsdl")
            .and_then(|nv| match nv.value {
                crate::value::Value::Text(t) => Some(t),
                _ => None,
            })
            .ok_or_else(|| TransportError::BadReply {
                target: target.to_string(),
                detail: "descriptor response lacks a `wsdl` text result".to_string(),
            }),
        EnvelopeBody::Fault(f) => Err(TransportError::BadReply {
            target: target.to_string(),
            detail: format!("descriptor fetch faulted: {f}"),
        }),
        other => Err(TransportError::BadReply {
            target: target.to_string(),
            detail: format!("unexpected reply kind {}", other.kind()),
        }),
    }
}
