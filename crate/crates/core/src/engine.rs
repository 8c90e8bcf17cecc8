//! The test-phase engine: multi-source DFS over the dependency graph with
//! stack deferral and retries, three admission passes, response harvesting
//! into the objects bucket, and failure-driven payload repair.

use crate::bucket::ObjectsBucket;
use crate::compiler::{Action, DepStrength, Endpoint, EndpointKind};
use crate::config::RunConfig;
use crate::depgraph::{select_starting_nodes, DependencyGraph, NodeType};
use crate::materializer::{
    materialize_fuzz, materialize_valid, CanaryTable, FuzzClass, MaterializeError, Mode, Payload,
};
use crate::schema::{SchemaDocument, TypeKind, TypeRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "P1_CREATE")]
    P1Create,
    #[serde(rename = "P2_UPDATE")]
    P2Update,
    #[serde(rename = "P3_ALL")]
    P3All,
}

pub const ALL_PHASES: [Phase; 3] = [Phase::P1Create, Phase::P2Update, Phase::P3All];

impl Phase {
    /// Which mutation actions this pass admits; queries are always admitted.
    pub fn admits(self, action: Action) -> bool {
        match action {
            Action::None | Action::Create => true,
            Action::Update => self >= Phase::P2Update,
            Action::Delete | Action::Unknown => self == Phase::P3All,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Success,
    GraphqlError,
    HttpError,
    TransportError,
    Deferred,
}

/// One request (or deferral) as it happened, with the control-measurement
/// context needed for classification.
#[derive(Debug, Clone)]
pub struct RequestRecord {
    pub phase: Phase,
    pub node: String,
    pub payload: Payload,
    pub http_status: u16,
    pub duration_ms: u64,
    pub response_body: String,
    pub outcome: Outcome,
    pub timed_out: bool,
    /// Whether the node's MINIMAL_VALID request in the same visit succeeded.
    pub control_success: bool,
    /// Duration of that MINIMAL_VALID request.
    pub control_duration_ms: u64,
    /// Whether that MINIMAL_VALID request was rejected at the HTTP layer
    /// (4xx), as a deny-list would.
    pub control_rejected: bool,
}

#[derive(Debug)]
pub struct TransportResult {
    pub status: u16,
    pub body: String,
    pub duration: Duration,
}

#[derive(Debug)]
pub struct TransportFailure {
    pub timed_out: bool,
    pub message: String,
}

/// A way to deliver one GraphQL-over-HTTP body and observe the raw result.
pub trait Transport {
    fn send(&mut self, body: &Value, timeout: Duration)
        -> Result<TransportResult, TransportFailure>;
}

/// Live HTTP POST transport.
pub struct HttpTransport {
    pub url: String,
    pub headers: BTreeMap<String, String>,
}

impl Transport for HttpTransport {
    fn send(
        &mut self,
        body: &Value,
        timeout: Duration,
    ) -> Result<TransportResult, TransportFailure> {
        let started = std::time::Instant::now();
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        let mut req = agent.post(&self.url).set("Content-Type", "application/json");
        for (k, v) in &self.headers {
            req = req.set(k, v);
        }
        let result = req.send_json(body.clone());
        let duration = started.elapsed();
        match result {
            Ok(resp) => {
                let status = resp.status();
                let text = resp.into_string().unwrap_or_default();
                Ok(TransportResult { status, body: text, duration })
            }
            Err(ureq::Error::Status(status, resp)) => {
                let text = resp.into_string().unwrap_or_default();
                Ok(TransportResult { status, body: text, duration })
            }
            Err(e) => {
                let timed_out = duration >= timeout || e.to_string().contains("timed out");
                Err(TransportFailure { timed_out, message: e.to_string() })
            }
        }
    }
}

/// Stack mutations emitted by the traversal loop, for trace-equivalence
/// checks against a reference interpreter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    Pop(String),
    SkipVisited(String),
    /// Successful evaluation: node marked visited, children pushed on top.
    Expand { node: String, children: Vec<String> },
    /// Failed evaluation: node moved to the stack bottom.
    Defer { node: String, retries: u32 },
    /// Retry budget exhausted: node removed and marked failed.
    Drop(String),
    /// Node not admitted in this pass; ignored without a visit.
    NotAdmitted(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalResult {
    Success,
    Failure,
    NotAdmitted,
}

#[derive(Debug, Default)]
pub struct TraversalSummary {
    pub visited: BTreeSet<String>,
    pub failed: BTreeSet<String>,
    pub evaluations: usize,
}

/// One pass of the stack traversal. `eval` is called for each admissible
/// unvisited node; `children` supplies a node's successors (pushed on top,
/// lexicographically-first popped first). Failures move the node to the
/// bottom until `retry_limit` deferrals, after which it is dropped.
pub fn traverse(
    starting: &[String],
    retry_limit: u32,
    mut eval: impl FnMut(&str) -> EvalResult,
    children: impl Fn(&str) -> Vec<String>,
    mut on_event: impl FnMut(TraceEvent),
) -> TraversalSummary {
    let mut summary = TraversalSummary::default();
    let mut stack: Vec<String> = starting.iter().rev().cloned().collect();
    let mut retries: BTreeMap<String, u32> = BTreeMap::new();

    while let Some(node) = stack.pop() {
        on_event(TraceEvent::Pop(node.clone()));
        if summary.visited.contains(&node) || summary.failed.contains(&node) {
            on_event(TraceEvent::SkipVisited(node.clone()));
            continue;
        }
        summary.evaluations += 1;
        match eval(&node) {
            EvalResult::Success => {
                summary.visited.insert(node.clone());
                let kids = children(&node);
                for child in kids.iter().rev() {
                    stack.push(child.clone());
                }
                on_event(TraceEvent::Expand { node, children: kids });
            }
            EvalResult::Failure => {
                let count = retries.entry(node.clone()).or_insert(0);
                if *count >= retry_limit {
                    summary.failed.insert(node.clone());
                    on_event(TraceEvent::Drop(node));
                } else {
                    *count += 1;
                    let r = *count;
                    stack.insert(0, node.clone());
                    on_event(TraceEvent::Defer { node, retries: r });
                }
            }
            EvalResult::NotAdmitted => {
                on_event(TraceEvent::NotAdmitted(node));
            }
        }
    }
    summary
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("session aborted: {0}")]
    SessionAborted(String),
    #[error(transparent)]
    Graph(#[from] crate::depgraph::GraphError),
}

pub struct SessionOutput {
    pub records: Vec<RequestRecord>,
    pub bucket: ObjectsBucket,
    pub trace: Vec<TraceEvent>,
}

/// Classifies a raw HTTP result into a request outcome.
pub fn classify_outcome(status: u16, body: &str) -> Outcome {
    if status != 200 {
        return Outcome::HttpError;
    }
    let Ok(parsed) = serde_json::from_str::<Value>(body) else {
        return Outcome::GraphqlError;
    };
    let doc = if let Some(first) = parsed.as_array().and_then(|a| a.first()) {
        first
    } else {
        &parsed
    };
    let has_errors = doc
        .get("errors")
        .and_then(Value::as_array)
        .map(|a| !a.is_empty())
        .unwrap_or(false);
    let data_ok = doc.get("data").map(|d| !d.is_null()).unwrap_or(false);
    if data_ok && !has_errors {
        Outcome::Success
    } else {
        Outcome::GraphqlError
    }
}

fn error_messages(body: &str) -> Vec<String> {
    serde_json::from_str::<Value>(body)
        .ok()
        .and_then(|v| {
            v.get("errors").and_then(Value::as_array).map(|errs| {
                errs.iter()
                    .filter_map(|e| e.get("message").and_then(Value::as_str).map(str::to_string))
                    .collect()
            })
        })
        .unwrap_or_default()
}

/// Pattern-matches repairable GraphQL error messages and returns an adjusted
/// payload, or None when no rule applies.
pub fn handle_failure_adjustment(
    messages: &[String],
    payload: &Payload,
    endpoint: &Endpoint,
) -> Option<Payload> {
    let cannot_query = regex::Regex::new(r#"Cannot query field "([A-Za-z0-9_]+)""#).unwrap();
    let must_select =
        regex::Regex::new(r#"[Ff]ield "([A-Za-z0-9_]+)"[^"]*must be selected"#).unwrap();
    let unknown_arg = regex::Regex::new(r#"Unknown argument "([A-Za-z0-9_]+)""#).unwrap();

    for msg in messages {
        if let Some(cap) = cannot_query.captures(msg) {
            let mut adjusted = payload.clone();
            if adjusted.remove_selector(&cap[1]) {
                return Some(adjusted);
            }
        }
        if let Some(cap) = must_select.captures(msg) {
            let mut adjusted = payload.clone();
            adjusted.add_selector(&cap[1]);
            return Some(adjusted);
        }
        if let Some(cap) = unknown_arg.captures(msg) {
            let soft = endpoint
                .input_deps
                .iter()
                .any(|d| d.via_arg == cap[1] && d.strength == DepStrength::Soft);
            if soft {
                let mut adjusted = payload.clone();
                if adjusted.remove_arg(&cap[1]) {
                    return Some(adjusted);
                }
            }
        }
    }
    None
}

/// Walks a successful response against the schema, returning every reachable
/// object instance: (object name, id, scalar siblings).
pub fn extract_objects(
    body: &str,
    endpoint: &Endpoint,
    schema: &SchemaDocument,
) -> Vec<(String, String, BTreeMap<String, Value>)> {
    let Ok(parsed) = serde_json::from_str::<Value>(body) else {
        return Vec::new();
    };
    let Some(root) = parsed.get("data").and_then(|d| d.get(&endpoint.name)) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    walk_value(root, &endpoint.raw_output_type, schema, &mut out, 0);
    out
}

fn walk_value(
    value: &Value,
    ty: &TypeRef,
    schema: &SchemaDocument,
    out: &mut Vec<(String, String, BTreeMap<String, Value>)>,
    depth: usize,
) {
    if depth > 16 {
        return;
    }
    match value {
        Value::Array(items) => {
            for item in items {
                walk_value(item, ty, schema, out, depth);
            }
        }
        Value::Object(map) => {
            let (kind, type_name) = ty.unwrap_named();
            if !matches!(kind, TypeKind::Object | TypeKind::Interface) {
                log::debug!("shape mismatch: object value for non-object type {type_name}");
                return;
            }
            let Some(fields) = schema.object_fields(type_name) else {
                return;
            };
            let id = map.get("id").and_then(|v| match v {
                Value::String(s) => Some(s.clone()),
                Value::Number(n) => Some(n.to_string()),
                _ => None,
            });
            if let Some(id) = id {
                let scalars: BTreeMap<String, Value> = map
                    .iter()
                    .filter(|(k, v)| {
                        *k != "id"
                            && !v.is_object()
                            && !v.is_array()
                            && !v.is_null()
                            && *k != "__typename"
                    })
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect();
                out.push((type_name.to_string(), id, scalars));
            }
            for (key, child) in map {
                if child.is_object() || child.is_array() {
                    if let Some(f) = fields.iter().find(|f| &f.name == key) {
                        walk_value(child, &f.ty, schema, out, depth + 1);
                    }
                }
            }
        }
        _ => {}
    }
}

struct Session<'a> {
    graph: &'a DependencyGraph,
    endpoints: BTreeMap<String, Endpoint>,
    schema: &'a SchemaDocument,
    config: &'a RunConfig,
    canaries: CanaryTable,
    transport: &'a mut dyn Transport,
    bucket: ObjectsBucket,
    rng: ChaCha8Rng,
    records: Vec<RequestRecord>,
    trace: Vec<TraceEvent>,
    fuzzed_nodes: BTreeSet<String>,
    consecutive_transport_errors: u32,
    aborted: Option<String>,
}

const TRANSPORT_ERROR_BUDGET: u32 = 20;

struct SendOutcome {
    status: u16,
    body: String,
    duration_ms: u64,
    outcome: Outcome,
    timed_out: bool,
}

impl<'a> Session<'a> {
    fn send(&mut self, payload: &Payload, timeout: Duration) -> SendOutcome {
        if self.config.inter_request_delay_ms > 0 {
            std::thread::sleep(Duration::from_millis(self.config.inter_request_delay_ms));
        }
        match self.transport.send(&payload.body(), timeout) {
            Ok(r) => {
                self.consecutive_transport_errors = 0;
                SendOutcome {
                    status: r.status,
                    outcome: classify_outcome(r.status, &r.body),
                    body: r.body,
                    duration_ms: r.duration.as_millis() as u64,
                    timed_out: false,
                }
            }
            Err(f) => {
                if !f.timed_out {
                    self.consecutive_transport_errors += 1;
                    if self.consecutive_transport_errors >= TRANSPORT_ERROR_BUDGET
                        && self.aborted.is_none()
                    {
                        self.aborted = Some(format!(
                            "target unreachable: {} consecutive transport failures ({})",
                            self.consecutive_transport_errors, f.message
                        ));
                    }
                }
                SendOutcome {
                    status: 0,
                    body: f.message,
                    duration_ms: timeout.as_millis() as u64,
                    outcome: Outcome::TransportError,
                    timed_out: f.timed_out,
                }
            }
        }
    }

    fn push_record(
        &mut self,
        phase: Phase,
        node: &str,
        payload: Payload,
        sent: SendOutcome,
        control: (bool, u64, bool),
    ) {
        self.records.push(RequestRecord {
            phase,
            node: node.to_string(),
            payload,
            http_status: sent.status,
            duration_ms: sent.duration_ms,
            response_body: sent.body,
            outcome: sent.outcome,
            timed_out: sent.timed_out,
            control_success: control.0,
            control_duration_ms: control.1,
            control_rejected: control.2,
        });
    }

    fn deferred_record(&mut self, phase: Phase, node: &str, missing: &str) {
        let stub = Payload::stub(node);
        self.records.push(RequestRecord {
            phase,
            node: node.to_string(),
            payload: stub,
            http_status: 0,
            duration_ms: 0,
            response_body: format!("deferred: no {missing} ID in the objects bucket"),
            outcome: Outcome::Deferred,
            timed_out: false,
            control_success: false,
            control_duration_ms: 0,
            control_rejected: false,
        });
    }

    /// The endpoint as materialization sees it: with the bucket ablated,
    /// dependency links are stripped so ID arguments get random values.
    fn effective_endpoint(&self, name: &str) -> Option<Endpoint> {
        let ep = self.endpoints.get(name)?.clone();
        if self.config.ablation.use_objects_bucket {
            Some(ep)
        } else {
            Some(Endpoint { input_deps: Vec::new(), ..ep })
        }
    }

    /// Sends one valid payload with a single repair retry on GraphQL errors.
    /// Returns the final (payload, result).
    fn send_valid(
        &mut self,
        endpoint: &Endpoint,
        mode: Mode,
    ) -> Result<(Payload, SendOutcome), MaterializeError> {
        let payload = materialize_valid(
            endpoint,
            &self.bucket,
            self.schema,
            mode,
            self.config.depth_cap,
            &mut self.rng,
        )?;
        let timeout = Duration::from_millis(self.config.timeouts.request_ms);
        let sent = self.send(&payload, timeout);
        if sent.outcome == Outcome::GraphqlError {
            let messages = error_messages(&sent.body);
            if let Some(adjusted) = handle_failure_adjustment(&messages, &payload, endpoint) {
                let retried = self.send(&adjusted, timeout);
                return Ok((adjusted, retried));
            }
        }
        Ok((payload, sent))
    }

    fn evaluate_node(&mut self, phase: Phase, node: &str) -> EvalResult {
        let node_info = match self.graph.node(node) {
            Some(n) => n.clone(),
            None => return EvalResult::NotAdmitted,
        };
        if node_info.node_type == NodeType::Object {
            return EvalResult::Success;
        }
        let Some(endpoint) = self.effective_endpoint(node) else {
            return EvalResult::NotAdmitted;
        };
        if endpoint.kind == EndpointKind::Mutation && !phase.admits(endpoint.action) {
            return EvalResult::NotAdmitted;
        }

        // Hard-dependency gate: no network traffic when the bucket cannot
        // satisfy a HARD link.
        if self.config.ablation.use_objects_bucket {
            let unmet = endpoint
                .input_deps
                .iter()
                .find(|d| d.strength == DepStrength::Hard && !self.bucket.has_object(&d.object_name));
            if let Some(dep) = unmet {
                let missing = dep.object_name.clone();
                self.deferred_record(phase, node, &missing);
                return EvalResult::Failure;
            }
        }

        let mut control = (false, 0u64, false);
        let mut any_valid_success = false;

        for mode in [Mode::Minimal, Mode::Maximal] {
            match self.send_valid(&endpoint, mode) {
                Ok((payload, sent)) => {
                    if mode == Mode::Minimal {
                        control = (
                            sent.outcome == Outcome::Success,
                            sent.duration_ms,
                            (400..500).contains(&sent.status),
                        );
                    }
                    let success = sent.outcome == Outcome::Success;
                    if success {
                        any_valid_success = true;
                        if self.config.ablation.use_objects_bucket {
                            let harvested =
                                extract_objects(&sent.body, &endpoint, self.schema);
                            for (object, id, scalars) in harvested {
                                self.bucket.put_id(&object, &id);
                                for (field, value) in scalars {
                                    self.bucket.put_scalar(&field, &value);
                                }
                            }
                        }
                    }
                    self.push_record(phase, node, payload, sent, control);
                }
                Err(MaterializeError::Deferred(missing)) => {
                    self.deferred_record(phase, node, &missing);
                    return EvalResult::Failure;
                }
                Err(MaterializeError::ClassNotApplicable) => unreachable!(),
            }
        }

        // Fuzz once per node per session, on the first dependency-met visit,
        // regardless of valid success.
        if !self.fuzzed_nodes.contains(node) {
            self.fuzzed_nodes.insert(node.to_string());
            let classes: Vec<FuzzClass> =
                self.config.fuzz_classes_enabled.iter().copied().collect();
            for class in classes {
                let result = materialize_fuzz(
                    &endpoint,
                    &self.bucket,
                    self.schema,
                    class,
                    &self.config.fuzz_params,
                    self.config.depth_cap,
                    &self.canaries,
                    &mut self.rng,
                );
                match result {
                    Ok(payload) => {
                        let timeout = if class.is_dos() {
                            Duration::from_millis(self.config.timeouts.dos_ms)
                        } else {
                            Duration::from_millis(self.config.timeouts.request_ms)
                        };
                        let sent = self.send(&payload, timeout);
                        self.push_record(phase, node, payload, sent, control);
                    }
                    Err(MaterializeError::ClassNotApplicable) => {}
                    Err(MaterializeError::Deferred(_)) => {}
                }
            }
        }

        if any_valid_success {
            EvalResult::Success
        } else {
            EvalResult::Failure
        }
    }
}

/// Runs the full three-pass session. `visited` resets between passes; the
/// bucket persists across them.
pub fn run_session(
    graph: &DependencyGraph,
    endpoints: &[Endpoint],
    schema: &SchemaDocument,
    config: &RunConfig,
    canaries: CanaryTable,
    transport: &mut dyn Transport,
) -> Result<SessionOutput, EngineError> {
    let mut session = Session {
        graph,
        endpoints: endpoints.iter().map(|e| (e.name.clone(), e.clone())).collect(),
        schema,
        config,
        canaries,
        transport,
        bucket: ObjectsBucket::new(config.bucket_capacity, config.lookup_strategy),
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        records: Vec::new(),
        trace: Vec::new(),
        fuzzed_nodes: BTreeSet::new(),
        consecutive_transport_errors: 0,
        aborted: None,
    };

    for phase in ALL_PHASES {
        if session.aborted.is_some() {
            break;
        }
        if config.ablation.use_dependency_graph {
            let starting = select_starting_nodes(graph)?;
            let mut events = Vec::new();
            traverse(
                &starting,
                config.retry_limit,
                |node| {
                    if session.aborted.is_some() {
                        return EvalResult::NotAdmitted;
                    }
                    session.evaluate_node(phase, node)
                },
                |node| graph.children(node),
                |e| events.push(e),
            );
            session.trace.extend(events);
        } else {
            // Graph ablated: visit every request node in lexicographic order,
            // once, with no gating by graph structure.
            let mut names: Vec<String> =
                session.endpoints.keys().cloned().collect();
            names.sort();
            for node in names {
                if session.aborted.is_some() {
                    break;
                }
                session.evaluate_node(phase, &node);
            }
        }
    }

    if let Some(reason) = session.aborted {
        return Err(EngineError::SessionAborted(reason));
    }
    Ok(SessionOutput {
        records: session.records,
        bucket: session.bucket,
        trace: session.trace,
    })
}
