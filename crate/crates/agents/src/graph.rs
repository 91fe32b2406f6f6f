//! Minimal workflow-graph runtime: named nodes transforming a shared
//! state, static and conditional edges, compile-time validation, and
//! sequential execution with a full trace.
//!
//! Topology problems (duplicate nodes, dangling edges, unreachable
//! nodes, missing paths to END, static cycles) all surface at
//! [`GraphBuilder::compile`]; a compiled graph can only fail at run
//! time through a handler error, a router naming an undeclared target,
//! or the step limit.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reserved id marking the entry point of a graph.
pub const START: &str = "__start__";
/// Reserved id marking the exit point of a graph.
pub const END: &str = "__end__";

/// Shared state threaded through the nodes of a run.
///
/// The closed fields keep routing testable; the open `metadata` map
/// lets handlers record context without schema churn. Keys are only
/// ever added or overwritten, never removed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphState {
    pub input_text: String,
    pub detected_language: Option<String>,
    pub intent: Option<String>,
    pub output_text: Option<String>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl GraphState {
    pub fn with_input(input_text: impl Into<String>) -> Self {
        Self {
            input_text: input_text.into(),
            ..Self::default()
        }
    }
}

/// Error returned by a node handler; `kind` is a stable discriminant
/// callers can match on (for exit codes, retry policy and the like).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[error("{kind}: {message}")]
pub struct HandlerError {
    pub kind: String,
    pub message: String,
}

impl HandlerError {
    pub fn new(kind: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            message: message.into(),
        }
    }
}

pub type NodeHandler = Box<dyn Fn(GraphState) -> Result<GraphState, HandlerError> + Send + Sync>;
pub type Router = Box<dyn Fn(&GraphState) -> String + Send + Sync>;

enum EdgeSpec {
    Static { to: String },
    Conditional { router: Router, allowed: BTreeSet<String> },
}

/// Validation failures detected at compile time.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("node id `{0}` is reserved")]
    ReservedId(String),
    #[error("edge references unknown node: {from} -> {to}")]
    DanglingEdge { from: String, to: String },
    #[error("START needs exactly one outgoing edge, found {0}")]
    BadStartEdgeCount(usize),
    #[error("node `{0}` has more than one outgoing edge")]
    MultipleOutgoingEdges(String),
    #[error("node `{0}` is unreachable from START")]
    UnreachableNode(String),
    #[error("no path from node `{0}` to END")]
    NoPathToEnd(String),
    #[error("static cycle through nodes {0:?}")]
    StaticCycle(Vec<String>),
}

/// Failures observed while running a compiled graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RunError {
    #[error("handler failed: {kind}: {message}")]
    Handler { kind: String, message: String },
    #[error("step limit of {limit} exceeded")]
    StepLimitExceeded { limit: usize },
    #[error("router returned `{returned}`, not among its declared targets")]
    DisallowedTarget { returned: String },
}

impl From<HandlerError> for RunError {
    fn from(e: HandlerError) -> Self {
        RunError::Handler {
            kind: e.kind,
            message: e.message,
        }
    }
}

/// Terminal status of one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// `node` is the node at which the run stopped: the one whose
    /// handler failed, the one the router could not dispatch from, or
    /// the one that would have exceeded the step limit.
    Failed { node: String, error: RunError },
}

impl RunStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }
}

/// One visited node together with the state snapshot after its handler.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceVisit {
    pub node: String,
    pub state: GraphState,
}

/// Ordered record of one run: every visited node with its post-handler
/// state, plus the terminal status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub visits: Vec<TraceVisit>,
    pub status: RunStatus,
}

impl ExecutionTrace {
    pub fn node_order(&self) -> Vec<&str> {
        self.visits.iter().map(|v| v.node.as_str()).collect()
    }
}

/// Accumulates nodes and edges; all validation happens in
/// [`GraphBuilder::compile`].
#[derive(Default)]
pub struct GraphBuilder {
    nodes: Vec<(String, NodeHandler)>,
    edges: Vec<(String, EdgeSpec)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(
        mut self,
        id: impl Into<String>,
        handler: impl Fn(GraphState) -> Result<GraphState, HandlerError> + Send + Sync + 'static,
    ) -> Self {
        self.nodes.push((id.into(), Box::new(handler)));
        self
    }

    /// Static edge; `from` may be [`START`], `to` may be [`END`].
    pub fn add_edge(mut self, from: impl Into<String>, to: impl Into<String>) -> Self {
        self.edges
            .push((from.into(), EdgeSpec::Static { to: to.into() }));
        self
    }

    /// Conditional edge: at run time `router` picks the next node id,
    /// which must be one of `allowed_targets`.
    pub fn add_conditional_edge<I, S>(
        mut self,
        from: impl Into<String>,
        router: impl Fn(&GraphState) -> String + Send + Sync + 'static,
        allowed_targets: I,
    ) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.edges.push((
            from.into(),
            EdgeSpec::Conditional {
                router: Box::new(router),
                allowed: allowed_targets.into_iter().map(Into::into).collect(),
            },
        ));
        self
    }

    /// Validates the topology and produces an executable graph.
    pub fn compile(self) -> Result<CompiledGraph, GraphError> {
        let mut handlers: BTreeMap<String, NodeHandler> = BTreeMap::new();
        for (id, handler) in self.nodes {
            if id == START || id == END {
                return Err(GraphError::ReservedId(id));
            }
            if handlers.contains_key(&id) {
                return Err(GraphError::DuplicateNode(id));
            }
            handlers.insert(id, handler);
        }

        let mut start_edge: Option<EdgeSpec> = None;
        let mut out_edges: BTreeMap<String, EdgeSpec> = BTreeMap::new();
        let mut start_count = 0;
        for (from, spec) in self.edges {
            let targets: Vec<&String> = match &spec {
                EdgeSpec::Static { to } => vec![to],
                EdgeSpec::Conditional { allowed, .. } => allowed.iter().collect(),
            };
            for to in targets {
                let conditional = matches!(spec, EdgeSpec::Conditional { .. });
                let to_ok = if conditional {
                    // Routers return node ids only, never END.
                    handlers.contains_key(to)
                } else {
                    to == END || handlers.contains_key(to)
                };
                if !to_ok || to == START {
                    return Err(GraphError::DanglingEdge {
                        from,
                        to: to.clone(),
                    });
                }
            }
            if from == START {
                start_count += 1;
                if start_edge.replace(spec).is_some() {
                    return Err(GraphError::BadStartEdgeCount(start_count));
                }
            } else {
                if !handlers.contains_key(&from) || from == END {
                    let to = match &spec {
                        EdgeSpec::Static { to } => to.clone(),
                        EdgeSpec::Conditional { .. } => "<conditional>".to_string(),
                    };
                    return Err(GraphError::DanglingEdge { from, to });
                }
                if out_edges.insert(from.clone(), spec).is_some() {
                    return Err(GraphError::MultipleOutgoingEdges(from));
                }
            }
        }
        let start_edge = start_edge.ok_or(GraphError::BadStartEdgeCount(0))?;

        // Every node needs an outgoing edge to have any path to END.
        for id in handlers.keys() {
            if !out_edges.contains_key(id) {
                return Err(GraphError::NoPathToEnd(id.clone()));
            }
        }

        let targets_of = |spec: &EdgeSpec| -> Vec<String> {
            match spec {
                EdgeSpec::Static { to } => vec![to.clone()],
                EdgeSpec::Conditional { allowed, .. } => allowed.iter().cloned().collect(),
            }
        };

        // Reachability from START over all declared targets.
        let mut reached: BTreeSet<String> = BTreeSet::new();
        let mut queue: VecDeque<String> = targets_of(&start_edge)
            .into_iter()
            .filter(|t| t != END)
            .collect();
        while let Some(id) = queue.pop_front() {
            if !reached.insert(id.clone()) {
                continue;
            }
            for t in targets_of(&out_edges[&id]) {
                if t != END && !reached.contains(&t) {
                    queue.push_back(t);
                }
            }
        }
        for id in handlers.keys() {
            if !reached.contains(id) {
                return Err(GraphError::UnreachableNode(id.clone()));
            }
        }

        // A cycle of static edges can never leave itself.
        let static_next = |id: &String| -> Option<&String> {
            match &out_edges[id] {
                EdgeSpec::Static { to } if to != END => Some(to),
                _ => None,
            }
        };
        for origin in handlers.keys() {
            let mut seen = vec![origin.clone()];
            let mut cursor = origin;
            while let Some(next) = static_next(cursor) {
                if next == origin {
                    return Err(GraphError::StaticCycle(seen));
                }
                if seen.contains(next) {
                    break;
                }
                seen.push(next.clone());
                cursor = next;
            }
        }

        // END reachable from every node.
        for origin in handlers.keys() {
            let mut seen: BTreeSet<&String> = BTreeSet::new();
            let mut queue: VecDeque<&String> = VecDeque::from([origin]);
            let mut ends = false;
            while let Some(id) = queue.pop_front() {
                if !seen.insert(id) {
                    continue;
                }
                match &out_edges[id] {
                    EdgeSpec::Static { to } => {
                        if to == END {
                            ends = true;
                            break;
                        }
                        queue.push_back(to);
                    }
                    EdgeSpec::Conditional { allowed, .. } => {
                        for t in allowed {
                            queue.push_back(t);
                        }
                    }
                }
            }
            if !ends {
                return Err(GraphError::NoPathToEnd(origin.clone()));
            }
        }

        Ok(CompiledGraph {
            handlers,
            start_edge,
            out_edges,
        })
    }
}

/// A validated, executable workflow graph. Immutable and shareable;
/// each run owns its state and trace.
pub struct CompiledGraph {
    handlers: BTreeMap<String, NodeHandler>,
    start_edge: EdgeSpec,
    out_edges: BTreeMap<String, EdgeSpec>,
}

impl CompiledGraph {
    pub fn node_ids(&self) -> impl Iterator<Item = &str> {
        self.handlers.keys().map(String::as_str)
    }

    /// Walks the graph from START's successor until END, a failure, or
    /// `step_limit` node visits. The caller's `initial` state is never
    /// mutated; handlers receive and return state by value.
    pub fn run(&self, initial: &GraphState, step_limit: usize) -> (GraphState, ExecutionTrace) {
        let mut state = initial.clone();
        let mut visits = Vec::new();

        let mut next = match self.follow(&self.start_edge, &state) {
            Ok(target) => target,
            Err(status) => return (state, ExecutionTrace { visits, status }),
        };

        loop {
            let node = match next {
                Target::End => {
                    return (
                        state,
                        ExecutionTrace {
                            visits,
                            status: RunStatus::Completed,
                        },
                    )
                }
                Target::Node(id) => id,
            };
            if visits.len() >= step_limit {
                return (
                    state,
                    ExecutionTrace {
                        visits,
                        status: RunStatus::Failed {
                            node,
                            error: RunError::StepLimitExceeded { limit: step_limit },
                        },
                    },
                );
            }
            let handler = &self.handlers[&node];
            state = match handler(state.clone()) {
                Ok(new_state) => new_state,
                Err(e) => {
                    return (
                        state,
                        ExecutionTrace {
                            visits,
                            status: RunStatus::Failed {
                                node,
                                error: e.into(),
                            },
                        },
                    )
                }
            };
            visits.push(TraceVisit {
                node: node.clone(),
                state: state.clone(),
            });
            next = match self.follow(&self.out_edges[&node], &state) {
                Ok(target) => target,
                Err(status) => {
                    let status = match status {
                        RunStatus::Failed { error, .. } => RunStatus::Failed { node, error },
                        s => s,
                    };
                    return (state, ExecutionTrace { visits, status });
                }
            };
        }
    }

    fn follow(&self, edge: &EdgeSpec, state: &GraphState) -> Result<Target, RunStatus> {
        match edge {
            EdgeSpec::Static { to } => Ok(if to == END {
                Target::End
            } else {
                Target::Node(to.clone())
            }),
            EdgeSpec::Conditional { router, allowed } => {
                let chosen = router(state);
                if !allowed.contains(&chosen) {
                    return Err(RunStatus::Failed {
                        node: String::new(),
                        error: RunError::DisallowedTarget { returned: chosen },
                    });
                }
                Ok(Target::Node(chosen))
            }
        }
    }
}

impl std::fmt::Debug for CompiledGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CompiledGraph")
            .field("nodes", &self.handlers.keys().collect::<Vec<_>>())
            .finish_non_exhaustive()
    }
}

enum Target {
    Node(String),
    End,
}

/// Serializes a trace as JSON lines: one `{"node": .., "state": ..}`
/// object per visit, then a final status line.
pub fn trace_to_jsonl(trace: &ExecutionTrace) -> String {
    let mut out = String::new();
    for visit in &trace.visits {
        out.push_str(&serde_json::to_string(visit).expect("trace visits serialize"));
        out.push('\n');
    }
    out.push_str(&serde_json::to_string(&trace.status).expect("status serializes"));
    out.push('\n');
    out
}

/// Parses the output of [`trace_to_jsonl`] back into a trace.
pub fn trace_from_jsonl(text: &str) -> Result<ExecutionTrace, serde_json::Error> {
    let mut visits = Vec::new();
    let mut status = None;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<TraceVisit>(line) {
            Ok(v) => visits.push(v),
            Err(_) => status = Some(serde_json::from_str::<RunStatus>(line)?),
        }
    }
    Ok(ExecutionTrace {
        visits,
        status: status.unwrap_or(RunStatus::Completed),
    })
}
