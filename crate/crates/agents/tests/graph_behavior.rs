//! Compile-time validation and run-time semantics of the workflow
//! graph.

use polytrans_agents::graph::{
    trace_from_jsonl, trace_to_jsonl, ExecutionTrace, GraphBuilder, GraphError, GraphState,
    HandlerError, RunError, RunStatus, END, START,
};

fn identity(state: GraphState) -> Result<GraphState, HandlerError> {
    Ok(state)
}

fn tag(key: &'static str) -> impl Fn(GraphState) -> Result<GraphState, HandlerError> {
    move |mut state| {
        state.metadata.insert(key.to_string(), "visited".to_string());
        Ok(state)
    }
}

#[test]
fn minimal_graph_compiles_and_runs() {
    let graph = GraphBuilder::new()
        .add_node("a", identity)
        .add_edge(START, "a")
        .add_edge("a", END)
        .compile()
        .unwrap();
    let initial = GraphState::with_input("hello");
    let (final_state, trace) = graph.run(&initial, 100);
    assert_eq!(final_state, initial);
    assert_eq!(trace.node_order(), vec!["a"]);
    assert!(trace.status.is_completed());
}

#[test]
fn duplicate_node_is_rejected() {
    let err = GraphBuilder::new()
        .add_node("a", identity)
        .add_node("a", identity)
        .add_edge(START, "a")
        .add_edge("a", END)
        .compile()
        .unwrap_err();
    assert!(matches!(err, GraphError::DuplicateNode(id) if id == "a"));
}

#[test]
fn dangling_edge_is_rejected() {
    let err = GraphBuilder::new()
        .add_node("a", identity)
        .add_edge(START, "a")
        .add_edge("a", "ghost")
        .compile()
        .unwrap_err();
    assert!(matches!(err, GraphError::DanglingEdge { to, .. } if to == "ghost"));
}

#[test]
fn unreachable_node_is_rejected() {
    let err = GraphBuilder::new()
        .add_node("a", identity)
        .add_node("b", identity)
        .add_edge(START, "a")
        .add_edge("a", END)
        .add_edge("b", END)
        .compile()
        .unwrap_err();
    assert!(matches!(err, GraphError::UnreachableNode(id) if id == "b"));
}

#[test]
fn node_without_outgoing_edge_has_no_path_to_end() {
    let err = GraphBuilder::new()
        .add_node("a", identity)
        .add_node("b", identity)
        .add_edge(START, "a")
        .add_edge("a", "b")
        .compile()
        .unwrap_err();
    assert!(matches!(err, GraphError::NoPathToEnd(id) if id == "b"));
}

#[test]
fn static_cycle_is_rejected() {
    let err = GraphBuilder::new()
        .add_node("a", identity)
        .add_node("b", identity)
        .add_edge(START, "a")
        .add_edge("a", "b")
        .add_edge("b", "a")
        .compile()
        .unwrap_err();
    assert!(matches!(err, GraphError::StaticCycle(_)));
}

#[test]
fn cycle_with_conditional_escape_is_allowed() {
    let graph = GraphBuilder::new()
        .add_node("a", identity)
        .add_node("b", identity)
        .add_node("exit", identity)
        .add_edge(START, "a")
        .add_edge("a", "b")
        .add_conditional_edge(
            "b",
            |state: &GraphState| {
                if state.metadata.contains_key("loop") {
                    "a".to_string()
                } else {
                    "exit".to_string()
                }
            },
            ["a", "exit"],
        )
        .add_edge("exit", END)
        .compile()
        .unwrap();
    let (_, trace) = graph.run(&GraphState::default(), 100);
    assert_eq!(trace.node_order(), vec!["a", "b", "exit"]);
}

#[test]
fn missing_or_extra_start_edges_are_rejected() {
    let err = GraphBuilder::new()
        .add_node("a", identity)
        .add_edge("a", END)
        .compile()
        .unwrap_err();
    assert!(matches!(err, GraphError::BadStartEdgeCount(0)));

    let err = GraphBuilder::new()
        .add_node("a", identity)
        .add_edge(START, "a")
        .add_edge(START, "a")
        .add_edge("a", END)
        .compile()
        .unwrap_err();
    assert!(matches!(err, GraphError::BadStartEdgeCount(2)));
}

#[test]
fn reserved_ids_cannot_be_nodes() {
    let err = GraphBuilder::new()
        .add_node(START, identity)
        .compile()
        .unwrap_err();
    assert!(matches!(err, GraphError::ReservedId(_)));
}

#[test]
fn multiple_outgoing_edges_are_rejected() {
    let err = GraphBuilder::new()
        .add_node("a", identity)
        .add_node("b", identity)
        .add_edge(START, "a")
        .add_edge("a", "b")
        .add_edge("a", END)
        .add_edge("b", END)
        .compile()
        .unwrap_err();
    assert!(matches!(err, GraphError::MultipleOutgoingEdges(id) if id == "a"));
}

#[test]
fn conditional_router_dispatches_on_state() {
    let build = || {
        GraphBuilder::new()
            .add_node("classify", identity)
            .add_node("left", tag("left"))
            .add_node("right", tag("right"))
            .add_edge(START, "classify")
            .add_conditional_edge(
                "classify",
                |state: &GraphState| {
                    if state.input_text.contains('L') {
                        "left".to_string()
                    } else {
                        "right".to_string()
                    }
                },
                ["left", "right"],
            )
            .add_edge("left", END)
            .add_edge("right", END)
            .compile()
            .unwrap()
    };
    let (state, trace) = build().run(&GraphState::with_input("L please"), 10);
    assert_eq!(trace.node_order(), vec!["classify", "left"]);
    assert!(state.metadata.contains_key("left"));
    let (_, trace) = build().run(&GraphState::with_input("other"), 10);
    assert_eq!(trace.node_order(), vec!["classify", "right"]);
}

#[test]
fn router_returning_undeclared_target_fails_the_run() {
    let graph = GraphBuilder::new()
        .add_node("a", identity)
        .add_node("b", identity)
        .add_edge(START, "a")
        .add_conditional_edge("a", |_: &GraphState| "ghost".to_string(), ["b"])
        .add_edge("b", END)
        .compile()
        .unwrap();
    let (_, trace) = graph.run(&GraphState::default(), 10);
    assert_eq!(trace.node_order(), vec!["a"]);
    assert!(matches!(
        trace.status,
        RunStatus::Failed {
            error: RunError::DisallowedTarget { ref returned },
            ..
        } if returned == "ghost"
    ));
}

#[test]
fn step_limit_stops_the_walk() {
    let graph = GraphBuilder::new()
        .add_node("a", identity)
        .add_node("b", identity)
        .add_edge(START, "a")
        .add_edge("a", "b")
        .add_edge("b", END)
        .compile()
        .unwrap();
    let (_, trace) = graph.run(&GraphState::default(), 1);
    assert_eq!(trace.visits.len(), 1);
    assert!(matches!(
        trace.status,
        RunStatus::Failed {
            ref node,
            error: RunError::StepLimitExceeded { limit: 1 },
        } if node == "b"
    ));
}

#[test]
fn handler_error_yields_failed_status_and_partial_trace() {
    let graph = GraphBuilder::new()
        .add_node("ok", tag("ok"))
        .add_node("boom", |_| Err(HandlerError::new("exploded", "for the test")))
        .add_edge(START, "ok")
        .add_edge("ok", "boom")
        .add_edge("boom", END)
        .compile()
        .unwrap();
    let (state, trace) = graph.run(&GraphState::default(), 10);
    assert_eq!(trace.node_order(), vec!["ok"]);
    assert!(state.metadata.contains_key("ok"));
    assert!(matches!(
        trace.status,
        RunStatus::Failed {
            ref node,
            error: RunError::Handler { ref kind, .. },
        } if node == "boom" && kind == "exploded"
    ));
}

#[test]
fn caller_state_is_never_mutated() {
    let graph = GraphBuilder::new()
        .add_node("a", tag("a"))
        .add_edge(START, "a")
        .add_edge("a", END)
        .compile()
        .unwrap();
    let initial = GraphState::with_input("untouched");
    let snapshot = initial.clone();
    let (final_state, _) = graph.run(&initial, 10);
    assert_eq!(initial, snapshot);
    assert_ne!(final_state, snapshot);
}

#[test]
fn runs_are_deterministic() {
    let graph = GraphBuilder::new()
        .add_node("a", tag("a"))
        .add_node("b", tag("b"))
        .add_edge(START, "a")
        .add_edge("a", "b")
        .add_edge("b", END)
        .compile()
        .unwrap();
    let initial = GraphState::with_input("x");
    let (s1, t1) = graph.run(&initial, 10);
    let (s2, t2) = graph.run(&initial, 10);
    assert_eq!(s1, s2);
    assert_eq!(t1, t2);
}

#[test]
fn trace_round_trips_through_jsonl() {
    let graph = GraphBuilder::new()
        .add_node("a", tag("a"))
        .add_node("b", |_| Err(HandlerError::new("kindly", "failed")))
        .add_edge(START, "a")
        .add_edge("a", "b")
        .add_edge("b", END)
        .compile()
        .unwrap();
    let (_, trace) = graph.run(&GraphState::with_input("x"), 10);
    let text = trace_to_jsonl(&trace);
    assert_eq!(text.lines().count(), trace.visits.len() + 1);
    let parsed = trace_from_jsonl(&text).unwrap();
    assert_eq!(parsed, trace);
}

#[test]
fn empty_trace_serializes_to_single_status_line() {
    let trace = ExecutionTrace {
        visits: vec![],
        status: RunStatus::Completed,
    };
    let text = trace_to_jsonl(&trace);
    assert_eq!(text, "{\"status\":\"completed\"}\n");
    assert_eq!(trace_from_jsonl(&text).unwrap(), trace);
}
