from __future__ import annotations

from langgraph.graph import END, StateGraph

from .deps import Deps
from .nodes.load_input import load_input_node
from .nodes.record_run import record_run_node
from .nodes.render import render_node
from .nodes.solve import solve_node
from .nodes.verify import verify_node
from .nodes.write_artifacts import write_artifacts_node


def build_run_graph(deps: Deps):  # type: ignore[no-untyped-def]
    graph = StateGraph(dict)  # type: ignore[type-var]

    graph.add_node("load_input", lambda s: load_input_node(s, deps))
    graph.add_node("solve", lambda s: solve_node(s, deps))
    graph.add_node("verify", lambda s: verify_node(s, deps))
    graph.add_node("render", lambda s: render_node(s, deps))
    graph.add_node("write_artifacts", lambda s: write_artifacts_node(s, deps))
    graph.add_node("record_run", lambda s: record_run_node(s, deps))

    graph.set_entry_point("load_input")
    graph.add_edge("load_input", "solve")
    graph.add_edge("solve", "verify")
    graph.add_edge("verify", "render")
    graph.add_edge("render", "write_artifacts")
    graph.add_edge("write_artifacts", "record_run")
    graph.add_edge("record_run", END)

    return graph.compile()
