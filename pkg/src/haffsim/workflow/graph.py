"""
Workflow Graph Builder

This module constructs the LangGraph workflow behind ``haffsim haff-check``.
"""

from langgraph.graph import StateGraph
from haffsim.workflow.nodes import (
    simulation_node,
    fit_node,
    upper_bound_node,
    verdict_node,
    finalize_node,
)
from haffsim.workflow.node_types import (
    SIMULATION_NODE,
    FIT_NODE,
    UPPER_BOUND_NODE,
    VERDICT_NODE,
    FINALIZE_NODE,
)
from haffsim.workflow.state import HaffCheckState


def build_graph():
    """Build and compile the haff-check graph."""
    flow = StateGraph(HaffCheckState)

    flow.add_node(SIMULATION_NODE, simulation_node)
    flow.add_node(FIT_NODE, fit_node)
    flow.add_node(UPPER_BOUND_NODE, upper_bound_node)
    flow.add_node(VERDICT_NODE, verdict_node)
    flow.add_node(FINALIZE_NODE, finalize_node)

    flow.set_entry_point(SIMULATION_NODE)

    return flow.compile()
