"""
Workflow Node Type Constants

This module defines string constants for node identifiers in the haff-check graph.
"""

SIMULATION_NODE = "simulation_node"
FIT_NODE = "fit_node"
UPPER_BOUND_NODE = "upper_bound_node"
VERDICT_NODE = "verdict_node"
FINALIZE_NODE = "finalize_node"
