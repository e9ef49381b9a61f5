"""
Workflow Node Implementations

This module contains the node functions of the haff-check workflow:
simulate, fit the cooling exponent, integrate the upper-bound ODE and decide.
"""

import logging
from datetime import datetime
from langgraph.graph import END
from langgraph.types import Command
from haffsim.core.cooling import PsiProfile, asymptotic_upper_bound, integrate_upper_bound
from haffsim.core.diagnostics import fit_power_law, haff_target, upper_bound_check
from haffsim.core.dsmc import run_replicas
from haffsim.core.errors import HaffsimError
from haffsim.workflow.state import HaffCheckState, Verdict, WorkflowStatus
from haffsim.workflow.node_types import (
    FIT_NODE,
    UPPER_BOUND_NODE,
    VERDICT_NODE,
    FINALIZE_NODE,
)


logger = logging.getLogger(__name__)


def _failed(exc: Exception) -> Command:
    kind = exc.kind if isinstance(exc, HaffsimError) else "internal"
    return Command(
        goto=FINALIZE_NODE,
        update={
            "status": WorkflowStatus.FAILED.value,
            "error": str(exc),
            "error_kind": kind,
        },
    )


def simulation_node(state: HaffCheckState) -> Command:
    """
    Node that runs the DSMC replicas of the configured scenario.

    Args:
        state (HaffCheckState): The current state of the workflow.

    Returns:
        Command: A command indicating the next step in the workflow.
    """
    run_config = state.get("run_config")
    if run_config is None:
        raise ValueError("No run configuration provided in the workflow state.")

    try:
        logger.info(
            "Simulating %s with %d particles up to t=%g (%d replicas)",
            run_config.sim.restitution.describe(),
            run_config.sim.n_particles,
            run_config.sim.t_end,
            run_config.replicas,
        )
        _, series = run_replicas(run_config.sim, run_config.replicas, state.get("max_workers"))
    except Exception as exc:
        logger.exception("Simulation failed")
        return _failed(exc)

    return Command(
        goto=FIT_NODE,
        update={"series": series, "status": WorkflowStatus.RUNNING.value},
    )


def fit_node(state: HaffCheckState) -> Command:
    """
    Node that fits the cooling exponent of E(t) and sets the target band.

    Args:
        state (HaffCheckState): The current state of the workflow.

    Returns:
        Command: A command indicating the next step in the workflow.
    """
    run_config = state["run_config"]
    series = state.get("series")
    if series is None:
        raise ValueError("No series available for fitting.")

    try:
        gamma = run_config.sim.restitution.gamma
        target = haff_target(gamma)
        fit = fit_power_law(series.t, series.column("E"), run_config.check_window)
        logger.info("Fitted exponent %.4f ± %.4f (target %.4f)", fit.exponent, fit.stderr, target)
    except Exception as exc:
        logger.exception("Exponent fit failed")
        return _failed(exc)

    return Command(
        goto=UPPER_BOUND_NODE,
        update={
            "fit": {
                "exponent": fit.exponent,
                "stderr": fit.stderr,
                "intercept": fit.intercept,
                "window": list(fit.window),
                "n_points": fit.n_points,
                "gamma": gamma,
                "target": target,
                "band": list(run_config.exponent_band(target)),
            }
        },
    )


def upper_bound_node(state: HaffCheckState) -> Command:
    """
    Node that integrates dE/dt = -Ψ_e(E) and checks that the DSMC energy stays below it.

    Args:
        state (HaffCheckState): The current state of the workflow.

    Returns:
        Command: A command indicating the next step in the workflow.
    """
    run_config = state["run_config"]
    series = state["series"]

    try:
        profile = PsiProfile(run_config.sim.restitution, run_config.sim.kernel)
        energy = series.column("E")
        bound = integrate_upper_bound(profile, float(energy[0]), series.t)
        check = upper_bound_check(series, bound)
        envelope = None
        if not run_config.sim.restitution.is_elastic:
            envelope = asymptotic_upper_bound(profile, float(energy[0]), series.t)
        logger.info(
            "Upper bound: %d violations, max excess %.3g standard errors",
            check.violations,
            check.max_excess_sigma,
        )
    except Exception as exc:
        logger.exception("Upper-bound check failed")
        return _failed(exc)

    return Command(
        goto=VERDICT_NODE,
        update={
            "upper_bound": {
                "values": bound.tolist(),
                "envelope": None if envelope is None else envelope.tolist(),
                "violations": check.violations,
                "max_excess_sigma": check.max_excess_sigma,
                "ok": check.ok,
            }
        },
    )


def verdict_node(state: HaffCheckState) -> Command:
    """
    Node that compares the fitted exponent with the target band and the bound check.

    Args:
        state (HaffCheckState): The current state of the workflow.

    Returns:
        Command: A command indicating the next step in the workflow.
    """
    fit = state["fit"]
    upper_bound = state["upper_bound"]
    reasons = []

    low, high = fit["band"]
    if not low <= fit["exponent"] <= high:
        reasons.append(f"exponent {fit['exponent']:.4f} outside [{low:.4f}, {high:.4f}]")
    if not upper_bound["ok"]:
        reasons.append(f"energy exceeds the ODE bound at {upper_bound['violations']} records")

    verdict = Verdict.FAIL if reasons else Verdict.PASS
    logger.info("Verdict: %s", verdict.value)
    return Command(goto=FINALIZE_NODE, update={"verdict": verdict.value, "reasons": reasons})


def finalize_node(state: HaffCheckState) -> Command:
    """
    Node that closes the run, keeping a failed status if one was set.

    Args:
        state (HaffCheckState): The current state of the workflow.
    Returns:
        Command: A command indicating the next step in the workflow.
    """
    status = state.get("status")
    if status != WorkflowStatus.FAILED.value:
        status = WorkflowStatus.COMPLETED.value

    return Command(
        goto=END,
        update={
            "status": status,
            "end_time": datetime.now().isoformat(),
        },
    )
