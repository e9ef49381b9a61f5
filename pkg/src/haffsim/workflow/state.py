"""
Workflow State Management

This module defines the state structure and status enums for the haff-check workflow.
"""

from enum import Enum
from typing import Any, Dict, Optional
from typing_extensions import TypedDict


class WorkflowStatus(str, Enum):
    """Enum representing possible workflow statuses."""

    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


class Verdict(str, Enum):
    """Outcome of a haff-check run."""

    PASS = "PASS"
    FAIL = "FAIL"


class HaffCheckState(TypedDict):
    """
    Represents the state of a haff-check run.

    Attributes:
        workflow_id (str): Unique identifier for the run.
        run_config (Any): Parsed RunConfig driving the simulation.
        preset (Optional[str]): Name of the preset the configuration came from, if any.
        max_workers (Optional[int]): Cap on the replica thread pool.
        series (Optional[Any]): MomentSeries produced by the simulation (merged over replicas).
        fit (Optional[Dict]): Fitted cooling exponent, its error, window, target and band.
        upper_bound (Optional[Dict]): ODE envelope on the record times and the domination check.
        verdict (Optional[str]): PASS or FAIL once decided.
        reasons (Optional[list]): Human-readable reasons behind a FAIL verdict.
        status (WorkflowStatus): Current status of the workflow.
        start_time (Optional[str]): ISO 8601 formatted start time.
        end_time (Optional[str]): ISO 8601 formatted end time.
        error (Optional[str]): Error message if the workflow has failed, otherwise None.
        error_kind (Optional[str]): Error family (config, numerical) for the exit code.
    """

    workflow_id: str
    run_config: Any
    preset: Optional[str]
    max_workers: Optional[int]
    series: Optional[Any]
    fit: Optional[Dict]
    upper_bound: Optional[Dict]
    verdict: Optional[str]
    reasons: Optional[list]
    status: WorkflowStatus
    start_time: Optional[str]
    end_time: Optional[str]
    error: Optional[str]
    error_kind: Optional[str]
