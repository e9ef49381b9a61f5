"""
Composite Gauss-Legendre quadrature on panels, vectorized over a batch of
integrands, with local panel halving until every panel settles.
"""

import logging
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from haffsim.core.errors import QuadratureError

logger = logging.getLogger(__name__)


def _panel_values(
    func: Callable[[np.ndarray], np.ndarray], left: np.ndarray, right: np.ndarray, order: int
) -> np.ndarray:
    """Per-panel integrals, shape (..., n_panels)."""
    nodes, weights = leggauss(order)
    half = 0.5 * (right - left)
    mid = 0.5 * (right + left)
    abscissae = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    values = np.asarray(func(abscissae))
    values = values.reshape(values.shape[:-1] + (left.size, order))
    return (values @ weights) * half


def panel_quadrature(
    func: Callable[[np.ndarray], np.ndarray], edges: np.ndarray, order: int
) -> np.ndarray:
    """Integrate ``func`` over the panels delimited by ``edges``.

    ``func`` receives a 1-D array of abscissae and returns values of shape
    (..., n_abscissae); the trailing axis is integrated out.
    """
    edges = np.asarray(edges, dtype=float)
    return _panel_values(func, edges[:-1], edges[1:], order).sum(axis=-1)


def adaptive_panels(
    func: Callable[[np.ndarray], np.ndarray],
    lower: float,
    upper: float,
    breakpoints: Sequence[float] = (),
    order: int = 16,
    rtol: float = 1e-10,
    atol: float = 1e-300,
    max_levels: int = 12,
) -> np.ndarray:
    """Composite Gauss-Legendre, halving only the panels that have not settled.

    A panel settles when its estimate and the sum over its two halves agree
    within its share of the tolerance, proportional to its width, for every
    batch entry.

    Args:
        func: Batched integrand, see :func:`panel_quadrature`.
        lower: Left end of the interval.
        upper: Right end of the interval.
        breakpoints: Interior kinks of the integrand, used as panel edges.
        order: Gauss-Legendre nodes per panel.
        rtol: Relative tolerance on the whole integral.
        atol: Absolute floor of the tolerance.
        max_levels: Maximum number of refinement rounds.

    Returns:
        Array of integrals, one per batch entry.

    Raises:
        QuadratureError: If some panel has not settled after ``max_levels`` rounds.
    """
    inner = [b for b in breakpoints if lower < b < upper]
    edges = np.unique(np.concatenate(([lower], inner, [upper])))
    span = float(upper - lower)
    left, right = edges[:-1], edges[1:]
    coarse = _panel_values(func, left, right, order)
    accepted = np.zeros(coarse.shape[:-1])
    error = np.inf
    for level in range(max_levels):
        n_panels = left.size
        mid = 0.5 * (left + right)
        halves = _panel_values(
            func, np.concatenate((left, mid)), np.concatenate((mid, right)), order
        )
        first, second = halves[..., :n_panels], halves[..., n_panels:]
        fine = first + second
        difference = np.abs(fine - coarse)
        total = accepted + fine.sum(axis=-1)
        allowed = (rtol * np.abs(total) + atol)[..., None] * ((right - left) / span)
        batch_axes = tuple(range(difference.ndim - 1))
        settled = np.all(difference <= allowed, axis=batch_axes)
        accepted = accepted + fine[..., settled].sum(axis=-1)
        error = float(np.max(difference[..., ~settled].sum(axis=-1))) if difference.size else 0.0

        if np.all(settled):
            logger.debug("Quadrature settled after %d rounds", level + 1)
            return accepted
        active = ~settled
        left = np.concatenate((left[active], mid[active]))
        right = np.concatenate((mid[active], right[active]))
        coarse = np.concatenate((first[..., active], second[..., active]), axis=-1)
    raise QuadratureError(
        f"composite Gauss-Legendre did not reach rtol={rtol:g} after {max_levels} rounds",
        achieved_error=error,
    )
