from __future__ import annotations

import logging
from functools import lru_cache
from typing import Callable, Tuple

import numpy as np

from core.errors import InvalidArgumentError, ToleranceNotReachedError

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_ORDER = 10
MAX_PANELS = 1 << 16

# f maps a flat array of abscissae to shape (n,) or (k, n)
Integrand = Callable[[np.ndarray], np.ndarray]


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1] (cached, read-only)."""
    nodes, weights = np.polynomial.legendre.leggauss(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _panel_sums(
    f: Integrand,
    mid: np.ndarray,
    half: np.ndarray,
    nodes: np.ndarray,
    weights: np.ndarray,
) -> np.ndarray:
    x = mid[:, None] + half[:, None] * nodes[None, :]
    values = np.asarray(f(x.ravel()), dtype=float)
    values = values.reshape(-1, mid.size, nodes.size)
    return half * (values @ weights)


def integrate_panels(
    f: Integrand,
    edges: np.ndarray,
    tol: float = DEFAULT_TOL,
    order: int = DEFAULT_ORDER,
    max_panels: int = MAX_PANELS,
) -> np.ndarray:
    """
    Adaptive Gauss-Legendre integration over consecutive intervals.

    Every interval [edges[i], edges[i+1]] is integrated with an `order`-point
    rule and a `2*order`-point rule; panels whose two estimates differ by more
    than tol times their width are halved and retried. All active panels are
    evaluated in one vectorized call of `f` per pass.

    Args:
        f: integrand, vectorized over a flat array of abscissae; may return
            several components as shape (k, n).
        edges: monotone interval boundaries.
        tol: absolute error allowed per unit of integration length.
        order: base Gauss rule size.
        max_panels: subdivision budget before giving up.

    Returns:
        Array of shape (len(edges) - 1, k) with one integral per interval.

    Raises:
        ToleranceNotReachedError: the budget ran out (pathological integrands,
            e.g. enormous coefficients).
    """
    if tol <= 0:
        raise InvalidArgumentError(f"Quadrature tolerance must be positive, got {tol}")
    edges = np.asarray(edges, dtype=float)
    a = edges[:-1].copy()
    b = edges[1:].copy()
    owner = np.arange(a.size)
    n_out = a.size

    coarse_nodes, coarse_weights = gauss_legendre(order)
    fine_nodes, fine_weights = gauss_legendre(2 * order)

    result = None
    processed = 0
    while a.size:
        processed += a.size
        if processed > max_panels:
            raise ToleranceNotReachedError(
                f"Adaptive quadrature exhausted {max_panels} panels before reaching tol={tol:g}",
                tol=tol,
            )

        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        coarse = _panel_sums(f, mid, half, coarse_nodes, coarse_weights)
        fine = _panel_sums(f, mid, half, fine_nodes, fine_weights)
        if result is None:
            result = np.zeros((n_out, fine.shape[0]))

        err = np.max(np.abs(fine - coarse), axis=0)
        floor = 32.0 * np.finfo(float).eps * np.max(np.abs(fine), axis=0)
        done = err <= np.maximum(tol * np.abs(b - a), floor)

        np.add.at(result, owner[done], fine[:, done].T)

        todo = ~done
        a, b, m, owner = a[todo], b[todo], mid[todo], owner[todo]
        a, b = np.concatenate((a, m)), np.concatenate((m, b))
        owner = np.concatenate((owner, owner))

    if result is None:
        return np.zeros((0, 1))
    logger.debug("integrate_panels: %d intervals, %d panels evaluated", n_out, processed)
    return result


def cumulative_integral(
    f: Integrand,
    s: np.ndarray,
    tol: float = DEFAULT_TOL,
    lower: float = 0.0,
) -> np.ndarray:
    """
    Integrals of f from `lower` to every entry of `s` in one adaptive pass.

    The grid is sorted internally, consecutive gaps are integrated as panels,
    and the partial sums are accumulated. Returns shape (k, len(s)).
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    order = np.argsort(s, kind="stable")
    edges = np.concatenate(([lower], s[order]))
    panels = integrate_panels(f, edges, tol=tol)
    cumulative = np.cumsum(panels, axis=0)
    out = np.empty_like(cumulative)
    out[order] = cumulative
    return out.T
