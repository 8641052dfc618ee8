"""Minimum-variance combination of independent estimates.

The weights minimize ``Var[sum b_k X_k]`` under ``sum b_k = 1`` for
uncorrelated ``X_k``.  Eliminating ``b_N`` leaves the linear system

    sigma_N^2 = b_k sigma_k^2 + sigma_N^2 * sum_{n<N} b_n,   k = 1..N-1

which is solved directly; the inverse-variance closed form is kept as an
independent cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal_core import ParameterError

VARIANCE_CAP = 1e12


@dataclass(frozen=True)
class WeightSolution:
    weights: np.ndarray
    combined_variance: float


def _validated(variances):
    v = np.atleast_1d(np.asarray(variances, dtype=float))
    if v.ndim != 1 or v.size == 0:
        raise ParameterError("need at least one variance")
    if not np.all(np.isfinite(v) | np.isposinf(v)) or np.any(v <= 0):
        raise ParameterError("variances must be positive")
    return np.minimum(v, VARIANCE_CAP)


def solve_weight_system(variances) -> np.ndarray:
    """Weights from the (N-1)-dimensional elimination system."""
    v = _validated(variances)
    n = v.size
    if n == 1:
        return np.ones(1)
    # eliminate the smallest variance: the system is the same up to
    # relabelling and stays well conditioned when one variance is huge
    last = int(np.argmin(v))
    rest = np.delete(np.arange(n), last)
    s_n = v[last]
    a = np.full((n - 1, n - 1), s_n) + np.diag(v[rest])
    b = np.linalg.solve(a, np.full(n - 1, s_n))
    out = np.empty(n)
    out[rest] = b
    out[last] = 1.0 - b.sum()
    return out


def inverse_variance_weights(variances) -> np.ndarray:
    """Closed form: weights proportional to ``1/sigma_k^2``."""
    v = _validated(variances)
    # scale by the smallest variance first so tiny variances do not overflow
    inv = v.min() / v
    return inv / inv.sum()


def optimal_weights(variances, check: bool = False) -> WeightSolution:
    """Minimum-variance mixing weights for independent estimates.

    Parameters
    ----------
    variances : array_like
        Positive variances ``sigma_k^2`` (any units).
    check : bool
        Also evaluate the closed form and assert agreement.
    """
    v = _validated(variances)
    w = solve_weight_system(v)
    if check:
        ref = inverse_variance_weights(v)
        if not np.allclose(w, ref, rtol=1e-9, atol=1e-12):
            raise AssertionError(f"weight solvers disagree: {w} vs {ref}")
    combined = float(v.min() / np.sum(v.min() / v))
    return WeightSolution(w, combined)


def combine_estimates(values, solution: WeightSolution) -> tuple[float, float]:
    """Weighted sum of ``values`` and the solution's combined variance."""
    values = np.atleast_1d(np.asarray(values, dtype=float))
    if values.shape != solution.weights.shape:
        raise ParameterError(
            f"{values.size} values for {solution.weights.size} weights")
    return float(values @ solution.weights), solution.combined_variance
