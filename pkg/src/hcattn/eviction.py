"""Per-query KV eviction by cumulative attention mass.

Tokens are ranked by weight (ties toward the lower token index) and the
shortest prefix whose mass reaches ``tau`` survives. Nothing is discarded
permanently: the selection is recomputed for every query.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .score_engine import ScoreVector

# Absorbs float rounding in the accumulated probability mass.
MASS_SLACK = 1e-6


@dataclass(frozen=True, eq=False)
class EvictionSelection:
    tau: float
    indices: np.ndarray  # int64, descending weight order
    weights: np.ndarray  # non-increasing
    n: int

    @property
    def k_star(self) -> int:
        return len(self.indices)


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not 0.0 < tau <= 1.0:
        raise ConfigError(f"tau must lie in (0, 1], got {tau}")
    return tau


def select(weights, tau: float) -> EvictionSelection:
    """Smallest top-weight prefix whose cumulative mass is >= ``tau - 1e-6``.

    ``tau == 1`` keeps every token: with exact probabilities all softmax weights
    are positive, so no shorter prefix reaches full mass.
    """
    tau = _check_tau(tau)
    w = weights.weights if isinstance(weights, ScoreVector) else weights
    if w is None:
        raise ShapeError("score vector has not been normalized")
    w = np.asarray(w)
    if w.ndim != 1 or w.size == 0:
        raise ShapeError("weights must be a non-empty 1-D array")
    n = w.size
    order = np.argsort(-w, kind="stable")
    if tau >= 1.0:
        k = n
    else:
        csum = np.cumsum(w[order].astype(np.float64))
        k = int(np.searchsorted(csum, tau - MASS_SLACK, side="left")) + 1
        k = min(k, n)
    idx = order[:k].astype(np.int64)
    return EvictionSelection(tau=tau, indices=idx, weights=w[idx], n=n)


def selection_ratio(sel: EvictionSelection) -> float:
    return sel.k_star / sel.n
