"""Approximate attention scores from a query-by-codebook lookup table.

The table holds ``T[i, m] = <q_i, C[i, m]>`` for every group ``i`` and centroid
``m``. A token's approximate score is then a sum of ``g`` table entries picked
by its index row, so the per-token cost is ``g`` additions and no
multiplications. Although often called a hash table, ``T`` is a dense array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteError, ShapeError
from .quantizer import Codebook, KeyIndexMatrix


@dataclass(frozen=True, eq=False)
class LookupTable:
    values: np.ndarray  # (g, c), group-major

    @property
    def g(self) -> int:
        return self.values.shape[0]

    @property
    def c(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class ScoreVector:
    scores: np.ndarray
    weights: np.ndarray | None = None

    def __len__(self):
        return len(self.scores)


def build_table(q, cb: Codebook) -> LookupTable:
    cfg = cb.config
    q = np.asarray(q, dtype=np.float32)
    if q.shape != (cfg.d,):
        raise ShapeError(f"query shape {q.shape} != ({cfg.d},)")
    if not np.all(np.isfinite(q)):
        raise NonFiniteError("query contains non-finite values")
    qs = q.reshape(cfg.g, cfg.sub_dim)
    # dot products in float64, stored rounded to float32
    values = np.einsum("gk,gck->gc", qs.astype(np.float64),
                       cb.centroids.astype(np.float64)).astype(np.float32)
    return LookupTable(values)


def approx_scores(T: LookupTable, P: KeyIndexMatrix) -> ScoreVector:
    """``scores[j] = sum_i T[i, P[j, i]]``, accumulated in ascending group order.

    The running sum is float64 so that wide heads (many groups, large scores)
    stay within 1e-5 of the reconstructed-key dot product; the result is f32.
    """
    idx = P.indices if isinstance(P, KeyIndexMatrix) else np.asarray(P)
    if idx.ndim != 2 or idx.shape[1] != T.g:
        raise ShapeError(f"index matrix shape {idx.shape} incompatible with table g={T.g}")
    if idx.size and int(idx.max()) >= T.c:
        raise IndexError(f"index {int(idx.max())} out of range for table with c={T.c}")
    acc = np.zeros(idx.shape[0], dtype=np.float64)
    for i in range(T.g):
        acc += T.values[i, idx[:, i]]
    return ScoreVector(acc.astype(np.float32))


def softmax_scaled(scores: np.ndarray, d: int) -> np.ndarray:
    """``softmax(scores / sqrt(d))`` in float32 with max subtraction."""
    z = np.asarray(scores, dtype=np.float32)
    z = (z - z.max()) / np.float32(math.sqrt(d))
    e = np.exp(z)
    return e / e.sum(dtype=np.float32)


def normalize(z: ScoreVector | np.ndarray, d: int) -> ScoreVector:
    scores = z.scores if isinstance(z, ScoreVector) else np.asarray(z, dtype=np.float32)
    if scores.size == 0:
        raise ShapeError("cannot normalize an empty score vector")
    if not np.all(np.isfinite(scores)):
        raise NonFiniteError("scores contain non-finite values")
    return ScoreVector(scores, softmax_scaled(scores, d))
