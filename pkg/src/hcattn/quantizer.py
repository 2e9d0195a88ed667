"""Grouped vector quantization of key vectors.

A key of dimension ``d`` is split into ``g`` contiguous sub-vectors of width
``d // g``; each sub-vector is replaced by the index of its nearest centroid in
that group's codebook. Codebooks are learned with mini-batch k-means.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagicError,
    ConfigError,
    NonFiniteError,
    ShapeError,
    TensorFormatError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)
from .tensor_io import TensorDump, read_tensor_from, write_tensor_to

MAX_CENTROIDS = 1 << 16
INDEX_DTYPE = np.uint16

# Number of rows encoded per chunk; bounds the (rows, g, c) distance buffer.
_ENCODE_BUDGET = 1 << 22


@dataclass(frozen=True)
class QuantizerConfig:
    d: int
    g: int
    c: int
    shared_codebook: bool = False
    kmeans_batch_size: int = 10_000
    kmeans_max_iters: int = 200
    kmeans_restarts: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.d < 1 or self.g < 1:
            raise ConfigError("d and g must be positive")
        if self.d % self.g:
            raise ConfigError(f"g={self.g} does not divide d={self.d}")
        if not 1 <= self.c <= MAX_CENTROIDS:
            raise ConfigError(f"c={self.c} outside [1, {MAX_CENTROIDS}] (indices are 16-bit)")
        if self.kmeans_batch_size < 1 or self.kmeans_max_iters < 0 or self.kmeans_restarts < 1:
            raise ConfigError("k-means batch size and restarts must be >= 1, iterations >= 0")

    @property
    def sub_dim(self) -> int:
        return self.d // self.g


@dataclass(frozen=True, eq=False)
class Codebook:
    """Centroids of shape ``(g, c, d // g)`` plus the config that produced them."""

    centroids: np.ndarray
    config: QuantizerConfig
    inertia: float = float("nan")

    def __post_init__(self):
        cfg = self.config
        cent = np.ascontiguousarray(self.centroids, dtype=np.float32)
        if cent.shape != (cfg.g, cfg.c, cfg.sub_dim):
            raise ShapeError(
                f"centroids shape {cent.shape} != {(cfg.g, cfg.c, cfg.sub_dim)}")
        if not np.all(np.isfinite(cent)):
            raise NonFiniteError("codebook centroids must be finite")
        cent.setflags(write=False)
        object.__setattr__(self, "centroids", cent)


@dataclass(frozen=True, eq=False)
class KeyIndexMatrix:
    """Centroid indices, one row per token and one column per group."""

    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices)
        if idx.ndim != 2:
            raise ShapeError("index matrix must be 2-D (n, g)")
        object.__setattr__(self, "indices", idx.astype(INDEX_DTYPE, copy=False))

    @property
    def n(self) -> int:
        return self.indices.shape[0]

    @property
    def g(self) -> int:
        return self.indices.shape[1]


# ---------------------------------------------------------------------------
# k-means
# ---------------------------------------------------------------------------

@dataclass
class KMeansRun:
    centers: np.ndarray
    inertia: float
    init_inertia: float
    steps: int
    reseeded: int = 0


def _assign(x: np.ndarray, centers: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Nearest center per row via the expanded form in float32.

    Only training uses this; encode computes exact float64 differences.
    """
    x32 = np.ascontiguousarray(x, dtype=np.float32)
    c32 = np.ascontiguousarray(centers, dtype=np.float32)
    neg2ct = -2.0 * c32.T
    c_norm = np.einsum("ij,ij->i", c32, c32)
    labels = np.empty(len(x), dtype=np.int64)
    for s in range(0, len(x), chunk):
        t = x32[s:s + chunk] @ neg2ct
        t += c_norm
        labels[s:s + chunk] = np.argmin(t, axis=1)
    return labels


def _exact_inertia(x: np.ndarray, centers: np.ndarray) -> float:
    """Sum of squared distances to float32-rounded centers, direct form."""
    c32 = centers.astype(np.float32).astype(np.float64)
    diff = x - c32[_assign(x, c32)]
    return float(np.sum(diff * diff))


def kmeans_plusplus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding. Falls back to uniform picks once every point is covered."""
    n = len(x)
    x_norm = np.einsum("ij,ij->i", x, x)
    centers = np.empty((k, x.shape[1]), dtype=np.float64)
    centers[0] = x[rng.integers(n)]
    closest = np.maximum(x_norm - 2.0 * (x @ centers[0]) + centers[0] @ centers[0], 0.0)
    for j in range(1, k):
        cum = np.cumsum(closest)
        total = cum[-1]
        if total > 0:
            pick = min(int(np.searchsorted(cum, rng.random() * total, side="right")), n - 1)
        else:
            pick = int(rng.integers(n))
        c = x[pick]
        centers[j] = c
        dist = x_norm - 2.0 * (x @ c) + c @ c
        np.minimum(closest, dist, out=closest)
        np.maximum(closest, 0.0, out=closest)
    return centers


def minibatch_kmeans(x: np.ndarray, k: int, batch_size: int, max_iters: int,
                     rng: np.random.Generator, tol: float = 0.0) -> KMeansRun:
    """One restart of Sculley-style mini-batch k-means.

    Each step assigns a random batch to its nearest centers, then moves every
    center toward its assigned points with per-center rate ``1 / count``; the
    vectorized update below is equivalent to applying the per-sample updates
    sequentially. Centers that have captured no point after a full pass over
    the data are reseeded to a random training point.

    The returned centers are the best seen (initial or final), so
    ``inertia <= init_inertia`` always holds.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    init_size = min(n, max(3 * batch_size, 3 * k))
    sample = x if init_size == n else x[rng.choice(n, init_size, replace=False)]
    centers = kmeans_plusplus(sample, k, rng)
    init_centers = centers.copy()
    init_inertia = _exact_inertia(x, init_centers)

    counts = np.zeros(k, dtype=np.float64)
    bs = min(batch_size, n)
    steps_per_pass = max(1, -(-n // bs))
    reseeded = 0
    step = 0
    for step in range(1, max_iters + 1):
        batch = x if bs == n else x[rng.choice(n, bs, replace=False)]
        labels = _assign(batch, centers)
        cnt = np.bincount(labels, minlength=k).astype(np.float64)
        sums = np.stack([np.bincount(labels, weights=batch[:, j], minlength=k)
                         for j in range(batch.shape[1])], axis=1)
        hit = cnt > 0
        new_counts = counts + cnt
        moved = np.zeros_like(centers)
        moved[hit] = (centers[hit] * counts[hit, None] + sums[hit]) / new_counts[hit, None]
        shift = np.max(np.sum((moved[hit] - centers[hit]) ** 2, axis=1)) if hit.any() else 0.0
        centers[hit] = moved[hit]
        counts = new_counts

        if step % steps_per_pass == 0:
            dead = np.flatnonzero(counts == 0)
            if dead.size:
                centers[dead] = x[rng.choice(n, dead.size, replace=True)]
                reseeded += dead.size
                continue
        if shift <= tol and step >= steps_per_pass:
            break

    # Final reseed pass: centers owning no training point are moved onto one.
    labels = _assign(x, centers)
    dead = np.setdiff1d(np.arange(k), np.unique(labels))
    if dead.size:
        centers[dead] = x[rng.choice(n, dead.size, replace=True)]
        reseeded += dead.size

    inertia = _exact_inertia(x, centers)
    if inertia > init_inertia:
        centers, inertia = init_centers, init_inertia
    return KMeansRun(centers=centers, inertia=inertia, init_inertia=init_inertia,
                     steps=step, reseeded=reseeded)


def _best_of_restarts(x: np.ndarray, cfg: QuantizerConfig, rng: np.random.Generator) -> KMeansRun:
    best = None
    for _ in range(cfg.kmeans_restarts):
        run = minibatch_kmeans(x, cfg.c, cfg.kmeans_batch_size, cfg.kmeans_max_iters, rng)
        if best is None or run.inertia < best.inertia:
            best = run
    return best


def _as_keys(K, d: int | None = None) -> np.ndarray:
    K = np.asarray(K, dtype=np.float32)
    if K.ndim != 2:
        raise ShapeError(f"key matrix must be 2-D, got shape {K.shape}")
    if d is not None and K.shape[1] != d:
        raise ShapeError(f"key dimension {K.shape[1]} != codebook d={d}")
    if not np.all(np.isfinite(K)):
        raise NonFiniteError("key matrix contains non-finite values")
    return K


def train_codebook(K_val, cfg: QuantizerConfig, return_runs: bool = False):
    """Learn a ``(g, c, d/g)`` codebook from validation keys.

    Per-group mode clusters each group's sub-vectors independently. Shared mode
    pools every group's sub-vectors into one clustering and copies the result
    into all ``g`` slices.
    """
    K = _as_keys(K_val, cfg.d)
    n = K.shape[0]
    if n < cfg.c:
        raise ConfigError(f"need n_val >= c ({n} < {cfg.c})")
    sub = K.reshape(n, cfg.g, cfg.sub_dim).astype(np.float64)
    rng = np.random.default_rng(cfg.seed)

    runs = []
    if cfg.shared_codebook:
        pooled = sub.reshape(n * cfg.g, cfg.sub_dim)
        run = _best_of_restarts(pooled, cfg, rng)
        runs.append(run)
        cent = np.broadcast_to(run.centers.astype(np.float32), (cfg.g, cfg.c, cfg.sub_dim))
    else:
        cent = np.empty((cfg.g, cfg.c, cfg.sub_dim), dtype=np.float32)
        for i in range(cfg.g):
            run = _best_of_restarts(sub[:, i, :], cfg, rng)
            runs.append(run)
            cent[i] = run.centers.astype(np.float32)

    cb = Codebook(centroids=cent, config=cfg)
    cb = Codebook(centroids=cb.centroids, config=cfg, inertia=quantization_error(K, cb))
    if return_runs:
        return cb, runs
    return cb


# ---------------------------------------------------------------------------
# Encode / decode
# ---------------------------------------------------------------------------

def _group_distances(sub: np.ndarray, cent: np.ndarray) -> np.ndarray:
    """Squared distances ``(rows, g, c)`` in float64, summed over dims in order."""
    dist = np.zeros((sub.shape[0], cent.shape[0], cent.shape[1]), dtype=np.float64)
    for k in range(cent.shape[2]):
        diff = sub[:, :, k, None] - cent[None, :, :, k]
        dist += diff * diff
    return dist


def encode(K, cb: Codebook) -> KeyIndexMatrix:
    """Nearest-centroid index per token and group; ties go to the lowest index."""
    cfg = cb.config
    K = _as_keys(K, cfg.d)
    n = K.shape[0]
    sub = K.reshape(n, cfg.g, cfg.sub_dim).astype(np.float64)
    cent = cb.centroids.astype(np.float64)
    out = np.empty((n, cfg.g), dtype=INDEX_DTYPE)
    rows = max(1, _ENCODE_BUDGET // (cfg.g * cfg.c))
    for s in range(0, n, rows):
        out[s:s + rows] = np.argmin(_group_distances(sub[s:s + rows], cent), axis=2)
    return KeyIndexMatrix(out)


def reconstruct(P: KeyIndexMatrix, cb: Codebook) -> np.ndarray:
    idx = P.indices if isinstance(P, KeyIndexMatrix) else np.asarray(P)
    cfg = cb.config
    if idx.ndim != 2 or idx.shape[1] != cfg.g:
        raise ShapeError(f"index matrix shape {idx.shape} incompatible with g={cfg.g}")
    if idx.size and int(idx.max()) >= cfg.c:
        raise IndexError(f"centroid index {int(idx.max())} out of range for c={cfg.c}")
    groups = np.arange(cfg.g)
    return cb.centroids[groups[None, :], idx.astype(np.int64)].reshape(len(idx), cfg.d)


def quantization_error(K, cb: Codebook) -> float:
    """Mean over tokens of the squared L2 distance to the reconstruction."""
    K = _as_keys(K, cb.config.d)
    rec = reconstruct(encode(K, cb), cb)
    diff = K.astype(np.float64) - rec.astype(np.float64)
    return float(np.mean(np.sum(diff * diff, axis=1)))


# ---------------------------------------------------------------------------
# Codebook files
# ---------------------------------------------------------------------------

CODEBOOK_MAGIC = b"HCCB"
CODEBOOK_VERSION = 1
# version u32 | d u32 | g u32 | c u32 | shared u8 | batch u32 | iters u32 | restarts u32 | seed u64 | inertia f64
_CB_HEADER = struct.Struct("<IIIIBIIIQd")


def save_codebook(path: str | os.PathLike, cb: Codebook) -> None:
    cfg = cb.config
    with open(path, "wb") as fh:
        fh.write(CODEBOOK_MAGIC)
        fh.write(_CB_HEADER.pack(
            CODEBOOK_VERSION, cfg.d, cfg.g, cfg.c, int(cfg.shared_codebook),
            cfg.kmeans_batch_size, cfg.kmeans_max_iters, cfg.kmeans_restarts,
            cfg.seed & ((1 << 64) - 1), cb.inertia))
        write_tensor_to(fh, TensorDump("f32", cb.centroids))


def load_codebook(path: str | os.PathLike) -> Codebook:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CODEBOOK_MAGIC:
            raise BadMagicError(f"bad codebook magic {magic!r}")
        raw = fh.read(_CB_HEADER.size)
        if len(raw) != _CB_HEADER.size:
            raise TruncatedPayloadError("truncated codebook header")
        (version, d, g, c, shared, batch, iters, restarts, seed, inertia) = _CB_HEADER.unpack(raw)
        if version != CODEBOOK_VERSION:
            raise UnsupportedVersionError(f"unsupported codebook version {version}")
        cfg = QuantizerConfig(d=d, g=g, c=c, shared_codebook=bool(shared),
                              kmeans_batch_size=batch, kmeans_max_iters=iters,
                              kmeans_restarts=restarts, seed=seed)
        t = read_tensor_from(fh)
    if t.dtype != "f32":
        raise TensorFormatError("codebook centroids must be f32")
    return Codebook(centroids=t.data, config=cfg, inertia=inertia)
