"""Binary tensor files and deterministic synthetic data.

File layout (all little-endian)::

    offset  size       field
    0       4          magic b"HCAT"
    4       4          version, u32 (currently 1)
    8       1          dtype code, u8 (0=f32, 1=f16, 2=u16)
    9       1          rank, u8 (>= 1)
    10      8*rank     dims, u64 each
    ...     payload    row-major elements
"""

from __future__ import annotations

import hashlib
import io
import os
import struct
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

from . import prng
from .errors import (
    BadMagicError,
    ConfigError,
    NonFiniteError,
    ShapeError,
    TruncatedPayloadError,
    UnsupportedDtypeError,
    UnsupportedVersionError,
)

MAGIC = b"HCAT"
VERSION = 1

DTYPE_CODES = {"f32": 0, "f16": 1, "u16": 2}
_CODE_TO_NAME = {v: k for k, v in DTYPE_CODES.items()}
_NP_DTYPES = {
    "f32": np.dtype("<f4"),
    "f16": np.dtype("<f2"),
    "u16": np.dtype("<u2"),
}


@dataclass(frozen=True, eq=False)
class TensorDump:
    """A typed, shaped, row-major tensor as stored on disk."""

    dtype: str
    data: np.ndarray

    def __post_init__(self):
        if self.dtype not in DTYPE_CODES:
            raise UnsupportedDtypeError(f"unsupported dtype {self.dtype!r}")
        arr = np.ascontiguousarray(self.data, dtype=_NP_DTYPES[self.dtype])
        if arr.ndim < 1 or any(s < 1 for s in arr.shape):
            raise ShapeError(f"every dimension must be >= 1, got shape {arr.shape}")
        object.__setattr__(self, "data", arr)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @classmethod
    def from_array(cls, arr, dtype: str = "f32") -> "TensorDump":
        return cls(dtype=dtype, data=np.asarray(arr))

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        _write(buf, self)
        return buf.getvalue()

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def __eq__(self, other):
        if not isinstance(other, TensorDump):
            return NotImplemented
        return (
            self.dtype == other.dtype
            and self.shape == other.shape
            and self.data.tobytes() == other.data.tobytes()
        )

    def __hash__(self):
        return hash((self.dtype, self.shape, self.data.tobytes()))


def _write(fh: BinaryIO, t: TensorDump) -> None:
    if t.dtype != "u16" and not np.all(np.isfinite(t.data)):
        raise NonFiniteError("tensor contains non-finite elements")
    if len(t.shape) > 255:
        raise ShapeError("rank exceeds 255")
    fh.write(MAGIC)
    fh.write(struct.pack("<IBB", VERSION, DTYPE_CODES[t.dtype], len(t.shape)))
    fh.write(struct.pack(f"<{len(t.shape)}Q", *t.shape))
    fh.write(t.data.tobytes(order="C"))


def _read_exact(fh: BinaryIO, n: int, what: str) -> bytes:
    b = fh.read(n)
    if len(b) != n:
        raise TruncatedPayloadError(f"truncated {what}: wanted {n} bytes, got {len(b)}")
    return b


def _read(fh: BinaryIO) -> TensorDump:
    magic = fh.read(4)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version, code, rank = struct.unpack("<IBB", _read_exact(fh, 6, "header"))
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}")
    if code not in _CODE_TO_NAME:
        raise UnsupportedDtypeError(f"unsupported dtype code {code}")
    if rank < 1:
        raise TruncatedPayloadError("rank 0 tensors are not valid")
    dims = struct.unpack(f"<{rank}Q", _read_exact(fh, 8 * rank, "dims"))
    name = _CODE_TO_NAME[code]
    dt = _NP_DTYPES[name]
    count = int(np.prod(dims, dtype=np.uint64))
    payload = _read_exact(fh, count * dt.itemsize, "payload")
    data = np.frombuffer(payload, dtype=dt).reshape(dims).copy()
    return TensorDump(dtype=name, data=data)


def write_tensor(path: str | os.PathLike, t: TensorDump) -> None:
    """Write ``t`` to ``path``. Non-finite float elements are rejected."""
    with open(path, "wb") as fh:
        _write(fh, t)


def read_tensor(path: str | os.PathLike) -> TensorDump:
    with open(path, "rb") as fh:
        return _read(fh)


def read_tensor_from(fh: BinaryIO) -> TensorDump:
    return _read(fh)


def write_tensor_to(fh: BinaryIO, t: TensorDump) -> None:
    _write(fh, t)


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------

KINDS = ("gaussian", "planted-clusters")

# Stream tags under a spec's seed.
_CENTERS, _ASSIGN, _NOISE, _GAUSS = 1, 2, 3, 4


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters for :func:`gen_synthetic`.

    ``groups`` splits the head dimension for planted clusters: each of the
    ``groups`` column blocks of width ``d // groups`` draws its sub-vector
    from ``clusters`` fixed centers plus ``noise``-scaled Gaussian noise.
    ``center_seed`` lets two draws share centers (e.g. cache and validation
    keys) while sampling tokens independently.
    """

    kind: str
    n: int
    d: int
    seed: int
    clusters: int = 8
    noise: float = 0.0
    groups: int | None = None
    scale: float = 1.0
    center_seed: int | None = None  # planted centers; defaults to ``seed``

    def __post_init__(self):
        if self.kind == "planted":
            object.__setattr__(self, "kind", "planted-clusters")
        if self.kind not in KINDS:
            raise ConfigError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        if self.n < 1 or self.d < 1:
            raise ConfigError("n and d must be >= 1")
        if not self.noise >= 0:
            raise ConfigError("noise standard deviation must be >= 0")
        if self.kind == "planted-clusters":
            g = self.group_count
            if g < 1 or self.d % g:
                raise ConfigError(f"groups={g} must divide d={self.d}")
            if self.clusters < 1:
                raise ConfigError("clusters must be >= 1")
            if self.clusters > self.n:
                raise ConfigError("planted-clusters needs n >= clusters so every center is used")

    @property
    def group_count(self) -> int:
        if self.groups is not None:
            return self.groups
        return max(1, self.d // 2)


def gen_synthetic(spec: SyntheticSpec) -> TensorDump:
    """Generate an ``n x d`` f32 tensor; a pure function of ``spec``.

    For planted clusters, token ``j < clusters`` is pinned to center ``j`` in
    every group so that all centers appear; the remaining tokens draw their
    center uniformly.
    """
    n, d = spec.n, spec.d
    if spec.kind == "gaussian":
        x = prng.normal(prng.substream(spec.seed, _GAUSS), n * d).reshape(n, d)
        return TensorDump("f32", (spec.scale * x).astype(np.float32))

    g = spec.group_count
    sub = d // g
    k = spec.clusters
    out = np.empty((n, d), dtype=np.float64)
    for i in range(g):
        cseed = spec.seed if spec.center_seed is None else spec.center_seed
        centers = prng.normal(prng.substream(cseed, _CENTERS, i), k * sub).reshape(k, sub)
        assign = prng.integers(prng.substream(spec.seed, _ASSIGN, i), k, n)
        assign[:k] = np.arange(k)
        block = centers[assign]
        if spec.noise > 0:
            noise = prng.normal(prng.substream(spec.seed, _NOISE, i), n * sub).reshape(n, sub)
            block = block + spec.noise * noise
        out[:, i * sub:(i + 1) * sub] = block
    return TensorDump("f32", (spec.scale * out).astype(np.float32))


def gen_queries(keys: np.ndarray, m: int, seed: int, gain: float = 1.0,
                noise: float = 1.0) -> np.ndarray:
    """Queries that each point at one randomly chosen key.

    ``q = gain * k_j + noise * N(0, I)`` produces attention distributions with a
    few dominant tokens, the regime where mass-threshold eviction pays off.
    """
    keys = np.asarray(keys, dtype=np.float32)
    n, d = keys.shape
    idx = prng.integers(prng.substream(seed, 1), n, m)
    eps = prng.normal(prng.substream(seed, 2), m * d).reshape(m, d)
    q = gain * keys[idx].astype(np.float64) + noise * eps
    return q.astype(np.float32)
