"""End-to-end approximate attention over a quantized, offloaded KV cache.

Per decode step and query head the device side builds the lookup table, sums
table entries into approximate scores (plus exact scores for any unquantized
recent keys), applies one softmax, and selects the top-mass tokens. The
selection travels to the host-side :class:`ValueStore`, which returns the
weighted sum of the selected value rows.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from ._buffers import RowBuffer
from .errors import (
    ConfigError,
    EmptyCacheError,
    NonFiniteError,
    ShapeError,
    UntrainedCodebookError,
)
from .eviction import EvictionSelection, select
from .quantizer import Codebook, QuantizerConfig, encode, train_codebook, INDEX_DTYPE
from .score_engine import ScoreVector, approx_scores, build_table, normalize
from .value_store import ChannelMessage, HostChannel, ValueStore


@dataclass(frozen=True)
class EngineConfig:
    L: int
    H_q: int
    H_kv: int
    d: int
    tau: float = 0.9
    quantizer: QuantizerConfig | None = None
    recent_window: int = 0
    quantize_keys: bool = True
    renormalize: bool = False
    codebook_scope: str = "layer"  # or "head"

    def __post_init__(self):
        if min(self.L, self.H_q, self.H_kv, self.d) < 1:
            raise ConfigError("L, H_q, H_kv and d must be positive")
        if self.H_q % self.H_kv:
            raise ConfigError(f"H_kv={self.H_kv} must divide H_q={self.H_q}")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError(f"tau must lie in (0, 1], got {self.tau}")
        if self.recent_window < 0:
            raise ConfigError("recent_window must be >= 0")
        if self.codebook_scope not in ("layer", "head"):
            raise ConfigError("codebook_scope must be 'layer' or 'head'")
        if self.quantize_keys:
            if self.quantizer is None:
                raise ConfigError("quantize_keys requires a QuantizerConfig")
            if self.quantizer.d != self.d:
                raise ConfigError(f"quantizer d={self.quantizer.d} != engine d={self.d}")

    def kv_head(self, h: int) -> int:
        return h * self.H_kv // self.H_q


@dataclass
class _HeadCache:
    """Device-resident key state for one (layer, kv-head)."""

    index_rows: RowBuffer | None
    recent: RowBuffer
    raw_keys: RowBuffer | None = None  # VO-only mode

    @property
    def n(self) -> int:
        if self.raw_keys is not None:
            return self.raw_keys.n
        return self.index_rows.n + self.recent.n


@dataclass
class DecodeState:
    cfg: EngineConfig
    codebooks: dict[tuple[int, int], Codebook]
    heads: dict[tuple[int, int], _HeadCache]
    store: ValueStore
    step: int = 0
    ratios: dict[int, list[float]] = field(default_factory=dict)

    def n_tokens(self, layer: int, kv_head: int) -> int:
        return self.heads[(layer, kv_head)].n

    def index_matrix(self, layer: int, kv_head: int) -> np.ndarray:
        rows = self.heads[(layer, kv_head)].index_rows
        return rows.view().copy() if rows is not None else np.empty((0, 0), INDEX_DTYPE)

    def check_invariant(self) -> None:
        for (l, h), hc in self.heads.items():
            if hc.n != self.store.rows(l, h):
                raise AssertionError(
                    f"({l},{h}): {hc.n} key rows vs {self.store.rows(l, h)} value rows")

    def mean_selection_ratio(self, layer: int) -> float:
        r = self.ratios.get(layer, [])
        return float(np.mean(r)) if r else float("nan")


# ---------------------------------------------------------------------------
# Codebook scope helpers
# ---------------------------------------------------------------------------

def train_layer_codebooks(keys_val, cfg: EngineConfig) -> list:
    """Train codebooks from validation keys shaped ``(L, H_kv, n_val, d)``.

    ``codebook_scope='layer'`` pools a layer's kv-heads into one codebook;
    ``'head'`` trains one per kv-head. Seeds are offset per layer/head.
    """
    if cfg.quantizer is None:
        raise ConfigError("no quantizer config")
    keys_val = np.asarray(keys_val, dtype=np.float32)
    if keys_val.ndim != 4 or keys_val.shape[:2] != (cfg.L, cfg.H_kv) or keys_val.shape[3] != cfg.d:
        raise ShapeError(f"validation keys shape {keys_val.shape} incompatible with config")
    out = []
    for l in range(cfg.L):
        if cfg.codebook_scope == "layer":
            qc = replace(cfg.quantizer, seed=cfg.quantizer.seed + l)
            out.append(train_codebook(keys_val[l].reshape(-1, cfg.d), qc))
        else:
            per = []
            for h in range(cfg.H_kv):
                qc = replace(cfg.quantizer, seed=cfg.quantizer.seed + l * cfg.H_kv + h)
                per.append(train_codebook(keys_val[l, h], qc))
            out.append(per)
    return out


def _resolve_codebooks(codebooks, cfg: EngineConfig) -> dict[tuple[int, int], Codebook]:
    if not cfg.quantize_keys:
        return {}
    if codebooks is None:
        raise UntrainedCodebookError("quantize_keys=True but no codebooks were supplied")
    if isinstance(codebooks, Codebook):
        codebooks = [codebooks] * cfg.L
    if len(codebooks) != cfg.L:
        raise ConfigError(f"expected {cfg.L} per-layer codebook entries, got {len(codebooks)}")
    out = {}
    for l, entry in enumerate(codebooks):
        per = [entry] * cfg.H_kv if isinstance(entry, Codebook) else list(entry)
        if len(per) != cfg.H_kv:
            raise ConfigError(f"layer {l}: expected {cfg.H_kv} codebooks, got {len(per)}")
        for h, cb in enumerate(per):
            if not isinstance(cb, Codebook):
                raise UntrainedCodebookError(f"layer {l} head {h}: not a trained codebook")
            qc = cb.config
            if (qc.d, qc.g, qc.c) != (cfg.quantizer.d, cfg.quantizer.g, cfg.quantizer.c):
                raise ConfigError(
                    f"codebook (d,g,c)={(qc.d, qc.g, qc.c)} does not match quantizer config")
            out[(l, h)] = cb
    return out


# ---------------------------------------------------------------------------
# Cache construction and growth
# ---------------------------------------------------------------------------

def _check_vec(x, d: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float32)
    if x.shape != (d,):
        raise ShapeError(f"{what} shape {x.shape} != ({d},)")
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(f"{what} contains non-finite values")
    return x


def prefill(keys, values, cfg: EngineConfig, codebooks=None) -> DecodeState:
    """Build a decode state from ``(L, H_kv, n, d)`` key and value caches.

    All but the newest ``recent_window`` keys per head are encoded; values go to
    the host store.
    """
    keys = np.asarray(keys, dtype=np.float32)
    values = np.asarray(values, dtype=np.float32)
    if keys.ndim != 4 or keys.shape[:2] != (cfg.L, cfg.H_kv) or keys.shape[3] != cfg.d:
        raise ShapeError(f"keys shape {keys.shape} incompatible with (L={cfg.L}, H_kv={cfg.H_kv}, n, d={cfg.d})")
    if values.shape != keys.shape:
        raise ShapeError(f"values shape {values.shape} != keys shape {keys.shape}")
    if not (np.all(np.isfinite(keys)) and np.all(np.isfinite(values))):
        raise NonFiniteError("keys/values contain non-finite values")

    cbs = _resolve_codebooks(codebooks, cfg)
    store = ValueStore(cfg.L, cfg.H_kv, cfg.d)
    n = keys.shape[2]
    n_enc = max(0, n - cfg.recent_window)
    heads = {}
    for l in range(cfg.L):
        for h in range(cfg.H_kv):
            recent = RowBuffer(cfg.d)
            if cfg.quantize_keys:
                idx_rows = RowBuffer(cfg.quantizer.g, INDEX_DTYPE)
                if n_enc:
                    idx_rows.extend(encode(keys[l, h, :n_enc], cbs[(l, h)]).indices)
                recent.extend(keys[l, h, n_enc:])
                hc = _HeadCache(index_rows=idx_rows, recent=recent)
            else:
                raw = RowBuffer(cfg.d)
                raw.extend(keys[l, h])
                hc = _HeadCache(index_rows=None, recent=recent, raw_keys=raw)
            heads[(l, h)] = hc
            store.offload(l, h, values[l, h])
    state = DecodeState(cfg=cfg, codebooks=cbs, heads=heads, store=store)
    return state


def append_token(state: DecodeState, layer: int, kv_head: int, k, v) -> None:
    cfg = state.cfg
    k = _check_vec(k, cfg.d, "key")
    v = _check_vec(v, cfg.d, "value")
    hc = state.heads[(layer, kv_head)]
    if hc.raw_keys is not None:
        hc.raw_keys.extend(k[None, :])
    elif cfg.recent_window == 0:
        hc.index_rows.extend(encode(k[None, :], state.codebooks[(layer, kv_head)]).indices)
    else:
        hc.recent.extend(k[None, :])
        if hc.recent.n > cfg.recent_window:
            oldest = hc.recent.pop_front()
            hc.index_rows.extend(encode(oldest[None, :], state.codebooks[(layer, kv_head)]).indices)
    state.store.append_value(layer, kv_head, v)


# ---------------------------------------------------------------------------
# Device side: scores and selection
# ---------------------------------------------------------------------------

def device_scores(state: DecodeState, layer: int, kv_head: int, q: np.ndarray) -> ScoreVector:
    """Raw scores for one query against one kv-head, oldest token first."""
    hc = state.heads[(layer, kv_head)]
    if hc.n == 0:
        raise EmptyCacheError(f"layer {layer} kv-head {kv_head} holds no tokens")
    if hc.raw_keys is not None:
        return ScoreVector(hc.raw_keys.view() @ q)
    parts = []
    if hc.index_rows.n:
        cb = state.codebooks.get((layer, kv_head))
        if cb is None:
            raise UntrainedCodebookError(f"no codebook for layer {layer} kv-head {kv_head}")
        parts.append(approx_scores(build_table(q, cb), hc.index_rows.view()).scores)
    if hc.recent.n:
        parts.append(hc.recent.view() @ q)
    scores = parts[0] if len(parts) == 1 else np.concatenate(parts)
    return ScoreVector(scores.astype(np.float32, copy=False))


def device_select(state: DecodeState, layer: int, h: int, q) -> tuple[int, EvictionSelection]:
    cfg = state.cfg
    q = _check_vec(q, cfg.d, "query")
    kvh = cfg.kv_head(h)
    weights = normalize(device_scores(state, layer, kvh, q), cfg.d)
    sel = select(weights, cfg.tau)
    if cfg.renormalize:
        w = sel.weights / sel.weights.sum(dtype=np.float64)
        sel = EvictionSelection(tau=sel.tau, indices=sel.indices,
                                weights=w.astype(sel.weights.dtype), n=sel.n)
    state.ratios.setdefault(layer, []).append(sel.k_star / sel.n)
    return kvh, sel


def _check_queries(q, cfg: EngineConfig) -> np.ndarray:
    q = np.asarray(q, dtype=np.float32)
    if q.shape != (cfg.H_q, cfg.d):
        raise ShapeError(f"queries shape {q.shape} != ({cfg.H_q}, {cfg.d})")
    return q


def decode_step(state: DecodeState, q, layer: int) -> np.ndarray:
    """Attention outputs ``(H_q, d)`` for one layer, computed synchronously."""
    cfg = state.cfg
    q = _check_queries(q, cfg)
    out = np.empty((cfg.H_q, cfg.d), dtype=np.float32)
    for h in range(cfg.H_q):
        kvh, sel = device_select(state, layer, h, q[h])
        out[h] = state.store.gather_weighted_sum(layer, kvh, ChannelMessage.from_selection(layer, kvh, sel))
    state.step += 1
    return out


def decode_layers(state: DecodeState, qs, overlap: bool = True,
                  channel: HostChannel | None = None) -> np.ndarray:
    """One decode step across all layers; ``qs`` is ``(L, H_q, d)``.

    With ``overlap`` the selections of layer ``l`` are handed to a host worker
    and the device side moves on to layer ``l + 1`` without waiting; replies
    are collected at the end. The arithmetic is the same in both modes, so the
    outputs are bit-identical.
    """
    cfg = state.cfg
    qs = np.asarray(qs, dtype=np.float32)
    if qs.shape != (cfg.L, cfg.H_q, cfg.d):
        raise ShapeError(f"queries shape {qs.shape} != ({cfg.L}, {cfg.H_q}, {cfg.d})")
    if not overlap:
        return np.stack([decode_step(state, qs[l], l) for l in range(cfg.L)])

    own = channel is None
    channel = channel or HostChannel(state.store)
    try:
        futures = []
        for l in range(cfg.L):
            for h in range(cfg.H_q):
                kvh, sel = device_select(state, l, h, qs[l, h])
                futures.append(channel.send(ChannelMessage.from_selection(l, kvh, sel)))
            state.step += 1
        flat = [f.result() for f in futures]
    finally:
        if own:
            channel.close()
    return np.asarray(flat, dtype=np.float32).reshape(cfg.L, cfg.H_q, cfg.d)


# ---------------------------------------------------------------------------
# Reference attention
# ---------------------------------------------------------------------------

def exact_attention(q, K, V) -> np.ndarray:
    """Dense ``softmax(q K^T / sqrt(d)) V`` in float32."""
    q = np.asarray(q, dtype=np.float32)
    K = np.asarray(K, dtype=np.float32)
    V = np.asarray(V, dtype=np.float32)
    if K.ndim != 2 or q.shape != (K.shape[1],) or V.ndim != 2 or V.shape[0] != K.shape[0]:
        raise ShapeError(f"shape mismatch: q {q.shape}, K {K.shape}, V {V.shape}")
    if K.shape[0] == 0:
        raise EmptyCacheError("empty key matrix")
    z = K @ q
    e = np.exp((z - z.max()) / np.float32(math.sqrt(K.shape[1])))
    return (e / e.sum(dtype=np.float32)) @ V


def exact_attention_gqa(q, keys, values, layer: int, cfg: EngineConfig) -> np.ndarray:
    """Reference outputs ``(H_q, d)`` against full caches ``(L, H_kv, n, d)``."""
    q = _check_queries(q, cfg)
    return np.stack([exact_attention(q[h], keys[layer, cfg.kv_head(h)], values[layer, cfg.kv_head(h)])
                     for h in range(cfg.H_q)])


def relative_error(y, y_ref) -> float:
    y = np.asarray(y, dtype=np.float64)
    y_ref = np.asarray(y_ref, dtype=np.float64)
    denom = np.linalg.norm(y_ref)
    return float(np.linalg.norm(y - y_ref) / denom) if denom > 0 else float(np.linalg.norm(y))


def blockwise_prefill(keys, values, q_sequence, block_size: int, cfg: EngineConfig | None = None) -> np.ndarray:
    """Prefill outputs where each block sees only the anchor block and itself.

    Token ``t`` in block ``b`` attends causally to block 0 and to the tokens of
    block ``b`` up to ``t``. Block 0 is plain causal attention.
    """
    K = np.asarray(keys, dtype=np.float32)
    V = np.asarray(values, dtype=np.float32)
    Q = np.asarray(q_sequence, dtype=np.float32)
    if K.ndim != 2 or V.shape != K.shape or Q.shape != K.shape:
        raise ShapeError(f"keys/values/queries must share shape (n, d): {K.shape}, {V.shape}, {Q.shape}")
    if cfg is not None and K.shape[1] != cfg.d:
        raise ShapeError(f"head dimension {K.shape[1]} != cfg.d={cfg.d}")
    if block_size < 1:
        raise ConfigError("block_size must be >= 1")
    n, d = K.shape
    scale = np.float32(math.sqrt(d))
    out = np.empty_like(Q)
    B = block_size
    for start in range(0, n, B):
        stop = min(start + B, n)
        q = Q[start:stop]
        if start == 0:
            ctx_k, ctx_v = K[:stop], V[:stop]
            anchor = 0
        else:
            anchor = min(B, n)
            ctx_k = np.concatenate([K[:anchor], K[start:stop]])
            ctx_v = np.concatenate([V[:anchor], V[start:stop]])
        z = (q @ ctx_k.T) / scale
        # causal mask within the current block
        local = np.arange(stop - start)
        mask = local[None, :] > local[:, None]
        z[:, anchor:][mask] = -np.inf
        z -= z.max(axis=1, keepdims=True)
        e = np.exp(z)
        out[start:stop] = (e / e.sum(axis=1, keepdims=True)) @ ctx_v
    return out


# ---------------------------------------------------------------------------
# Session config files
# ---------------------------------------------------------------------------

_ENGINE_KEYS = {"L", "H_q", "H_kv", "d", "tau", "recent_window", "quantize_keys",
                "renormalize", "codebook_scope"}
_QUANT_KEYS = {"g", "c", "shared_codebook", "kmeans_batch_size", "kmeans_max_iters",
               "kmeans_restarts", "seed"}


@dataclass
class SessionConfig:
    """A YAML session file.

    Schema::

        keys: path/to/keys.hcat          # (L, H_kv, n, d) f32
        values: path/to/values.hcat      # (L, H_kv, n, d) f32
        queries: path/to/queries.hcat    # (L, H_q, m, d) f32
        codebooks: [cb0.hccb, ...]       # optional: one path, or one per layer
        engine: {tau: 0.9, recent_window: 0, quantize_keys: true, renormalize: false,
                 codebook_scope: layer, H_q: 4}
        quantizer: {g: 16, c: 256, shared_codebook: false, kmeans_batch_size: 10000,
                    kmeans_max_iters: 200, kmeans_restarts: 3, seed: 0}

    Relative paths resolve against the config file's directory.
    """

    keys: str | None = None
    values: str | None = None
    queries: str | None = None
    codebooks: list[str] = field(default_factory=list)
    engine: dict = field(default_factory=dict)
    quantizer: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "SessionConfig":
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
        if not isinstance(raw, dict):
            raise ConfigError("session config must be a mapping")
        unknown = set(raw) - {"keys", "values", "queries", "codebooks", "engine", "quantizer"}
        if unknown:
            raise ConfigError(f"unknown session config keys: {sorted(unknown)}")
        base = os.path.dirname(os.path.abspath(path))

        def rel(p):
            return p if p is None or os.path.isabs(p) else os.path.join(base, p)

        cbs = raw.get("codebooks") or []
        if isinstance(cbs, str):
            cbs = [cbs]
        engine = dict(raw.get("engine") or {})
        quant = dict(raw.get("quantizer") or {})
        if set(engine) - _ENGINE_KEYS:
            raise ConfigError(f"unknown engine keys: {sorted(set(engine) - _ENGINE_KEYS)}")
        if set(quant) - _QUANT_KEYS:
            raise ConfigError(f"unknown quantizer keys: {sorted(set(quant) - _QUANT_KEYS)}")
        return cls(keys=rel(raw.get("keys")), values=rel(raw.get("values")),
                   queries=rel(raw.get("queries")), codebooks=[rel(p) for p in cbs],
                   engine=engine, quantizer=quant)
