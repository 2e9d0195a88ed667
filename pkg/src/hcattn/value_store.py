"""Host-side value cache and the message channel that feeds it.

The device side never touches values. It sends an :class:`EvictionSelection`
per (layer, head) and receives the ``d``-vector ``sum_i w_i * V_i`` back.

Channel message (in memory)::

    {layer: u16, head: u16, k_star: u32, indices: u32[k_star], weights: f32[k_star]}
    -> reply {output: f32[d]}

For the ledger each weight is billed at 2 bytes (16-bit deployment) and each
index at ``INDEX_BYTES``; both are tracked separately.
"""

from __future__ import annotations

import queue
from fractions import Fraction
import threading
from concurrent.futures import Future
from dataclasses import dataclass

import numpy as np

from ._buffers import RowBuffer
from .errors import ConfigError, NonFiniteError, ShapeError
from .eviction import EvictionSelection

WEIGHT_BYTES = 2
INDEX_BYTES = 4


@dataclass
class TransferLedger:
    bytes_weights: int = 0
    bytes_indices: int = 0
    messages: int = 0
    selected_tokens: int = 0
    context_tokens: int = 0
    ratio_sum: Fraction = Fraction(0)  # exact, so constant ratios reconcile exactly

    def record(self, k_star: int, n: int) -> None:
        self.bytes_weights += WEIGHT_BYTES * k_star
        self.bytes_indices += INDEX_BYTES * k_star
        self.messages += 1
        self.selected_tokens += k_star
        self.context_tokens += n
        self.ratio_sum += Fraction(k_star, n)

    @property
    def mean_selection_ratio(self) -> float:
        return float(self.ratio_sum / self.messages) if self.messages else float("nan")

    @property
    def mean_context_length(self) -> float:
        return self.context_tokens / self.messages if self.messages else float("nan")

    def snapshot(self) -> "TransferLedger":
        return TransferLedger(**self.__dict__)


@dataclass(frozen=True, eq=False)
class ChannelMessage:
    layer: int
    head: int
    indices: np.ndarray  # u32
    weights: np.ndarray  # f32
    n: int

    @property
    def k_star(self) -> int:
        return len(self.indices)

    @classmethod
    def from_selection(cls, layer: int, head: int, sel: EvictionSelection) -> "ChannelMessage":
        return cls(layer=layer, head=head,
                   indices=np.asarray(sel.indices, dtype=np.uint32),
                   weights=np.asarray(sel.weights, dtype=np.float32),
                   n=sel.n)


class ValueStore:
    """Offloaded value matrices addressed by ``(layer, kv_head)``."""

    def __init__(self, L: int, H: int, d: int):
        if min(L, H, d) < 1:
            raise ConfigError("L, H and d must be positive")
        self.L, self.H, self.d = L, H, d
        self._rows = {(l, h): RowBuffer(d) for l in range(L) for h in range(H)}
        self._locks = {key: threading.Lock() for key in self._rows}
        self._ledger_lock = threading.Lock()
        self.ledger = TransferLedger()

    def _key(self, layer: int, head: int) -> tuple[int, int]:
        if not (0 <= layer < self.L and 0 <= head < self.H):
            raise IndexError(f"(layer={layer}, head={head}) outside ({self.L}, {self.H})")
        return layer, head

    def offload(self, layer: int, head: int, V) -> None:
        key = self._key(layer, head)
        V = np.asarray(V, dtype=np.float32)
        if V.ndim != 2 or V.shape[1] != self.d:
            raise ShapeError(f"value block shape {V.shape} incompatible with d={self.d}")
        if not np.all(np.isfinite(V)):
            raise NonFiniteError("values must be finite")
        with self._locks[key]:
            self._rows[key].extend(V)

    def append_value(self, layer: int, head: int, v) -> None:
        v = np.asarray(v, dtype=np.float32)
        if v.shape != (self.d,):
            raise ShapeError(f"value vector shape {v.shape} != ({self.d},)")
        self.offload(layer, head, v[None, :])

    def rows(self, layer: int, head: int) -> int:
        return self._rows[self._key(layer, head)].n

    def values(self, layer: int, head: int) -> np.ndarray:
        """Read-only copy of the stored matrix (diagnostics and tests)."""
        return self._rows[self._key(layer, head)].view().copy()

    def gather_weighted_sum(self, layer: int, head: int, sel: EvictionSelection | ChannelMessage) -> np.ndarray:
        """Weighted sum of the selected rows, accumulated in selection order."""
        key = self._key(layer, head)
        idx = np.asarray(sel.indices, dtype=np.int64)
        w = np.asarray(sel.weights, dtype=np.float32)
        if idx.size == 0:
            raise ShapeError("selection is empty")
        if idx.shape != w.shape:
            raise ShapeError("indices and weights differ in length")
        with self._locks[key]:
            stored = self._rows[key]
            if idx.min() < 0 or idx.max() >= stored.n:
                raise IndexError(f"selection index out of range for {stored.n} stored rows")
            rows = stored.view()[idx].astype(np.float64)
        # Axis-0 reduction adds rows one after another, in selection order.
        out = np.add.reduce(w.astype(np.float64)[:, None] * rows, axis=0).astype(np.float32)
        with self._ledger_lock:
            self.ledger.record(len(idx), sel.n)
        return out


class HostChannel:
    """Single host worker draining selection messages in FIFO order.

    Messages for one (layer, head) are therefore processed in send order, and
    the device thread only blocks when it collects a reply.
    """

    _STOP = object()

    def __init__(self, store: ValueStore):
        self.store = store
        self._q: queue.Queue = queue.Queue()
        self._thread = threading.Thread(target=self._run, name="hcattn-host", daemon=True)
        self._thread.start()

    def _run(self):
        while True:
            item = self._q.get()
            if item is self._STOP:
                return
            msg, fut = item
            if not fut.set_running_or_notify_cancel():
                continue
            try:
                fut.set_result(self.store.gather_weighted_sum(msg.layer, msg.head, msg))
            except BaseException as exc:  # forwarded to the caller
                fut.set_exception(exc)

    def send(self, msg: ChannelMessage) -> Future:
        fut: Future = Future()
        self._q.put((msg, fut))
        return fut

    def close(self):
        self._q.put(self._STOP)
        self._thread.join()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
