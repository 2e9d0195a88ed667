from __future__ import annotations

import numpy as np


class RowBuffer:
    """Append-only 2-D row buffer with amortized doubling."""

    def __init__(self, width: int, dtype=np.float32):
        self.width = width
        self._buf = np.empty((16, width), dtype=dtype)
        self.n = 0

    def extend(self, rows: np.ndarray) -> None:
        need = self.n + len(rows)
        if need > len(self._buf):
            buf = np.empty((max(need, 2 * len(self._buf)), self.width), dtype=self._buf.dtype)
            buf[:self.n] = self._buf[:self.n]
            self._buf = buf
        self._buf[self.n:need] = rows
        self.n = need

    def pop_front(self) -> np.ndarray:
        row = self._buf[0].copy()
        self._buf[:self.n - 1] = self._buf[1:self.n]
        self.n -= 1
        return row

    def view(self) -> np.ndarray:
        return self._buf[:self.n]
