"""Portable counter-based random numbers for synthetic tensors.

Every synthetic tensor is derived from SplitMix64 so that other languages
can reproduce the exact bit patterns. The construction:

* ``splitmix64(seed, i)`` is the ``i``-th output (0-based) of the standard
  SplitMix64 generator started at state ``seed``::

      state = seed + (i + 1) * 0x9E3779B97F4A7C15          (mod 2**64)
      z = (state ^ (state >> 30)) * 0xBF58476D1CE4E5B9     (mod 2**64)
      z = (z ^ (z >> 27)) * 0x94D049BB133111EB             (mod 2**64)
      out = z ^ (z >> 31)

* A named sub-stream ``(seed, tag)`` starts at ``splitmix64(seed, tag)``.
  Sub-streams are chained for nested keys, e.g. ``substream(seed, 3, 1)``.
* Uniform doubles in [0, 1): ``(out >> 11) * 2**-53``.
* Standard normals: Box-Muller on consecutive pairs ``(u1, u2)``::

      r = sqrt(-2 * log1p(-u1)); z0 = r * cos(2*pi*u2); z1 = r * sin(2*pi*u2)

  Normals are computed in float64 and rounded to float32 by callers.
"""

from __future__ import annotations

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def splitmix64(seed: int, count: int, start: int = 0) -> np.ndarray:
    """Outputs ``start .. start+count-1`` of SplitMix64 seeded with ``seed``."""
    seed = int(seed) & _MASK
    with np.errstate(over="ignore"):
        i = np.arange(start + 1, start + count + 1, dtype=np.uint64)
        state = np.uint64(seed) + i * GAMMA
        return _mix(state)


def substream(seed: int, *tags: int) -> int:
    """Derive the seed of a nested named stream."""
    s = int(seed) & _MASK
    for tag in tags:
        s = int(splitmix64(s, 1, start=int(tag))[0])
    return s


def uniform(seed: int, count: int) -> np.ndarray:
    bits = splitmix64(seed, count)
    return (bits >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def normal(seed: int, count: int) -> np.ndarray:
    pairs = (count + 1) // 2
    u = uniform(seed, 2 * pairs)
    u1, u2 = u[0::2], u[1::2]
    r = np.sqrt(-2.0 * np.log1p(-u1))
    theta = 2.0 * np.pi * u2
    out = np.empty(2 * pairs, dtype=np.float64)
    out[0::2] = r * np.cos(theta)
    out[1::2] = r * np.sin(theta)
    return out[:count]


def integers(seed: int, high: int, count: int) -> np.ndarray:
    """Integers in ``[0, high)`` as ``floor(u * high)``."""
    return np.minimum((uniform(seed, count) * high).astype(np.int64), high - 1)
