"""Closed-form memory, compute and transfer budgets.

All footprints assume 2-byte cache elements and 2-byte centroid indices, so a
quantized key row of ``g`` indices costs ``g / d`` of a full 16-bit key row.
Megabytes are decimal (1 MB = 10**6 bytes).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from fractions import Fraction

from .errors import ConfigError, HCAttnError
from .value_store import WEIGHT_BYTES, TransferLedger

ELEMENT_BYTES = 2
INDEX_BYTES = 2
BYTES_PER_MB = 10**6


@dataclass(frozen=True)
class BudgetReport:
    key_budget_fraction: float
    value_budget_fraction: float
    total_fraction: float
    assumptions: dict = field(default_factory=lambda: {
        "element_bytes": ELEMENT_BYTES, "index_bytes": INDEX_BYTES})

    def as_percent(self) -> tuple[float, float, float]:
        return (100 * self.key_budget_fraction, 100 * self.value_budget_fraction,
                100 * self.total_fraction)


def memory_budget(d: int, g: int | None = None, value_offloaded: bool = False) -> BudgetReport:
    """Device-side KV footprint relative to a full 16-bit cache."""
    if d < 1:
        raise ConfigError("d must be positive")
    if g is None:
        key = 1.0
    else:
        if g < 1 or d % g:
            raise ConfigError(f"g={g} must be a positive divisor of d={d}")
        key = (g * INDEX_BYTES) / (d * ELEMENT_BYTES)
    value = 0.0 if value_offloaded else 1.0
    return BudgetReport(key, value, (key + value) / 2)


@dataclass(frozen=True)
class CostModel:
    """Operation counts for a full ``n``-query pass and for a single query."""

    n: int
    d: int
    c: int
    g: int
    mults_exact: int
    adds_exact: int
    mults_approx: int
    adds_approx: int
    per_query_mults_exact: int
    per_query_adds_exact: int
    per_query_mults_approx: int
    per_query_adds_approx: int

    @property
    def per_query_mult_reduction(self) -> float:
        return self.per_query_mults_exact / self.per_query_mults_approx


def compute_cost(n: int, d: int, c: int, g: int) -> CostModel:
    if min(n, d, c, g) < 1:
        raise ConfigError("n, d, c, g must be positive")
    return CostModel(
        n=n, d=d, c=c, g=g,
        mults_exact=n * n * d, adds_exact=n * n * d,
        mults_approx=n * d * c, adds_approx=n * n * g,
        per_query_mults_exact=n * d, per_query_adds_exact=n * d,
        per_query_mults_approx=d * c, per_query_adds_approx=n * g,
    )


@dataclass(frozen=True)
class CommReport:
    bytes: float

    @property
    def megabytes(self) -> float:
        return self.bytes / BYTES_PER_MB


def comm_overhead(n: float, L: int, H: int, retain_fraction: float,
                  bytes_per_score: float = WEIGHT_BYTES) -> float:
    """Bytes of retained attention weights shipped to the host per decode pass."""
    if not 0.0 <= retain_fraction <= 1.0:
        raise ConfigError(f"retain_fraction must lie in [0, 1], got {retain_fraction}")
    if min(n, L, H, bytes_per_score) < 0:
        raise ConfigError("arguments must be nonnegative")
    # Integer part first keeps the 10**6-token example exact in binary floats.
    return (n * L * H * bytes_per_score) * retain_fraction


@dataclass(frozen=True)
class ReconcileReport:
    measured_bytes: int
    predicted_bytes: float
    deviation_fraction: float
    tolerance_fraction: float
    within_tolerance: bool
    mean_selection_ratio: float
    messages: int

    def as_dict(self) -> dict:
        return asdict(self)


def predicted_weight_bytes(ledger: TransferLedger) -> float:
    """Transfer model evaluated at the ledger's empirical mean selection ratio.

    Every message is one (layer, head) pair of one decode step, so the message
    count stands in for ``L * H * steps``.
    """
    if ledger.messages == 0:
        raise HCAttnError("ledger is empty")
    m = ledger.messages
    exact = comm_overhead(Fraction(ledger.context_tokens, m), 1, m,
                          ledger.ratio_sum / m, WEIGHT_BYTES)
    return float(exact)


def reconcile_ledger(ledger: TransferLedger, predicted: float | None = None,
                     tolerance_fraction: float = 1e-3) -> ReconcileReport:
    if ledger.messages == 0:
        raise HCAttnError("ledger is empty")
    if predicted is None:
        predicted = predicted_weight_bytes(ledger)
    measured = ledger.bytes_weights
    if predicted == 0:
        dev = 0.0 if measured == 0 else float("inf")
    else:
        dev = abs(measured - predicted) / predicted
    return ReconcileReport(
        measured_bytes=measured, predicted_bytes=predicted, deviation_fraction=dev,
        tolerance_fraction=tolerance_fraction, within_tolerance=dev <= tolerance_fraction,
        mean_selection_ratio=ledger.mean_selection_ratio, messages=ledger.messages)
