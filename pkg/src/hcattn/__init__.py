"""Approximate attention over a quantized key cache with host-side values."""

from .accounting import (
    BudgetReport,
    CostModel,
    comm_overhead,
    compute_cost,
    memory_budget,
    predicted_weight_bytes,
    reconcile_ledger,
)
from .engine import (
    DecodeState,
    EngineConfig,
    SessionConfig,
    append_token,
    blockwise_prefill,
    decode_layers,
    decode_step,
    exact_attention,
    prefill,
    relative_error,
    train_layer_codebooks,
)
from .errors import HCAttnError
from .eviction import EvictionSelection, select, selection_ratio
from .quantizer import (
    Codebook,
    KeyIndexMatrix,
    QuantizerConfig,
    encode,
    load_codebook,
    quantization_error,
    reconstruct,
    save_codebook,
    train_codebook,
)
from .score_engine import approx_scores, build_table, normalize, softmax_scaled
from .tensor_io import SyntheticSpec, TensorDump, gen_synthetic, read_tensor, write_tensor
from .value_store import HostChannel, TransferLedger, ValueStore

__version__ = "0.1.0"

__all__ = [
    "BudgetReport",
    "CostModel",
    "comm_overhead",
    "compute_cost",
    "memory_budget",
    "predicted_weight_bytes",
    "reconcile_ledger",
    "DecodeState",
    "EngineConfig",
    "SessionConfig",
    "append_token",
    "blockwise_prefill",
    "decode_layers",
    "decode_step",
    "exact_attention",
    "prefill",
    "relative_error",
    "train_layer_codebooks",
    "HCAttnError",
    "EvictionSelection",
    "select",
    "selection_ratio",
    "Codebook",
    "KeyIndexMatrix",
    "QuantizerConfig",
    "encode",
    "load_codebook",
    "quantization_error",
    "reconstruct",
    "save_codebook",
    "train_codebook",
    "approx_scores",
    "build_table",
    "normalize",
    "softmax_scaled",
    "SyntheticSpec",
    "TensorDump",
    "gen_synthetic",
    "read_tensor",
    "write_tensor",
    "HostChannel",
    "TransferLedger",
    "ValueStore",
]
