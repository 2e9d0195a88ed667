"""Command-line driver: gen, train, run, sweep, report.

Exit codes: 0 success, 1 runtime error, 2 usage error.

Machine-readable output (``--format kv``) is one ``key=value`` pair per line;
keys match ``[A-Za-z0-9_.]+`` (dots separate namespaces, table rows use
``row.<i>.<column>``), values run to end of line, and ``#`` starts a comment
line. Text output is for humans and not meant to be parsed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace

import numpy as np

from . import prng
from .accounting import (
    comm_overhead,
    compute_cost,
    memory_budget,
    reconcile_ledger,
)
from .engine import (
    EngineConfig,
    SessionConfig,
    decode_layers,
    exact_attention_gqa,
    prefill,
    relative_error,
    train_layer_codebooks,
)
from .errors import ConfigError, HCAttnError
from .quantizer import (
    MAX_CENTROIDS,
    QuantizerConfig,
    load_codebook,
    quantization_error,
    save_codebook,
    train_codebook,
)
from .tensor_io import (
    SyntheticSpec,
    TensorDump,
    gen_queries,
    gen_synthetic,
    read_tensor,
)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return "none"
    return str(v)


def _flatten(prefix: str, obj, out: list):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(obj, (list, tuple)) and obj and isinstance(obj[0], dict):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}.{i}", v, out)
    elif isinstance(obj, (list, tuple)):
        out.append((prefix, ",".join(_fmt(x) for x in obj)))
    else:
        out.append((prefix, _fmt(obj)))


def emit(record: dict, fmt: str, stream=None, table: list[dict] | None = None,
         columns: list[str] | None = None):
    stream = stream or sys.stdout
    if fmt == "kv":
        pairs: list = []
        _flatten("", record, pairs)
        if table is not None:
            _flatten("row", table, pairs)
        for k, v in pairs:
            print(f"{k}={v}", file=stream)
        return
    pairs = []
    _flatten("", record, pairs)
    width = max((len(k) for k, _ in pairs), default=0)
    for k, v in pairs:
        print(f"{k:<{width}}  {v}", file=stream)
    if table:
        cols = columns or list(table[0])
        cells = [[_cell(r[c]) for c in cols] for r in table]
        widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
        print(file=stream)
        print("  ".join(c.rjust(w) for c, w in zip(cols, widths)), file=stream)
        for row in cells:
            print("  ".join(v.rjust(w) for v, w in zip(row, widths)), file=stream)


def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return _fmt(v)


def parse_kv(text: str) -> dict[str, str]:
    """Parse ``--format kv`` output back into a flat dict."""
    out = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"malformed line: {line!r}")
        out[key] = value
    return out


def _atomic_write(path: str, data: bytes):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    with os.fdopen(fd, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# argument types
# ---------------------------------------------------------------------------

def _centroids(s: str) -> int:
    c = int(s)
    if not 1 <= c <= MAX_CENTROIDS:
        raise argparse.ArgumentTypeError(f"c must lie in [1, {MAX_CENTROIDS}] (16-bit indices)")
    return c


def _positive(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _tau(s: str) -> float:
    v = float(s)
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError("tau must lie in (0, 1]")
    return v


def _list_of(conv):
    def parse(s: str):
        try:
            vals = [conv(x) for x in s.split(",") if x.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc))
        if not vals:
            raise argparse.ArgumentTypeError("list must be non-empty")
        return vals
    return parse


# ---------------------------------------------------------------------------
# data generation shared by gen / sweep
# ---------------------------------------------------------------------------

def _gen_kv(kind, n, d, clusters, noise, g, seed, L, H_kv, stream_tag, draw=0):
    out = np.empty((L, H_kv, n, d), dtype=np.float32)
    for l in range(L):
        for h in range(H_kv):
            centers = prng.substream(seed, stream_tag, l, h)
            spec = SyntheticSpec(kind=kind, n=n, d=d, seed=prng.substream(centers, draw),
                                 clusters=clusters, noise=noise, groups=g, center_seed=centers)
            out[l, h] = gen_synthetic(spec).data
    return out


def generate_dataset(kind, n, d, seed, clusters=8, noise=0.0, g=None, L=1, H_kv=1, H_q=1,
                     m=16, query_gain=1.0, query_noise=1.0, draw=0):
    """Keys, values ``(L, H_kv, n, d)`` and queries ``(L, H_q, m, d)``.

    Queries of head ``h`` point at keys of its kv-head. Sub-stream tags under
    ``seed``: keys 10, values 11, queries 12, each then keyed by (layer, head).
    Different ``draw`` values share planted centers but sample tokens anew,
    which is how validation keys are produced.
    """
    keys = _gen_kv(kind, n, d, clusters, noise, g, seed, L, H_kv, 10, draw)
    values = _gen_kv("gaussian", n, d, clusters, 0.0, None, seed, L, H_kv, 11, draw)
    queries = np.empty((L, H_q, m, d), dtype=np.float32)
    for l in range(L):
        for h in range(H_q):
            kvh = h * H_kv // H_q
            queries[l, h] = gen_queries(keys[l, kvh], m, prng.substream(seed, 12, l, h),
                                        gain=query_gain, noise=query_noise)
    return keys, values, queries


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    keys, values, queries = generate_dataset(
        args.kind, args.n, args.d, args.seed, clusters=args.clusters, noise=args.noise,
        g=args.g, L=args.layers, H_kv=args.kv_heads, H_q=args.q_heads, m=args.queries,
        query_gain=args.query_gain, query_noise=args.query_noise)
    paths = {}
    for name, arr in (("keys", keys), ("values", values), ("queries", queries)):
        path = os.path.join(args.out, f"{name}.hcat")
        _atomic_write(path, TensorDump("f32", arr).to_bytes())
        paths[name] = path
    emit({"files": paths, "shape": {"keys": list(keys.shape), "queries": list(queries.shape)}},
         args.format)
    return 0


def _quantizer_from_args(args, d: int) -> QuantizerConfig:
    return QuantizerConfig(d=d, g=args.g, c=args.c, shared_codebook=args.shared,
                           kmeans_batch_size=args.batch_size, kmeans_max_iters=args.max_iters,
                           kmeans_restarts=args.restarts, seed=args.seed)


def cmd_train(args) -> int:
    t = read_tensor(args.keys)
    keys = t.data.astype(np.float32)
    if args.layer is not None:
        if keys.ndim != 4:
            raise UsageError("--layer needs (L, H, n, d) keys")
        keys = keys[args.layer]
    keys = keys.reshape(-1, keys.shape[-1])
    cfg = _quantizer_from_args(args, keys.shape[1])
    cb = train_codebook(keys, cfg)
    save_codebook(args.out, cb)
    emit({"codebook": args.out, "config": asdict(cfg), "inertia": cb.inertia,
          "n_val": keys.shape[0]}, args.format)
    return 0


def _load_run_inputs(args):
    sess = SessionConfig.load(args.config) if args.config else SessionConfig()
    keys_p = args.keys or sess.keys
    values_p = args.values or sess.values
    queries_p = args.queries or sess.queries
    if not (keys_p and values_p and queries_p):
        raise UsageError("run needs --keys, --values and --queries (or a --config naming them)")
    keys = read_tensor(keys_p).data.astype(np.float32)
    values = read_tensor(values_p).data.astype(np.float32)
    queries = read_tensor(queries_p).data.astype(np.float32)
    if keys.ndim == 2:
        keys, values = keys[None, None], values[None, None]
    if queries.ndim == 2:
        queries = queries[None, None]
    return sess, keys, values, queries


def _engine_cfg(args, sess: SessionConfig, keys, queries) -> EngineConfig:
    L, H_kv, _, d = keys.shape
    e = dict(sess.engine)
    q = dict(sess.quantizer)
    # Flags override the file; unset flags fall back to file, then defaults.
    for flag, key in (("tau", "tau"), ("recent_window", "recent_window"), ("scope", "codebook_scope")):
        if getattr(args, flag) is not None:
            e[key] = getattr(args, flag)
    if args.no_quantize:
        e["quantize_keys"] = False
    if args.renormalize:
        e["renormalize"] = True
    for flag, key in (("g", "g"), ("c", "c"), ("batch_size", "kmeans_batch_size"),
                      ("max_iters", "kmeans_max_iters"), ("restarts", "kmeans_restarts"),
                      ("seed", "seed")):
        if getattr(args, flag) is not None:
            q[key] = getattr(args, flag)
    if args.shared:
        q["shared_codebook"] = True
    quantize = e.get("quantize_keys", True)
    qcfg = None
    if quantize:
        qcfg = QuantizerConfig(d=d, g=q.get("g", max(1, d // 4)), c=q.get("c", 256),
                               shared_codebook=q.get("shared_codebook", False),
                               kmeans_batch_size=q.get("kmeans_batch_size", 10_000),
                               kmeans_max_iters=q.get("kmeans_max_iters", 200),
                               kmeans_restarts=q.get("kmeans_restarts", 3),
                               seed=q.get("seed", 0))
    H_q = queries.shape[1]
    if e.get("H_q", H_q) != H_q or e.get("L", L) != L or e.get("H_kv", H_kv) != H_kv or e.get("d", d) != d:
        raise ConfigError("engine dimensions in the config disagree with the tensor shapes")
    return EngineConfig(L=L, H_q=H_q, H_kv=H_kv, d=d, tau=e.get("tau", 0.9), quantizer=qcfg,
                        recent_window=e.get("recent_window", 0), quantize_keys=quantize,
                        renormalize=e.get("renormalize", False),
                        codebook_scope=e.get("codebook_scope", "layer"))


def run_session(keys, values, queries, cfg: EngineConfig, codebooks=None, overlap=True):
    """Decode every query slot against a fixed cache and compare with the oracle."""
    L, H_q, m, d = queries.shape
    state = prefill(keys, values, cfg, codebooks)
    outputs = np.empty_like(queries)
    errs = np.empty((L, H_q, m))
    for s in range(m):
        y = decode_layers(state, queries[:, :, s], overlap=overlap)
        outputs[:, :, s] = y
        for l in range(L):
            ref = exact_attention_gqa(queries[l, :, s], keys, values, l, cfg)
            for h in range(H_q):
                errs[l, h, s] = relative_error(y[l, h], ref[h])
    return state, outputs, errs


def cmd_run(args) -> int:
    sess, keys, values, queries = _load_run_inputs(args)
    cfg = _engine_cfg(args, sess, keys, queries)
    codebooks = None
    if cfg.quantize_keys:
        paths = args.codebook or sess.codebooks
        if paths:
            cbs = [load_codebook(p) for p in paths]
            if len(cbs) == 1:
                cbs = cbs * cfg.L
            codebooks = cbs
            cfg = replace(cfg, quantizer=cbs[0].config)
        else:
            val = keys
            if args.val_keys:
                val = read_tensor(args.val_keys).data.astype(np.float32)
            codebooks = train_layer_codebooks(val, cfg)
    state, outputs, errs = run_session(keys, values, queries, cfg, codebooks, overlap=not args.sequential)
    rec = reconcile_ledger(state.store.ledger, tolerance_fraction=args.tolerance)
    g = cfg.quantizer.g if cfg.quantize_keys else None
    budget = memory_budget(cfg.d, g, value_offloaded=True)
    report = {
        "config": _cfg_dict(cfg),
        "inputs": {"n": keys.shape[2], "queries_per_head": queries.shape[2]},
        "error": {"max_relative": float(errs.max()), "mean_relative": float(errs.mean())},
        "selection_ratio": {f"layer{l}": state.mean_selection_ratio(l) for l in range(cfg.L)},
        "ledger": {"bytes_weights": state.store.ledger.bytes_weights,
                   "bytes_indices": state.store.ledger.bytes_indices,
                   "messages": state.store.ledger.messages},
        "reconcile": rec.as_dict(),
        "budget": {"key": budget.key_budget_fraction, "value": budget.value_budget_fraction,
                   "total": budget.total_fraction, **budget.assumptions},
    }
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _atomic_write(os.path.join(args.out, "outputs.hcat"), TensorDump("f32", outputs).to_bytes())
        _atomic_write(os.path.join(args.out, "errors.hcat"), TensorDump("f32", errs.astype(np.float32)).to_bytes())
        _atomic_write(os.path.join(args.out, "report.json"), json.dumps(report, indent=2, default=str).encode())
    emit(report, args.format)
    return 0


def _cfg_dict(cfg: EngineConfig) -> dict:
    d = asdict(cfg)
    if d["quantizer"] is None:
        d["quantizer"] = "none"
    return d


# -- sweep -------------------------------------------------------------------

def _sweep_cell(job):
    """Train one (g, c) codebook and evaluate every tau against it."""
    keys, values, queries, val_keys, d, g, c, taus, qargs, out_dir = job
    L, H_kv = keys.shape[:2]
    H_q = queries.shape[1]
    if g is None:
        # value offloading only: raw keys, nothing to train
        base = EngineConfig(L=L, H_q=H_q, H_kv=H_kv, d=d, tau=1.0, quantize_keys=False)
        cbs, qerr = None, 0.0
    else:
        qcfg = QuantizerConfig(d=d, g=g, c=c, **qargs)
        base = EngineConfig(L=L, H_q=H_q, H_kv=H_kv, d=d, tau=1.0, quantizer=qcfg)
        cbs = train_layer_codebooks(val_keys, base)
        qerr = float(np.mean([quantization_error(keys[l].reshape(-1, d), cbs[l])
                              for l in range(L)]))
    budget = memory_budget(d, g, value_offloaded=True)
    rows = []
    for tau in taus:
        cfg = replace(base, tau=tau)
        state, _, errs = run_session(keys, values, queries, cfg, cbs, overlap=False)
        ratio = float(np.mean([state.mean_selection_ratio(l) for l in range(L)]))
        rows.append({"tau": tau, "g": g, "c": c, "output_error": float(errs.mean()),
                     "max_output_error": float(errs.max()), "selection_ratio": ratio,
                     "quant_error": qerr, "key_budget": budget.key_budget_fraction,
                     "total_budget": budget.total_fraction})
    if out_dir:
        name = "cell_vo.json" if g is None else f"cell_g{g}_c{c}.json"
        path = os.path.join(out_dir, name)
        _atomic_write(path, json.dumps(rows, indent=2).encode())
    return rows


def cmd_sweep(args) -> int:
    for g in args.g:
        if args.d % g:
            raise UsageError(f"g={g} does not divide d={args.d}")
    keys, values, queries = generate_dataset(
        args.kind, args.n, args.d, args.seed, clusters=args.clusters, noise=args.noise,
        g=args.data_groups, L=args.layers, H_kv=args.kv_heads, H_q=args.q_heads,
        m=args.queries, query_gain=args.query_gain, query_noise=args.query_noise)
    # Validation keys: same distribution (and planted centers), independent tokens.
    val_keys, _, _ = generate_dataset(
        args.kind, args.n_val, args.d, args.seed, clusters=args.clusters, noise=args.noise,
        g=args.data_groups, L=args.layers, H_kv=args.kv_heads, H_q=1, m=1, draw=1)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
    qargs = dict(kmeans_batch_size=args.batch_size, kmeans_max_iters=args.max_iters,
                 kmeans_restarts=args.restarts, seed=args.seed, shared_codebook=args.shared)
    if args.no_quantize:
        jobs = [(keys, values, queries, val_keys, args.d, None, None, args.tau, qargs, args.out)]
    else:
        jobs = [(keys, values, queries, val_keys, args.d, g, c, args.tau, qargs, args.out)
                for g in args.g for c in args.c]
    for job in jobs:
        if job[6] is not None and job[6] > args.n_val:
            raise UsageError(f"c={job[6]} exceeds n_val={args.n_val}")
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_sweep_cell, jobs))
    else:
        results = [_sweep_cell(j) for j in jobs]
    table = [row for rows in results for row in rows]
    header = {"config": {"kind": args.kind, "n": args.n, "n_val": args.n_val, "d": args.d,
                         "seed": args.seed, "layers": args.layers, "kv_heads": args.kv_heads,
                         "q_heads": args.q_heads, "queries": args.queries,
                         "quantize_keys": not args.no_quantize, **qargs}}
    emit(header, args.format, table=table,
         columns=["tau", "g", "c", "output_error", "selection_ratio", "quant_error",
                  "key_budget", "total_budget"])
    return 0


# -- report ------------------------------------------------------------------

def cmd_report(args) -> int:
    record: dict = {}
    if args.d is not None:
        b = memory_budget(args.d, args.g, value_offloaded=args.offload)
        k, v, t = b.as_percent()
        record["budget"] = {"d": args.d, "g": args.g, "value_offloaded": args.offload,
                            "key_percent": k, "value_percent": v, "total_percent": t,
                            **b.assumptions}
        if args.c is not None and args.n is not None:
            cm = compute_cost(args.n, args.d, args.c, args.g or args.d)
            record["cost"] = asdict(cm)
    if args.comm:
        if args.n is None or args.L is None or args.H is None:
            raise UsageError("--comm needs --n, --L and --H")
        b = comm_overhead(args.n, args.L, args.H, args.frac, args.bytes)
        record["comm"] = {"n": args.n, "L": args.L, "H": args.H, "retain_fraction": args.frac,
                          "bytes_per_score": args.bytes, "bytes": b, "megabytes": b / 1e6}
    if not record:
        raise UsageError("report needs --d and/or --comm")
    emit(record, args.format)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_quant_flags(p, defaults=True):
    dv = (lambda v: v) if defaults else (lambda v: None)
    p.add_argument("--g", type=_positive, default=dv(16), help="groups per key")
    p.add_argument("--c", type=_centroids, default=dv(256), help="centroids per codebook")
    p.add_argument("--shared", action="store_true", help="one codebook shared by all groups")
    p.add_argument("--batch-size", type=_positive, default=dv(10_000))
    p.add_argument("--max-iters", type=int, default=dv(200))
    p.add_argument("--restarts", type=_positive, default=dv(3))
    p.add_argument("--seed", type=int, default=dv(0))


def _add_data_flags(p):
    p.add_argument("--kind", choices=["gaussian", "planted", "planted-clusters"], default="planted")
    p.add_argument("--n", type=_positive, default=1024)
    p.add_argument("--d", type=_positive, default=64)
    p.add_argument("--clusters", type=_positive, default=8)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--layers", type=_positive, default=1)
    p.add_argument("--kv-heads", type=_positive, default=1)
    p.add_argument("--q-heads", type=_positive, default=1)
    p.add_argument("--queries", type=_positive, default=16, help="query vectors per head")
    p.add_argument("--query-gain", type=float, default=1.0)
    p.add_argument("--query-noise", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hcattn", description=__doc__.splitlines()[0])
    parser.add_argument("--format", choices=["text", "kv"], default="text")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["text", "kv"], default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="write synthetic keys/values/queries")
    _add_data_flags(p)
    p.add_argument("--g", type=_positive, default=None, help="planted groups (default d/2)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", parents=[common], help="train a grouped-VQ codebook")
    p.add_argument("--keys", required=True)
    p.add_argument("--layer", type=int, default=None)
    p.add_argument("--out", required=True)
    _add_quant_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("run", parents=[common], help="decode queries and compare with exact attention")
    p.add_argument("--config")
    p.add_argument("--keys")
    p.add_argument("--values")
    p.add_argument("--queries")
    p.add_argument("--val-keys", help="validation keys for on-the-fly codebook training")
    p.add_argument("--codebook", action="append", help="codebook file (once, or per layer)")
    p.add_argument("--tau", type=_tau, default=None)
    p.add_argument("--recent-window", type=int, default=None)
    p.add_argument("--scope", choices=["layer", "head"], default=None)
    p.add_argument("--no-quantize", action="store_true", help="value offloading only")
    p.add_argument("--renormalize", action="store_true")
    p.add_argument("--sequential", action="store_true", help="disable layer overlap")
    p.add_argument("--tolerance", type=float, default=1e-3, help="ledger reconcile tolerance")
    p.add_argument("--out")
    _add_quant_flags(p, defaults=False)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[common], help="ablation grid over tau, c and g")
    _add_data_flags(p)
    p.add_argument("--data-groups", type=_positive, default=None,
                   help="planted groups in the data (default d/2)")
    p.add_argument("--n-val", type=_positive, default=4096)
    p.add_argument("--tau", type=_list_of(_tau), default=[0.3, 0.5, 0.7, 0.9, 1.0])
    p.add_argument("--c", type=_list_of(_centroids), default=[256])
    p.add_argument("--g", type=_list_of(_positive), default=[16])
    p.add_argument("--shared", action="store_true")
    p.add_argument("--no-quantize", action="store_true",
                   help="value offloading only; sweeps tau with raw keys")
    p.add_argument("--batch-size", type=_positive, default=10_000)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--restarts", type=_positive, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=_positive, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", parents=[common], help="memory, compute and transfer budgets")
    p.add_argument("--d", type=_positive)
    p.add_argument("--g", type=_positive)
    p.add_argument("--c", type=_centroids)
    p.add_argument("--offload", action="store_true")
    p.add_argument("--comm", action="store_true")
    p.add_argument("--n", type=_positive)
    p.add_argument("--L", type=_positive)
    p.add_argument("--H", type=_positive)
    p.add_argument("--frac", type=float, default=0.2)
    p.add_argument("--bytes", type=float, default=2)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 2 on usage errors, 0 on --help
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"hcattn {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except (HCAttnError, OSError, ValueError, IndexError) as exc:
        print(f"hcattn {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
