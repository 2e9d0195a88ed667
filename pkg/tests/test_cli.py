import json

import pytest

from hcattn.cli import main, parse_kv
from hcattn.quantizer import load_codebook
from hcattn.tensor_io import read_tensor


def run(capsys, *argv):
    rc = main(list(argv))
    out = capsys.readouterr()
    return rc, out.out, out.err


def kv(capsys, *argv):
    rc, out, err = run(capsys, "--format", "kv", *argv)
    assert rc == 0, err
    return parse_kv(out)


@pytest.fixture
def planted(tmp_path, capsys):
    out = tmp_path / "data"
    rc, _, err = run(capsys, "gen", "--kind", "planted", "--n", "1024", "--d", "64",
                     "--clusters", "8", "--seed", "1", "--out", str(out))
    assert rc == 0, err
    return out


def test_gen_writes_three_files(planted):
    assert sorted(p.name for p in planted.iterdir()) == ["keys.hcat", "queries.hcat", "values.hcat"]
    assert read_tensor(planted / "keys.hcat").shape == (1, 1, 1024, 64)


def test_gen_deterministic(planted, tmp_path, capsys):
    again = tmp_path / "again"
    run(capsys, "gen", "--kind", "planted", "--n", "1024", "--d", "64",
        "--clusters", "8", "--seed", "1", "--out", str(again))
    for name in ("keys.hcat", "values.hcat", "queries.hcat"):
        assert (planted / name).read_bytes() == (again / name).read_bytes()


def test_usage_errors_exit_2(capsys):
    assert run(capsys, "gen", "--kind", "bogus")[0] == 2
    assert run(capsys, "train", "--keys", "k", "--out", "o", "--c", "70000")[0] == 2
    assert run(capsys, "run", "--tau", "1.5")[0] == 2
    assert run(capsys)[0] == 2


def test_runtime_error_exit_1(tmp_path, capsys):
    rc, _, err = run(capsys, "train", "--keys", str(tmp_path / "missing.hcat"), "--out", "x")
    assert rc == 1 and err
    bad = tmp_path / "bad.hcat"
    bad.write_bytes(b"JUNKJUNKJUNK")
    assert run(capsys, "train", "--keys", str(bad), "--out", str(tmp_path / "cb"))[0] == 1


def test_train_planted_reports_zero_inertia(planted, tmp_path, capsys):
    cb_path = tmp_path / "cb.hccb"
    rec = kv(capsys, "train", "--keys", str(planted / "keys.hcat"), "--g", "32", "--c", "8",
             "--out", str(cb_path))
    assert float(rec["inertia"]) == 0.0
    assert rec["config.kmeans_batch_size"] == "10000"
    assert rec["config.kmeans_max_iters"] == "200"
    cb = load_codebook(cb_path)
    assert cb.config.c == 8 and cb.inertia == 0.0


def test_run_exact_config(planted, tmp_path, capsys):
    cb_path = tmp_path / "cb.hccb"
    kv(capsys, "train", "--keys", str(planted / "keys.hcat"), "--g", "32", "--c", "8",
       "--out", str(cb_path))
    out = tmp_path / "run"
    rec = kv(capsys, "run", "--keys", str(planted / "keys.hcat"),
             "--values", str(planted / "values.hcat"), "--queries", str(planted / "queries.hcat"),
             "--codebook", str(cb_path), "--tau", "1", "--out", str(out))
    assert float(rec["error.max_relative"]) <= 1e-5
    assert rec["reconcile.within_tolerance"] == "true"
    assert float(rec["reconcile.deviation_fraction"]) == 0.0
    report = json.loads((out / "report.json").read_text())
    assert report["error"]["max_relative"] <= 1e-5
    errs = read_tensor(out / "errors.hcat").data
    assert errs.max() <= 1e-5
    assert read_tensor(out / "outputs.hcat").shape == (1, 1, 16, 64)


def test_run_vo_only(planted, capsys):
    rec = kv(capsys, "run", "--keys", str(planted / "keys.hcat"),
             "--values", str(planted / "values.hcat"), "--queries", str(planted / "queries.hcat"),
             "--no-quantize", "--tau", "1")
    assert float(rec["error.max_relative"]) <= 1e-6
    assert float(rec["budget.key"]) == 1.0


def test_run_from_yaml_config(planted, tmp_path, capsys):
    cfg = tmp_path / "session.yaml"
    cfg.write_text(
        f"keys: {planted / 'keys.hcat'}\nvalues: {planted / 'values.hcat'}\n"
        f"queries: {planted / 'queries.hcat'}\n"
        "engine: {tau: 1.0}\n"
        "quantizer: {g: 32, c: 8, kmeans_batch_size: 1024, kmeans_max_iters: 50}\n")
    rec = kv(capsys, "run", "--config", str(cfg), "--val-keys", str(planted / "keys.hcat"))
    assert float(rec["error.max_relative"]) <= 1e-5


def test_overlap_flag_does_not_change_outputs(planted, tmp_path, capsys):
    outs = []
    for extra in ([], ["--sequential"]):
        d = tmp_path / ("seq" if extra else "ovl")
        kv(capsys, "run", "--keys", str(planted / "keys.hcat"),
           "--values", str(planted / "values.hcat"), "--queries", str(planted / "queries.hcat"),
           "--no-quantize", "--tau", "0.9", "--out", str(d), *extra)
        outs.append((d / "outputs.hcat").read_bytes())
    assert outs[0] == outs[1]


def test_report_budget_and_comm(capsys):
    rec = kv(capsys, "report", "--d", "128", "--g", "64", "--offload")
    assert float(rec["budget.total_percent"]) == 25.0
    rec = kv(capsys, "report", "--d", "128", "--offload")
    assert float(rec["budget.total_percent"]) == 50.0
    rec = kv(capsys, "report", "--comm", "--n", "1000000", "--L", "32", "--H", "8", "--frac", "0.2")
    assert float(rec["comm.megabytes"]) == 102.4
    assert float(rec["comm.bytes"]) == 102_400_000


def test_report_compute(capsys):
    rec = kv(capsys, "report", "--d", "128", "--g", "32", "--c", "4096", "--n", "1000000")
    assert int(rec["cost.per_query_mults_approx"]) == 524_288


def _sweep_rows(out):
    lines = [ln for ln in out.splitlines() if ln.startswith("row.")]
    rows = {}
    for ln in lines:
        k, v = ln.split("=", 1)
        _, i, col = k.split(".", 2)
        rows.setdefault(int(i), {})[col] = v
    return [rows[i] for i in sorted(rows)]


def test_sweep_tau_monotone_ratio(tmp_path, capsys):
    rc, out, err = run(capsys, "--format", "kv", "sweep", "--kind", "gaussian", "--n", "256",
                       "--d", "32", "--n-val", "512", "--g", "8", "--c", "16",
                       "--tau", "0.3,0.5,0.7,0.9,1", "--max-iters", "20", "--restarts", "1",
                       "--out", str(tmp_path / "cells"))
    assert rc == 0, err
    rows = _sweep_rows(out)
    ratios = [float(r["selection_ratio"]) for r in rows]
    assert len(ratios) == 5 and ratios == sorted(ratios) and ratios[-1] == 1.0
    assert (tmp_path / "cells" / "cell_g8_c16.json").exists()


def test_sweep_c_quant_error_non_increasing(capsys):
    rc, out, err = run(capsys, "--format", "kv", "sweep", "--kind", "gaussian", "--n", "512",
                       "--d", "32", "--n-val", "2048", "--g", "8", "--c", "8,64,512",
                       "--tau", "1", "--batch-size", "2048", "--max-iters", "50")
    assert rc == 0, err
    q = [float(r["quant_error"]) for r in _sweep_rows(out)]
    assert q == sorted(q, reverse=True)


def test_sweep_g_budget_column(capsys):
    rc, out, err = run(capsys, "--format", "kv", "sweep", "--kind", "gaussian", "--n", "128",
                       "--d", "64", "--n-val", "256", "--g", "16,32,64", "--c", "4",
                       "--tau", "1", "--max-iters", "5", "--restarts", "1")
    assert rc == 0, err
    rows = _sweep_rows(out)
    assert [float(r["key_budget"]) for r in rows] == [0.25, 0.5, 1.0]
    assert [float(r["total_budget"]) for r in rows] == [0.125, 0.25, 0.5]


def test_sweep_parallel_matches_serial(capsys):
    args = ["--format", "kv", "sweep", "--kind", "gaussian", "--n", "128", "--d", "16",
            "--n-val", "256", "--g", "4,8", "--c", "4", "--tau", "0.9", "--max-iters", "5",
            "--restarts", "1"]
    _, serial, _ = run(capsys, *args)
    _, parallel, _ = run(capsys, *args, "--jobs", "2")
    assert serial == parallel


def test_parse_kv_round_trip():
    assert parse_kv("a=1\n\nb.c=x=y\n") == {"a": "1", "b.c": "x=y"}
    with pytest.raises(ValueError):
        parse_kv("novalue\n")
