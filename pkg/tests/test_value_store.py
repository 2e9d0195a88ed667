import threading

import numpy as np
import pytest

from hcattn.errors import ShapeError
from hcattn.eviction import EvictionSelection, select
from hcattn.score_engine import softmax_scaled
from hcattn.value_store import ChannelMessage, HostChannel, TransferLedger, ValueStore


def _sel(idx, w, n):
    return EvictionSelection(tau=1.0, indices=np.asarray(idx, np.int64),
                             weights=np.asarray(w, np.float32), n=n)


def test_full_selection_is_dense_product(rng):
    V = rng.normal(size=(64, 16)).astype(np.float32)
    store = ValueStore(1, 1, 16)
    store.offload(0, 0, V)
    w = softmax_scaled(rng.normal(size=64), 16)
    out = store.gather_weighted_sum(0, 0, select(w, 1.0))
    ref = w.astype(np.float64) @ V.astype(np.float64)
    assert np.linalg.norm(out - ref) / np.linalg.norm(ref) < 1e-5


def test_layers_isolated(rng):
    store = ValueStore(2, 1, 4)
    a, b = rng.normal(size=(3, 4)), rng.normal(size=(5, 4))
    store.offload(0, 0, a)
    store.offload(1, 0, b)
    store.gather_weighted_sum(0, 0, _sel([0, 1, 2], [0.2, 0.3, 0.5], 3))
    assert np.array_equal(store.values(1, 0), b.astype(np.float32))
    assert store.rows(1, 0) == 5


def test_append_semantics(rng):
    store = ValueStore(1, 1, 3)
    store.offload(0, 0, np.zeros((0, 3)))
    vs = rng.normal(size=(4, 3)).astype(np.float32)
    for v in vs:
        store.append_value(0, 0, v)
    assert store.rows(0, 0) == 4
    assert np.array_equal(store.values(0, 0), vs)


def test_thousand_appends_singleton_gather():
    r = np.random.default_rng(99)
    vs = r.normal(size=(1000, 8)).astype(np.float32)
    store = ValueStore(1, 1, 8)
    for v in vs:
        store.append_value(0, 0, v)
    for i in range(1000):
        assert np.array_equal(store.gather_weighted_sum(0, 0, _sel([i], [1.0], 1000)), vs[i])


def test_linearity_and_order(rng):
    V = rng.normal(size=(30, 8)).astype(np.float32)
    store = ValueStore(1, 1, 8)
    store.offload(0, 0, V)
    idx = rng.permutation(30)[:12]
    w = rng.uniform(size=12).astype(np.float32)
    out = store.gather_weighted_sum(0, 0, _sel(idx, w, 30))
    ref = (w.astype(np.float64)[:, None] * V[idx].astype(np.float64)).sum(axis=0)
    assert np.allclose(out, ref, rtol=1e-6, atol=1e-6)
    perm = rng.permutation(12)
    out2 = store.gather_weighted_sum(0, 0, _sel(idx[perm], w[perm], 30))
    assert np.allclose(out, out2, rtol=1e-6, atol=1e-6)
    a = store.gather_weighted_sum(0, 0, _sel(idx, 2 * w, 30))
    assert np.allclose(a, 2 * out, rtol=1e-6, atol=1e-6)


def test_gather_validation(rng):
    store = ValueStore(1, 1, 4)
    store.offload(0, 0, rng.normal(size=(3, 4)))
    with pytest.raises(IndexError):
        store.gather_weighted_sum(0, 0, _sel([3], [1.0], 3))
    with pytest.raises(ShapeError):
        store.gather_weighted_sum(0, 0, _sel([], [], 3))
    with pytest.raises(IndexError):
        store.rows(1, 0)
    with pytest.raises(ShapeError):
        store.append_value(0, 0, np.zeros(5))


def test_ledger_counts_bytes():
    store = ValueStore(1, 1, 2)
    store.offload(0, 0, np.ones((10, 2)))
    store.gather_weighted_sum(0, 0, _sel([0, 1], [0.5, 0.5], 10))
    store.gather_weighted_sum(0, 0, _sel([0, 1, 2, 3], [0.25] * 4, 10))
    led = store.ledger
    assert led.bytes_weights == 2 * 6 and led.bytes_indices == 4 * 6
    assert led.messages == 2 and led.context_tokens == 20
    assert led.mean_selection_ratio == pytest.approx(0.3)


def test_ledger_snapshot_is_independent():
    led = TransferLedger()
    led.record(3, 10)
    snap = led.snapshot()
    led.record(1, 10)
    assert snap.messages == 1 and led.messages == 2


def test_channel_message_schema(rng):
    sel = select(softmax_scaled(rng.normal(size=20), 4), 0.5)
    msg = ChannelMessage.from_selection(2, 3, sel)
    assert msg.indices.dtype == np.uint32 and msg.weights.dtype == np.float32
    assert msg.k_star == sel.k_star and (msg.layer, msg.head) == (2, 3)


def test_host_channel_replies_in_order(rng):
    store = ValueStore(2, 2, 4)
    for l in range(2):
        for h in range(2):
            store.offload(l, h, rng.normal(size=(6, 4)))
    msgs = [ChannelMessage(l, h, np.array([i % 6], np.uint32), np.array([1.0], np.float32), 6)
            for i, (l, h) in enumerate([(0, 0), (1, 1), (0, 1), (1, 0)] * 5)]
    with HostChannel(store) as ch:
        futs = [ch.send(m) for m in msgs]
        outs = [f.result(timeout=5) for f in futs]
    for m, o in zip(msgs, outs):
        assert np.array_equal(o, store.values(m.layer, m.head)[m.indices[0]])


def test_host_channel_propagates_errors(rng):
    store = ValueStore(1, 1, 4)
    store.offload(0, 0, rng.normal(size=(2, 4)))
    with HostChannel(store) as ch:
        fut = ch.send(ChannelMessage(0, 0, np.array([9], np.uint32), np.array([1.0], np.float32), 2))
        with pytest.raises(IndexError):
            fut.result(timeout=5)


def test_concurrent_appends_and_gathers(rng):
    store = ValueStore(1, 2, 4)
    store.offload(0, 0, np.ones((1, 4)))
    store.offload(0, 1, np.ones((1, 4)))

    def writer(h):
        for _ in range(200):
            store.append_value(0, h, np.ones(4))

    threads = [threading.Thread(target=writer, args=(h,)) for h in (0, 1)]
    for t in threads:
        t.start()
    for _ in range(100):
        out = store.gather_weighted_sum(0, 0, _sel([0], [1.0], 1))
        assert np.array_equal(out, np.ones(4, np.float32))
    for t in threads:
        t.join()
    assert store.rows(0, 0) == store.rows(0, 1) == 201
