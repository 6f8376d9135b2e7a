from __future__ import annotations

import numpy as np
import pytest

from rgse.optim import Optimizer, clip_gradients, optimizer_step
from rgse.params import ParamStore, read_checkpoint
from rgse import tensor as T


def small_store(seed: int = 0) -> ParamStore:
    store = ParamStore(seed)
    store.matrix("layer.W", 3, 4)
    store.bias("layer.b", 3)
    store.vector("gate.v", 5)
    return store


def test_same_seed_bitwise_identical_init():
    a, b = small_store(42), small_store(42)
    for (na, ta), (nb, tb) in zip(a.items(), b.items()):
        assert na == nb
        assert np.array_equal(ta.data, tb.data)


def test_different_seed_differs():
    a, b = small_store(1), small_store(2)
    assert not np.array_equal(a["layer.W"].data, b["layer.W"].data)


def test_init_bounds_and_bias_zero():
    store = small_store()
    w = store["layer.W"].data
    assert np.abs(w).max() <= 1.0 / np.sqrt(4)
    assert np.array_equal(store["layer.b"].data, np.zeros(3))


def test_iteration_sorted_and_unique():
    store = small_store()
    assert store.names() == sorted(store.names())
    with pytest.raises(ValueError, match="duplicate"):
        store.bias("layer.b", 3)


def test_freeze_blocks_new_params():
    store = small_store()
    store.freeze()
    with pytest.raises(RuntimeError, match="frozen"):
        store.bias("late.b", 2)


def test_checkpoint_roundtrip(tmp_path):
    store = small_store(7)
    path = tmp_path / "model.ckpt"
    store.save(path)
    other = small_store(99)
    other.load(path)
    for (_, a), (_, b) in zip(store.items(), other.items()):
        assert np.array_equal(a.data, b.data)
    raw = read_checkpoint(path)
    assert list(raw) == store.names()  # header order is sorted


def test_checkpoint_rejects_shape_mismatch(tmp_path):
    store = small_store()
    path = tmp_path / "model.ckpt"
    store.save(path)
    wrong = ParamStore(0)
    wrong.matrix("layer.W", 4, 3)
    wrong.bias("layer.b", 3)
    wrong.vector("gate.v", 5)
    with pytest.raises(Exception, match="layer.W"):
        wrong.load(path)


def test_sgd_single_step_and_zero_grad():
    store = ParamStore(0)
    p = store.bias("p", 1)
    p.data[:] = 1.0
    p.grad = np.array([1.0])
    optimizer_step(store, Optimizer("sgd", 0.1))
    assert p.data[0] == pytest.approx(0.9)
    assert p.grad is None

    p.grad = np.array([0.0])
    optimizer_step(store, Optimizer("sgd", 0.1))
    assert p.data[0] == pytest.approx(0.9)  # zero gradient leaves it unchanged


def test_missing_gradient_names_parameter():
    store = small_store()
    store["layer.W"].grad = np.zeros((3, 4))
    with pytest.raises(RuntimeError, match="gate.v"):
        optimizer_step(store, Optimizer("sgd", 0.1))


def adam_oracle(p: float, g: float, lr: float, steps: int,
                b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8) -> float:
    """Hand-evaluated Adam recurrence with a constant gradient."""
    m = v = 0.0
    for t in range(1, steps + 1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1 ** t)
        vhat = v / (1 - b2 ** t)
        p -= lr * mhat / (np.sqrt(vhat) + eps)
    return p


def test_adam_single_step_matches_hand_formula():
    store = ParamStore(0)
    p = store.bias("p", 1)
    p.data[:] = 1.0
    p.grad = np.array([0.3])
    optimizer_step(store, Optimizer("adam", 0.05))
    # first step from zero moments: mhat=g, vhat=g^2, update = lr*g/(|g|+eps)
    assert p.data[0] == pytest.approx(1.0 - 0.05 * 0.3 / (0.3 + 1e-8), abs=1e-15)
    assert p.data[0] == pytest.approx(adam_oracle(1.0, 0.3, 0.05, 1), abs=1e-15)


def test_adam_multi_step_matches_oracle():
    store = ParamStore(0)
    p = store.bias("p", 1)
    p.data[:] = 2.0
    opt = Optimizer("adam", 0.01)
    for _ in range(5):
        p.grad = np.array([0.7])
        optimizer_step(store, opt)
    assert opt.step_count == 5
    assert p.data[0] == pytest.approx(adam_oracle(2.0, 0.7, 0.01, 5), abs=1e-12)


def test_clip_gradients_scales_to_max_norm():
    store = small_store()
    store.zero_fill_missing_grads()
    store["layer.W"].grad[:] = 3.0
    before = store.grad_global_norm()
    returned = clip_gradients(store, 1.0)
    assert returned == pytest.approx(before)
    assert store.grad_global_norm() == pytest.approx(1.0)
    # under the limit: untouched
    clip_gradients(store, 10.0)
    assert store.grad_global_norm() == pytest.approx(1.0)
