from __future__ import annotations

import numpy as np
import pytest

from rgse.errors import DimensionError
from rgse import tensor as T


def matmul_oracle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Brute-force triple loop, independent of numpy's matmul path."""
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for l in range(k):
                acc += a[i, l] * b[l, j]
            out[i, j] = acc
    return out


def test_matmul_identity():
    a = T.tensor([[1.0, 2.0], [3.0, 4.0]])
    eye = T.tensor(np.eye(2))
    assert np.array_equal(T.matmul(eye, a).data, a.data)


def test_matmul_zero_annihilation():
    a = T.tensor([[1.0, 2.0]])
    z = T.tensor([[0.0], [0.0]])
    assert T.matmul(a, z).data.item() == 0.0


def test_matmul_against_triple_loop():
    rng = np.random.default_rng(7)
    for m, k, n in [(3, 4, 2), (16, 16, 16), (1, 5, 7)]:
        a, b = rng.standard_normal((m, k)), rng.standard_normal((k, n))
        got = T.matmul(T.Tensor(a), T.Tensor(b)).data
        assert np.abs(got - matmul_oracle(a, b)).max() < 1e-12


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 2\)"):
        T.matmul(T.Tensor(np.zeros((2, 3))), T.Tensor(np.zeros((2, 2))))


def test_elementwise_trivial_values():
    assert float(T.sigmoid(T.tensor(0.0)).data) == 0.5
    assert float(T.tanh(T.tensor(0.0)).data) == 0.0
    assert T.mul(T.tensor([1.0, 2.0]), T.tensor([3.0, 4.0])).data == pytest.approx([3.0, 8.0])


def test_elementwise_shape_mismatch():
    with pytest.raises(DimensionError):
        T.add(T.tensor([1.0, 2.0]), T.tensor([1.0, 2.0, 3.0]))


def test_softmax_symmetry_and_shift_invariance():
    assert T.softmax(T.tensor([0.0, 0.0])).data == pytest.approx([0.5, 0.5])
    big = T.softmax(T.tensor([1000.0, 1000.0])).data
    assert np.all(np.isfinite(big)) and big == pytest.approx([0.5, 0.5])
    rng = np.random.default_rng(3)
    x = rng.standard_normal(9)
    shifted = T.softmax(T.Tensor(x + 123.456)).data
    assert np.abs(shifted - T.softmax(T.Tensor(x)).data).max() < 1e-12


def test_softmax_matches_extended_precision_oracle():
    # frozen from a 50-digit mpmath evaluation of exp(x)/sum(exp(x))
    expected = [0.090030573170380457998, 0.24472847105479765247, 0.66524095577482188953]
    got = T.softmax(T.tensor([1.0, 2.0, 3.0]), 1.0).data
    assert got == pytest.approx(expected, abs=1e-15)
    assert abs(got.sum() - 1.0) < 1e-12


def test_softmax_rejects_empty_and_bad_scale():
    with pytest.raises(ValueError):
        T.softmax(T.tensor([]))
    with pytest.raises(ValueError):
        T.softmax(T.tensor([1.0]), 0.0)


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(11)
    y = T.softmax(T.Tensor(rng.standard_normal((5, 8))), 0.37).data
    assert np.abs(y.sum(axis=-1) - 1.0).max() < 1e-12


def numeric_grad(f, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + eps
        fp = f()
        flat[i] = keep - eps
        fm = f()
        flat[i] = keep
        gf[i] = (fp - fm) / (2 * eps)
    return g


@pytest.mark.parametrize("build", [
    lambda a, b: T.matmul(a, b),
    lambda a, b: T.mul(T.sigmoid(a), T.tanh(b)),
    lambda a, b: T.add(T.relu(a), b),
    lambda a, b: T.softmax(T.sub(a, b), 0.7),
])
def test_backward_matches_finite_differences(build):
    rng = np.random.default_rng(5)
    a = T.Tensor(rng.standard_normal((4, 4)))
    b = T.Tensor(rng.standard_normal((4, 4)))
    w = rng.standard_normal((4, 4))  # fixed projection so the loss is scalar

    def forward() -> float:
        return float((build(a, b).data * w).sum())

    with T.Tape() as tape:
        out = build(a, b)
        loss = T.sum_all(T.mul(out, T.Tensor(w.copy())))
    tape.backward(loss)
    for t in (a, b):
        expected = numeric_grad(forward, t.data)
        assert np.abs(t.grad - expected).max() < 1e-7


def test_structural_op_gradients():
    rng = np.random.default_rng(9)
    parts = [T.Tensor(rng.standard_normal((3, 4))) for _ in range(5)]
    weights = rng.standard_normal((3, 5))
    coeffs = T.Tensor(rng.standard_normal((3, 5)))
    table = T.Tensor(rng.standard_normal((6, 4)))
    ids = np.array([1, 1, 4])
    proj = rng.standard_normal(4)

    def forward() -> float:
        ws = sum(weights[:, t : t + 1] * parts[t].data for t in range(5))
        bl = sum(coeffs.data[:, t : t + 1] * parts[t].data for t in range(5))
        cat = np.concatenate([ws, bl, table.data[ids]], axis=1)
        return float(cat @ np.tile(proj, 3) @ np.ones(3))

    with T.Tape() as tape:
        ws = T.weighted_sum(parts, weights)
        bl = T.blend(parts, coeffs)
        cat = T.concat([ws, bl, T.lookup(table, ids)], axis=1)
        loss = T.sum_all(T.mul(cat, T.Tensor(np.tile(proj, (3, 3)))))
    tape.backward(loss)

    for t in parts + [coeffs, table]:
        expected = numeric_grad(forward, t.data)
        assert np.abs(t.grad - expected).max() < 1e-6


def test_layer_norm_and_cross_entropy_gradients():
    rng = np.random.default_rng(13)
    x = T.Tensor(rng.standard_normal((4, 6)))
    gain = T.Tensor(rng.uniform(0.5, 1.5, 6))
    bias = T.Tensor(rng.standard_normal(6))
    targets = np.array([0, 3, 5, 2])
    mask = np.array([1.0, 1.0, 0.0, 1.0])

    def forward() -> float:
        mu = x.data.mean(axis=-1, keepdims=True)
        var = x.data.var(axis=-1, keepdims=True)
        z = (x.data - mu) / np.sqrt(var + 1e-6) * gain.data + bias.data
        zmax = z.max(axis=-1, keepdims=True)
        lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=-1))
        return float(((lse - z[np.arange(4), targets]) * mask).sum())

    with T.Tape() as tape:
        loss = T.cross_entropy_rows(T.layer_norm(x, gain, bias), targets, mask)
    tape.backward(loss)
    for t in (x, gain, bias):
        expected = numeric_grad(forward, t.data)
        assert np.abs(t.grad - expected).max() < 1e-6


def test_additive_scores_gradients():
    rng = np.random.default_rng(29)
    query = T.Tensor(rng.standard_normal((3, 5)))
    keys = [T.Tensor(rng.standard_normal((3, 5))) for _ in range(4)]
    v = T.Tensor(rng.standard_normal(5))
    w = rng.standard_normal((3, 4))

    def forward() -> float:
        scores = np.stack([np.tanh(query.data + k.data) @ v.data for k in keys], axis=1)
        return float((scores * w).sum())

    with T.Tape() as tape:
        loss = T.sum_all(T.mul(T.additive_scores(query, keys, v), T.Tensor(w.copy())))
    tape.backward(loss)
    for t in [query, v] + keys:
        expected = numeric_grad(forward, t.data)
        assert np.abs(t.grad - expected).max() < 1e-6


def test_slice_row_and_stack_cols_roundtrip():
    rng = np.random.default_rng(21)
    x = T.Tensor(rng.standard_normal((3, 4)))
    rows = [T.slice_row(x, i) for i in range(3)]
    back = T.concat(rows, axis=0)
    assert np.array_equal(back.data, x.data)
    cols = T.stack_cols([T.Tensor(rng.standard_normal(5)) for _ in range(3)])
    assert cols.shape == (5, 3)


def test_no_tape_means_no_recording():
    a = T.tensor([1.0, 2.0])
    out = T.sigmoid(a)
    assert out.grad is None and a.grad is None
