from __future__ import annotations

import numpy as np
import pytest

from rgse.errors import NumericError
from rgse.gradcheck import grad_check
from rgse.params import ParamStore
from rgse import tensor as T


def test_sum_of_squares_gradient():
    store = ParamStore(3)
    store.matrix("w", 2, 2)

    def loss(s: ParamStore) -> T.Tensor:
        w = s["w"]
        return T.sum_all(T.mul(w, w))

    # analytic gradient is 2w; the checker should agree tightly
    assert grad_check(loss, store, eps=1e-5, samples=50) < 1e-6


def test_constant_loss_has_zero_error():
    store = ParamStore(0)
    store.matrix("unused", 2, 2)
    store.matrix("used", 2, 2)

    def loss(s: ParamStore) -> T.Tensor:
        u = s["used"]
        return T.sum_all(T.mul(u, u))

    # "unused" sees analytic 0 and numeric 0; below the absolute floor
    assert grad_check(loss, store, samples=16) < 1e-6


def test_nonfinite_loss_reports_numeric_error():
    store = ParamStore(0)
    store.bias("p", 1)

    def loss(s: ParamStore) -> T.Tensor:
        return T.tensor(float("nan"))

    with pytest.raises(NumericError):
        grad_check(loss, store, samples=1)


def test_eps_bounds_enforced():
    store = ParamStore(0)
    store.bias("p", 1)
    with pytest.raises(ValueError):
        grad_check(lambda s: T.sum_all(s["p"]), store, eps=1e-2)


def test_detects_wrong_gradient():
    store = ParamStore(5)
    store.matrix("w", 2, 2)

    def bad_loss(s: ParamStore) -> T.Tensor:
        w = s["w"]
        out = T.Tensor(w.data**3)  # forward cube

        def bwd(g):
            w.accumulate(g)  # deliberately wrong backward (should be 3w^2)

        return T.sum_all(T.record_op(out, bwd))

    assert grad_check(bad_loss, store, samples=4) > 1e-2
