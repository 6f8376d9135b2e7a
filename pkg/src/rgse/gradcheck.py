"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from .errors import NumericError
from .params import ParamStore
from .tensor import Tape, Tensor


def grad_check(loss_fn, store: ParamStore, eps: float = 1e-5,
               samples: int = 50, seed: int = 0) -> float:
    """Compare analytic gradients of ``loss_fn(store)`` to central differences.

    ``loss_fn`` must return a scalar Tensor and be deterministic given the
    store contents. Up to ``samples`` parameter entries are drawn without
    replacement across all parameters; for each, the numeric gradient
    (f(x+eps) - f(x-eps)) / (2 eps) is compared to the analytic one.
    Returns max |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
    """
    if not (1e-7 <= eps <= 1e-4):
        raise ValueError(f"eps {eps} outside [1e-7, 1e-4]")

    store.clear_grads()
    with Tape() as t:
        loss = loss_fn(store)
    if not np.isfinite(loss.data):
        raise NumericError("loss is non-finite at the evaluation point")
    t.backward(loss)
    analytic = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for name, p in store.items()}
    store.clear_grads()

    entries = [(name, idx) for name, p in store.items() for idx in range(p.data.size)]
    rng = np.random.default_rng(seed)
    if samples < len(entries):
        chosen = rng.choice(len(entries), size=samples, replace=False)
        entries = [entries[i] for i in sorted(chosen)]

    def eval_loss(name: str) -> float:
        value = float(loss_fn(store).data)
        if not np.isfinite(value):
            raise NumericError(f"loss became non-finite while perturbing {name!r}")
        return value

    worst = 0.0
    for name, idx in entries:
        flat = store[name].data.reshape(-1)
        saved = flat[idx]
        flat[idx] = saved + eps
        f_plus = eval_loss(name)
        flat[idx] = saved - eps
        f_minus = eval_loss(name)
        flat[idx] = saved
        numeric = (f_plus - f_minus) / (2.0 * eps)
        a = float(analytic[name].reshape(-1)[idx])
        rel = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
        worst = max(worst, rel)
    return worst


__all__ = ["grad_check", "Tensor"]
