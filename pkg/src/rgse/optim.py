"""SGD and Adam parameter updates with global-norm gradient clipping."""

from __future__ import annotations

import numpy as np

from .params import ParamStore


class Optimizer:
    """Parameter update rule; Adam keeps per-parameter moment arrays."""

    def __init__(self, kind: str = "adam", learning_rate: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer kind {kind!r}")
        if learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        self.kind = kind
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._moments: dict[str, tuple[np.ndarray, np.ndarray]] = {}


def clip_gradients(store: ParamStore, max_norm: float) -> float:
    """Scale all gradients so their global norm is at most max_norm."""
    norm = store.grad_global_norm()
    if max_norm > 0 and norm > max_norm:
        factor = max_norm / norm
        for _, t in store.items():
            if t.grad is not None:
                t.grad *= factor
    return norm


def optimizer_step(store: ParamStore, opt: Optimizer) -> None:
    """Apply one update to every parameter, then drop the gradients."""
    for name, t in store.items():
        if t.grad is None:
            raise RuntimeError(f"parameter {name!r} has no gradient; run backward first")
    opt.step_count += 1
    lr = opt.learning_rate
    for name, t in store.items():
        g = t.grad
        if opt.kind == "sgd":
            t.data -= lr * g
        else:
            if name not in opt._moments:
                opt._moments[name] = (np.zeros_like(t.data), np.zeros_like(t.data))
            m, v = opt._moments[name]
            m *= opt.beta1
            m += (1.0 - opt.beta1) * g
            v *= opt.beta2
            v += (1.0 - opt.beta2) * g * g
            mhat = m / (1.0 - opt.beta1 ** opt.step_count)
            vhat = v / (1.0 - opt.beta2 ** opt.step_count)
            t.data -= lr * mhat / (np.sqrt(vhat) + opt.eps)
    store.clear_grads()
