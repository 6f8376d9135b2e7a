"""Dense float64 tensors with reverse-mode gradients.

Every value in the package flows through the small op set below. Each op
computes its result eagerly with numpy and, while a :class:`Tape` is
active, records a backward closure. ``Tape.backward`` replays the
closures in reverse, accumulating gradients into ``Tensor.grad``.

Shapes are never broadcast except against scalars; mixed-shape adds for
bias rows go through the dedicated :func:`add_bias`.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .errors import DimensionError

Array = np.ndarray


class Tensor:
    """A numpy float64 array plus an optional same-shape gradient slot."""

    __slots__ = ("data", "grad")

    def __init__(self, data: Array):
        self.data = data
        self.grad: Array | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def accumulate(self, g: Array) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


def tensor(values) -> Tensor:
    """Wrap a scalar / list / array as a float64 Tensor (always copies)."""
    return Tensor(np.array(values, dtype=np.float64))


# --- tape ----------------------------------------------------------------

_ACTIVE: list["Tape"] = []


class Tape:
    """Recorded operation tape; use as a context manager around a forward pass."""

    def __init__(self):
        self._records: list[tuple[tuple[Tensor, ...], object]] = []

    def __enter__(self) -> "Tape":
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE.pop()

    def backward(self, loss: Tensor) -> None:
        """Seed d(loss)/d(loss)=1 and accumulate gradients along the tape.

        Records whose outputs all have absent gradients are skipped: they
        cannot influence the loss. Multi-output records receive the list
        of per-output gradients (None where absent).
        """
        if loss.data.ndim != 0:
            raise DimensionError(f"backward needs a scalar loss, got shape {loss.shape}")
        loss.grad = np.ones_like(loss.data)
        for outs, fn in reversed(self._records):
            if len(outs) == 1:
                if outs[0].grad is not None:
                    fn(outs[0].grad)
            elif any(o.grad is not None for o in outs):
                fn([o.grad for o in outs])


def record_op(out: Tensor, fn) -> Tensor:
    """Register a backward closure for ``out`` on the active tape (if any).

    Fused layers use this directly to record one hand-derived backward
    for a multi-step computation.
    """
    if _ACTIVE:
        _ACTIVE[-1]._records.append(((out,), fn))
    return out


def record_multi(outs: list[Tensor], fn) -> list[Tensor]:
    """Register one backward closure covering several outputs.

    ``fn`` receives the per-output gradient list (None entries where an
    output did not reach the loss).
    """
    if _ACTIVE:
        _ACTIVE[-1]._records.append((tuple(outs), fn))
    return outs


_record = record_op


def recording() -> bool:
    return bool(_ACTIVE)


# --- helpers -------------------------------------------------------------


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.data.shape != b.data.shape:
        raise DimensionError(f"{op}: shapes {a.data.shape} and {b.data.shape} differ")


def _is_scalar(t: Tensor) -> bool:
    return t.data.ndim == 0


def _coerce(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


# --- arithmetic ----------------------------------------------------------


def add(a: Tensor, b) -> Tensor:
    b = _coerce(b)
    if not (_is_scalar(a) or _is_scalar(b)):
        _same_shape(a, b, "add")
    out = Tensor(a.data + b.data)

    def bwd(g):
        a.accumulate(g if not _is_scalar(a) else g.sum())
        b.accumulate(g if not _is_scalar(b) else g.sum())

    return _record(out, bwd)


def sub(a: Tensor, b) -> Tensor:
    b = _coerce(b)
    if not (_is_scalar(a) or _is_scalar(b)):
        _same_shape(a, b, "sub")
    out = Tensor(a.data - b.data)

    def bwd(g):
        a.accumulate(g if not _is_scalar(a) else g.sum())
        b.accumulate(-g if not _is_scalar(b) else -g.sum())

    return _record(out, bwd)


def mul(a: Tensor, b) -> Tensor:
    b = _coerce(b)
    if not (_is_scalar(a) or _is_scalar(b)):
        _same_shape(a, b, "mul")
    out = Tensor(a.data * b.data)

    def bwd(g):
        ga = g * b.data
        gb = g * a.data
        a.accumulate(ga if not _is_scalar(a) else ga.sum())
        b.accumulate(gb if not _is_scalar(b) else gb.sum())

    return _record(out, bwd)


def scale(a: Tensor, c: float) -> Tensor:
    out = Tensor(a.data * c)

    def bwd(g):
        a.accumulate(g * c)

    return _record(out, bwd)


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """Row-broadcast bias add: (n, d) + (d,) or (d,) + (d,)."""
    if x.data.shape[-1:] != b.data.shape or b.data.ndim != 1:
        raise DimensionError(f"add_bias: shapes {x.data.shape} and {b.data.shape}")
    out = Tensor(x.data + b.data)

    def bwd(g):
        x.accumulate(g)
        b.accumulate(g if g.ndim == 1 else g.sum(axis=0))

    return _record(out, bwd)


def mul_rowvec(x: Tensor, v: Tensor) -> Tensor:
    """Row-broadcast elementwise product: (n, d) * (d,) or (d,) * (d,)."""
    if x.data.shape[-1:] != v.data.shape or v.data.ndim != 1:
        raise DimensionError(f"mul_rowvec: shapes {x.data.shape} and {v.data.shape}")
    out = Tensor(x.data * v.data)

    def bwd(g):
        x.accumulate(g * v.data)
        gv = g * x.data
        v.accumulate(gv if gv.ndim == 1 else gv.sum(axis=0))

    return _record(out, bwd)


def outer_rows(weights: Array, v: Tensor) -> Tensor:
    """Constant-per-row scaling of a vector: out[i] = weights[i] * v."""
    out = Tensor(weights[:, None] * v.data)

    def bwd(g):
        v.accumulate((weights[:, None] * g).sum(axis=0))

    return _record(out, bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix / matrix-vector / vector-vector product with gradients."""
    ad, bd = a.data, b.data
    if ad.ndim == 0 or bd.ndim == 0 or ad.shape[-1] != bd.shape[0]:
        raise DimensionError(f"matmul: shapes {ad.shape} and {bd.shape} do not align")
    out = Tensor(ad @ bd)

    def bwd(g):
        if ad.ndim == 2 and bd.ndim == 2:
            a.accumulate(g @ bd.T)
            b.accumulate(ad.T @ g)
        elif ad.ndim == 2 and bd.ndim == 1:
            a.accumulate(np.outer(g, bd))
            b.accumulate(ad.T @ g)
        elif ad.ndim == 1 and bd.ndim == 2:
            a.accumulate(g @ bd.T)
            b.accumulate(np.outer(ad, g))
        else:  # 1-D dot product
            a.accumulate(g * bd)
            b.accumulate(g * ad)

    return _record(out, bwd)


def transpose(a: Tensor) -> Tensor:
    out = Tensor(a.data.T)

    def bwd(g):
        a.accumulate(g.T)

    return _record(out, bwd)


# --- nonlinearities ------------------------------------------------------


def sigmoid(a: Tensor) -> Tensor:
    y = expit(a.data)
    out = Tensor(y)

    def bwd(g):
        a.accumulate(g * y * (1.0 - y))

    return _record(out, bwd)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = Tensor(y)

    def bwd(g):
        a.accumulate(g * (1.0 - y * y))

    return _record(out, bwd)


def relu(a: Tensor) -> Tensor:
    y = np.maximum(a.data, 0.0)
    out = Tensor(y)

    def bwd(g):
        a.accumulate(g * (a.data > 0.0))

    return _record(out, bwd)


def softmax(a: Tensor, scl: float = 1.0, mask: Array | None = None) -> Tensor:
    """Stable softmax over the last axis of a 1-D or 2-D tensor.

    Logits are multiplied by ``scl`` before normalization. ``mask`` is an
    optional boolean array (True = keep) matching the input shape; masked
    entries get probability 0.
    """
    if a.data.size == 0:
        raise ValueError("softmax: empty input")
    if scl <= 0:
        raise ValueError(f"softmax: scale must be positive, got {scl}")
    z = a.data * scl
    if mask is not None:
        z = np.where(mask, z, -np.inf)
    m = z.max(axis=-1, keepdims=True)
    e = np.exp(z - m)
    y = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(y)

    def bwd(g):
        # d softmax: y * (g - sum(g*y)) times the input scale
        inner = (g * y).sum(axis=-1, keepdims=True)
        a.accumulate(scl * y * (g - inner))

    return _record(out, bwd)


# --- structural ops ------------------------------------------------------


def concat(parts: list[Tensor], axis: int = -1) -> Tensor:
    datas = [p.data for p in parts]
    out = Tensor(np.concatenate(datas, axis=axis))
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis if axis >= 0 else g.ndim + axis] = slice(lo, hi)
            p.accumulate(g[tuple(idx)])

    return _record(out, bwd)


def slice_row(x: Tensor, i: int) -> Tensor:
    """Row i of a 2-D tensor, kept 2-D with shape (1, d)."""
    out = Tensor(x.data[i : i + 1].copy())

    def bwd(g):
        if x.grad is None:
            x.grad = np.zeros_like(x.data)
        x.grad[i] += g[0]

    return _record(out, bwd)


def lookup(table: Tensor, ids: Array) -> Tensor:
    """Embedding lookup: rows of ``table`` selected by integer ``ids``."""
    out = Tensor(table.data[ids])

    def bwd(g):
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        np.add.at(table.grad, ids, g)

    return _record(out, bwd)


def weighted_sum(parts: list[Tensor], weights: Array) -> Tensor:
    """Sum_t weights[:, t] * parts[t] with constant (non-learned) weights.

    Each part has shape (b, d); ``weights`` has shape (b, len(parts)).
    """
    w = weights[:, :, None]
    out = Tensor(sum(w[:, t] * parts[t].data for t in range(len(parts))))

    def bwd(g):
        for t, p in enumerate(parts):
            p.accumulate(w[:, t] * g)

    return _record(out, bwd)


def blend(parts: list[Tensor], coeffs: Tensor) -> Tensor:
    """Differentiable convex-style combination: sum_t coeffs[:, t] * parts[t].

    Gradients flow to both the parts (each (b, d)) and the coefficient
    matrix ((b, len(parts))); used for attention context vectors.
    """
    c = coeffs.data
    out = Tensor(sum(c[:, t : t + 1] * parts[t].data for t in range(len(parts))))

    def bwd(g):
        cg = np.empty_like(c)
        for t, p in enumerate(parts):
            p.accumulate(c[:, t : t + 1] * g)
            cg[:, t] = (g * p.data).sum(axis=-1)
        coeffs.accumulate(cg)

    return _record(out, bwd)


def stack_cols(parts: list[Tensor]) -> Tensor:
    """Stack 1-D tensors of shape (b,) into a (b, len(parts)) matrix."""
    out = Tensor(np.stack([p.data for p in parts], axis=1))

    def bwd(g):
        for t, p in enumerate(parts):
            p.accumulate(g[:, t])

    return _record(out, bwd)


def additive_scores(query: Tensor, keys: list[Tensor], v: Tensor) -> Tensor:
    """Concat-style attention energies: out[:, i] = tanh(query + keys[i]) @ v.

    ``query`` and each key are (b, a); returns (b, len(keys)). Fused into
    one op because it runs once per decode step over every memory slot.
    """
    tanhs = [np.tanh(query.data + k.data) for k in keys]
    out = Tensor(np.stack([t @ v.data for t in tanhs], axis=1))

    def bwd(g):
        dq = np.zeros_like(query.data)
        dv = np.zeros_like(v.data)
        for i, (k, t) in enumerate(zip(keys, tanhs)):
            dpre = (g[:, i : i + 1] * v.data) * (1.0 - t * t)
            dv += (g[:, i : i + 1] * t).sum(axis=0)
            dq += dpre
            k.accumulate(dpre)
        query.accumulate(dq)
        v.accumulate(dv)

    return record_op(out, bwd)


def sum_all(a: Tensor) -> Tensor:
    out = Tensor(np.asarray(a.data.sum()))

    def bwd(g):
        a.accumulate(np.full_like(a.data, float(g)))

    return _record(out, bwd)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-6) -> Tensor:
    """Row-wise layer normalization of a 2-D tensor."""
    if x.data.ndim != 2:
        raise DimensionError(f"layer_norm expects 2-D input, got {x.data.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = Tensor(xhat * gain.data + bias.data)

    def bwd(g):
        d = x.data.shape[-1]
        dxhat = g * gain.data
        gain.accumulate((g * xhat).sum(axis=0))
        bias.accumulate(g.sum(axis=0))
        x.accumulate(inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                            - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True) / d))

    return _record(out, bwd)


def cross_entropy_rows(logits: Tensor, targets: Array, mask: Array | None = None) -> Tensor:
    """Summed cross-entropy of integer ``targets`` under row-wise softmax.

    ``mask`` (float or bool, shape (b,)) zeroes padded rows. Returns a
    scalar tensor; divide by the token count for a mean.
    """
    z = logits.data
    m = np.ones(z.shape[0]) if mask is None else np.asarray(mask, dtype=np.float64)
    zmax = z.max(axis=-1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=-1))
    picked = z[np.arange(z.shape[0]), targets]
    out = Tensor(np.asarray(((lse - picked) * m).sum()))

    def bwd(g):
        p = np.exp(z - zmax)
        p /= p.sum(axis=-1, keepdims=True)
        p[np.arange(z.shape[0]), targets] -= 1.0
        logits.accumulate(float(g) * p * m[:, None])

    return _record(out, bwd)
