"""GRU cell used by the recurrent encoder and decoder.

Convention (matching the graph-recurrent layer): W_* multiply the
previous state, U_* multiply the input, except the candidate where W_h
multiplies the input and U_h the reset-gated state; the candidate has no
bias. The update gate keeps the old state:

    z = sigmoid(W_z s + U_z x + b_z)
    r = sigmoid(W_r s + U_r x + b_r)
    c = tanh(W_h x + U_h (r * s))
    s' = z * s + (1 - z) * c
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from scipy.special import expit as _sigmoid

from .params import ParamStore
from .tensor import Tensor, record_multi, record_op


@dataclass
class GruCell:
    W_z: Tensor
    U_z: Tensor
    b_z: Tensor
    W_r: Tensor
    U_r: Tensor
    b_r: Tensor
    W_h: Tensor
    U_h: Tensor

    @property
    def state_dim(self) -> int:
        return self.W_z.shape[0]

    @property
    def input_dim(self) -> int:
        return self.U_z.shape[1]


def make_gru_cell(store: ParamStore, prefix: str, d_state: int, d_in: int) -> GruCell:
    return GruCell(
        W_z=store.matrix(f"{prefix}.W_z", d_state, d_state),
        U_z=store.matrix(f"{prefix}.U_z", d_state, d_in),
        b_z=store.bias(f"{prefix}.b_z", d_state),
        W_r=store.matrix(f"{prefix}.W_r", d_state, d_state),
        U_r=store.matrix(f"{prefix}.U_r", d_state, d_in),
        b_r=store.bias(f"{prefix}.b_r", d_state),
        W_h=store.matrix(f"{prefix}.W_h", d_state, d_in),
        U_h=store.matrix(f"{prefix}.U_h", d_state, d_state),
    )


def gru_step(cell: GruCell, x: Tensor, s_prev: Tensor) -> Tensor:
    """One recurrence step; works on (d,) vectors or (b, d) row batches.

    Implemented as a single fused tape op (the recurrence dominates the
    training profile); the backward closure applies the analytic chain
    rule for all eight parameters and both inputs.
    """
    xd = np.atleast_2d(x.data)
    sd = np.atleast_2d(s_prev.data)
    z = _sigmoid(sd @ cell.W_z.data.T + xd @ cell.U_z.data.T + cell.b_z.data)
    r = _sigmoid(sd @ cell.W_r.data.T + xd @ cell.U_r.data.T + cell.b_r.data)
    rs = r * sd
    c = np.tanh(xd @ cell.W_h.data.T + rs @ cell.U_h.data.T)
    s_new = z * sd + (1.0 - z) * c
    out = Tensor(s_new if s_prev.data.ndim == 2 else s_new[0])

    def bwd(g):
        g2 = np.atleast_2d(g)
        dz = g2 * (sd - c)
        dc_pre = (g2 * (1.0 - z)) * (1.0 - c * c)
        dz_pre = dz * z * (1.0 - z)
        drs = dc_pre @ cell.U_h.data
        dr_pre = (drs * sd) * r * (1.0 - r)
        cell.W_h.accumulate(dc_pre.T @ xd)
        cell.U_h.accumulate(dc_pre.T @ rs)
        cell.W_z.accumulate(dz_pre.T @ sd)
        cell.U_z.accumulate(dz_pre.T @ xd)
        cell.b_z.accumulate(dz_pre.sum(axis=0))
        cell.W_r.accumulate(dr_pre.T @ sd)
        cell.U_r.accumulate(dr_pre.T @ xd)
        cell.b_r.accumulate(dr_pre.sum(axis=0))
        dx = dc_pre @ cell.W_h.data + dz_pre @ cell.U_z.data + dr_pre @ cell.U_r.data
        ds = (g2 * z + drs * r + dz_pre @ cell.W_z.data + dr_pre @ cell.W_r.data)
        x.accumulate(dx if x.data.ndim == 2 else dx[0])
        s_prev.accumulate(ds if s_prev.data.ndim == 2 else ds[0])

    return record_op(out, bwd)



def gru_scan(cell: GruCell, xs: list[Tensor], reverse: bool = False) -> list[Tensor]:
    """Whole-sequence recurrence fused into one tape record.

    Forward stores the per-step gate values; the backward closure runs
    truncated-nowhere BPTT, accumulating parameter gradients in local
    buffers and touching each parameter once.
    """
    length = len(xs)
    batch = np.atleast_2d(xs[0].data).shape[0]
    d = cell.state_dim
    order = list(range(length - 1, -1, -1)) if reverse else list(range(length))
    w_z, u_z, b_z = cell.W_z.data, cell.U_z.data, cell.b_z.data
    w_r, u_r, b_r = cell.W_r.data, cell.U_r.data, cell.b_r.data
    w_h, u_h = cell.W_h.data, cell.U_h.data

    prevs, zs, rs_, cs = {}, {}, {}, {}
    prev = np.zeros((batch, d))
    outs_data: dict[int, np.ndarray] = {}
    for t in order:
        xd = xs[t].data
        z = _sigmoid(prev @ w_z.T + xd @ u_z.T + b_z)
        r = _sigmoid(prev @ w_r.T + xd @ u_r.T + b_r)
        rs = r * prev
        c = np.tanh(xd @ w_h.T + rs @ u_h.T)
        s_new = z * prev + (1.0 - z) * c
        prevs[t], zs[t], rs_[t], cs[t] = prev, z, r, c
        outs_data[t] = s_new
        prev = s_new
    outs = [Tensor(outs_data[t]) for t in range(length)]

    def bwd(grads: list[np.ndarray | None]):
        acc = {name: np.zeros_like(getattr(cell, name).data)
               for name in ("W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_h", "U_h")}
        running = np.zeros((batch, d))
        for t in reversed(order):
            g = running if grads[t] is None else running + grads[t]
            s_prev, z, r, c = prevs[t], zs[t], rs_[t], cs[t]
            xd = xs[t].data
            dz_pre = (g * (s_prev - c)) * z * (1.0 - z)
            dc_pre = (g * (1.0 - z)) * (1.0 - c * c)
            drs = dc_pre @ u_h
            dr_pre = (drs * s_prev) * r * (1.0 - r)
            acc["W_h"] += dc_pre.T @ xd
            acc["U_h"] += dc_pre.T @ (r * s_prev)
            acc["W_z"] += dz_pre.T @ s_prev
            acc["U_z"] += dz_pre.T @ xd
            acc["b_z"] += dz_pre.sum(axis=0)
            acc["W_r"] += dr_pre.T @ s_prev
            acc["U_r"] += dr_pre.T @ xd
            acc["b_r"] += dr_pre.sum(axis=0)
            xs[t].accumulate(dc_pre @ w_h + dz_pre @ u_z + dr_pre @ u_r)
            running = g * z + drs * r + dz_pre @ w_z + dr_pre @ w_r
        for name, value in acc.items():
            getattr(cell, name).accumulate(value)

    return record_multi(outs, bwd)
