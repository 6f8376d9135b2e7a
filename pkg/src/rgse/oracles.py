"""Independent straight-line reference implementations.

Everything here is written with explicit loops over plain numpy arrays
and no reuse of the production tensor ops, so the production layers can
be checked against a second, simpler route. Oracle inputs take raw
arrays; helpers pull them out of parameter bundles where convenient.
"""

from __future__ import annotations

import math

import numpy as np

from .graph import DepGraph, incoming_edges


def sigmoid_scalar(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def matvec(w: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.zeros(w.shape[0])
    for i in range(w.shape[0]):
        acc = 0.0
        for j in range(w.shape[1]):
            acc += w[i, j] * x[j]
        out[i] = acc
    return out


def softmax_vec(scores: list[float]) -> list[float]:
    m = max(scores)
    exps = [math.exp(s - m) for s in scores]
    z = sum(exps)
    return [e / z for e in exps]


def phi_oracle(mode: str, sources: list[np.ndarray],
               gate_w: np.ndarray | None = None,
               gate_b: np.ndarray | None = None) -> np.ndarray:
    """Edge integration evaluated per edge with scalar loops."""
    d = sources[0].shape[0]
    total = np.zeros(d)
    for h in sources:
        if mode == "gated":
            pre = matvec(gate_w, h) + gate_b
            for k in range(d):
                total[k] += sigmoid_scalar(pre[k]) * h[k]
        else:
            total += h
    if mode == "average":
        total /= len(sources)
    return total


def gru_step_oracle(cell: dict[str, np.ndarray], x: np.ndarray,
                    s_prev: np.ndarray) -> np.ndarray:
    """The eight-equation recurrence evaluated coordinate by coordinate."""
    d = s_prev.shape[0]
    z_pre = matvec(cell["W_z"], s_prev) + matvec(cell["U_z"], x) + cell["b_z"]
    r_pre = matvec(cell["W_r"], s_prev) + matvec(cell["U_r"], x) + cell["b_r"]
    z = np.array([sigmoid_scalar(v) for v in z_pre])
    r = np.array([sigmoid_scalar(v) for v in r_pre])
    cand = np.tanh(matvec(cell["W_h"], x) + matvec(cell["U_h"], r * s_prev))
    out = np.zeros(d)
    for k in range(d):
        out[k] = z[k] * s_prev[k] + (1.0 - z[k]) * cand[k]
    return out


def cell_arrays(cell) -> dict[str, np.ndarray]:
    return {name: getattr(cell, name).data
            for name in ("W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_h", "U_h")}


def rgse_oracle(h_tilde: np.ndarray, graph: DepGraph, variant: str,
                phi_mode: str, fwd: dict[str, np.ndarray], bwd: dict[str, np.ndarray],
                gate_w: np.ndarray | None = None,
                gate_b: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Full propagation for one sentence, one position at a time."""
    edge_filter = {"forward": "total", "bi_total": "total",
                   "bi_past": "past_only", "bi_future": "future_only"}[variant]
    length, _ = h_tilde.shape
    d_s = fwd["W_z"].shape[0]

    def run(direction: str, cell: dict[str, np.ndarray]) -> np.ndarray:
        states = np.zeros((length, d_s))
        prev = np.zeros(d_s)
        order = range(length) if direction == "forward" else range(length - 1, -1, -1)
        for t in order:
            refs = incoming_edges(graph, t, direction, edge_filter)
            phi = phi_oracle(phi_mode, [h_tilde[r.source] for r in refs], gate_w, gate_b)
            prev = gru_step_oracle(cell, phi, prev)
            states[t] = prev
        return states

    s_fwd = run("forward", fwd)
    if variant == "forward":
        return s_fwd, np.zeros((length, d_s))
    return s_fwd, run("backward", bwd)


def tau_normal_oracle(s_fwd: np.ndarray, s_bwd: np.ndarray,
                      h: np.ndarray) -> np.ndarray:
    d = h.shape[0]
    out = np.zeros(2 * d)
    for k in range(d):
        out[k] = s_fwd[k] + h[k]
        out[d + k] = s_bwd[k] + h[k]
    return out


def tau_gated_oracle(s_fwd: np.ndarray, s_bwd: np.ndarray, h: np.ndarray,
                     omega_f: np.ndarray, psi_f: np.ndarray,
                     omega_b: np.ndarray, psi_b: np.ndarray) -> np.ndarray:
    d = h.shape[0]
    out = np.zeros(2 * d)
    for k in range(d):
        lam1 = sigmoid_scalar(omega_f[k] * s_fwd[k] + psi_f[k] * h[k])
        lam2 = sigmoid_scalar(omega_b[k] * s_bwd[k] + psi_b[k] * h[k])
        out[k] = lam1 * s_fwd[k] + (1.0 - lam1) * h[k]
        out[d + k] = lam2 * s_bwd[k] + (1.0 - lam2) * h[k]
    return out


def attention_rows_oracle(q: np.ndarray, k: np.ndarray, v: np.ndarray,
                          scale: float) -> np.ndarray:
    """Single-head scaled dot-product attention, one query row at a time."""
    length = q.shape[0]
    out = np.zeros_like(v)
    for t in range(length):
        scores = []
        for m in range(length):
            scores.append(float(np.dot(q[t], k[m])) * scale)
        weights = softmax_vec(scores)
        for m in range(length):
            out[t] += weights[m] * v[m]
    return out


def gcn_node_oracle(h: np.ndarray, graph: DepGraph, node: int,
                    w_in: np.ndarray, w_out: np.ndarray, w_self: np.ndarray,
                    biases: dict[str, np.ndarray], default_bias: np.ndarray,
                    self_bias: np.ndarray, dropped: set | None = None) -> np.ndarray:
    """Pre-activation sum over one node's neighborhood."""
    dropped = dropped or set()
    total = matvec(w_self, h[node]) + self_bias
    for (i, j) in sorted(graph.edges):
        if (i, j) in dropped:
            continue
        label_bias = biases.get(graph.labels.get((i, j), ""), default_bias)
        if j == node:
            total = total + matvec(w_in, h[i]) + label_bias
        if i == node:
            total = total + matvec(w_out, h[j]) + label_bias
    return np.maximum(total, 0.0)


def bigru_oracle(x: np.ndarray, fwd: dict[str, np.ndarray],
                 bwd: dict[str, np.ndarray]) -> np.ndarray:
    """Bidirectional recurrence over embedded inputs; rows are concat states."""
    length = x.shape[0]
    d = fwd["W_z"].shape[0]
    out = np.zeros((length, 2 * d))
    prev = np.zeros(d)
    for t in range(length):
        prev = gru_step_oracle(fwd, x[t], prev)
        out[t, :d] = prev
    prev = np.zeros(d)
    for t in range(length - 1, -1, -1):
        prev = gru_step_oracle(bwd, x[t], prev)
        out[t, d:] = prev
    return out


def bleu_oracle(candidates: list[list[str]], references: list[list[str]]) -> float:
    """Corpus BLEU-4 by direct dictionary counting of clipped n-grams."""
    match = [0] * 5
    total = [0] * 5
    cand_len = 0
    ref_len = 0
    for cand, ref in zip(candidates, references):
        cand_len += len(cand)
        ref_len += len(ref)
        for n in range(1, 5):
            ref_counts: dict[tuple, int] = {}
            for i in range(len(ref) - n + 1):
                key = tuple(ref[i:i + n])
                ref_counts[key] = ref_counts.get(key, 0) + 1
            cand_counts: dict[tuple, int] = {}
            for i in range(len(cand) - n + 1):
                key = tuple(cand[i:i + n])
                cand_counts[key] = cand_counts.get(key, 0) + 1
            for key, count in cand_counts.items():
                match[n] += min(count, ref_counts.get(key, 0))
                total[n] += count
    log_sum = 0.0
    for n in range(1, 5):
        if total[n] == 0 or match[n] == 0:
            return 0.0
        log_sum += math.log(match[n] / total[n])
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / max(cand_len, 1))
    return bp * math.exp(log_sum / 4.0)
