"""Graph-recurrent encoder layer.

Each position becomes a recurrent node that reads (a) the previous node
state along the scan direction and (b) an integration of the base-encoder
states behind its incoming dependency edges. Four directional variants
control which scans run and which temporal class of edges each node may
read; a residual combiner merges the two scan outputs with the base state.

Sequences are time-major lists of (batch, dim) tensors so one call can
propagate a whole length-grouped batch with per-sentence edge sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cells import GruCell, gru_scan
from .errors import DimensionError
from .graph import BACKWARD, FORWARD, FUTURE_ONLY, PAST_ONLY, TOTAL, DepGraph, EdgeRef, incoming_edges
from .params import ParamStore
from .tensor import (Tensor, add, add_bias, concat, matmul, mul, mul_rowvec,
                     scale, sigmoid, sub, transpose, weighted_sum)

VARIANTS = ("forward", "bi_total", "bi_past", "bi_future")
_VARIANT_FILTER = {"forward": TOTAL, "bi_total": TOTAL,
                   "bi_past": PAST_ONLY, "bi_future": FUTURE_ONLY}

_ONE = np.asarray(1.0)


@dataclass
class PhiConfig:
    """Edge integration: plain sum, degree-normalized average, or a learned
    sigmoid gate applied to each incoming state before summation."""

    mode: str  # "sum" | "average" | "gated"
    gate_matrix: Tensor | None = None
    gate_bias: Tensor | None = None

    def __post_init__(self):
        if self.mode not in ("sum", "average", "gated"):
            raise ValueError(f"unknown phi mode {self.mode!r}")
        if self.mode == "gated" and (self.gate_matrix is None or self.gate_bias is None):
            raise ValueError("gated phi requires gate_matrix and gate_bias")
        if self.mode != "gated" and (self.gate_matrix is not None or self.gate_bias is not None):
            raise ValueError(f"phi mode {self.mode!r} must not carry gate parameters")


@dataclass
class RgseGruParams:
    """Disjoint recurrence parameters for the two scan directions."""

    fwd: GruCell
    bwd: GruCell


@dataclass
class ResidualConfig:
    """Combiner for (forward state, backward state, base state).

    normal: concat(s_fwd + h, s_bwd + h)
    gated:  per direction lam = sigmoid(omega*s + psi*h) elementwise,
            concat(lam*s + (1-lam)*h, ...)
    """

    mode: str  # "normal" | "gated"
    omega_fwd: Tensor | None = None
    psi_fwd: Tensor | None = None
    omega_bwd: Tensor | None = None
    psi_bwd: Tensor | None = None

    def __post_init__(self):
        if self.mode not in ("normal", "gated"):
            raise ValueError(f"unknown tau mode {self.mode!r}")
        if self.mode == "gated" and None in (self.omega_fwd, self.psi_fwd,
                                             self.omega_bwd, self.psi_bwd):
            raise ValueError("gated tau requires omega/psi for both directions")


@dataclass
class RgseOutput:
    s_forward: list[Tensor]
    s_backward: list[Tensor]
    eta: list[Tensor]


def make_phi(store: ParamStore, prefix: str, mode: str, d_in: int) -> PhiConfig:
    if mode != "gated":
        return PhiConfig(mode)
    return PhiConfig("gated",
                     gate_matrix=store.matrix(f"{prefix}.gate_W", d_in, d_in),
                     gate_bias=store.bias(f"{prefix}.gate_b", d_in))


def make_residual(store: ParamStore, prefix: str, mode: str, d: int) -> ResidualConfig:
    if mode != "gated":
        return ResidualConfig(mode)
    return ResidualConfig("gated",
                          omega_fwd=store.bias(f"{prefix}.fwd.omega", d),
                          psi_fwd=store.bias(f"{prefix}.fwd.psi", d),
                          omega_bwd=store.bias(f"{prefix}.bwd.omega", d),
                          psi_bwd=store.bias(f"{prefix}.bwd.psi", d))


# --- phi -------------------------------------------------------------------


def _gate_values(phi: PhiConfig, h: Tensor) -> Tensor:
    g = phi.gate_matrix
    if h.data.ndim == 1:
        lam = sigmoid(add_bias(matmul(g, h), phi.gate_bias))
    else:
        lam = sigmoid(add_bias(matmul(h, transpose(g)), phi.gate_bias))
    return mul(lam, h)


def integrate(phi: PhiConfig, edges: list[EdgeRef], states: list[Tensor]) -> Tensor:
    """Reduce the base states behind ``edges`` into one node input.

    ``states`` is indexed by source position. The self edge guarantees the
    list is never empty; an empty list is an upstream contract violation.
    """
    if not edges:
        raise ValueError("integrate: empty edge list (self edge missing upstream)")
    picked = [states[e.source] for e in edges]
    if phi.mode == "gated":
        picked = [_gate_values(phi, h) for h in picked]
    total = picked[0]
    for h in picked[1:]:
        total = add(total, h)
    if phi.mode == "average":
        total = scale(total, 1.0 / len(picked))
    return total


def phi_weight_matrix(graphs: list[DepGraph], length: int, traversal: str,
                      edge_filter: str, averaged: bool) -> np.ndarray:
    """Constant aggregation weights: w[b, j, t] = 1 (or 1/|E_in|) when the
    state at position t feeds node j of sentence b."""
    w = np.zeros((len(graphs), length, length))
    for b, graph in enumerate(graphs):
        for j in range(length):
            refs = incoming_edges(graph, j, traversal, edge_filter)
            value = 1.0 / len(refs) if averaged else 1.0
            for r in refs:
                w[b, j, r.source] = value
    return w


def _phi_sequence(h_tilde: list[Tensor], graphs: list[DepGraph], traversal: str,
                  edge_filter: str, phi: PhiConfig) -> list[Tensor]:
    length = len(h_tilde)
    weights = phi_weight_matrix(graphs, length, traversal, edge_filter,
                                averaged=phi.mode == "average")
    parts = h_tilde if phi.mode != "gated" else [_gate_values(phi, h) for h in h_tilde]
    return [weighted_sum(parts, weights[:, j, :]) for j in range(length)]


# --- propagation -------------------------------------------------------------


def _scan(phis: list[Tensor], cell: GruCell, reverse: bool) -> list[Tensor]:
    return gru_scan(cell, phis, reverse=reverse)


def rgse_propagate(h_tilde: list[Tensor], graphs: list[DepGraph] | DepGraph,
                   variant: str, phi: PhiConfig,
                   gru: RgseGruParams) -> tuple[list[Tensor], list[Tensor]]:
    """Run the directional scans over graph-integrated inputs.

    ``h_tilde`` is a time-major list of (batch, d_in) tensors; ``graphs``
    holds one graph per batch row (a bare DepGraph means batch 1). The
    forward-only variant returns zeros for the backward half.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if isinstance(graphs, DepGraph):
        graphs = [graphs]
    length = len(h_tilde)
    if any(len(g) != length for g in graphs):
        raise DimensionError(f"graph length != input length {length}")
    if h_tilde and h_tilde[0].data.shape[0] != len(graphs):
        raise DimensionError(f"batch of {h_tilde[0].data.shape[0]} rows "
                             f"vs {len(graphs)} graphs")
    edge_filter = _VARIANT_FILTER[variant]

    s_fwd = _scan(_phi_sequence(h_tilde, graphs, FORWARD, edge_filter, phi),
                  gru.fwd, reverse=False)
    if variant == "forward":
        batch = h_tilde[0].data.shape[0]
        zeros = [Tensor(np.zeros((batch, gru.bwd.state_dim))) for _ in range(length)]
        return s_fwd, zeros
    s_bwd = _scan(_phi_sequence(h_tilde, graphs, BACKWARD, edge_filter, phi),
                  gru.bwd, reverse=True)
    return s_fwd, s_bwd


# --- residual combination ----------------------------------------------------


def _blend_gated(s: Tensor, h: Tensor, omega: Tensor, psi: Tensor) -> Tensor:
    lam = sigmoid(add(mul_rowvec(s, omega), mul_rowvec(h, psi)))
    return add(mul(lam, s), mul(sub(Tensor(_ONE), lam), h))


def combine(tau: ResidualConfig, s_fwd: Tensor, s_bwd: Tensor, h_tilde: Tensor) -> Tensor:
    """Merge scan states with the base state into the final encoder output."""
    if s_fwd.data.shape != h_tilde.data.shape or s_bwd.data.shape != h_tilde.data.shape:
        raise DimensionError(
            f"combine: state shapes {s_fwd.data.shape}/{s_bwd.data.shape} "
            f"vs base {h_tilde.data.shape}")
    if tau.mode == "normal":
        return concat([add(s_fwd, h_tilde), add(s_bwd, h_tilde)], axis=-1)
    return concat([_blend_gated(s_fwd, h_tilde, tau.omega_fwd, tau.psi_fwd),
                   _blend_gated(s_bwd, h_tilde, tau.omega_bwd, tau.psi_bwd)], axis=-1)


def rgse_apply(h_tilde: list[Tensor], graphs: list[DepGraph] | DepGraph, variant: str,
               phi: PhiConfig, gru: RgseGruParams, tau: ResidualConfig) -> RgseOutput:
    """Propagate then combine per position; eta has twice the state width."""
    s_fwd, s_bwd = rgse_propagate(h_tilde, graphs, variant, phi, gru)
    eta = [combine(tau, f, b, h) for f, b, h in zip(s_fwd, s_bwd, h_tilde)]
    return RgseOutput(s_fwd, s_bwd, eta)
