"""Baseline and substrate encoders: BiGRU, self-attention block, syntax GCN."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .cells import GruCell, gru_scan
from .errors import DimensionError
from .graph import DepGraph
from .params import ParamStore
from .tensor import (Tensor, add, add_bias, concat, layer_norm, lookup, matmul,
                     outer_rows, relu, softmax, transpose)

log = logging.getLogger(__name__)

PAD, BOS, EOS, UNK = 0, 1, 2, 3
RESERVED = ("<pad>", "<bos>", "<eos>", "<unk>")


@dataclass
class Vocab:
    """Token/id map with reserved pad, bos, eos, unk entries."""

    itos: list[str]
    stoi: dict[str, int]

    @classmethod
    def build(cls, tokens) -> "Vocab":
        itos = list(RESERVED) + sorted(set(tokens) - set(RESERVED))
        return cls(itos, {t: i for i, t in enumerate(itos)})

    def __len__(self) -> int:
        return len(self.itos)

    def encode(self, tokens) -> np.ndarray:
        return np.array([self.stoi.get(t, UNK) for t in tokens], dtype=np.int64)

    def decode(self, ids) -> list[str]:
        return [self.itos[i] for i in ids]


@dataclass
class EmbeddingTable:
    vocab: Vocab
    table: Tensor

    @classmethod
    def create(cls, store: ParamStore, name: str, vocab: Vocab, d_emb: int) -> "EmbeddingTable":
        return cls(vocab, store.matrix(name, len(vocab), d_emb))

    def rows(self, ids: np.ndarray) -> Tensor:
        return lookup(self.table, ids)


# --- bidirectional GRU encoder ------------------------------------------------


def bigru_encode(ids: np.ndarray, emb: EmbeddingTable, fwd: GruCell,
                 bwd: GruCell) -> list[Tensor]:
    """Concatenated forward/backward GRU states over embedded tokens.

    ``ids`` is (batch, length) or (length,); returns a time-major list of
    (batch, 2*d_hidden) tensors, zero initial states on both ends.
    """
    ids = np.atleast_2d(np.asarray(ids))
    batch, length = ids.shape
    if length == 0:
        raise ValueError("bigru_encode: empty sequence")
    xs = [emb.rows(ids[:, t]) for t in range(length)]
    h_fwd = gru_scan(fwd, xs)
    h_bwd = gru_scan(bwd, xs, reverse=True)
    return [concat([h_fwd[t], h_bwd[t]], axis=-1) for t in range(length)]


# --- sinusoidal positions -------------------------------------------------------


def positional_encoding(t: int, d: int) -> np.ndarray:
    """Fixed sin/cos position features; even dims sine, odd dims cosine."""
    if d % 2 != 0:
        raise ValueError(f"positional encoding needs even width, got {d}")
    pe = np.zeros(d)
    j = np.arange(d // 2)
    angle = t / np.power(10000.0, 2 * j / d)
    pe[0::2] = np.sin(angle)
    pe[1::2] = np.cos(angle)
    return pe


def positional_matrix(length: int, d: int) -> np.ndarray:
    return np.stack([positional_encoding(t, d) for t in range(length)])


# --- self-attention block -----------------------------------------------------


@dataclass
class AttentionHead:
    q: Tensor
    k: Tensor
    v: Tensor


@dataclass
class AttentionBlockParams:
    heads: list[AttentionHead]
    out_proj: Tensor
    ffn_w1: Tensor
    ffn_b1: Tensor
    ffn_w2: Tensor
    ffn_b2: Tensor
    ln1_gain: Tensor
    ln1_bias: Tensor
    ln2_gain: Tensor
    ln2_bias: Tensor
    width: int

    @property
    def head_dim(self) -> int:
        return self.width // len(self.heads)


def make_attention_block(store: ParamStore, prefix: str, d_model: int,
                         n_heads: int, d_ff: int) -> AttentionBlockParams:
    if d_model % n_heads != 0:
        raise DimensionError(f"width {d_model} not divisible by {n_heads} heads")
    d_head = d_model // n_heads
    heads = [AttentionHead(q=store.matrix(f"{prefix}.h{i}.q", d_head, d_model),
                           k=store.matrix(f"{prefix}.h{i}.k", d_head, d_model),
                           v=store.matrix(f"{prefix}.h{i}.v", d_head, d_model))
             for i in range(n_heads)]
    return AttentionBlockParams(
        heads=heads,
        out_proj=store.matrix(f"{prefix}.out", d_model, d_model),
        ffn_w1=store.matrix(f"{prefix}.ffn.W1", d_ff, d_model),
        ffn_b1=store.bias(f"{prefix}.ffn.b1", d_ff),
        ffn_w2=store.matrix(f"{prefix}.ffn.W2", d_model, d_ff),
        ffn_b2=store.bias(f"{prefix}.ffn.b2", d_model),
        ln1_gain=store.ones(f"{prefix}.ln1.g", d_model),
        ln1_bias=store.bias(f"{prefix}.ln1.b", d_model),
        ln2_gain=store.ones(f"{prefix}.ln2.g", d_model),
        ln2_bias=store.bias(f"{prefix}.ln2.b", d_model),
        width=d_model)


def multi_head_attention(queries: Tensor, keys: Tensor, params: AttentionBlockParams,
                         mask: np.ndarray | None = None,
                         collect_weights: list | None = None) -> Tensor:
    """Scaled dot-product attention of ``queries`` over ``keys`` (both (L, d)).

    ``mask`` is boolean (Lq, Lk), True where attention is allowed. Per-head
    weight matrices are appended to ``collect_weights`` when given.
    """
    outs = []
    for head in params.heads:
        q = matmul(queries, transpose(head.q))
        k = matmul(keys, transpose(head.k))
        v = matmul(keys, transpose(head.v))
        scores = matmul(q, transpose(k))
        weights = softmax(scores, 1.0 / np.sqrt(params.head_dim), mask=mask)
        if collect_weights is not None:
            collect_weights.append(weights.data)
        outs.append(matmul(weights, v))
    return matmul(concat(outs, axis=-1), transpose(params.out_proj))


def feed_forward(x: Tensor, params: AttentionBlockParams) -> Tensor:
    hidden = relu(add_bias(matmul(x, transpose(params.ffn_w1)), params.ffn_b1))
    return add_bias(matmul(hidden, transpose(params.ffn_w2)), params.ffn_b2)


def self_attention_block(inputs: Tensor, params: AttentionBlockParams,
                         mask: np.ndarray | None = None,
                         collect_weights: list | None = None) -> Tensor:
    """Post-norm transformer encoder block: attention then FFN sublayer."""
    if inputs.data.shape[-1] != params.width:
        raise DimensionError(f"block width {params.width} vs input {inputs.data.shape}")
    attended = multi_head_attention(inputs, inputs, params, mask, collect_weights)
    x = layer_norm(add(inputs, attended), params.ln1_gain, params.ln1_bias)
    x = layer_norm(add(x, feed_forward(x, params)), params.ln2_gain, params.ln2_bias)
    return x


# --- syntactic GCN --------------------------------------------------------------


@dataclass
class GcnParams:
    """Direction-specific weights, label-specific biases, rectifier units."""

    w_in: Tensor
    w_out: Tensor
    w_self: Tensor
    label_bias: dict[str, Tensor]
    default_bias: Tensor
    self_bias: Tensor
    edge_dropout: float = 0.0
    _warned: set = field(default_factory=set, repr=False)


def make_gcn(store: ParamStore, prefix: str, d: int, labels,
             edge_dropout: float = 0.2) -> GcnParams:
    if not 0.0 <= edge_dropout < 1.0:
        raise ValueError(f"edge_dropout {edge_dropout} outside [0, 1)")
    return GcnParams(
        w_in=store.matrix(f"{prefix}.W_in", d, d),
        w_out=store.matrix(f"{prefix}.W_out", d, d),
        w_self=store.matrix(f"{prefix}.W_self", d, d),
        label_bias={lab: store.bias(f"{prefix}.b_lab.{lab}", d) for lab in sorted(set(labels))},
        default_bias=store.bias(f"{prefix}.b_default", d),
        self_bias=store.bias(f"{prefix}.b_self", d),
        edge_dropout=edge_dropout)


def _edge_bias(params: GcnParams, graph: DepGraph, edge: tuple[int, int]) -> Tensor:
    label = graph.labels.get(edge, "")
    bias = params.label_bias.get(label)
    if bias is None:
        if label not in params._warned:
            params._warned.add(label)
            log.info("gcn: no bias registered for label %r, using default", label)
        return params.default_bias
    return bias


def gcn_layer(inputs: Tensor, graph: DepGraph, params: GcnParams,
              training: bool = False, rng: np.random.Generator | None = None) -> Tensor:
    """One graph-convolution pass over (length, d) inputs.

    Incoming, outgoing, and self messages use separate weights; each edge
    contributes its label bias. In training mode each non-self edge is
    dropped independently with the configured rate.
    """
    length = len(graph)
    if inputs.data.shape[0] != length:
        raise DimensionError(f"gcn: {inputs.data.shape[0]} rows vs {length} tokens")
    edges = sorted(graph.edges)
    if training and params.edge_dropout > 0.0:
        if rng is None:
            rng = np.random.default_rng()
        edges = [e for e in edges if rng.random() >= params.edge_dropout]

    a_in = np.zeros((length, length))
    a_out = np.zeros((length, length))
    for i, j in edges:
        a_in[j, i] += 1.0
        a_out[i, j] += 1.0

    total = matmul(inputs, transpose(params.w_self))
    total = add(total, matmul(Tensor(a_in), matmul(inputs, transpose(params.w_in))))
    total = add(total, matmul(Tensor(a_out), matmul(inputs, transpose(params.w_out))))
    total = add_bias(total, params.self_bias)

    bias_groups: dict[int, np.ndarray] = {}
    for i, j in edges:
        bias = _edge_bias(params, graph, (i, j))
        key = id(bias)
        counts = bias_groups.setdefault(key, np.zeros(length))
        counts[j] += 1.0
        counts[i] += 1.0
    seen = set()
    for i, j in edges:
        bias = _edge_bias(params, graph, (i, j))
        if id(bias) in seen:
            continue
        seen.add(id(bias))
        total = add(total, outer_rows(bias_groups[id(bias)], bias))
    return relu(total)
