"""Full translation models.

RnmtModel: attentional encoder-decoder whose BiGRU encoder optionally
carries a graph-recurrent pass; the decoder attends over the combined
states when it is enabled.

HybridTransformer: a Transformer encoder whose configured lower layers
replace self-attention with BiGRU + graph recurrence + gated residual +
a learned projection back to model width; remaining layers and the
decoder are standard post-norm Transformer blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cells import GruCell, gru_scan, gru_step, make_gru_cell
from .config import ExperimentConfig
from .encoders import (BOS, EOS, AttentionBlockParams, AttentionHead,
                       EmbeddingTable, Vocab, bigru_encode, feed_forward,
                       make_attention_block, multi_head_attention,
                       positional_matrix, self_attention_block)
from .errors import DimensionError
from .graph import DepGraph
from .layer import (PhiConfig, ResidualConfig, RgseGruParams, combine,
                    make_phi, make_residual, rgse_propagate)
from .params import ParamStore
from .tensor import (Tensor, add, add_bias, additive_scores, blend, concat,
                     cross_entropy_rows, layer_norm, matmul, scale, slice_row,
                     softmax, tanh, transpose)


@dataclass
class Batch:
    """One length-grouped training batch (targets padded to a common length)."""

    graphs: list[DepGraph]
    src_ids: np.ndarray    # (b, L) int
    tgt_in: np.ndarray     # (b, T) int, starts with BOS
    tgt_out: np.ndarray    # (b, T) int, ends with EOS, padded
    tgt_mask: np.ndarray   # (b, T) float, 0 on padding


@dataclass
class RgseBundle:
    variant: str
    phi: PhiConfig
    gru: RgseGruParams
    tau: ResidualConfig


def make_rgse_bundle(store: ParamStore, prefix: str, variant: str, phi_mode: str,
                     tau_mode: str, d_state: int, d_in: int) -> RgseBundle:
    return RgseBundle(
        variant=variant,
        phi=make_phi(store, f"{prefix}.phi", phi_mode, d_in),
        gru=RgseGruParams(fwd=make_gru_cell(store, f"{prefix}.fwd", d_state, d_in),
                          bwd=make_gru_cell(store, f"{prefix}.bwd", d_state, d_in)),
        tau=make_residual(store, f"{prefix}.tau", tau_mode, d_state))


def apply_rgse(bundle: RgseBundle, h_tilde: list[Tensor],
               graphs: list[DepGraph] | DepGraph) -> list[Tensor]:
    s_fwd, s_bwd = rgse_propagate(h_tilde, graphs, bundle.variant, bundle.phi, bundle.gru)
    return [combine(bundle.tau, f, b, h) for f, b, h in zip(s_fwd, s_bwd, h_tilde)]


# --- recurrent NMT ----------------------------------------------------------


@dataclass
class AdditiveAttention:
    w_state: Tensor
    w_input: Tensor   # lets the query see the freshly embedded previous token
    w_memory: Tensor
    v: Tensor


@dataclass
class RnmtModel:
    config: ExperimentConfig
    src_vocab: Vocab
    tgt_vocab: Vocab
    src_emb: EmbeddingTable
    tgt_emb: EmbeddingTable
    enc_fwd: GruCell
    enc_bwd: GruCell
    rgse: RgseBundle | None
    dec_cell: GruCell
    att: AdditiveAttention
    init_w: Tensor
    init_b: Tensor
    out_w: Tensor
    out_b: Tensor
    store: ParamStore

    @property
    def memory_dim(self) -> int:
        return 4 * self.config.d_hidden if self.rgse else 2 * self.config.d_hidden

    def batch_loss(self, batch: Batch) -> tuple[Tensor, int]:
        return rnmt_batch_loss(self, batch)

    def decode(self, graph: DepGraph, src_ids: np.ndarray, max_len: int) -> list[int]:
        return greedy_decode(self, graph, src_ids, max_len)


def build_rnmt(config: ExperimentConfig, src_vocab: Vocab, tgt_vocab: Vocab) -> RnmtModel:
    store = ParamStore(config.seed)
    d_e, d_h = config.d_emb, config.d_hidden
    d_mem = 4 * d_h if config.rgse_enabled else 2 * d_h
    d_dec = 2 * d_h
    src_emb = EmbeddingTable.create(store, "src_emb.E", src_vocab, d_e)
    tgt_emb = EmbeddingTable.create(store, "tgt_emb.E", tgt_vocab, d_e)
    enc_fwd = make_gru_cell(store, "enc.fwd", d_h, d_e)
    enc_bwd = make_gru_cell(store, "enc.bwd", d_h, d_e)
    rgse = None
    if config.rgse_enabled:
        rgse = make_rgse_bundle(store, "rgse", config.variant, config.phi_mode,
                                config.tau_mode, d_state=2 * d_h, d_in=2 * d_h)
    d_att = 2 * d_h
    dec_cell = make_gru_cell(store, "dec.gru", d_dec, d_e + d_mem)
    att = AdditiveAttention(w_state=store.matrix("dec.att.W", d_att, d_dec),
                            w_input=store.matrix("dec.att.Wx", d_att, d_e),
                            w_memory=store.matrix("dec.att.U", d_att, d_mem),
                            v=store.vector("dec.att.v", d_att))
    init_w = store.matrix("dec.init.W", d_dec, d_mem)
    init_b = store.bias("dec.init.b", d_dec)
    out_w = store.matrix("dec.out.W", len(tgt_vocab), d_dec + d_mem)
    out_b = store.bias("dec.out.b", len(tgt_vocab))
    return RnmtModel(config, src_vocab, tgt_vocab, src_emb, tgt_emb, enc_fwd,
                     enc_bwd, rgse, dec_cell, att, init_w, init_b, out_w, out_b, store)


def rnmt_encode(model: RnmtModel, graphs: list[DepGraph] | DepGraph,
                src_ids: np.ndarray) -> list[Tensor]:
    """Encoder memory: combined states when enabled, plain BiGRU otherwise."""
    if isinstance(graphs, DepGraph):
        graphs = [graphs]
    ids = np.atleast_2d(np.asarray(src_ids))
    if ids.shape[1] != len(graphs[0]):
        raise DimensionError(f"{ids.shape[1]} ids vs {len(graphs[0])} graph tokens")
    h_tilde = bigru_encode(ids, model.src_emb, model.enc_fwd, model.enc_bwd)
    if model.rgse is None:
        return h_tilde
    return apply_rgse(model.rgse, h_tilde, graphs)


def initial_decoder_state(model: RnmtModel, memory: list[Tensor]) -> Tensor:
    pooled = memory[0]
    for m in memory[1:]:
        pooled = add(pooled, m)
    pooled = scale(pooled, 1.0 / len(memory))
    return tanh(add_bias(matmul(pooled, transpose(model.init_w)), model.init_b))


def _decode_step_inner(model: RnmtModel, prev_ids: np.ndarray, state: Tensor,
                       memory: list[Tensor],
                       memory_proj: list[Tensor]) -> tuple[Tensor, Tensor, Tensor]:
    emb = model.tgt_emb.rows(np.atleast_1d(prev_ids))
    query = add(matmul(state, transpose(model.att.w_state)),
                matmul(emb, transpose(model.att.w_input)))
    weights = softmax(additive_scores(query, memory_proj, model.att.v))
    context = blend(memory, weights)
    new_state = gru_step(model.dec_cell, concat([emb, context], axis=-1), state)
    logits = add_bias(matmul(concat([new_state, context], axis=-1),
                             transpose(model.out_w)), model.out_b)
    return logits, new_state, weights


def project_memory(model: RnmtModel, memory: list[Tensor]) -> list[Tensor]:
    """Attention key projections, shared across decode steps."""
    return [matmul(m, transpose(model.att.w_memory)) for m in memory]


def rnmt_decode_step(model: RnmtModel, prev_ids: np.ndarray, state: Tensor,
                     memory: list[Tensor]) -> tuple[Tensor, Tensor, Tensor]:
    """One teacher-forcing step; returns (logits, new state, attention weights)."""
    if not memory:
        raise ValueError("decode step needs non-empty memory")
    return _decode_step_inner(model, prev_ids, state, memory,
                              project_memory(model, memory))


def rnmt_batch_loss(model: RnmtModel, batch: Batch) -> tuple[Tensor, int]:
    memory = rnmt_encode(model, batch.graphs, batch.src_ids)
    proj = project_memory(model, memory)
    state = initial_decoder_state(model, memory)
    total: Tensor | None = None
    for t in range(batch.tgt_in.shape[1]):
        logits, state, _ = _decode_step_inner(model, batch.tgt_in[:, t], state,
                                              memory, proj)
        step = cross_entropy_rows(logits, batch.tgt_out[:, t], batch.tgt_mask[:, t])
        total = step if total is None else add(total, step)
    return total, int(batch.tgt_mask.sum())


# --- hybrid transformer -------------------------------------------------------


@dataclass
class FeedForwardNorms:
    ffn_w1: Tensor
    ffn_b1: Tensor
    ffn_w2: Tensor
    ffn_b2: Tensor
    ln1_gain: Tensor
    ln1_bias: Tensor
    ln2_gain: Tensor
    ln2_bias: Tensor


@dataclass
class HybridRgseLayer:
    gru_fwd: GruCell
    gru_bwd: GruCell
    rgse: RgseBundle
    proj_w: Tensor
    proj_b: Tensor
    sub: FeedForwardNorms


@dataclass
class CrossAttention:
    heads: list[AttentionHead]
    out_proj: Tensor
    ln_gain: Tensor
    ln_bias: Tensor
    width: int

    @property
    def head_dim(self) -> int:
        return self.width // len(self.heads)


@dataclass
class DecoderLayer:
    self_block: AttentionBlockParams
    cross: CrossAttention


@dataclass
class HybridTransformer:
    config: ExperimentConfig
    src_vocab: Vocab
    tgt_vocab: Vocab
    src_emb: EmbeddingTable
    tgt_emb: EmbeddingTable
    enc_layers: list[AttentionBlockParams | HybridRgseLayer]
    dec_layers: list[DecoderLayer]
    out_w: Tensor
    out_b: Tensor
    store: ParamStore

    def batch_loss(self, batch: Batch) -> tuple[Tensor, int]:
        total: Tensor | None = None
        count = 0
        for b in range(batch.src_ids.shape[0]):
            keep = batch.tgt_mask[b] > 0
            memory = hybrid_encode(self, batch.graphs[b], batch.src_ids[b])
            logits = hybrid_decode_logits(self, memory, batch.tgt_in[b][keep])
            step = cross_entropy_rows(logits, batch.tgt_out[b][keep])
            total = step if total is None else add(total, step)
            count += int(keep.sum())
        return total, count

    def decode(self, graph: DepGraph, src_ids: np.ndarray, max_len: int) -> list[int]:
        return greedy_decode(self, graph, src_ids, max_len)


def _make_ffn_norms(store: ParamStore, prefix: str, d_model: int, d_ff: int) -> FeedForwardNorms:
    return FeedForwardNorms(
        ffn_w1=store.matrix(f"{prefix}.ffn.W1", d_ff, d_model),
        ffn_b1=store.bias(f"{prefix}.ffn.b1", d_ff),
        ffn_w2=store.matrix(f"{prefix}.ffn.W2", d_model, d_ff),
        ffn_b2=store.bias(f"{prefix}.ffn.b2", d_model),
        ln1_gain=store.ones(f"{prefix}.ln1.g", d_model),
        ln1_bias=store.bias(f"{prefix}.ln1.b", d_model),
        ln2_gain=store.ones(f"{prefix}.ln2.g", d_model),
        ln2_bias=store.bias(f"{prefix}.ln2.b", d_model))


def build_hybrid(config: ExperimentConfig, src_vocab: Vocab, tgt_vocab: Vocab) -> HybridTransformer:
    store = ParamStore(config.seed)
    d = config.d_model
    src_emb = EmbeddingTable.create(store, "src_emb.E", src_vocab, d)
    tgt_emb = EmbeddingTable.create(store, "tgt_emb.E", tgt_vocab, d)
    lo, hi = config.rgse_layers if config.rgse_layers else (0, -1)
    enc_layers: list[AttentionBlockParams | HybridRgseLayer] = []
    for layer in range(1, config.layers + 1):
        prefix = f"enc.layer{layer}"
        if lo <= layer <= hi:
            enc_layers.append(HybridRgseLayer(
                gru_fwd=make_gru_cell(store, f"{prefix}.gru.fwd", d // 2, d),
                gru_bwd=make_gru_cell(store, f"{prefix}.gru.bwd", d // 2, d),
                rgse=make_rgse_bundle(store, f"{prefix}.rgse", config.variant,
                                      config.phi_mode, config.tau_mode,
                                      d_state=d, d_in=d),
                proj_w=store.matrix(f"{prefix}.proj.W", d, 2 * d),
                proj_b=store.bias(f"{prefix}.proj.b", d),
                sub=_make_ffn_norms(store, prefix, d, config.d_ff)))
        else:
            enc_layers.append(make_attention_block(store, prefix, d, config.heads,
                                                   config.d_ff))
    dec_layers = []
    for layer in range(1, config.layers + 1):
        prefix = f"dec.layer{layer}"
        self_block = make_attention_block(store, f"{prefix}.self", d, config.heads,
                                          config.d_ff)
        d_head = d // config.heads
        cross = CrossAttention(
            heads=[AttentionHead(q=store.matrix(f"{prefix}.cross.h{i}.q", d_head, d),
                                 k=store.matrix(f"{prefix}.cross.h{i}.k", d_head, d),
                                 v=store.matrix(f"{prefix}.cross.h{i}.v", d_head, d))
                   for i in range(config.heads)],
            out_proj=store.matrix(f"{prefix}.cross.out", d, d),
            ln_gain=store.ones(f"{prefix}.cross.ln.g", d),
            ln_bias=store.bias(f"{prefix}.cross.ln.b", d),
            width=d)
        dec_layers.append(DecoderLayer(self_block, cross))
    out_w = store.matrix("dec.out.W", len(tgt_vocab), d)
    out_b = store.bias("dec.out.b", len(tgt_vocab))
    return HybridTransformer(config, src_vocab, tgt_vocab, src_emb, tgt_emb,
                             enc_layers, dec_layers, out_w, out_b, store)


def _embed_with_positions(emb: EmbeddingTable, ids: np.ndarray, d: int) -> Tensor:
    x = scale(emb.rows(ids), float(np.sqrt(d)))
    return add(x, Tensor(positional_matrix(len(ids), d)))


def _rgse_encoder_layer(layer: HybridRgseLayer, x: Tensor, graph: DepGraph) -> Tensor:
    length, d = x.data.shape
    xs = [slice_row(x, t) for t in range(length)]
    h_fwd = gru_scan(layer.gru_fwd, xs)
    h_bwd = gru_scan(layer.gru_bwd, xs, reverse=True)
    h_tilde = [concat([h_fwd[t], h_bwd[t]], axis=-1) for t in range(length)]
    eta = apply_rgse(layer.rgse, h_tilde, graph)
    rows = [add_bias(matmul(e, transpose(layer.proj_w)), layer.proj_b) for e in eta]
    sub1 = concat(rows, axis=0)
    x = layer_norm(add(x, sub1), layer.sub.ln1_gain, layer.sub.ln1_bias)
    ffn = feed_forward(x, layer.sub)  # FeedForwardNorms shares the field names
    return layer_norm(add(x, ffn), layer.sub.ln2_gain, layer.sub.ln2_bias)


def hybrid_encode(model: HybridTransformer, graph: DepGraph,
                  src_ids: np.ndarray) -> Tensor:
    """Encoder stack over one sentence; every layer maps (L, d) -> (L, d)."""
    ids = np.asarray(src_ids)
    if len(ids) != len(graph):
        raise DimensionError(f"{len(ids)} ids vs {len(graph)} graph tokens")
    x = _embed_with_positions(model.src_emb, ids, model.config.d_model)
    for layer in model.enc_layers:
        if isinstance(layer, HybridRgseLayer):
            x = _rgse_encoder_layer(layer, x, graph)
        else:
            x = self_attention_block(x, layer)
    return x


def _cross_attention(layer: CrossAttention, x: Tensor, memory: Tensor) -> Tensor:
    outs = []
    for head in layer.heads:
        q = matmul(x, transpose(head.q))
        k = matmul(memory, transpose(head.k))
        v = matmul(memory, transpose(head.v))
        weights = softmax(matmul(q, transpose(k)), 1.0 / np.sqrt(layer.head_dim))
        outs.append(matmul(weights, v))
    return matmul(concat(outs, axis=-1), transpose(layer.out_proj))


def hybrid_decode_logits(model: HybridTransformer, memory: Tensor,
                         tgt_in: np.ndarray) -> Tensor:
    """Teacher-forced logits for a target prefix (causal self-attention)."""
    length = len(tgt_in)
    x = _embed_with_positions(model.tgt_emb, tgt_in, model.config.d_model)
    causal = np.tril(np.ones((length, length), dtype=bool))
    for layer in model.dec_layers:
        blk = layer.self_block
        attended = multi_head_attention(x, x, blk, mask=causal)
        x = layer_norm(add(x, attended), blk.ln1_gain, blk.ln1_bias)
        crossed = _cross_attention(layer.cross, x, memory)
        x = layer_norm(add(x, crossed), layer.cross.ln_gain, layer.cross.ln_bias)
        x = layer_norm(add(x, feed_forward(x, blk)), blk.ln2_gain, blk.ln2_bias)
    return add_bias(matmul(x, transpose(model.out_w)), model.out_b)


# --- decoding -----------------------------------------------------------------


def greedy_decode(model: RnmtModel | HybridTransformer, graph: DepGraph,
                  src_ids: np.ndarray, max_len: int) -> list[int]:
    """Argmax decoding until EOS or the length bound; deterministic."""
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    out: list[int] = []
    if isinstance(model, RnmtModel):
        memory = rnmt_encode(model, graph, np.atleast_2d(src_ids))
        state = initial_decoder_state(model, memory)
        prev = np.array([BOS])
        for _ in range(max_len):
            logits, state, _ = rnmt_decode_step(model, prev, state, memory)
            token = int(np.argmax(logits.data[0]))
            if token == EOS:
                break
            out.append(token)
            prev = np.array([token])
        return out
    memory = hybrid_encode(model, graph, src_ids)
    prefix = [BOS]
    for _ in range(max_len):
        logits = hybrid_decode_logits(model, memory, np.array(prefix))
        token = int(np.argmax(logits.data[-1]))
        if token == EOS:
            break
        out.append(token)
        prefix.append(token)
    return out


def build_model(config: ExperimentConfig, src_vocab: Vocab,
                tgt_vocab: Vocab) -> RnmtModel | HybridTransformer:
    if config.model_kind == "rnmt":
        return build_rnmt(config, src_vocab, tgt_vocab)
    return build_hybrid(config, src_vocab, tgt_vocab)
