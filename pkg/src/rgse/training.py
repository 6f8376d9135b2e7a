"""Teacher-forced training with length-grouped mini-batches."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .encoders import BOS, EOS, PAD, Vocab
from .errors import NumericError
from .graph import DepGraph
from .models import Batch, RnmtModel
from .optim import Optimizer, clip_gradients, optimizer_step
from .params import ParamStore
from .tensor import Tape

Pair = tuple[DepGraph, list[str]]


def make_vocabs(pairs: list[Pair]) -> tuple[Vocab, Vocab]:
    src = Vocab.build(t for graph, _ in pairs for t in graph.tokens)
    tgt = Vocab.build(t for _, target in pairs for t in target)
    return src, tgt


def make_batch(pairs: list[Pair], src_vocab: Vocab, tgt_vocab: Vocab) -> Batch:
    """Assemble same-source-length pairs; targets are padded to the longest."""
    lengths = {len(g) for g, _ in pairs}
    if len(lengths) != 1:
        raise ValueError(f"batch mixes source lengths {sorted(lengths)}")
    src_ids = np.stack([src_vocab.encode(g.tokens) for g, _ in pairs])
    tgt_seqs = [np.concatenate([tgt_vocab.encode(t), [EOS]]) for _, t in pairs]
    width = max(len(t) for t in tgt_seqs)
    b = len(pairs)
    tgt_in = np.full((b, width), PAD, dtype=np.int64)
    tgt_out = np.full((b, width), PAD, dtype=np.int64)
    mask = np.zeros((b, width))
    for i, seq in enumerate(tgt_seqs):
        tgt_in[i, 0] = BOS
        tgt_in[i, 1 : len(seq)] = seq[:-1]
        tgt_out[i, : len(seq)] = seq
        mask[i, : len(seq)] = 1.0
    return Batch([g for g, _ in pairs], src_ids, tgt_in, tgt_out, mask)


def make_batches(pairs: list[Pair], src_vocab: Vocab, tgt_vocab: Vocab,
                 batch_size: int, rng: np.random.Generator | None = None) -> list[Batch]:
    groups: dict[int, list[Pair]] = {}
    for pair in pairs:
        groups.setdefault(len(pair[0]), []).append(pair)
    batches = []
    for length in sorted(groups):
        group = groups[length]
        if rng is not None:
            group = [group[i] for i in rng.permutation(len(group))]
        for lo in range(0, len(group), batch_size):
            batches.append(make_batch(group[lo : lo + batch_size], src_vocab, tgt_vocab))
    if rng is not None:
        batches = [batches[i] for i in rng.permutation(len(batches))]
    return batches


def corpus_loss(model, pairs: list[Pair], batch_size: int = 16) -> float:
    """Mean teacher-forced cross-entropy per target token (no gradients)."""
    total, count = 0.0, 0
    for batch in make_batches(pairs, model.src_vocab, model.tgt_vocab, batch_size):
        loss, n = model.batch_loss(batch)
        total += float(loss.data)
        count += n
    return total / max(count, 1)


@dataclass
class TrainResult:
    losses: list[float]          # entry 0 is the pre-update loss
    val_losses: list[float] = field(default_factory=list)
    steps: int = 0
    seconds: float = 0.0

    @property
    def steps_per_second(self) -> float:
        return self.steps / self.seconds if self.seconds > 0 else 0.0


def _diagnose(store: ParamStore) -> str:
    name, norm = "", 0.0
    for n, t in store.items():
        p = float(np.abs(t.data).max()) if t.data.size else 0.0
        if not np.isfinite(p) or p > norm:
            name, norm = n, p
    return f"largest parameter {name!r} with max |value| {norm:.3e}"


def train(model, train_pairs: list[Pair], config: ExperimentConfig,
          val_pairs: list[Pair] | None = None) -> TrainResult:
    """Optimize the model in place and return the loss trajectory.

    The same config and seed reproduce the trajectory exactly: batching
    order is driven by a dedicated generator seeded from config.seed.
    """
    store: ParamStore = model.store
    store.freeze()
    opt = Optimizer(config.opt_kind, config.learning_rate)
    rng = np.random.default_rng(config.seed)
    result = TrainResult(losses=[corpus_loss(model, train_pairs, config.batch_size)])
    started = time.perf_counter()
    for epoch in range(config.epochs):
        epoch_total, epoch_count = 0.0, 0
        batches = make_batches(train_pairs, model.src_vocab, model.tgt_vocab,
                               config.batch_size, rng)
        for index, batch in enumerate(batches):
            with Tape() as tape:
                loss, count = model.batch_loss(batch)
            value = float(loss.data)
            if not np.isfinite(value):
                raise NumericError(f"non-finite loss at epoch {epoch}, batch {index}; "
                                   + _diagnose(store))
            tape.backward(loss)
            store.zero_fill_missing_grads()
            clip_gradients(store, config.clip_norm)
            optimizer_step(store, opt)
            epoch_total += value
            epoch_count += count
            result.steps += 1
        result.losses.append(epoch_total / max(epoch_count, 1))
        if val_pairs:
            result.val_losses.append(corpus_loss(model, val_pairs, config.batch_size))
    result.seconds = time.perf_counter() - started
    return result


def token_accuracy(model, pairs: list[Pair], batch_size: int = 16) -> float:
    """Teacher-forced next-token accuracy over all target tokens."""
    correct, total = 0, 0
    for batch in make_batches(pairs, model.src_vocab, model.tgt_vocab, batch_size):
        if isinstance(model, RnmtModel):
            from .models import initial_decoder_state, rnmt_decode_step, rnmt_encode
            memory = rnmt_encode(model, batch.graphs, batch.src_ids)
            state = initial_decoder_state(model, memory)
            for t in range(batch.tgt_in.shape[1]):
                logits, state, _ = rnmt_decode_step(model, batch.tgt_in[:, t], state, memory)
                predicted = np.argmax(logits.data, axis=-1)
                keep = batch.tgt_mask[:, t] > 0
                correct += int(((predicted == batch.tgt_out[:, t]) & keep).sum())
                total += int(keep.sum())
        else:
            from .models import hybrid_decode_logits, hybrid_encode
            for b in range(batch.src_ids.shape[0]):
                keep = batch.tgt_mask[b] > 0
                memory = hybrid_encode(model, batch.graphs[b], batch.src_ids[b])
                logits = hybrid_decode_logits(model, memory, batch.tgt_in[b][keep])
                predicted = np.argmax(logits.data, axis=-1)
                correct += int((predicted == batch.tgt_out[b][keep]).sum())
                total += int(keep.sum())
    return correct / max(total, 1)
