"""Synthetic tree-traversal translation task.

Source sentences are nonsense tokens over a random single-root dependency
tree; the target is the source re-read in head-outward order (root first,
then depth-first with children taken nearest-first). The permutation is
determined entirely by the tree, so a model that sees the edges can solve
it while a purely sequential model has to guess.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .graph import DepGraph, make_graph


@dataclass(frozen=True)
class GeneratorSpec:
    vocab_size: int
    min_len: int
    max_len: int
    head_bias: float = 0.5  # probability a head is picked right of its dependent
    rule: str = "head_outward"
    seed: int = 1

    def __post_init__(self):
        if self.vocab_size < 8:
            raise ValueError(f"vocab_size {self.vocab_size} < 8")
        if self.min_len < 2 or self.min_len > self.max_len:
            raise ValueError(f"bad length range [{self.min_len}, {self.max_len}]")
        if not 0.0 <= self.head_bias <= 1.0:
            raise ValueError(f"head_bias {self.head_bias} outside [0, 1]")
        if self.rule != "head_outward":
            raise ValueError(f"unknown reordering rule {self.rule!r}")


@dataclass
class SynthCorpus:
    pairs: list[tuple[DepGraph, list[str]]]
    spec: GeneratorSpec

    def __len__(self) -> int:
        return len(self.pairs)

    def source_tokens(self):
        for graph, _ in self.pairs:
            yield from graph.tokens

    def target_tokens(self):
        for _, target in self.pairs:
            yield from target


def spec_from_config(config: ExperimentConfig) -> GeneratorSpec:
    return GeneratorSpec(vocab_size=config.vocab_size, min_len=config.gen_min_len,
                         max_len=config.gen_max_len, head_bias=config.head_bias,
                         seed=config.data_seed)


def random_tree(length: int, head_bias: float, rng: np.random.Generator,
                recency_decay: float = 0.4) -> set[tuple[int, int]]:
    """Random single-root tree over positions 0..length-1.

    Nodes attach in random order to an already-attached head, choosing the
    right side with probability ``head_bias`` when both sides are
    available. Within a side, heads are drawn with geometrically decaying
    weight in attachment recency, which yields the path-heavy spines of
    natural dependency trees rather than uniformly bushy ones.
    """
    order = rng.permutation(length)
    root = int(order[0])
    attached = [root]
    edges = set()
    for node in (int(v) for v in order[1:]):
        left = [a for a in attached if a < node]
        right = [a for a in attached if a > node]
        if left and right:
            side = right if rng.random() < head_bias else left
        else:
            side = right or left
        recency = {a: i for i, a in enumerate(attached)}
        weights = np.array([recency_decay ** (len(attached) - 1 - recency[a])
                            for a in side])
        head = int(side[rng.choice(len(side), p=weights / weights.sum())])
        edges.add((node, head))
        attached.append(node)
    return edges


def head_outward_order(length: int, edges: set[tuple[int, int]]) -> list[int]:
    """Deterministic traversal: root, then depth-first with children sorted
    by distance from their head (nearest first; leftmost breaks ties)."""
    children: dict[int, list[int]] = {}
    dependents = set()
    for dep, head in edges:
        children.setdefault(head, []).append(dep)
        dependents.add(dep)
    roots = [n for n in range(length) if n not in dependents]
    if len(roots) != 1:
        raise ValueError(f"expected a single root, found {roots}")
    order: list[int] = []
    stack = [roots[0]]
    while stack:
        node = stack.pop()
        order.append(node)
        kids = sorted(children.get(node, []), key=lambda c: (abs(c - node), c))
        stack.extend(reversed(kids))
    return order


def generate_task(spec: GeneratorSpec, pairs: int) -> SynthCorpus:
    """Build a reproducible corpus; the same spec and count regenerate it."""
    if pairs < 1:
        raise ValueError("pairs must be at least 1")
    rng = np.random.default_rng(spec.seed)
    vocab = [f"w{v:02d}" for v in range(spec.vocab_size)]
    out: list[tuple[DepGraph, list[str]]] = []
    for index in range(pairs):
        length = int(rng.integers(spec.min_len, spec.max_len + 1))
        tokens = [vocab[int(v)] for v in rng.integers(spec.vocab_size, size=length)]
        edges = random_tree(length, spec.head_bias, rng)
        graph = make_graph(tokens, edges, sentence_id=f"synth-{index}")
        target = [tokens[i] for i in head_outward_order(length, edges)]
        out.append((graph, target))
    return SynthCorpus(out, spec)


def split_corpus(corpus: SynthCorpus, test_pairs: int) -> tuple[SynthCorpus, SynthCorpus]:
    if test_pairs >= len(corpus):
        raise ValueError(f"cannot hold out {test_pairs} of {len(corpus)} pairs")
    return (SynthCorpus(corpus.pairs[:-test_pairs], corpus.spec),
            SynthCorpus(corpus.pairs[-test_pairs:], corpus.spec))
