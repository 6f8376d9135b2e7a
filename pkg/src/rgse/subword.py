"""Byte-pair encoding with dependency-label propagation onto pieces.

When a word is split, every dependency edge touching the word is
replicated onto all of its pieces, so each substring keeps the word's
full relations. Pieces use the ``@@`` continuation convention; the merge
table is persisted as "left right" lines in merge-priority order.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import CoverageError
from .graph import DepGraph, make_graph

_END = "</w>"


@dataclass(frozen=True)
class SubwordMap:
    """Piece sequence for one sentence plus each piece's source token index."""

    pieces: tuple[str, ...]
    origin: tuple[int, ...]

    def pieces_of(self, token_index: int) -> list[int]:
        return [p for p, o in enumerate(self.origin) if o == token_index]


def _word_symbols(word: str) -> tuple[str, ...]:
    if len(word) == 1:
        return (word + _END,)
    return tuple(word[:-1]) + (word[-1] + _END,)


def _pair_counts(vocab: dict[tuple[str, ...], int]) -> dict[tuple[str, str], int]:
    counts: dict[tuple[str, str], int] = {}
    for symbols, freq in vocab.items():
        for a, b in zip(symbols, symbols[1:]):
            counts[(a, b)] = counts.get((a, b), 0) + freq
    return counts


def _merge_symbols(symbols: tuple[str, ...], pair: tuple[str, str]) -> tuple[str, ...]:
    out: list[str] = []
    i = 0
    while i < len(symbols):
        if i + 1 < len(symbols) and (symbols[i], symbols[i + 1]) == pair:
            out.append(symbols[i] + symbols[i + 1])
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return tuple(out)


class BpeCoder:
    """Greedy most-frequent-pair merges, applied deterministically."""

    def __init__(self, merges: list[tuple[str, str]]):
        self.merges = list(merges)
        self._rank = {pair: r for r, pair in enumerate(merges)}
        self._cache: dict[str, tuple[str, ...]] = {}

    def segment_word(self, word: str) -> list[str]:
        """Split one word into pieces; non-final pieces carry the @@ marker."""
        if word in self._cache:
            symbols = self._cache[word]
        else:
            symbols = _word_symbols(word)
            while len(symbols) > 1:
                pairs = [(self._rank[p], p) for p in zip(symbols, symbols[1:])
                         if p in self._rank]
                if not pairs:
                    break
                symbols = _merge_symbols(symbols, min(pairs)[1])
            self._cache[word] = symbols
        pieces = [s + "@@" for s in symbols[:-1]]
        pieces.append(symbols[-1][: -len(_END)] if symbols[-1].endswith(_END) else symbols[-1])
        return pieces

    def map_sentence(self, tokens: list[str] | tuple[str, ...]) -> SubwordMap:
        pieces: list[str] = []
        origin: list[int] = []
        for t, token in enumerate(tokens):
            for piece in self.segment_word(token):
                pieces.append(piece)
                origin.append(t)
        return SubwordMap(tuple(pieces), tuple(origin))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for a, b in self.merges:
                fh.write(f"{a} {b}\n")

    @classmethod
    def load(cls, path: str | Path) -> "BpeCoder":
        merges = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                a, b = line.split(" ", 1)
                merges.append((a, b))
        return cls(merges)


def learn_bpe(corpus: list[str], merges: int) -> BpeCoder:
    """Learn a merge table from whitespace-tokenized sentences.

    Ties in pair frequency break toward the lexicographically smallest
    pair so retraining is reproducible.
    """
    if not corpus:
        raise ValueError("learn_bpe: empty corpus")
    if merges < 0:
        raise ValueError("learn_bpe: merges must be >= 0")
    vocab: dict[tuple[str, ...], int] = {}
    for sentence in corpus:
        for word in sentence.split():
            key = _word_symbols(word)
            vocab[key] = vocab.get(key, 0) + 1

    table: list[tuple[str, str]] = []
    for _ in range(merges):
        counts = _pair_counts(vocab)
        if not counts:
            break
        best = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        table.append(best)
        merged: dict[tuple[str, ...], int] = {}
        for s, f in vocab.items():
            key = _merge_symbols(s, best)
            merged[key] = merged.get(key, 0) + f
        vocab = merged
    return BpeCoder(table)


def apply_subwords(graph: DepGraph, subwords: SubwordMap) -> DepGraph:
    """Lift a word-level graph to piece level, replicating every edge.

    An edge (i -> j) becomes one edge per (piece of i, piece of j) pair,
    so each substring inherits the word's full dependency relations.
    """
    covered = set(subwords.origin)
    missing = [t for t in range(len(graph)) if t not in covered]
    if missing:
        raise CoverageError(f"subword map misses token indices {missing}")
    stray = [o for o in subwords.origin if not 0 <= o < len(graph)]
    if stray:
        raise CoverageError(f"subword map references unknown token indices {sorted(set(stray))}")

    piece_ids: dict[int, list[int]] = {}
    for p, o in enumerate(subwords.origin):
        piece_ids.setdefault(o, []).append(p)

    edges = set()
    labels = {}
    for i, j in graph.edges:
        label = graph.labels.get((i, j))
        for pi in piece_ids[i]:
            for pj in piece_ids[j]:
                edges.add((pi, pj))
                if label is not None:
                    labels[(pi, pj)] = label
    return make_graph(list(subwords.pieces), edges, graph.sentence_id, labels)


def strip_markers(pieces: list[str] | tuple[str, ...]) -> str:
    """Concatenate pieces of one word back to its surface form."""
    return "".join(p[:-2] if p.endswith("@@") else p for p in pieces)
