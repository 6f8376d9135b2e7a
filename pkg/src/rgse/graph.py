"""Dependency graphs, CoNLL-U ingestion, and directional edge queries.

A parse stores edges as (dependent, head) pairs. A graph node additionally
sees the reversed head links and its own position, so the incoming set for
position j is:

    { i : (i -> j) is a parse edge }  union
    { i : (j -> i) is a parse edge }  union  { j itself }

Each incoming edge is tagged past / future / self relative to a traversal
direction and can be filtered to the past or future side (the self edge
survives every filter).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import GraphParseError

FORWARD = "forward"
BACKWARD = "backward"
TOTAL = "total"
PAST_ONLY = "past_only"
FUTURE_ONLY = "future_only"


@dataclass(frozen=True)
class EdgeRef:
    """One incoming edge: encoder state at ``source`` feeding node ``target``."""

    source: int
    target: int
    temporal: str  # "past" | "future" | "self"


@dataclass(frozen=True)
class DepGraph:
    """Tokens plus directed dependency edges (dependent -> head)."""

    tokens: tuple[str, ...]
    edges: frozenset[tuple[int, int]]
    sentence_id: str = ""
    labels: dict[tuple[int, int], str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = len(self.tokens)
        for i, j in self.edges:
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i},{j}) out of range for {n} tokens")
            if i == j:
                raise ValueError(f"self-pair ({i},{i}) is not a valid parse edge")

    def __len__(self) -> int:
        return len(self.tokens)


def make_graph(tokens: list[str], edges, sentence_id: str = "",
               labels: dict[tuple[int, int], str] | None = None) -> DepGraph:
    return DepGraph(tuple(tokens), frozenset(edges), sentence_id, dict(labels or {}))


def incoming_edges(graph: DepGraph, position: int, traversal: str = FORWARD,
                   edge_filter: str = TOTAL) -> list[EdgeRef]:
    """Incoming edges for a node, temporally tagged and filtered.

    Under forward traversal a source left of the target is "past"; under
    backward traversal the tags flip. ``past_only`` keeps self + past,
    ``future_only`` keeps self + future, ``total`` keeps everything.
    """
    if not 0 <= position < len(graph):
        raise ValueError(f"position {position} out of range for {len(graph)} tokens")
    if traversal not in (FORWARD, BACKWARD):
        raise ValueError(f"unknown traversal {traversal!r}")
    if edge_filter not in (TOTAL, PAST_ONLY, FUTURE_ONLY):
        raise ValueError(f"unknown filter {edge_filter!r}")

    sources = {position}
    for i, j in graph.edges:
        if j == position:
            sources.add(i)
        elif i == position:
            sources.add(j)

    refs = []
    for src in sorted(sources):
        if src == position:
            temporal = "self"
        elif (src < position) == (traversal == FORWARD):
            temporal = "past"
        else:
            temporal = "future"
        if edge_filter == PAST_ONLY and temporal == "future":
            continue
        if edge_filter == FUTURE_ONLY and temporal == "past":
            continue
        refs.append(EdgeRef(src, position, temporal))
    return refs


# --- CoNLL-U -------------------------------------------------------------


def parse_conllu(text: str) -> list[DepGraph]:
    """Read CoNLL-U text into one DepGraph per sentence.

    HEAD h > 0 for token t yields the edge (t-1 -> h-1); HEAD 0 marks the
    root. Multiword-token ranges and empty nodes are skipped. The DEPREL
    column is retained as the edge label.
    """
    graphs: list[DepGraph] = []
    tokens: list[str] = []
    heads: list[tuple[int, int, str, int]] = []  # (dependent, head, label, line_no)
    sentence_id = ""

    def flush(line_no: int):
        nonlocal tokens, heads, sentence_id
        if not tokens:
            return
        edges = set()
        labels = {}
        for dep, head, label, ln in heads:
            if head > len(tokens):
                raise GraphParseError(f"line {ln}: head {head} out of range "
                                      f"for sentence of {len(tokens)} tokens")
            if head > 0:
                edge = (dep, head - 1)
                if edge[0] == edge[1]:
                    raise GraphParseError(f"line {ln}: token may not head itself")
                edges.add(edge)
                labels[edge] = label
        graphs.append(make_graph(tokens, edges, sentence_id or str(len(graphs)), labels))
        tokens, heads, sentence_id = [], [], ""

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            flush(line_no)
            continue
        if line.startswith("#"):
            if line[1:].split("=")[0].strip() == "sent_id" and "=" in line:
                sentence_id = line.split("=", 1)[1].strip()
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise GraphParseError(f"line {line_no}: expected 10 columns, got {len(cols)}")
        tok_id = cols[0]
        if "-" in tok_id or "." in tok_id:
            continue  # multiword range / empty node
        try:
            index = int(tok_id)
            head = int(cols[6])
        except ValueError as exc:
            raise GraphParseError(f"line {line_no}: non-integer ID or HEAD field") from exc
        if index != len(tokens) + 1:
            raise GraphParseError(f"line {line_no}: token id {index} out of sequence")
        if head < 0:
            raise GraphParseError(f"line {line_no}: negative head {head}")
        tokens.append(cols[1])
        heads.append((index - 1, head, cols[7], line_no))
    flush(-1)
    return graphs


def to_conllu(graph: DepGraph) -> str:
    """Serialize with FORM/HEAD/DEPREL populated and '_' elsewhere."""
    head_of = {}
    for i, j in graph.edges:
        head_of.setdefault(i, []).append(j)
    lines = []
    if graph.sentence_id:
        lines.append(f"# sent_id = {graph.sentence_id}")
    for t, form in enumerate(graph.tokens):
        heads = sorted(head_of.get(t, []))
        head = heads[0] + 1 if heads else 0
        label = graph.labels.get((t, head - 1), "root" if head == 0 else "dep")
        lines.append("\t".join([str(t + 1), form, "_", "_", "_", "_",
                                str(head), label, "_", "_"]))
    return "\n".join(lines) + "\n"
