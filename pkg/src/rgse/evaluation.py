"""Corpus BLEU-4, bucketed evaluation, and paired A/B experiments."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field, replace

from .config import ExperimentConfig, config_diff, fingerprint
from .errors import ConfigError
from .graph import DepGraph
from .training import Pair, corpus_loss, token_accuracy


def _ngram_counts(tokens: list[str], n: int) -> dict[tuple[str, ...], int]:
    counts: dict[tuple[str, ...], int] = {}
    for i in range(len(tokens) - n + 1):
        key = tuple(tokens[i : i + n])
        counts[key] = counts.get(key, 0) + 1
    return counts


@dataclass
class BleuReport:
    precisions: tuple[float, float, float, float]
    brevity_penalty: float
    candidate_length: int
    reference_length: int
    score: float


def bleu4_report(candidates: list[list[str]], references: list[list[str]]) -> BleuReport:
    """Corpus-level BLEU-4: clipped n-gram precisions, geometric mean,
    brevity penalty exp(1 - r/c) when the candidate side is shorter.
    No smoothing: any empty precision zeroes the score."""
    if not candidates:
        raise ValueError("bleu4: empty candidate list")
    if len(candidates) != len(references):
        raise ValueError(f"bleu4: {len(candidates)} candidates vs "
                         f"{len(references)} references")
    if any(not r for r in references):
        raise ValueError("bleu4: empty reference")
    matches = [0] * 4
    totals = [0] * 4
    cand_len = sum(len(c) for c in candidates)
    ref_len = sum(len(r) for r in references)
    for cand, ref in zip(candidates, references):
        for n in range(1, 5):
            ref_counts = _ngram_counts(ref, n)
            for gram, count in _ngram_counts(cand, n).items():
                matches[n - 1] += min(count, ref_counts.get(gram, 0))
                totals[n - 1] += count
    precisions = tuple(m / t if t else 0.0 for m, t in zip(matches, totals))
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / max(cand_len, 1))
    if any(p == 0.0 for p in precisions):
        score = 0.0
    else:
        score = bp * math.exp(sum(math.log(p) for p in precisions) / 4.0)
    return BleuReport(precisions, bp, cand_len, ref_len, score)


def bleu4(candidates: list[list[str]], references: list[list[str]]) -> float:
    return bleu4_report(candidates, references).score


def sentence_bleu_smoothed(candidate: list[str], reference: list[str]) -> float:
    """Add-one smoothed per-sentence score, for debugging output only."""
    log_sum = 0.0
    for n in range(1, 5):
        ref_counts = _ngram_counts(reference, n)
        cand_counts = _ngram_counts(candidate, n)
        match = sum(min(c, ref_counts.get(g, 0)) for g, c in cand_counts.items())
        total = sum(cand_counts.values())
        log_sum += math.log((match + 1) / (total + 1))
    bp = 1.0 if len(candidate) > len(reference) else \
        math.exp(1.0 - len(reference) / max(len(candidate), 1))
    return bp * math.exp(log_sum / 4.0)


# --- bucketed evaluation ------------------------------------------------------


@dataclass
class BucketRow:
    low: int                 # exclusive
    high: int | None         # inclusive; None = unbounded
    count: int
    bleu: float | None

    @property
    def label(self) -> str:
        return f"({self.low},{self.high}]" if self.high is not None else f"({self.low},inf)"


@dataclass
class EvalReport:
    corpus_bleu: float
    buckets: list[BucketRow]
    token_accuracy: float
    loss: float
    config_fingerprint: str


def decode_corpus(model, pairs: list[Pair], max_len: int) -> list[list[str]]:
    outputs = []
    for graph, _ in pairs:
        ids = model.src_vocab.encode(graph.tokens)
        out_ids = model.decode(graph, ids, max_len)
        outputs.append(model.tgt_vocab.decode(out_ids))
    return outputs


def length_bucket_eval(model, pairs: list[Pair], boundaries: tuple[int, ...],
                       max_len: int = 64,
                       config: ExperimentConfig | None = None) -> EvalReport:
    """Greedy-decode the test pairs and score per source-length bucket."""
    if any(a >= b for a, b in zip(boundaries, boundaries[1:])):
        raise ValueError(f"boundaries must be strictly increasing: {boundaries}")
    candidates = decode_corpus(model, pairs, max_len)
    references = [target for _, target in pairs]
    edges = [0] + list(boundaries) + [None]
    rows = []
    for low, high in zip(edges[:-1], edges[1:]):
        member = [i for i, (g, _) in enumerate(pairs)
                  if len(g) > low and (high is None or len(g) <= high)]
        if member:
            score = bleu4([candidates[i] for i in member], [references[i] for i in member])
        else:
            score = None
        rows.append(BucketRow(low, high, len(member), score))
    return EvalReport(
        corpus_bleu=bleu4(candidates, references),
        buckets=rows,
        token_accuracy=token_accuracy(model, pairs),
        loss=corpus_loss(model, pairs),
        config_fingerprint=fingerprint(config or model.config))


def report_to_csv(report: EvalReport) -> str:
    lines = ["bucket,count,bleu"]
    for row in report.buckets:
        bleu_text = "" if row.bleu is None else f"{row.bleu:.6f}"
        lines.append(f"{row.label},{row.count},{bleu_text}")
    lines.append(f"corpus,{sum(r.count for r in report.buckets)},{report.corpus_bleu:.6f}")
    lines.append(f"# token_accuracy={report.token_accuracy:.6f} loss={report.loss:.6f} "
                 f"config={report.config_fingerprint}")
    return "\n".join(lines) + "\n"


def report_to_svg(report: EvalReport, width: int = 480, height: int = 320) -> str:
    """Line chart of bucket BLEU over sentence length, as a small SVG."""
    points = [(i, row.bleu) for i, row in enumerate(report.buckets) if row.bleu is not None]
    pad = 40
    span_x = max(len(report.buckets) - 1, 1)
    coords = [(pad + (width - 2 * pad) * i / span_x,
               height - pad - (height - 2 * pad) * b) for i, b in points]
    polyline = " ".join(f"{x:.1f},{y:.1f}" for x, y in coords)
    labels = []
    for i, row in enumerate(report.buckets):
        x = pad + (width - 2 * pad) * i / span_x
        labels.append(f'<text x="{x:.1f}" y="{height - pad + 16}" font-size="9" '
                      f'text-anchor="middle">{row.label}</text>')
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">'
            f'<rect width="{width}" height="{height}" fill="white"/>'
            f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" '
            f'stroke="black"/>'
            f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>'
            f'<text x="{pad - 6}" y="{pad}" font-size="9" text-anchor="end">1.0</text>'
            f'<text x="{pad - 6}" y="{height - pad}" font-size="9" text-anchor="end">0.0</text>'
            f'<polyline points="{polyline}" fill="none" stroke="steelblue" stroke-width="2"/>'
            + "".join(labels) + "</svg>")


# --- A/B comparison -----------------------------------------------------------


INTENDED_AB_FIELDS = ("rgse.enabled", "rgse.variant", "rgse.phi", "rgse.tau",
                      "rgse.layers", "model.kind")


@dataclass
class ArmResult:
    arm: str
    seed: int
    bleu: float
    accuracy: float


@dataclass
class AbReport:
    rows: list[ArmResult] = field(default_factory=list)

    def arm_values(self, arm: str, metric: str) -> list[float]:
        return [getattr(r, metric) for r in self.rows if r.arm == arm]

    def summary(self, metric: str = "accuracy") -> dict[str, tuple[float, float]]:
        out = {}
        for arm in dict.fromkeys(r.arm for r in self.rows):
            values = self.arm_values(arm, metric)
            sd = statistics.stdev(values) if len(values) > 1 else 0.0
            out[arm] = (statistics.mean(values), sd)
        return out


def ab_compare(config_a: ExperimentConfig, config_b: ExperimentConfig,
               train_pairs: list[Pair], test_pairs: list[Pair], trials: int,
               intended: tuple[str, ...] = INTENDED_AB_FIELDS) -> AbReport:
    """Train both arms across shared seeds and report per-seed test metrics.

    The arms must differ only in ``intended`` fields; anything else is a
    configuration error naming the stray keys. No significance claim is
    made beyond per-arm mean and standard deviation.
    """
    from .experiment import train_on_pairs  # local import: experiment builds on us

    if trials < 3:
        raise ValueError("trials must be at least 3")
    diff = config_diff(config_a, config_b)
    stray = [k for k in diff if k not in intended and k != "train.seed"]
    if stray:
        raise ConfigError(f"arms differ in unintended fields: {', '.join(stray)}")

    report = AbReport()
    for arm, config in (("a", config_a), ("b", config_b)):
        for trial in range(trials):
            seeded = replace(config, seed=config.seed + trial)
            model, _ = train_on_pairs(seeded, train_pairs)
            candidates = decode_corpus(model, test_pairs, max_len=seeded.max_len + 8)
            references = [t for _, t in test_pairs]
            report.rows.append(ArmResult(
                arm=arm, seed=seeded.seed,
                bleu=bleu4(candidates, references),
                accuracy=token_accuracy(model, test_pairs)))
    return report
