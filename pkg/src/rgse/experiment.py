"""Glue for running one configured experiment end to end."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .config import ExperimentConfig, validate
from .corpus import generate_task, spec_from_config, split_corpus
from .errors import ConfigError
from .evaluation import EvalReport, length_bucket_eval
from .graph import parse_conllu
from .models import build_model
from .training import Pair, TrainResult, make_vocabs, train


def load_pairs(config: ExperimentConfig) -> tuple[list[Pair], list[Pair]]:
    """Materialize (train, test) pairs for either data task."""
    if config.task == "traversal":
        corpus = generate_task(spec_from_config(config),
                               config.train_pairs + config.test_pairs)
        train_part, test_part = split_corpus(corpus, config.test_pairs)
        return list(train_part.pairs), list(test_part.pairs)
    graphs = parse_conllu(Path(config.source_path).read_text(encoding="utf-8"))
    targets = [line.split() for line in
               Path(config.target_path).read_text(encoding="utf-8").splitlines()]
    if len(graphs) != len(targets):
        raise ConfigError(f"data.source has {len(graphs)} sentences but data.target "
                          f"has {len(targets)} lines")
    pairs = [(g, t) for g, t in zip(graphs, targets)
             if 1 <= len(g) <= config.max_len and t]
    if len(pairs) <= config.test_pairs:
        raise ConfigError(f"only {len(pairs)} usable pairs for {config.test_pairs} "
                          "test sentences")
    return pairs[: -config.test_pairs], pairs[-config.test_pairs :]


def train_on_pairs(config: ExperimentConfig, train_pairs: list[Pair],
                   val_pairs: list[Pair] | None = None):
    """Build the configured model over the pair vocabulary and train it."""
    src_vocab, tgt_vocab = make_vocabs(train_pairs)
    model = build_model(config, src_vocab, tgt_vocab)
    result = train(model, train_pairs, config, val_pairs)
    return model, result


@dataclass
class RunResult:
    config: ExperimentConfig
    train_result: TrainResult
    report: EvalReport


def run_experiment(config: ExperimentConfig) -> tuple[object, RunResult]:
    """Validate, load data, train, evaluate; the workhorse behind the CLI."""
    validate(config)
    train_pairs, test_pairs = load_pairs(config)
    model, result = train_on_pairs(config, train_pairs)
    report = length_bucket_eval(model, test_pairs, config.buckets,
                                max_len=config.max_len + 8, config=config)
    return model, RunResult(config, result, report)
