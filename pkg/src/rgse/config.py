"""Experiment configuration: flat dotted-key text files.

One ``key = value`` assignment per line, ``#`` comments. Flat keys keep
ablation-grid deltas diffable. Layer ranges use the bracketed form
``[1-3]``; ``none`` means no graph-recurrent layers.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError

PHI_MODES = ("sum", "average", "gated")
TAU_MODES = ("normal", "gated")
VARIANTS = ("forward", "bi_total", "bi_past", "bi_future")


@dataclass(frozen=True)
class ExperimentConfig:
    model_kind: str = "rnmt"
    d_emb: int = 32
    d_hidden: int = 32
    d_model: int = 32
    heads: int = 4
    layers: int = 2
    d_ff: int = 64
    rgse_enabled: bool = True
    variant: str = "bi_total"
    phi_mode: str = "sum"
    tau_mode: str = "gated"
    rgse_layers: tuple[int, int] | None = (1, 1)
    opt_kind: str = "adam"
    learning_rate: float = 1e-3
    epochs: int = 10
    batch_size: int = 16
    clip_norm: float = 5.0
    seed: int = 0
    max_len: int = 50
    task: str = "traversal"
    vocab_size: int = 32
    gen_min_len: int = 4
    gen_max_len: int = 16
    train_pairs: int = 2000
    test_pairs: int = 200
    head_bias: float = 0.5
    data_seed: int = 1
    source_path: str = ""
    target_path: str = ""
    buckets: tuple[int, ...] = (10, 20, 30, 40, 50)


_KEYS: dict[str, str] = {
    "model.kind": "model_kind",
    "model.d_emb": "d_emb",
    "model.d_hidden": "d_hidden",
    "model.d_model": "d_model",
    "model.heads": "heads",
    "model.layers": "layers",
    "model.d_ff": "d_ff",
    "rgse.enabled": "rgse_enabled",
    "rgse.variant": "variant",
    "rgse.phi": "phi_mode",
    "rgse.tau": "tau_mode",
    "rgse.layers": "rgse_layers",
    "optim.kind": "opt_kind",
    "optim.lr": "learning_rate",
    "train.epochs": "epochs",
    "train.batch_size": "batch_size",
    "train.clip_norm": "clip_norm",
    "train.seed": "seed",
    "train.max_len": "max_len",
    "data.task": "task",
    "data.vocab": "vocab_size",
    "data.min_len": "gen_min_len",
    "data.max_len": "gen_max_len",
    "data.train_pairs": "train_pairs",
    "data.test_pairs": "test_pairs",
    "data.head_bias": "head_bias",
    "data.seed": "data_seed",
    "data.source": "source_path",
    "data.target": "target_path",
    "eval.buckets": "buckets",
}
_FIELD_TO_KEY = {f: k for k, f in _KEYS.items()}
_RANGE_RE = re.compile(r"^\[?(\d+)\s*-\s*(\d+)\]?$")


def parse_layer_range(text: str) -> tuple[int, int] | None:
    text = text.strip()
    if text.lower() in ("none", "", "[]"):
        return None
    m = _RANGE_RE.match(text)
    if not m:
        raise ConfigError(f"rgse.layers: cannot parse range {text!r} (expected e.g. [1-3])")
    return int(m.group(1)), int(m.group(2))


def format_layer_range(value: tuple[int, int] | None) -> str:
    return "none" if value is None else f"[{value[0]}-{value[1]}]"


def _convert(key: str, field_name: str, raw: str):
    raw = raw.strip()
    try:
        if field_name == "rgse_layers":
            return parse_layer_range(raw)
        if field_name == "buckets":
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if isinstance(getattr(ExperimentConfig, field_name), bool):
            if raw.lower() in ("true", "yes", "1"):
                return True
            if raw.lower() in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        if isinstance(getattr(ExperimentConfig, field_name), int):
            return int(raw)
        if isinstance(getattr(ExperimentConfig, field_name), float):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse value {raw!r}") from exc


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse assignments on top of ``base`` (or the defaults); no validation."""
    updates = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        updates[_KEYS[key]] = _convert(key, _KEYS[key], value)
    return replace(base or ExperimentConfig(), **updates)


def apply_overrides(config: ExperimentConfig, pairs: dict[str, str]) -> ExperimentConfig:
    updates = {}
    for key, raw in pairs.items():
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}")
        updates[_KEYS[key]] = _convert(key, _KEYS[key], raw)
    return replace(config, **updates)


def load_config(path: str | Path) -> ExperimentConfig:
    config = parse_config(Path(path).read_text(encoding="utf-8"))
    validate(config)
    return config


def validate(config: ExperimentConfig) -> None:
    """Raise ConfigError listing every violated field."""
    problems: list[str] = []

    def check(ok: bool, key: str, message: str):
        if not ok:
            problems.append(f"{key}: {message}")

    c = config
    check(c.model_kind in ("rnmt", "hybrid"), "model.kind",
          f"must be rnmt or hybrid, got {c.model_kind!r}")
    for key, value in [("model.d_emb", c.d_emb), ("model.d_hidden", c.d_hidden),
                       ("model.d_model", c.d_model), ("model.heads", c.heads),
                       ("model.layers", c.layers), ("model.d_ff", c.d_ff)]:
        check(value >= 1, key, f"must be positive, got {value}")
    if c.model_kind == "hybrid":
        check(c.d_model % 2 == 0, "model.d_model", "must be even (half-width recurrences)")
        check(c.heads >= 1 and c.d_model % c.heads == 0, "model.heads",
              f"{c.d_model} not divisible by {c.heads}")
        if c.rgse_layers is not None:
            lo, hi = c.rgse_layers
            check(1 <= lo <= hi <= c.layers, "rgse.layers",
                  f"range {format_layer_range(c.rgse_layers)} outside [1-{c.layers}]")
    check(c.variant in VARIANTS, "rgse.variant", f"got {c.variant!r}")
    check(c.phi_mode in PHI_MODES, "rgse.phi", f"got {c.phi_mode!r}")
    check(c.tau_mode in TAU_MODES, "rgse.tau", f"got {c.tau_mode!r}")
    check(c.opt_kind in ("sgd", "adam"), "optim.kind", f"got {c.opt_kind!r}")
    check(c.learning_rate > 0, "optim.lr", "must be positive")
    check(c.epochs >= 1, "train.epochs", "must be at least 1")
    check(c.batch_size >= 1, "train.batch_size", "must be at least 1")
    check(c.clip_norm >= 0, "train.clip_norm", "must be nonnegative")
    check(c.max_len >= 1, "train.max_len", "must be at least 1")
    check(c.task in ("traversal", "parallel"), "data.task", f"got {c.task!r}")
    if c.task == "traversal":
        check(c.vocab_size >= 8, "data.vocab", "needs at least 8 tokens")
        check(c.gen_min_len >= 2, "data.min_len", "needs length at least 2")
        check(c.gen_min_len <= c.gen_max_len, "data.max_len",
              f"range [{c.gen_min_len},{c.gen_max_len}] is empty")
        check(c.train_pairs >= 1, "data.train_pairs", "must be at least 1")
        check(c.test_pairs >= 1, "data.test_pairs", "must be at least 1")
        check(0.0 <= c.head_bias <= 1.0, "data.head_bias", "must be in [0,1]")
    else:
        for key, value in [("data.source", c.source_path), ("data.target", c.target_path)]:
            if not value:
                problems.append(f"{key}: required for parallel task")
            elif not Path(value).exists():
                problems.append(f"{key}: file {value!r} does not exist")
    check(all(a < b for a, b in zip(c.buckets, c.buckets[1:])), "eval.buckets",
          "boundaries must be strictly increasing")
    if problems:
        raise ConfigError("; ".join(problems))


def to_text(config: ExperimentConfig) -> str:
    """Canonical serialization (sorted keys), the basis of the fingerprint."""
    lines = []
    for f in fields(ExperimentConfig):
        key = _FIELD_TO_KEY[f.name]
        value = getattr(config, f.name)
        if f.name == "rgse_layers":
            value = format_layer_range(value)
        elif f.name == "buckets":
            value = ",".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(sorted(lines)) + "\n"


def fingerprint(config: ExperimentConfig) -> str:
    return hashlib.sha256(to_text(config).encode("utf-8")).hexdigest()[:16]


def config_diff(a: ExperimentConfig, b: ExperimentConfig) -> list[str]:
    """Dotted keys whose values differ between the two configs."""
    return [_FIELD_TO_KEY[f.name] for f in fields(ExperimentConfig)
            if getattr(a, f.name) != getattr(b, f.name)]
