"""Named parameter store, initialization, and checkpoint serialization.

Matrices are initialized uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]
with fan_in = last dimension; biases and gate vectors start at zero.
Two stores built with the same seed and the same creation sequence hold
bitwise-identical values.

Checkpoint format: for each parameter in sorted-name order, one ASCII
header line ``name dim0 dim1 ...`` followed by the raw little-endian
float64 payload; records are simply concatenated.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DimensionError
from .tensor import Tensor


class ParamStore:
    """Hierarchically named trainable tensors with a deterministic RNG."""

    def __init__(self, rng_seed: int = 0):
        self.rng_seed = rng_seed
        self._rng = np.random.default_rng(rng_seed)
        self._params: dict[str, Tensor] = {}
        self._frozen = False

    # -- registration -----------------------------------------------------

    def _register(self, name: str, t: Tensor) -> Tensor:
        if self._frozen:
            raise RuntimeError(f"parameter store frozen; cannot create {name!r}")
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        self._params[name] = t
        return t

    def matrix(self, name: str, rows: int, cols: int) -> Tensor:
        bound = 1.0 / np.sqrt(cols)
        return self._register(name, Tensor(self._rng.uniform(-bound, bound, (rows, cols))))

    def vector(self, name: str, n: int, fan_in: int | None = None) -> Tensor:
        bound = 1.0 / np.sqrt(fan_in if fan_in is not None else n)
        return self._register(name, Tensor(self._rng.uniform(-bound, bound, (n,))))

    def bias(self, name: str, n: int) -> Tensor:
        return self._register(name, Tensor(np.zeros(n)))

    def ones(self, name: str, n: int) -> Tensor:
        return self._register(name, Tensor(np.ones(n)))

    def freeze(self) -> None:
        """Forbid further parameter creation (training starts after this)."""
        self._frozen = True

    # -- access -----------------------------------------------------------

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return sorted(self._params)

    def items(self) -> list[tuple[str, Tensor]]:
        return [(n, self._params[n]) for n in self.names()]

    def num_values(self) -> int:
        return sum(t.data.size for t in self._params.values())

    # -- gradients ----------------------------------------------------------

    def clear_grads(self) -> None:
        for t in self._params.values():
            t.grad = None

    def zero_fill_missing_grads(self) -> None:
        """Give parameters untouched by the loss their (exactly zero) gradient."""
        for t in self._params.values():
            if t.grad is None:
                t.grad = np.zeros_like(t.data)

    def grad_global_norm(self) -> float:
        total = 0.0
        for t in self._params.values():
            if t.grad is not None:
                total += float((t.grad * t.grad).sum())
        return float(np.sqrt(total))

    # -- checkpoints --------------------------------------------------------

    def save(self, path: str | Path) -> None:
        with open(path, "wb") as fh:
            for name, t in self.items():
                dims = " ".join(str(d) for d in t.data.shape)
                fh.write(f"{name} {dims}\n".encode("ascii"))
                fh.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())

    def load(self, path: str | Path) -> None:
        """Copy checkpointed values into the already-registered tensors."""
        loaded = read_checkpoint(path)
        missing = set(self._params) - set(loaded)
        extra = set(loaded) - set(self._params)
        if missing or extra:
            raise DimensionError(
                f"checkpoint mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, arr in loaded.items():
            t = self._params[name]
            if arr.shape != t.data.shape:
                raise DimensionError(
                    f"checkpoint {name!r}: shape {arr.shape} vs expected {t.data.shape}")
            t.data[...] = arr


def read_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    with open(path, "rb") as fh:
        while True:
            header = fh.readline()
            if not header:
                break
            fields = header.decode("ascii").split()
            name, shape = fields[0], tuple(int(d) for d in fields[1:])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * count)
            if len(buf) != 8 * count:
                raise DimensionError(f"checkpoint truncated while reading {name!r}")
            out[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return out
