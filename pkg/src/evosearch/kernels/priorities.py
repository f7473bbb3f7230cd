"""Priority oracles: deterministic element -> score maps that drive the greedy solvers."""

from __future__ import annotations

import math
import random
from typing import Callable, Hashable


class PriorityOracle:
    """Deterministic scoring of elements.

    Scores are computed at most once per element and cached, so a solver sees
    a frozen ordering even if the underlying source is stateful.
    """

    kind = "base"

    def __init__(self):
        self._cache: dict[Hashable, float] = {}

    def _compute(self, key) -> float:
        raise NotImplementedError

    def score(self, key) -> float:
        key = tuple(key) if isinstance(key, (list, tuple)) else key
        if key not in self._cache:
            self._cache[key] = float(self._compute(key))
        return self._cache[key]


class ConstantOracle(PriorityOracle):
    kind = "constant"

    def __init__(self, value: float = 0.0):
        super().__init__()
        self.value = float(value)

    def _compute(self, key) -> float:
        return self.value


class TableOracle(PriorityOracle):
    kind = "table"

    def __init__(self, values: dict):
        super().__init__()
        self.values = {tuple(k) if isinstance(k, (list, tuple)) else k: float(v)
                       for k, v in values.items()}

    def _compute(self, key) -> float:
        return self.values[key]


class RandomOracle(PriorityOracle):
    """Assigns each element an independent uniform value from a seeded stream.

    Values are drawn in first-query order, so a fixed enumeration order gives
    bit-identical scores across runs and processes.
    """

    kind = "random"

    def __init__(self, seed: int):
        super().__init__()
        self.seed = seed
        self._rng = random.Random(seed)

    def _compute(self, key) -> float:
        return self._rng.random()


class L2CenterOracle(PriorityOracle):
    """Euclidean distance of a grid point from the grid center ((n-1)/2, (n-1)/2)."""

    kind = "l2-center"

    def __init__(self, n: int):
        super().__init__()
        self.n = n

    def _compute(self, key) -> float:
        x, y = key
        c = (self.n - 1) / 2
        return math.hypot(x - c, y - c)


class FunctionOracle(PriorityOracle):
    """Wraps an arbitrary callable; caching makes the view deterministic."""

    kind = "function"

    def __init__(self, fn: Callable):
        super().__init__()
        self._fn = fn

    def _compute(self, key) -> float:
        return self._fn(key)


class AffineOracle(PriorityOracle):
    """c * base + b; with c > 0 this must not change any solver's output."""

    kind = "affine"

    def __init__(self, base: PriorityOracle, c: float, b: float):
        super().__init__()
        self.base = base
        self.c = c
        self.b = b

    def _compute(self, key) -> float:
        return self.c * self.base.score(key) + self.b


def baseline_priority(kind: str, seed: int | None = None, n: int | None = None,
                      value: float = 0.0, values: dict | None = None) -> PriorityOracle:
    """Builds one of the stock oracles: table | random(seed) | l2-center | constant(value)."""
    if kind == "random":
        if seed is None:
            raise ValueError("random priority requires a seed")
        return RandomOracle(seed)
    if kind == "l2-center":
        if n is None:
            raise ValueError("l2-center priority requires the grid side n")
        return L2CenterOracle(n)
    if kind == "constant":
        return ConstantOracle(value)
    if kind == "table":
        return TableOracle(values or {})
    raise ValueError(f"unknown priority kind: {kind!r}")


def baseline_family(kind: str, seed: int | None = None, value: float = 0.0):
    """Per-grid-size oracle factory, for sweeps that instantiate one oracle per n."""
    def make(n: int) -> PriorityOracle:
        return baseline_priority(kind, seed=seed, n=n, value=value)
    return make
