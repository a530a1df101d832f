"""Reproducible generators for the matrix classes used in training and benchmarks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .gf2core import BitMatrix, make_rng

PERMUTATION = "permutation"
UPPER = "upper"
LOWER = "lower"
TRIANGULAR = "triangular"  # upper or lower with equal probability
MIXTURE = "mixture"  # permutation or triangular with equal probability
RANDOM_CNOTS = "random_cnots"

SETTINGS = ("rare", "medium", "overcooked")

# the budget expressions of the training schedule and the benchmark settings
BUDGET_EXPRS = ("half_n", "n", "nlogn", "n_sq")
SETTING_BUDGET = {"rare": "half_n", "medium": "nlogn", "overcooked": "n_sq"}


@dataclass(frozen=True)
class MatrixClass:
    kind: str
    cnot_budget: Optional[int] = None

    def __post_init__(self):
        if self.kind not in (PERMUTATION, UPPER, LOWER, TRIANGULAR, MIXTURE, RANDOM_CNOTS):
            raise ValueError(f"unknown matrix class {self.kind!r}")
        if (self.kind == RANDOM_CNOTS) != (self.cnot_budget is not None):
            raise ValueError("cnot_budget is required for random_cnots and only for it")
        if self.cnot_budget is not None and self.cnot_budget < 0:
            raise ValueError("cnot_budget must be non-negative")


DEFAULT_LOG_BASE = 2.0


def budget(expr: str, n: int, log_base: float = DEFAULT_LOG_BASE) -> int:
    """Number of random CNOTs for a budget expression at size ``n``.

    ``half_n`` is floor(n/2); ``nlogn`` is n*log2(n) rounded to nearest
    (pass ``log_base=math.e`` for the natural-log variant).
    """
    if expr == "half_n":
        return n // 2
    if expr == "n":
        return n
    if expr == "nlogn":
        return round(n * math.log(n, log_base)) if n > 1 else 0
    if expr == "n_sq":
        return n * n
    raise ValueError(f"unknown budget expression {expr!r}")


def setting_budget(setting: str, n: int, log_base: float = DEFAULT_LOG_BASE) -> int:
    try:
        return budget(SETTING_BUDGET[setting.lower()], n, log_base)
    except KeyError:
        raise ValueError(f"unknown setting {setting!r}; expected one of {SETTINGS}") from None


def gen_permutation(n: int, rng: np.random.Generator) -> BitMatrix:
    perm = list(range(n))
    # Fisher-Yates, spelled out so the stream usage is fixed
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        perm[i], perm[j] = perm[j], perm[i]
    return BitMatrix(n, tuple(1 << p for p in perm))


def gen_triangular(n: int, upper: bool, rng: np.random.Generator) -> BitMatrix:
    rows = []
    for i in range(n):
        word = 1 << i
        free = range(i + 1, n) if upper else range(i)
        for j in free:
            if rng.integers(0, 2):
                word |= 1 << j
        rows.append(word)
    return BitMatrix(n, tuple(rows))


def random_gate(n: int, rng: np.random.Generator) -> tuple[int, int]:
    """Uniform over the n(n-1) ordered (control, target) pairs."""
    a = int(rng.integers(0, n * (n - 1)))
    c, t = divmod(a, n - 1)
    if t >= c:
        t += 1
    return c, t


def gen_random_cnots(n: int, k: int, rng: np.random.Generator) -> BitMatrix:
    if n < 2:
        raise ValueError("random CNOT matrices need n >= 2")
    rows = [1 << i for i in range(n)]
    for _ in range(k):
        c, t = random_gate(n, rng)
        rows[t] ^= rows[c]
    return BitMatrix(n, tuple(rows))


def sample(cls: MatrixClass, n: int, rng: np.random.Generator) -> BitMatrix:
    if cls.kind == PERMUTATION:
        return gen_permutation(n, rng)
    if cls.kind == UPPER:
        return gen_triangular(n, True, rng)
    if cls.kind == LOWER:
        return gen_triangular(n, False, rng)
    if cls.kind == TRIANGULAR:
        return gen_triangular(n, bool(rng.integers(0, 2)), rng)
    if cls.kind == MIXTURE:
        if rng.integers(0, 2):
            return gen_permutation(n, rng)
        return gen_triangular(n, bool(rng.integers(0, 2)), rng)
    if cls.kind == RANDOM_CNOTS:
        return gen_random_cnots(n, cls.cnot_budget, rng)
    raise ValueError(f"unknown matrix class {cls.kind!r}")


def gen_suite(setting: str, n: int, count: int, seed: int,
              log_base: float = DEFAULT_LOG_BASE) -> list[BitMatrix]:
    if count < 1:
        raise ValueError("suite needs at least one matrix")
    k = setting_budget(setting, n, log_base)
    rng = make_rng(seed)
    return [gen_random_cnots(n, k, rng) for _ in range(count)]


def suite_seed(seed: int, setting: str, n: int) -> int:
    """Derive an independent per-(setting, n) seed so suites don't share streams."""
    return int(np.random.SeedSequence([seed, SETTINGS.index(setting.lower()), n])
               .generate_state(1, np.uint64)[0])
