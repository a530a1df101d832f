"""CNOT-minimization as an episodic decision process, plus the training curriculum.

Action ``a`` encodes an ordered pair ``(i, j)``, i != j, meaning "XOR row j
into row i", i.e. the gate with control ``j`` and target ``i``.
Observations are the m*m matrix bits, row-major, as float64 0/1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import generators as gen
from .circuit import CnotGate
from .gf2core import BitMatrix, diag_ones, hamming_to_identity, is_identity, offdiag_ones


# -- actions -------------------------------------------------------------


def num_actions(m: int) -> int:
    return m * (m - 1)


def action_encode(i: int, j: int, m: int) -> int:
    if i == j or not (0 <= i < m and 0 <= j < m):
        raise ValueError(f"invalid move ({i}, {j}) for m={m}")
    return i * (m - 1) + (j if j < i else j - 1)


def action_decode(a: int, m: int) -> tuple[int, int]:
    """Action index -> move ``(i, j)`` (row i ^= row j)."""
    if not 0 <= a < num_actions(m):
        raise ValueError(f"action {a} out of range for m={m}")
    i, j = divmod(a, m - 1)
    if j >= i:
        j += 1
    return i, j


def action_gate(a: int, m: int) -> CnotGate:
    i, j = action_decode(a, m)
    return CnotGate(control=j, target=i)


def gate_action(gate: tuple[int, int], m: int) -> int:
    c, t = gate
    return action_encode(t, c, m)


# -- reward --------------------------------------------------------------


@dataclass(frozen=True)
class RewardSpec:
    solve_bonus: float = 0.7
    diag_coeff: float = 0.2
    offdiag_coeff: float = 0.1
    idle_penalty_num: float = 0.001

    def __post_init__(self):
        if min(self.solve_bonus, self.diag_coeff, self.offdiag_coeff, self.idle_penalty_num) <= 0:
            raise ValueError("reward constants must be positive")

    def shaped(self, d: int, dbar: int, n: int) -> float:
        return self.diag_coeff * d / n - self.offdiag_coeff * dbar / (n * n)

    def idle(self, n: int) -> float:
        return -self.idle_penalty_num / (n * n)

    def bounds(self, n: int) -> tuple[float, float]:
        """Range of any single-step reward, using |d| <= 1 and |dbar| <= n - 1."""
        worst = -(self.diag_coeff / n + self.offdiag_coeff * (n - 1) / (n * n))
        best = self.diag_coeff / n + self.offdiag_coeff * (n - 1) / (n * n)
        return min(worst, self.idle(n)), max(best, self.solve_bonus)


def reward(m1: BitMatrix, m2: BitMatrix, spec: RewardSpec = RewardSpec()) -> float:
    """Reward for the move taking ``m1`` to ``m2``.

    Solving earns the bonus alone; otherwise a move that changes the Hamming
    distance to the identity gets ``diag_coeff*d/n - offdiag_coeff*dbar/n^2``
    and any other move a small idle penalty.
    """
    if m1.n != m2.n:
        raise ValueError(f"dimension mismatch: {m1.n} vs {m2.n}")
    n = m1.n
    if is_identity(m2):
        return spec.solve_bonus
    if hamming_to_identity(m1) != hamming_to_identity(m2):
        d = diag_ones(m2) - diag_ones(m1)
        dbar = offdiag_ones(m2) - offdiag_ones(m1)
        return spec.shaped(d, dbar, n)
    return spec.idle(n)


# -- curriculum ----------------------------------------------------------

CLASS_NAMES = (gen.PERMUTATION, gen.TRIANGULAR, gen.UPPER, gen.LOWER, gen.MIXTURE, gen.RANDOM_CNOTS)


@dataclass(frozen=True)
class CurriculumPhase:
    start: int
    end: int
    kind: str
    budget_expr: Optional[str] = None

    def __post_init__(self):
        if self.kind not in CLASS_NAMES:
            raise ValueError(f"unknown matrix class {self.kind!r}")
        if (self.kind == gen.RANDOM_CNOTS) != (self.budget_expr is not None):
            raise ValueError("budget_expr is required for random_cnots and only for it")
        if self.budget_expr is not None and self.budget_expr not in gen.BUDGET_EXPRS:
            raise ValueError(f"unknown budget expression {self.budget_expr!r}")
        if self.end <= self.start:
            raise ValueError(f"empty phase [{self.start}, {self.end})")

    def matrix_class(self, m: int, log_base: float = gen.DEFAULT_LOG_BASE) -> gen.MatrixClass:
        if self.kind == gen.RANDOM_CNOTS:
            return gen.MatrixClass(self.kind, gen.budget(self.budget_expr, m, log_base))
        return gen.MatrixClass(self.kind)


@dataclass(frozen=True)
class Schedule:
    phases: tuple[CurriculumPhase, ...]
    log_base: float = gen.DEFAULT_LOG_BASE

    def __post_init__(self):
        if not self.phases or self.phases[0].start != 0:
            raise ValueError("schedule must start at episode 0")
        for a, b in zip(self.phases, self.phases[1:]):
            if a.end != b.start:
                raise ValueError(f"phases must be contiguous: {a.end} != {b.start}")

    @property
    def total(self) -> int:
        return self.phases[-1].end

    def phase_index(self, episode: int) -> int:
        if not 0 <= episode < self.total:
            raise ValueError(f"episode {episode} outside [0, {self.total})")
        for k, ph in enumerate(self.phases):
            if episode < ph.end:
                return k
        raise AssertionError("unreachable")

    def boundaries(self) -> list[int]:
        return [ph.end for ph in self.phases]

    def scaled(self, factor: float) -> "Schedule":
        """Every range multiplied by ``factor`` (rounded); empty phases are dropped."""
        ends = [round(ph.end * factor) for ph in self.phases]
        phases, start = [], 0
        for ph, end in zip(self.phases, ends):
            if end > start:
                phases.append(CurriculumPhase(start, end, ph.kind, ph.budget_expr))
                start = end
        return Schedule(tuple(phases), self.log_base)

    def to_json(self) -> str:
        return json.dumps([
            {"start": p.start, "end": p.end, "class": p.kind, "budget_expr": p.budget_expr}
            for p in self.phases
        ], indent=1)

    @classmethod
    def from_json(cls, text: str, log_base: float = gen.DEFAULT_LOG_BASE) -> "Schedule":
        raw = json.loads(text)
        return cls(tuple(CurriculumPhase(int(d["start"]), int(d["end"]), d["class"], d.get("budget_expr"))
                         for d in raw), log_base)


def default_schedule(first_phase_split: int = 1500) -> Schedule:
    """The 100k-episode curriculum. The first 3000 episodes are split
    permutation / triangular at ``first_phase_split``."""
    return Schedule((
        CurriculumPhase(0, first_phase_split, gen.PERMUTATION),
        CurriculumPhase(first_phase_split, 3000, gen.TRIANGULAR),
        CurriculumPhase(3000, 6000, gen.MIXTURE),
        CurriculumPhase(6000, 10000, gen.RANDOM_CNOTS, "half_n"),
        CurriculumPhase(10000, 20000, gen.RANDOM_CNOTS, "n"),
        CurriculumPhase(20000, 50000, gen.RANDOM_CNOTS, "nlogn"),
        CurriculumPhase(50000, 100000, gen.RANDOM_CNOTS, "n_sq"),
    ))


def curriculum_source(episode: int, schedule: Schedule, m: int) -> gen.MatrixClass:
    ph = schedule.phases[schedule.phase_index(episode)]
    return ph.matrix_class(m, schedule.log_base)


# -- environment ---------------------------------------------------------


@dataclass
class EnvState:
    matrix: BitMatrix
    steps_taken: int
    max_steps: int
    done: bool


def default_max_steps(m: int) -> int:
    return 3 * m * m


class CnotEnv:
    """Single-threaded episode runner on m x m matrices.

    ``source(rng)`` supplies start matrices on :meth:`reset`; identity draws
    are resampled since they carry no learning signal.
    """

    def __init__(self, m: int, source: Optional[Callable[[np.random.Generator], BitMatrix]] = None,
                 rng: Optional[np.random.Generator] = None, max_steps: Optional[int] = None,
                 spec: RewardSpec = RewardSpec()):
        if m < 2:
            raise ValueError("environment needs m >= 2")
        self.m = m
        self.source = source
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.max_steps = default_max_steps(m) if max_steps is None else max_steps
        self.spec = spec
        self._pairs = [action_decode(a, m) for a in range(num_actions(m))]
        self.rows: list[int] = []
        self.steps_taken = 0
        self.done = True

    @property
    def n_actions(self) -> int:
        return num_actions(self.m)

    @property
    def obs_size(self) -> int:
        return self.m * self.m

    @property
    def matrix(self) -> BitMatrix:
        return BitMatrix(self.m, tuple(self.rows))

    @property
    def state(self) -> EnvState:
        return EnvState(self.matrix, self.steps_taken, self.max_steps, self.done)

    def observation(self) -> np.ndarray:
        m = self.m
        bits = np.array(self.rows, dtype=np.uint64)[:, None] >> np.arange(m, dtype=np.uint64)
        return (bits & np.uint64(1)).astype(np.float64).reshape(m * m)

    def reset(self, matrix: Optional[BitMatrix] = None) -> np.ndarray:
        if matrix is None:
            if self.source is None:
                raise ValueError("no matrix given and no source configured")
            matrix = self.source(self.rng)
            while is_identity(matrix):
                matrix = self.source(self.rng)
        if matrix.n != self.m:
            raise ValueError(f"matrix is {matrix.n}x{matrix.n}, environment is m={self.m}")
        self.rows = list(matrix.rows)
        self.steps_taken = 0
        self._hamming = hamming_to_identity(matrix)
        self.done = self._hamming == 0
        return self.observation()

    def step(self, a: int) -> tuple[np.ndarray, float, bool, dict]:
        if self.done:
            raise RuntimeError("step() called on a finished episode")
        i, j = self._pairs[a]
        row_before = self.rows[i]
        row_after = row_before ^ self.rows[j]
        self.rows[i] = row_after
        bit = 1 << i
        d = ((row_after & bit) >> i) - ((row_before & bit) >> i)
        dbar = (row_after & ~bit).bit_count() - (row_before & ~bit).bit_count()
        self._hamming += dbar - d
        self.steps_taken += 1

        n = self.m
        solved = self._hamming == 0
        if solved:
            r = self.spec.solve_bonus
        elif dbar != d:
            r = self.spec.shaped(d, dbar, n)
        else:
            r = self.spec.idle(n)
        truncated = not solved and self.steps_taken >= self.max_steps
        self.done = solved or truncated
        info = {"solved": solved, "truncated": truncated, "d": d, "dbar": dbar}
        return self.observation(), r, self.done, info


def class_source(cls: gen.MatrixClass, m: int) -> Callable[[np.random.Generator], BitMatrix]:
    return lambda rng: gen.sample(cls, m, rng)


def matrices_source(mats: Sequence[BitMatrix]) -> Callable[[np.random.Generator], BitMatrix]:
    return lambda rng: mats[int(rng.integers(0, len(mats)))]
