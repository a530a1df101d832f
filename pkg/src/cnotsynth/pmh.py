"""PMH stripe elimination.

Pass 1 reduces ``M`` to unit upper-triangular form by row operations, one
vertical stripe of ``stripe_width`` columns at a time: rows sharing the same
sub-row pattern inside the stripe are merged first, then ordinary Gaussian
elimination clears what is left below the diagonal. Pass 2 runs the same
procedure on the transpose. Every pass-2 operation uses the smaller-index row
as control, so the triangle cleared in pass 1 is never refilled.

A pass-2 row operation ``(c, t)`` on the transpose is the column operation
``col c ^= col t`` on the original, and undoing column operations as row
operations reverses their order. The emitted circuit is therefore pass 1 in
order followed by pass 2 reversed with control and target swapped.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

from .circuit import Circuit, SynthesisResult, replay_rows
from .gf2core import BitMatrix, is_invertible, transpose

Recorder = Callable[[int, int], None]


class PivotError(RuntimeError):
    """No pivot in a column: the input was not invertible."""


@dataclass(frozen=True)
class PmhConfig:
    stripe_width: int = 2

    def __post_init__(self):
        if self.stripe_width < 1:
            raise ValueError("stripe_width must be >= 1")

    def width_for(self, n: int) -> int:
        return min(self.stripe_width, n)


def log_width(n: int) -> int:
    return max(1, math.ceil(math.log2(n))) if n > 1 else 1


def eliminate_lower_inplace(rows: list[int], width: int, record: Recorder,
                            ncols: Optional[int] = None) -> None:
    """Clear everything below the diagonal in columns ``[0, ncols)``, in place.

    ``record(c, t)`` is called for each ``rows[t] ^= rows[c]`` performed.
    """
    n = len(rows)
    ncols = n if ncols is None else ncols
    for start in range(0, ncols, width):
        stop = min(start + width, ncols)
        stripe_mask = ((1 << (stop - start)) - 1) << start

        # merge duplicate sub-rows; the first (lowest-index) holder is the representative
        seen: dict[int, int] = {}
        for r in range(start, n):
            patt = rows[r] & stripe_mask
            if not patt:
                continue
            first = seen.get(patt)
            if first is None:
                seen[patt] = r
            else:
                rows[r] ^= rows[first]
                record(first, r)

        for col in range(start, stop):
            bit = 1 << col
            have_pivot = bool(rows[col] & bit)
            for r in range(col + 1, n):
                if not rows[r] & bit:
                    continue
                if not have_pivot:
                    rows[col] ^= rows[r]
                    record(r, col)
                    have_pivot = True
                rows[r] ^= rows[col]
                record(col, r)
            if not have_pivot:
                raise PivotError(f"no pivot in column {col}")


def eliminate_lower(m: BitMatrix, cfg: PmhConfig = PmhConfig(),
                    recorder: Optional[Recorder] = None,
                    ncols: Optional[int] = None) -> BitMatrix:
    """Row-reduce ``m`` to unit upper-triangular form (restricted to ``ncols`` columns)."""
    rows = list(m.rows)
    eliminate_lower_inplace(rows, cfg.width_for(m.n), recorder or (lambda c, t: None), ncols)
    return BitMatrix(m.n, tuple(rows))


def _lower_triangular(rows: list[int]) -> bool:
    return all(r >> (i + 1) == 0 for i, r in enumerate(rows))


def pmh_gates(m: BitMatrix, cfg: PmhConfig = PmhConfig(), check: bool = False) -> list[tuple[int, int]]:
    """Gate list solving ``m`` (raises :class:`PivotError` if ``m`` is singular)."""
    width = cfg.width_for(m.n)
    first: list[tuple[int, int]] = []
    rows = list(m.rows)
    eliminate_lower_inplace(rows, width, lambda c, t: first.append((c, t)))

    second: list[tuple[int, int]] = []
    trows = list(transpose(BitMatrix(m.n, tuple(rows))).rows)

    def record(c, t):
        # called after the XOR, so trows already holds the new state
        if check:
            if c >= t:
                raise AssertionError(f"pass-2 gate ({c}, {t}) uses a larger-index control")
            if not _lower_triangular(trows):
                raise AssertionError("pass-2 gate refilled the cleared triangle")
        second.append((c, t))

    eliminate_lower_inplace(trows, width, record)

    return first + [(t, c) for c, t in reversed(second)]


def synthesize_pmh(m: BitMatrix, cfg: PmhConfig = PmhConfig(), check: bool = False,
                   method: str = "pmh") -> SynthesisResult:
    if not is_invertible(m):
        raise ValueError("PMH needs an invertible matrix")
    t0 = time.perf_counter()
    gates = pmh_gates(m, cfg, check)
    elapsed = time.perf_counter() - t0
    final = replay_rows(list(m.rows), gates)
    verified = all(r == 1 << i for i, r in enumerate(final))
    return SynthesisResult(Circuit(m.n, tuple(gates)), method, verified, elapsed,
                           {"stripe_width": cfg.width_for(m.n)})


def candidate_widths(n: int) -> list[int]:
    return sorted({min(k, n) for k in (1, 2, log_width(n))})


def sweep_stripe_width(m: BitMatrix) -> SynthesisResult:
    """Best PMH result over stripe widths {1, 2, ceil(log2 n)}; ties go to the smaller width."""
    best = None
    for k in candidate_widths(m.n):
        res = synthesize_pmh(m, PmhConfig(k))
        if best is None or res.count < best.count:
            best = res
    return best
