"""Adapting an n-qubit instance to a fixed-size solver of size m.

For n > m, Gaussian striping clears the first k = n - m columns with PMH
stripes, transposes, and clears them again. That leaves the two-sided form

    L @ M @ R.T == block_diag(I_k, reduced)

where ``L`` is the row-operation prefix and ``R`` the row operations of the
transposed pass. A full solution of ``M`` is then

    prefix ++ lift(solution(reduced)) ++ suffix

with ``suffix`` the transposed-pass gates reversed and swapped, exactly as in
the second PMH pass. For n < m the instance is embedded as
``block_diag(I_{m-n}, M)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .circuit import Circuit, replay_rows
from .gf2core import BitMatrix, block_diag, identity, is_invertible, submatrix, transpose
from .pmh import PmhConfig, eliminate_lower_inplace


@dataclass(frozen=True)
class StripeReduction:
    prefix: Circuit
    suffix: Circuit
    reduced: BitMatrix
    k: int

    @property
    def n(self) -> int:
        return self.prefix.n

    @property
    def count(self) -> int:
        """Gates spent by the reduction itself."""
        return len(self.prefix) + len(self.suffix)

    def assemble(self, block_solution: Circuit) -> Circuit:
        """Full circuit for the source matrix given a circuit solving ``reduced``."""
        return self.prefix + lift_circuit(block_solution, self.k, self.n) + self.suffix


def two_sided_form(m: BitMatrix, red: StripeReduction) -> BitMatrix:
    """``L @ M @ R.T``: prefix as row operations, transposed-pass gates as column operations."""
    rows = replay_rows(list(m.rows), red.prefix.gates)
    second = [(t, c) for c, t in reversed(red.suffix.gates)]
    trows = replay_rows(list(transpose(BitMatrix(m.n, tuple(rows))).rows), second)
    return transpose(BitMatrix(m.n, tuple(trows)))


def gaussian_stripe(m: BitMatrix, target: int, cfg: PmhConfig = PmhConfig()) -> StripeReduction:
    """Reduce an n x n matrix to an m x m block (``target`` = m < n).

    ``cfg`` sets the PMH stripe width used inside the first k columns
    (clipped to k); ``PmhConfig(n - m)`` treats them as one stripe.
    """
    n = m.n
    if not 1 <= target < n:
        raise ValueError(f"striping needs 1 <= m < n, got m={target}, n={n}")
    if not is_invertible(m):
        raise ValueError("striping needs an invertible matrix")
    k = n - target
    width = min(cfg.stripe_width, k)

    first: list[tuple[int, int]] = []
    rows = list(m.rows)
    eliminate_lower_inplace(rows, width, lambda c, t: first.append((c, t)), ncols=k)

    second: list[tuple[int, int]] = []
    trows = list(transpose(BitMatrix(n, tuple(rows))).rows)
    eliminate_lower_inplace(trows, width, lambda c, t: second.append((c, t)), ncols=k)

    final = transpose(BitMatrix(n, tuple(trows)))
    reduced = submatrix(final, k)
    if final != block_diag(identity(k), reduced):
        raise AssertionError("striping did not reach block-diagonal form")
    return StripeReduction(
        prefix=Circuit(n, tuple(first)),
        suffix=Circuit(n, tuple((t, c) for c, t in reversed(second))),
        reduced=reduced,
        k=k,
    )


def embed(m: BitMatrix, target: int) -> BitMatrix:
    if m.n >= target:
        raise ValueError(f"embedding needs n < m, got n={m.n}, m={target}")
    if not is_invertible(m):
        raise ValueError("embedding needs an invertible matrix")
    return block_diag(identity(target - m.n), m)


def lift_circuit(circ: Circuit, k: int, n: int) -> Circuit:
    """Shift every qubit index up by ``k`` into an n-qubit circuit."""
    if circ.n + k > n:
        raise IndexError(f"cannot lift a {circ.n}-qubit circuit by {k} into {n} qubits")
    return Circuit(n, tuple((c + k, t + k) for c, t in circ.gates))


def touches_padding(circ: Circuit, k: int) -> int:
    """Number of gates using one of the first ``k`` (padding) qubits."""
    return sum(1 for c, t in circ.gates if c < k or t < k)


def unembed_circuit(circ: Circuit, k: int) -> Optional[Circuit]:
    """Map an embedded-instance solution back to n = circ.n - k qubits.

    Returns None when some gate uses a padding qubit; such a circuit only
    exists on the larger register.
    """
    if touches_padding(circ, k):
        return None
    return Circuit(circ.n - k, tuple((c - k, t - k) for c, t in circ.gates))
