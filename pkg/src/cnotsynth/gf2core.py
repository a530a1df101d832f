"""Bit-packed square boolean matrices over GF(2).

Row ``i`` is stored as a Python int whose bit ``j`` holds entry ``M[i][j]``.
Matrices are immutable values; algorithms that need speed work on a plain
``list`` of row words and use the ``*_inplace`` helpers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MAX_DIM = 64


@dataclass(frozen=True)
class BitMatrix:
    n: int
    rows: tuple[int, ...]

    def __post_init__(self):
        if not 1 <= self.n <= MAX_DIM:
            raise ValueError(f"dimension {self.n} outside [1, {MAX_DIM}]")
        if len(self.rows) != self.n:
            raise ValueError(f"expected {self.n} rows, got {len(self.rows)}")
        mask = (1 << self.n) - 1
        for r in self.rows:
            if r < 0 or r & ~mask:
                raise ValueError("row word has bits outside the matrix width")

    def __getitem__(self, ij: tuple[int, int]) -> int:
        i, j = ij
        return (self.rows[i] >> j) & 1

    def __str__(self) -> str:
        return to_text(self)

    def to_lists(self) -> list[list[int]]:
        return [[(r >> j) & 1 for j in range(self.n)] for r in self.rows]

    def to_array(self) -> np.ndarray:
        return np.array(self.to_lists(), dtype=np.uint8).reshape(self.n, self.n)


def from_rows(rows: Sequence[int]) -> BitMatrix:
    return BitMatrix(len(rows), tuple(int(r) for r in rows))


def from_lists(entries: Iterable[Iterable[int]]) -> BitMatrix:
    """Build a matrix from nested 0/1 lists (or a 2-D array)."""
    lines = [list(line) for line in entries]
    rows = []
    for line in lines:
        if len(line) != len(lines):
            raise ValueError("matrix must be square")
        word = 0
        for j, bit in enumerate(line):
            if bit not in (0, 1):
                raise ValueError(f"entry {bit!r} is not 0/1")
            word |= int(bit) << j
        rows.append(word)
    return from_rows(rows)


def identity(n: int) -> BitMatrix:
    if not 1 <= n <= MAX_DIM:
        raise ValueError(f"dimension {n} outside [1, {MAX_DIM}]")
    return BitMatrix(n, tuple(1 << i for i in range(n)))


def zeros(n: int) -> BitMatrix:
    return BitMatrix(n, (0,) * n)


def _check_gate(n: int, control: int, target: int) -> None:
    if control == target:
        raise ValueError(f"CNOT with control == target == {control}")
    if not (0 <= control < n and 0 <= target < n):
        raise IndexError(f"gate ({control}, {target}) out of range for n={n}")


def apply_cnot_inplace(rows: list[int], control: int, target: int) -> None:
    rows[target] ^= rows[control]


def apply_cnot(m: BitMatrix, control: int, target: int) -> BitMatrix:
    """Return ``m`` with ``row[target] ^= row[control]``."""
    _check_gate(m.n, control, target)
    rows = list(m.rows)
    rows[target] ^= rows[control]
    return BitMatrix(m.n, tuple(rows))


def rank(m: BitMatrix) -> int:
    rows = list(m.rows)
    r = 0
    for col in range(m.n):
        bit = 1 << col
        pivot = next((i for i in range(r, m.n) if rows[i] & bit), None)
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        for i in range(r + 1, m.n):
            if rows[i] & bit:
                rows[i] ^= rows[r]
        r += 1
    return r


def is_invertible(m: BitMatrix) -> bool:
    return rank(m) == m.n


def is_identity(m: BitMatrix) -> bool:
    return all(r == 1 << i for i, r in enumerate(m.rows))


def diag_ones(m: BitMatrix) -> int:
    return sum((r >> i) & 1 for i, r in enumerate(m.rows))


def offdiag_ones(m: BitMatrix) -> int:
    return sum(r.bit_count() for r in m.rows) - diag_ones(m)


def hamming_to_identity(m: BitMatrix) -> int:
    return sum((r ^ (1 << i)).bit_count() for i, r in enumerate(m.rows))


def transpose(m: BitMatrix) -> BitMatrix:
    n = m.n
    cols = [0] * n
    for i, r in enumerate(m.rows):
        while r:
            low = r & -r
            j = low.bit_length() - 1
            cols[j] |= 1 << i
            r ^= low
    return BitMatrix(n, tuple(cols))


def multiply(a: BitMatrix, b: BitMatrix) -> BitMatrix:
    """GF(2) product ``a @ b``: row i is the XOR of the rows of ``b`` selected by row i of ``a``."""
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: {a.n} vs {b.n}")
    out = []
    for r in a.rows:
        acc = 0
        while r:
            low = r & -r
            acc ^= b.rows[low.bit_length() - 1]
            r ^= low
        out.append(acc)
    return BitMatrix(a.n, tuple(out))


def inverse(m: BitMatrix) -> BitMatrix:
    n = m.n
    rows = list(m.rows)
    inv = [1 << i for i in range(n)]
    for col in range(n):
        bit = 1 << col
        pivot = next((i for i in range(col, n) if rows[i] & bit), None)
        if pivot is None:
            raise ValueError("matrix is singular over GF(2)")
        rows[col], rows[pivot] = rows[pivot], rows[col]
        inv[col], inv[pivot] = inv[pivot], inv[col]
        for i in range(n):
            if i != col and rows[i] & bit:
                rows[i] ^= rows[col]
                inv[i] ^= inv[col]
    return BitMatrix(n, tuple(inv))


def block_diag(a: BitMatrix, b: BitMatrix) -> BitMatrix:
    """``[[a, 0], [0, b]]``."""
    shift = a.n
    return from_rows(list(a.rows) + [r << shift for r in b.rows])


def submatrix(m: BitMatrix, start: int) -> BitMatrix:
    """Lower-right block starting at row/column ``start``."""
    mask = (1 << (m.n - start)) - 1
    return from_rows([(r >> start) & mask for r in m.rows[start:]])


# -- keys for hashing small matrices -------------------------------------


def to_key(m: BitMatrix) -> int:
    """Pack all n*n bits into one int, row i occupying bits [i*n, (i+1)*n)."""
    key = 0
    for i, r in enumerate(m.rows):
        key |= r << (i * m.n)
    return key


def from_key(key: int, n: int) -> BitMatrix:
    mask = (1 << n) - 1
    return BitMatrix(n, tuple((key >> (i * n)) & mask for i in range(n)))


# -- text format ---------------------------------------------------------


def to_text(m: BitMatrix) -> str:
    lines = [str(m.n)]
    lines += ["".join(str((r >> j) & 1) for j in range(m.n)) for r in m.rows]
    return "\n".join(lines) + "\n"


def parse_text(text: str) -> BitMatrix:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty matrix text")
    try:
        n = int(lines[0])
    except ValueError:
        raise ValueError(f"first line must be the dimension, got {lines[0]!r}") from None
    body = lines[1:]
    if len(body) != n:
        raise ValueError(f"expected {n} matrix rows, got {len(body)}")
    rows = []
    for i, line in enumerate(body):
        if len(line) != n or set(line) - {"0", "1"}:
            raise ValueError(f"row {i} must be {n} characters of 0/1: {line!r}")
        rows.append(sum(1 << j for j, ch in enumerate(line) if ch == "1"))
    return BitMatrix(n, tuple(rows))


def load(path) -> BitMatrix:
    with open(path) as fh:
        return parse_text(fh.read())


def save(m: BitMatrix, path) -> None:
    with open(path, "w") as fh:
        fh.write(to_text(m))


# -- randomness ----------------------------------------------------------


def make_rng(seed: int | None) -> np.random.Generator:
    """Seeded PCG64 generator; every random draw in the package goes through one of these."""
    return np.random.Generator(np.random.PCG64(seed))
