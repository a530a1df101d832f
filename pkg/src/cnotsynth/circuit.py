"""CNOT gate sequences: replay, verification and text serialization.

Gates apply left to right; gate ``(c, t)`` performs ``row[t] ^= row[c]`` on
the matrix being reduced. A circuit *solves* ``M`` when replaying it on ``M``
yields the identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .gf2core import BitMatrix, identity, is_identity

METHODS = ("pmh", "rl", "rl+stripe", "rl+embed", "pmh_star", "exact")


class CnotGate(NamedTuple):
    control: int
    target: int


@dataclass(frozen=True)
class Circuit:
    n: int
    gates: tuple[CnotGate, ...] = ()

    def __post_init__(self):
        gates = tuple(CnotGate(int(c), int(t)) for c, t in self.gates)
        for c, t in gates:
            if c == t:
                raise ValueError(f"gate ({c}, {t}) has control == target")
            if not (0 <= c < self.n and 0 <= t < self.n):
                raise IndexError(f"gate ({c}, {t}) out of range for n={self.n}")
        object.__setattr__(self, "gates", gates)

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n != self.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")
        return Circuit(self.n, self.gates + other.gates)

    def reversed(self) -> "Circuit":
        return Circuit(self.n, self.gates[::-1])


def make_circuit(n: int, gates: Iterable[tuple[int, int]] = ()) -> Circuit:
    return Circuit(n, tuple(gates))


@dataclass
class SynthesisResult:
    circuit: Circuit
    method: str
    verified: bool
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.circuit)


def replay_rows(rows: list[int], gates: Iterable[tuple[int, int]]) -> list[int]:
    rows = list(rows)
    for c, t in gates:
        rows[t] ^= rows[c]
    return rows


def replay(m: BitMatrix, circ: Circuit) -> BitMatrix:
    if circ.n != m.n:
        raise ValueError(f"dimension mismatch: matrix {m.n}, circuit {circ.n}")
    return BitMatrix(m.n, tuple(replay_rows(list(m.rows), circ.gates)))


def verify_solves(m: BitMatrix, circ: Circuit) -> bool:
    return is_identity(replay(m, circ))


def circuit_matrix(circ: Circuit) -> BitMatrix:
    """The matrix this circuit solves, i.e. the one it builds from the identity in reverse order."""
    return replay(identity(circ.n), circ.reversed())


# -- text format ---------------------------------------------------------


def serialize(circ: Circuit) -> str:
    lines = [f"n={circ.n}"] + [f"CNOT {c} {t}" for c, t in circ.gates]
    return "\n".join(lines) + "\n"


def parse(text: str) -> Circuit:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or not lines[0].startswith("n="):
        raise ValueError("circuit text must start with an 'n=<dim>' header")
    try:
        n = int(lines[0][2:])
    except ValueError:
        raise ValueError(f"bad header {lines[0]!r}") from None
    gates = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != 3 or parts[0] != "CNOT":
            raise ValueError(f"line {lineno}: expected 'CNOT <control> <target>', got {line!r}")
        try:
            gates.append((int(parts[1]), int(parts[2])))
        except ValueError:
            raise ValueError(f"line {lineno}: non-integer qubit index in {line!r}") from None
    try:
        return Circuit(n, tuple(gates))
    except IndexError as e:
        raise ValueError(str(e)) from None


def to_qasm(circ: Circuit) -> str:
    """OpenQASM 2 export of the gate list (same order as the text format)."""
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{circ.n}];"]
    lines += [f"cx q[{c}],q[{t}];" for c, t in circ.gates]
    return "\n".join(lines) + "\n"


def load(path) -> Circuit:
    with open(path) as fh:
        return parse(fh.read())


def save(circ: Circuit, path) -> None:
    with open(path, "w") as fh:
        fh.write(serialize(circ))
