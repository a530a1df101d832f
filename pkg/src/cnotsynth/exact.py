"""Exact minimal CNOT counts for small n by breadth-first search over GL(n, 2).

States are matrices packed into n*n-bit integer keys (row i in bits
[i*n, (i+1)*n)). Distances live in a dense uint8 array indexed by key,
255 meaning unreached; whole BFS levels are expanded with numpy.
Each CNOT is an involution, so the Cayley graph is undirected and the
distance from the identity equals the length of the shortest circuit.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .circuit import Circuit, verify_solves
from .gf2core import BitMatrix, identity, is_invertible, to_key

UNSEEN = 255
TABLE_MAX_N = 4
ORACLE_MAX_N = 5


def generators(n: int) -> list[tuple[int, int]]:
    return [(c, t) for c in range(n) for t in range(n) if c != t]


def _dtype(n: int):
    return np.uint32 if n * n <= 32 else np.uint64


def _apply_keys(keys: np.ndarray, n: int, c: int, t: int) -> np.ndarray:
    mask = keys.dtype.type((1 << n) - 1)
    row = (keys >> keys.dtype.type(c * n)) & mask
    return keys ^ (row << keys.dtype.type(t * n))


def _apply_key(key: int, n: int, c: int, t: int) -> int:
    return key ^ (((key >> (c * n)) & ((1 << n) - 1)) << (t * n))


def _bfs_level(dist: np.ndarray, n: int, level: int) -> np.ndarray:
    """Expand every key at ``level``; returns the keys newly set to level + 1."""
    frontier = np.flatnonzero(dist == level).astype(_dtype(n))
    for c, t in generators(n):
        nb = _apply_keys(frontier, n, c, t)
        fresh = nb[dist[nb] == UNSEEN]
        dist[fresh] = level + 1
    return np.flatnonzero(dist == level + 1)


class DistanceTable:
    """Distances to the identity for every element of GL(n, 2)."""

    def __init__(self, n: int, dist: np.ndarray):
        self.n = n
        self.dist = dist

    def __len__(self) -> int:
        return int(np.count_nonzero(self.dist != UNSEEN))

    def __contains__(self, m: BitMatrix) -> bool:
        return m.n == self.n and self.dist[to_key(m)] != UNSEEN

    def distance(self, m: BitMatrix) -> int:
        if m.n != self.n:
            raise ValueError(f"table is for n={self.n}, got n={m.n}")
        d = int(self.dist[to_key(m)])
        if d == UNSEEN:
            raise ValueError("matrix is not invertible")
        return d

    @property
    def diameter(self) -> int:
        return int(self.dist[self.dist != UNSEEN].max())

    def histogram(self) -> dict[int, int]:
        vals, counts = np.unique(self.dist[self.dist != UNSEEN], return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, counts)}

    def keys(self) -> np.ndarray:
        return np.flatnonzero(self.dist != UNSEEN)

    def witness(self, m: BitMatrix) -> Circuit:
        """A shortest circuit solving ``m``, found by greedy descent."""
        return Circuit(self.n, tuple(_descend(self.dist, self.n, to_key(m))))


def _descend(dist: np.ndarray, n: int, key: int) -> list[tuple[int, int]]:
    gates = []
    d = int(dist[key])
    while d > 0:
        for c, t in generators(n):
            nxt = _apply_key(key, n, c, t)
            if dist[nxt] == d - 1:
                gates.append((c, t))
                key, d = nxt, d - 1
                break
        else:  # pragma: no cover - impossible for a BFS table
            raise AssertionError("distance table is inconsistent")
    return gates


def _full_bfs(n: int, root: int) -> np.ndarray:
    dist = np.full(1 << (n * n), UNSEEN, dtype=np.uint8)
    dist[root] = 0
    level = 0
    while _bfs_level(dist, n, level).size:
        level += 1
    return dist


def build_distance_table(n: int, allow_large: bool = False) -> DistanceTable:
    """Full BFS from the identity. n <= 4 by default; n = 5 (~10^7 states) on request."""
    limit = ORACLE_MAX_N if allow_large else TABLE_MAX_N
    if not 1 <= n <= limit:
        raise ValueError(f"distance table supports 1 <= n <= {limit}, got {n}")
    return DistanceTable(n, _full_bfs(n, to_key(identity(n))))


@lru_cache(maxsize=None)
def cached_table(n: int) -> DistanceTable:
    return build_distance_table(n)


def bidirectional_search(m: BitMatrix) -> Circuit:
    """Shortest circuit for ``m`` by meeting-in-the-middle BFS (from m and from I)."""
    n = m.n
    if not 1 <= n <= ORACLE_MAX_N:
        raise ValueError(f"exact search supports n <= {ORACLE_MAX_N}, got {n}")
    if not is_invertible(m):
        raise ValueError("matrix is not invertible")
    src, dst = to_key(m), to_key(identity(n))
    if src == dst:
        return Circuit(n, ())
    size = 1 << (n * n)
    dist_s = np.full(size, UNSEEN, dtype=np.uint8)
    dist_t = np.full(size, UNSEEN, dtype=np.uint8)
    dist_s[src] = 0
    dist_t[dst] = 0
    level_s = level_t = 0
    count_s = count_t = 1
    while True:
        # grow the side with the smaller frontier by one full level
        if count_s <= count_t:
            new = _bfs_level(dist_s, n, level_s)
            level_s += 1
            count_s = new.size
            other = dist_t
        else:
            new = _bfs_level(dist_t, n, level_t)
            level_t += 1
            count_t = new.size
            other = dist_s
        if new.size == 0:  # pragma: no cover - GL(n,2) is connected
            raise AssertionError("search exhausted without meeting")
        hits = new[other[new] != UNSEEN]
        if hits.size:
            totals = dist_s[hits].astype(int) + dist_t[hits].astype(int)
            meet = int(hits[np.argmin(totals)])
            break
    # path from m to the meeting point is the reverse of the descent towards m
    to_meet = _descend(dist_s, n, meet)[::-1]
    from_meet = _descend(dist_t, n, meet)
    return Circuit(n, tuple(to_meet + from_meet))


def optimal_circuit(m: BitMatrix) -> Circuit:
    """A provably shortest circuit; refuses n > 5 instead of approximating."""
    if m.n > ORACLE_MAX_N:
        raise ValueError(f"exact oracle refuses n={m.n} > {ORACLE_MAX_N}")
    if m.n <= TABLE_MAX_N:
        table = cached_table(m.n)
        if m not in table:
            raise ValueError("matrix is not invertible")
        circ = table.witness(m)
    else:
        circ = bidirectional_search(m)
    assert verify_solves(m, circ)
    return circ


def optimal_count(m: BitMatrix, witness: bool = False):
    """Minimal CNOT count of ``m``; with ``witness=True`` returns ``(count, circuit)``."""
    circ = optimal_circuit(m)
    return (len(circ), circ) if witness else len(circ)

