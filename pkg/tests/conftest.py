import itertools
import time

import numpy as np
import pytest
from hypothesis import strategies as st

from cnotsynth.gf2core import BitMatrix, from_lists, make_rng

# -- independent reference implementations --------------------------------
# Plain list-of-lists GF(2) arithmetic, deliberately sharing no code with
# the bit-packed library.


def ref_mul(a, b):
    n = len(a)
    return [[sum(a[i][k] & b[k][j] for k in range(n)) % 2 for j in range(n)] for i in range(n)]


def ref_rank(a):
    m = [list(r) for r in a]
    n, rank = len(m), 0
    for col in range(n):
        piv = next((r for r in range(rank, n) if m[r][col]), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        for r in range(n):
            if r != rank and m[r][col]:
                m[r] = [x ^ y for x, y in zip(m[r], m[rank])]
        rank += 1
    return rank


def ref_replay(a, gates):
    m = [list(r) for r in a]
    for c, t in gates:
        m[t] = [x ^ y for x, y in zip(m[t], m[c])]
    return m


def ref_identity(n):
    return [[int(i == j) for j in range(n)] for i in range(n)]


def gl_order(n):
    out = 1
    for i in range(n):
        out *= 2 ** n - 2 ** i
    return out


def all_gl(n):
    """Every invertible n x n matrix, enumerated by brute force."""
    for bits in itertools.product((0, 1), repeat=n * n):
        rows = [list(bits[i * n:(i + 1) * n]) for i in range(n)]
        if ref_rank(rows) == n:
            yield from_lists(rows)


# -- hypothesis strategies -----------------------------------------------


@st.composite
def matrices(draw, min_n=1, max_n=10):
    n = draw(st.integers(min_n, max_n))
    rows = draw(st.lists(st.integers(0, (1 << n) - 1), min_size=n, max_size=n))
    return BitMatrix(n, tuple(rows))


@st.composite
def gate_lists(draw, n, max_len=30):
    if n < 2:
        return []
    pair = st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda p: p[0] != p[1])
    return draw(st.lists(pair, max_size=max_len))


@st.composite
def invertible_matrices(draw, min_n=2, max_n=10):
    n = draw(st.integers(min_n, max_n))
    rows = [1 << i for i in range(n)]
    for c, t in draw(gate_lists(n, 4 * n * n)):
        rows[t] ^= rows[c]
    return BitMatrix(n, tuple(rows))


@pytest.fixture
def rng():
    return make_rng(1234)


# -- trained policies (shared, trained once per session) ------------------

_POLICIES = {}
TRAIN_SECONDS = {}


def trained_policy(m):
    """Desk-scale policies: m=4 on 5k episodes, m=5 on 20k episodes."""
    if m not in _POLICIES:
        from cnotsynth.ppo import PpoConfig, train
        from cnotsynth.rlenv import default_schedule
        scale = {4: 0.05, 5: 0.2}[m]
        t0 = time.perf_counter()
        _POLICIES[m] = train(m, default_schedule().scaled(scale), PpoConfig(seed=0))
        TRAIN_SECONDS[m] = time.perf_counter() - t0
    return _POLICIES[m]


@pytest.fixture(scope="session")
def policy4():
    return trained_policy(4)


@pytest.fixture(scope="session")
def policy5():
    return trained_policy(5)


# -- acceptance report ----------------------------------------------------

ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


def np_bits(m):
    return np.array(m.to_lists(), dtype=np.int64)
