"""Independent brute-force oracles shared by the test modules."""

import itertools

import numpy as np
import pytest
from hypothesis import settings

# fixed example sequences keep the suite reproducible
settings.register_profile("repro", derandomize=True)
settings.load_profile("repro")


def naive_distances(x):
    n = x.shape[0]
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            d[i, j] = np.sqrt(np.sum((x[i] - x[j]) ** 2))
    return d


def perfect_matchings(vertices, present):
    """Yield every perfect matching of ``vertices`` using only edges in ``present``."""
    if not vertices:
        yield []
        return
    a, rest = vertices[0], vertices[1:]
    for idx, b in enumerate(rest):
        if present[a, b]:
            for tail in perfect_matchings(rest[:idx] + rest[idx + 1:], present):
                yield [(a, b)] + tail


def min_matching_weight(d, present):
    """Exhaustive minimum over (near-)perfect matchings; None if there is none."""
    n = d.shape[0]
    best = None
    drops = [None] if n % 2 == 0 else list(range(n))
    for drop in drops:
        verts = [v for v in range(n) if v != drop]
        for mt in perfect_matchings(verts, present):
            w = sum(d[a, b] for a, b in mt)
            if best is None or w < best:
                best = w
    return best


def min_spanning_weight(d, present):
    """Exact minimum spanning-tree weight by branch and bound over edge subsets.

    Every forest is explored unless a lower bound (current weight plus the
    cheapest remaining edges) proves it cannot beat the incumbent.
    """
    n = d.shape[0]
    edges = sorted((d[i, j], i, j) for i, j in itertools.combinations(range(n), 2)
                   if present[i, j])
    w = [e[0] for e in edges]
    best = [np.inf]

    def find(parent, a):
        while parent[a] != a:
            a = parent[a]
        return a

    def rec(pos, taken, weight, parent):
        need = n - 1 - taken
        if need == 0:
            best[0] = min(best[0], weight)
            return
        if len(edges) - pos < need:
            return
        if weight + sum(w[pos:pos + need]) >= best[0]:
            return
        _, i, j = edges[pos]
        ri, rj = find(parent, i), find(parent, j)
        if ri != rj:
            p2 = parent.copy()
            p2[ri] = rj
            rec(pos + 1, taken + 1, weight + w[pos], p2)
        rec(pos + 1, taken, weight, parent)

    rec(0, 0, 0.0, list(range(n)))
    return best[0]


def enumerate_moments(R, m):
    """Mean, variance and covariance of (U_x, U_y) over all C(N, m) labelings."""
    N = R.shape[0]
    ux, uy = [], []
    for xs in itertools.combinations(range(N), m):
        x = np.zeros(N, bool)
        x[list(xs)] = True
        ux.append(R[np.ix_(x, x)].sum())
        uy.append(R[np.ix_(~x, ~x)].sum())
    ux, uy = np.array(ux), np.array(uy)
    c = np.cov(np.vstack([ux, uy]), bias=True)
    return ux.mean(), uy.mean(), c[0, 0], c[1, 1], c[0, 1]


def rel_close(a, b, tol):
    scale = max(abs(a), abs(b), 1e-300)
    return abs(a - b) <= tol * scale or abs(a - b) <= 1e-12


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = {}


@pytest.fixture
def accept(request):
    """Record one PASS/FAIL line for an acceptance criterion.

    Usage: ``accept(n, ok, detail)`` then assert on ``ok``.
    """
    def record(n, ok, detail):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[n] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
