"""Nested similarity-graph sequences G_1 ⊂ ... ⊂ G_k over a distance matrix.

Three constructions are supported:

* ``knn``: layer l adds each vertex's l-th nearest neighbour (undirected union);
* ``mst``: layer l is a minimum spanning tree of the complete graph minus
  edges from earlier layers;
* ``mdp``: layer l is a minimum-weight perfect matching (near-perfect for odd
  n) of the complete graph minus edges from earlier layers.

Ties are resolved by lexicographic (min index, max index) order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ._blossom import min_cost_perfect_matching
from .errors import InfeasibleMatchingError, ValidationError
from .geometry import DistanceMatrix

KINDS = ("knn", "mst", "mdp")

# quantized matching costs stay below 2**_QUANT_BITS
_QUANT_BITS = 40
_FORBID = np.int64(2**52)


@dataclass(frozen=True)
class GraphSequence:
    """Edge list of a nested graph sequence.

    ``layer[e]`` is the first layer containing edge ``(i[e], j[e])`` with
    ``i < j``. For ``knn`` sequences ``neighbors[v, r - 1]`` is the r-th
    nearest neighbour of ``v``.
    """

    n: int
    k: int
    kind: str
    i: np.ndarray
    j: np.ndarray
    layer: np.ndarray
    dist: np.ndarray
    neighbors: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_edges(self) -> int:
        return int(self.i.size)

    def edges(self, upto: int | None = None):
        """``(i, j)`` arrays for the edges of G_upto (default G_k)."""
        if upto is None:
            return self.i, self.j
        keep = self.layer <= upto
        return self.i[keep], self.j[keep]

    def layer_matrix(self) -> np.ndarray:
        """N x N int matrix of first-layer indices, 0 for non-edges."""
        out = np.zeros((self.n, self.n), dtype=np.int64)
        out[self.i, self.j] = self.layer
        out[self.j, self.i] = self.layer
        return out

    def directed_rank(self) -> np.ndarray:
        """N x N matrix with the position (1..k) of j in i's neighbour list, 0 if absent."""
        if self.neighbors is None:
            raise ValidationError("directed ranks exist only for knn sequences")
        out = np.zeros((self.n, self.n), dtype=np.int64)
        rows = np.repeat(np.arange(self.n), self.k)
        out[rows, self.neighbors.ravel()] = np.tile(np.arange(1, self.k + 1), self.n)
        return out

    def degrees(self) -> np.ndarray:
        return np.bincount(np.concatenate([self.i, self.j]), minlength=self.n)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "layer", "dist"])
            for row in zip(self.i.tolist(), self.j.tolist(), self.layer.tolist(),
                           self.dist.tolist()):
                w.writerow([row[0], row[1], row[2], repr(row[3])])


def _as_dist(d) -> np.ndarray:
    if isinstance(d, DistanceMatrix):
        return d.d
    return np.asarray(d, dtype=np.float64)


def _finish(d, n, k, kind, i, j, layer, neighbors=None) -> GraphSequence:
    order = np.lexsort((j, i, layer))
    i, j, layer = i[order], j[order], layer[order]
    return GraphSequence(n=n, k=k, kind=kind, i=i, j=j, layer=layer,
                         dist=d[i, j].copy(), neighbors=neighbors)


def knn_layers(d, k: int) -> GraphSequence:
    """k-nearest-neighbour sequence; ties go to the smaller vertex index."""
    d = _as_dist(d)
    n = d.shape[0]
    if not 1 <= k <= n - 1:
        raise ValidationError(f"knn needs 1 <= k <= n-1 = {n - 1}, got k={k}")
    masked = d.copy()
    np.fill_diagonal(masked, np.inf)
    # stable sort keeps index order among equal distances
    neighbors = np.argsort(masked, axis=1, kind="stable")[:, :k]
    rank = np.zeros((n, n), dtype=np.int64)
    rows = np.repeat(np.arange(n), k)
    rank[rows, neighbors.ravel()] = np.tile(np.arange(1, k + 1), n)
    rt = rank.T
    both = np.where((rank > 0) & (rt > 0), np.minimum(rank, rt), np.maximum(rank, rt))
    i, j = np.nonzero(np.triu(both, 1))
    return _finish(d, n, k, "knn", i, j, both[i, j], neighbors=neighbors)


@njit(cache=True)
def _kruskal_layers(order_i, order_j, n, k):
    """Sequential edge-disjoint MSTs; edges arrive pre-sorted by (dist, i, j)."""
    m = order_i.size
    layer_of = np.zeros(m, dtype=np.int64)
    parent = np.empty(n, dtype=np.int64)
    for lay in range(1, k + 1):
        for v in range(n):
            parent[v] = v
        taken = 0
        for e in range(m):
            if layer_of[e] != 0:
                continue
            a = order_i[e]
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            b = order_j[e]
            while parent[b] != b:
                parent[b] = parent[parent[b]]
                b = parent[b]
            if a != b:
                parent[a] = b
                layer_of[e] = lay
                taken += 1
                if taken == n - 1:
                    break
        if taken < n - 1:
            return layer_of, lay
    return layer_of, 0


def kmst_layers(d, k: int) -> GraphSequence:
    """Union of k sequential edge-disjoint minimum spanning trees."""
    d = _as_dist(d)
    n = d.shape[0]
    if not 1 <= k <= n // 2:
        raise ValidationError(f"mst needs 1 <= k <= floor(n/2) = {n // 2}, got k={k}")
    iu, ju = np.triu_indices(n, 1)
    w = d[iu, ju]
    order = np.lexsort((ju, iu, w))
    oi, oj = iu[order].astype(np.int64), ju[order].astype(np.int64)
    layer_of, failed = _kruskal_layers(oi, oj, n, k)
    if failed:
        raise ValidationError(
            f"layer {failed}: residual graph is disconnected, no spanning tree left; use a smaller k")
    keep = layer_of > 0
    return _finish(d, n, k, "mst", oi[keep], oj[keep], layer_of[keep])


def _quantize(d: np.ndarray) -> np.ndarray:
    """Map distances to int64 by a power-of-two scale (exact for dyadic inputs)."""
    top = float(d.max())
    if top <= 0:
        return np.zeros(d.shape, dtype=np.int64)
    shift = _QUANT_BITS - math.frexp(top)[1]
    return np.rint(np.ldexp(d, shift)).astype(np.int64)


@njit(cache=True)
def _pair_less(a1, b1, a2, b2, c1, d1, c2, d2):
    """Is the sorted pairing {(a1,b1),(a2,b2)} lexicographically below {(c1,d1),(c2,d2)}?"""
    if (a2, b2) < (a1, b1):
        a1, b1, a2, b2 = a2, b2, a1, b1
    if (c2, d2) < (c1, d1):
        c1, d1, c2, d2 = c2, d2, c1, d1
    return (a1, b1, a2, b2) < (c1, d1, c2, d2)


@njit(cache=True)
def _lex_refine(mate, cost, present):
    """Swap two matched edges into the lexicographically smaller equal-cost pairing, to a fixpoint."""
    n = mate.size
    changed = True
    while changed:
        changed = False
        for a in range(n):
            b = mate[a]
            if b < a:
                continue
            for c in range(a + 1, n):
                e = mate[c]
                if e < c:
                    continue
                cur = cost[a, b] + cost[c, e]
                for opt in range(2):
                    if opt == 0:
                        x, y, z, t = a, c, b, e
                    else:
                        x, y, z, t = a, e, b, c
                    if not (present[x, y] and present[z, t]):
                        continue
                    if cost[x, y] + cost[z, t] != cur:
                        continue
                    if _pair_less(min(x, y), max(x, y), min(z, t), max(z, t), a, b, c, e):
                        mate[x] = y
                        mate[y] = x
                        mate[z] = t
                        mate[t] = z
                        changed = True
                        break
                if changed:
                    break
            if changed:
                break
    return mate


def _greedy_matching(d, present):
    n = d.shape[0]
    iu, ju = np.nonzero(np.triu(present, 1))
    order = np.lexsort((ju, iu, d[iu, ju]))
    mate = np.full(n, -1, dtype=np.int64)
    for e in order:
        a, b = iu[e], ju[e]
        if mate[a] < 0 and mate[b] < 0:
            mate[a], mate[b] = b, a
    return mate


def kmdp_layers(d, k: int, approx: bool = False) -> GraphSequence:
    """Union of k sequential edge-disjoint minimum-distance non-bipartite pairings.

    Each layer is an exact minimum-weight perfect matching of the residual
    graph (for odd n, a near-perfect matching via a zero-cost dummy vertex).
    ``approx=True`` swaps in a greedy shortest-edge-first pairing; it is
    never used unless requested.
    """
    d = _as_dist(d)
    n = d.shape[0]
    if not 1 <= k <= n - 2:
        raise ValidationError(f"mdp needs 1 <= k <= n-2 = {n - 2}, got k={k}")
    odd = n % 2 == 1
    size = n + 1 if odd else n
    cost = np.zeros((size, size), dtype=np.int64)
    cost[:n, :n] = _quantize(d)
    present = np.ones((size, size), dtype=bool)
    np.fill_diagonal(present, False)
    want = n // 2
    ei, ej, el = [], [], []
    for lay in range(1, k + 1):
        if approx:
            dd = np.zeros((size, size))
            dd[:n, :n] = d
            mate = _greedy_matching(dd, present)
        else:
            mate = min_cost_perfect_matching(cost, present, _FORBID)
            if (mate >= 0).all():
                mate = _lex_refine(mate, cost, present)
        a = np.arange(size)
        real = (mate > a) & (mate < n) & (a < n)
        found = int(real.sum())
        if found < want:
            raise InfeasibleMatchingError(lay, found, want)
        a, b = a[real], mate[real]
        present[a, b] = present[b, a] = False
        if odd:
            # the dummy vertex must keep its edges: every layer may leave a different vertex out
            present[n, :n] = present[:n, n] = True
        ei.append(a)
        ej.append(b)
        el.append(np.full(a.size, lay))
    return _finish(d, n, k, "mdp", np.concatenate(ei), np.concatenate(ej), np.concatenate(el))


def build_graph(d, kind: str, k: int, approx_matching: bool = False) -> GraphSequence:
    if kind == "knn":
        return knn_layers(d, k)
    if kind == "mst":
        return kmst_layers(d, k)
    if kind == "mdp":
        return kmdp_layers(d, k, approx=approx_matching)
    raise ValidationError(f"unknown graph kind {kind!r}; expected one of {KINDS}")


def resolve_k(k, n: int) -> int:
    """Integer k, or the token ``"n065"`` for floor(n ** 0.65)."""
    if isinstance(k, str):
        if k.strip().lower() == "n065":
            return int(math.floor(n**0.65))
        try:
            k = int(k)
        except ValueError:
            raise ValidationError(f"k must be a positive integer or 'n065', got {k!r}") from None
    if int(k) != k or k < 1:
        raise ValidationError(f"k must be a positive integer or 'n065', got {k!r}")
    return int(k)
